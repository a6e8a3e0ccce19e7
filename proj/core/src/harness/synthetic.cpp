#include <cmath>
#include <random>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/hashing.hpp"

namespace mmsi::harness {
namespace fs = std::filesystem;
using extractors::FeatureRecord;

namespace {

constexpr std::array<std::string_view, 12> kNamePool = {
    "Ada Lovelace",  "Alan Turing",   "Grace Hopper",  "Katherine Johnson",
    "Claude Shannon", "Edsger Dijkstra", "Barbara Liskov", "Donald Knuth",
    "Margaret Hamilton", "John Backus", "Frances Allen", "Niklaus Wirth"};

constexpr std::array<std::string_view, 16> kTopicWords = {
    "flood", "election", "protest", "concert", "wildfire", "summit", "market", "storm",
    "parade", "strike", "rescue", "festival", "court", "launch", "match", "vaccine"};

// Unit-variance uniform coordinates.
Eigen::VectorXd uniform_topic(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-std::sqrt(3.0), std::sqrt(3.0));
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

Eigen::VectorXd gaussian(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

std::vector<float> unit(std::mt19937_64& rng, int dim) {
  Eigen::VectorXd v = gaussian(rng, dim);
  v.normalize();
  std::vector<float> out(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(v(i));
  return out;
}

// scale * P * latent + noise, as float.
std::vector<float> planted(const Eigen::MatrixXd& proj, const Eigen::VectorXd& latent, double scale,
                           double noise, std::mt19937_64& rng) {
  const Eigen::VectorXd v = scale * (proj * latent) + noise * gaussian(rng, proj.rows());
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v(i));
  return out;
}

std::vector<float> noise_row(std::mt19937_64& rng, int dim, double scale) {
  const Eigen::VectorXd v = scale * gaussian(rng, dim);
  std::vector<float> out(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(v(i));
  return out;
}

}  // namespace

Eigen::MatrixXd synthetic_projection(std::uint64_t seed, std::string_view kind, int dim, int latent_dim) {
  if (latent_dim < 1 || latent_dim > dim) {
    throw UsageError(fmt::format("latent dimension {} must lie in [1, {}]", latent_dim, dim));
  }
  std::mt19937_64 rng(mix64(seed ^ fnv1a64(kind)));
  Eigen::MatrixXd g(dim, latent_dim);
  std::normal_distribution<double> normal;
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(dim, latent_dim);
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& o, const fs::path& out_dir) {
  if (o.n < 4) throw UsageError(fmt::format("synthetic corpus needs n >= 4, got {}", o.n));
  if (!(o.signal >= 0.0 && o.signal <= 1.0)) throw UsageError("signal must lie in [0, 1]");
  if (o.max_clips < 1 || o.max_clips > 16) throw UsageError("max_clips must lie in [1, 16]");
  const int k = o.latent_dim;
  const extractors::ExtractorDims& d = o.dims;
  const Eigen::MatrixXd p_caption = synthetic_projection(o.seed, harness::kinds::kCaption, d.text, k);
  const Eigen::MatrixXd p_video = synthetic_projection(o.seed, harness::kinds::kVideo, d.video, k);
  const double text_scale = o.feature_scale * std::sqrt(static_cast<double>(d.text) / k);
  const double video_scale = o.feature_scale * std::sqrt(static_cast<double>(d.video) / k);
  const double s = o.signal;
  const double r = std::sqrt(std::max(0.0, 1.0 - s * s));

  SyntheticCorpus out;
  out.manifest = out_dir / "manifest.jsonl";
  out.cache = out_dir / "cache";
  out.config = out_dir / "config.json";
  const extractors::FeatureCache cache(out.cache);

  // Salted: an unsalted mix64(0) is 0, which would replay generate_examples' stream.
  std::mt19937_64 rng(mix64(o.seed ^ 0x73796e7468ULL));
  std::uniform_int_distribution<int> clip_dist(1, o.max_clips);
  std::uniform_int_distribution<int> name_count(0, 2);
  std::uniform_int_distribution<std::size_t> name_pick(0, kNamePool.size() - 1);
  std::uniform_int_distribution<std::size_t> word_pick(0, kTopicWords.size() - 1);
  std::uniform_int_distribution<std::int64_t> reaction(0, 500);
  std::bernoulli_distribution has_face(0.5);

  for (int i = 0; i < o.n; ++i) {
    corpus::Post post;
    post.post_id = fmt::format("syn-{:05d}", i);
    post.source_org = fmt::format("outlet-{}", i % 7);
    post.video_ref = fmt::format("synthetic://{}", post.post_id);

    const Eigen::VectorXd topic = uniform_topic(rng, k);
    const Eigen::VectorXd caption_latent = s * topic + r * uniform_topic(rng, k);
    const Eigen::VectorXd video_latent = s * topic + r * uniform_topic(rng, k);

    extractors::PostNames names;
    for (int c = name_count(rng); c > 0; --c) names.caption_names.emplace_back(kNamePool[name_pick(rng)]);
    for (int c = name_count(rng); c > 0; --c) names.transcript_names.emplace_back(kNamePool[name_pick(rng)]);
    post.caption_text = fmt::format("{} {} {}", kTopicWords[word_pick(rng)], kTopicWords[word_pick(rng)],
                                    kTopicWords[word_pick(rng)]);
    for (const std::string& n : names.caption_names) post.caption_text += " with " + n;
    for (auto& c : post.reactions_raw) c = reaction(rng);

    const auto version = o.version;
    auto put = [&](std::string_view kind, Shape shape, std::vector<float> payload) {
      cache.put(FeatureRecord{post.post_id, {std::string(kind), version}, std::move(shape), std::move(payload)});
    };

    std::vector<float> caption = planted(p_caption, caption_latent, text_scale, o.feature_noise, rng);
    caption.resize(2 * static_cast<std::size_t>(d.text), 0.0f);  // short caption: empty second segment
    put(kinds::kCaption, {2, d.text}, std::move(caption));

    std::vector<float> transcript = noise_row(rng, d.text, o.distractor_noise);
    transcript.resize(2 * static_cast<std::size_t>(d.text), 0.0f);
    put(kinds::kTranscript, {2, d.text}, std::move(transcript));

    const int clips = clip_dist(rng);
    std::vector<float> video, object, keyframe_faces;
    std::int64_t face_rows = 0;
    for (int c = 0; c < clips; ++c) {
      const Eigen::VectorXd jitter = o.clip_jitter * gaussian(rng, k);
      const auto row = planted(p_video, video_latent + jitter, video_scale, o.feature_noise, rng);
      video.insert(video.end(), row.begin(), row.end());
      const auto obj = noise_row(rng, d.object, o.distractor_noise);
      object.insert(object.end(), obj.begin(), obj.end());
      if (has_face(rng)) {
        keyframe_faces.push_back(static_cast<float>(c));
        const auto f = unit(rng, d.face);
        keyframe_faces.insert(keyframe_faces.end(), f.begin(), f.end());
        ++face_rows;
      }
    }
    put(kinds::kVideo, {clips, d.video}, std::move(video));
    put(kinds::kObject, {clips, d.object}, std::move(object));
    put(kinds::kKeyframeFaces, {face_rows, d.face + 1}, std::move(keyframe_faces));

    const auto profiles = std::min<std::size_t>(names.caption_names.size(), entity::kMaxFaceNames);
    std::vector<float> profile;
    for (std::size_t p = 0; p < profiles; ++p) {
      const auto f = unit(rng, d.face);
      profile.insert(profile.end(), f.begin(), f.end());
    }
    put(kinds::kFaceProfile, {static_cast<std::int64_t>(profiles), d.face}, std::move(profile));

    cache.put_names(post.post_id, names);
    cache.put_transcript({post.post_id, ""});
    out.posts.push_back(std::move(post));
  }
  corpus::write_manifest(out.manifest, out.posts);

  TrainRunConfig cfg;
  cfg.seed = o.seed;
  cfg.manifest = "manifest.jsonl";
  cfg.cache = "cache";
  cfg.feature_version = o.version;
  // Agreement is a second-order function of the planted features; at n=200 it
  // needs more epochs than the corpus defaults, with a wider patience window.
  cfg.epochs = 40;
  cfg.patience = 10;
  cfg.fusion.dims.video_feature = d.video;
  cfg.fusion.dims.object_feature = d.object;
  cfg.fusion.dims.text_feature = d.text;
  cfg.fusion.dims.face_feature = d.face;
  save_run_config(out.config, cfg);
  return out;
}

}  // namespace mmsi::harness
