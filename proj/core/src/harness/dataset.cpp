#include <map>
#include <set>

#include <fmt/format.h>

#include "mmsi/entity.hpp"
#include "mmsi/errors.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/json_util.hpp"

namespace mmsi::harness {
using corpus::Example;
using corpus::Partition;
using corpus::Post;
using extractors::FeatureRecord;
using fusion::Block;

namespace {

constexpr std::size_t kMissingListed = 20;

// Row-major [rows, cols] record -> column-per-row matrix [cols, rows].
Eigen::MatrixXf rows_as_columns(const FeatureRecord& r) {
  const Eigen::Index rows = r.shape.at(0);
  const Eigen::Index cols = r.shape.size() > 1 ? r.shape[1] : 1;
  return Eigen::Map<const Eigen::MatrixXf>(r.payload.data(), cols, rows);
}

void require_width(const FeatureRecord& r, std::int64_t width) {
  if (r.shape.size() != 2 || r.shape[1] != width) {
    throw DataError(fmt::format("{} for post {} has shape {}, expected [*, {}]", r.extractor.name,
                                r.post_id, shape_to_string(r.shape), width));
  }
}

class Loader {
 public:
  Loader(const extractors::FeatureCache& cache, std::string version)
      : cache_(cache), version_(std::move(version)) {}

  const FeatureRecord* get(const std::string& post_id, std::string_view kind, bool required = true) {
    const auto key = std::make_pair(post_id, std::string(kind));
    auto it = records_.find(key);
    if (it == records_.end()) {
      it = records_.emplace(key, cache_.get(post_id, {std::string(kind), version_})).first;
    }
    if (!it->second && required) missing_.insert(fmt::format("({}, {}@{})", post_id, kind, version_));
    return it->second ? &*it->second : nullptr;
  }

  const extractors::PostNames* names(const std::string& post_id) {
    auto it = names_.find(post_id);
    if (it == names_.end()) {
      auto rec = cache_.get_names(post_id);
      if (!rec) missing_.insert(fmt::format("({}, names)", post_id));
      it = names_.emplace(post_id, std::move(rec)).first;
    }
    return it->second ? &*it->second : nullptr;
  }

  void throw_if_missing() const {
    if (missing_.empty()) return;
    std::string list;
    std::size_t shown = 0;
    for (const std::string& m : missing_) {
      if (shown++ == kMissingListed) break;
      list += "\n  " + m;
    }
    if (missing_.size() > kMissingListed) list += fmt::format("\n  ... {} more", missing_.size() - kMissingListed);
    throw DataError(fmt::format("{} cached feature(s) missing:{}", missing_.size(), list));
  }

 private:
  const extractors::FeatureCache& cache_;
  std::string version_;
  std::map<std::pair<std::string, std::string>, std::optional<FeatureRecord>> records_;
  std::map<std::string, std::optional<extractors::PostNames>> names_;
  std::set<std::string> missing_;
};

Eigen::VectorXf face_features(const FeatureRecord& profiles, const FeatureRecord& keyframe_faces,
                              int face_dim) {
  require_width(profiles, face_dim);
  require_width(keyframe_faces, face_dim + 1);
  std::vector<std::optional<entity::ReferenceProfile>> prof;
  for (std::int64_t i = 0; i < profiles.shape[0]; ++i) {
    const float* row = profiles.payload.data() + i * face_dim;
    std::vector<float> e(row, row + face_dim);
    bool zero = true;
    for (float v : e) zero = zero && v == 0.0f;
    if (zero) {
      prof.emplace_back(std::nullopt);
    } else {
      prof.emplace_back(entity::ReferenceProfile{"", std::move(e), 1});
    }
  }
  entity::KeyframeFaces kf;
  for (std::int64_t i = 0; i < keyframe_faces.shape[0]; ++i) {
    const float* row = keyframe_faces.payload.data() + i * (face_dim + 1);
    const auto idx = static_cast<std::size_t>(row[0]);
    if (row[0] < 0 || idx >= static_cast<std::size_t>(entity::kMaxKeyframes)) {
      throw DataError(fmt::format("keyframe-faces for post {} has keyframe index {}",
                                  keyframe_faces.post_id, row[0]));
    }
    if (kf.size() <= idx) kf.resize(idx + 1);
    kf[idx].emplace_back(row + 1, row + 1 + face_dim);
  }
  const auto pooled = entity::pool_face_features(entity::face_similarity_matrix(prof, kf));
  return Eigen::Map<const Eigen::VectorXf>(pooled.data(), static_cast<Eigen::Index>(pooled.size()));
}

}  // namespace

std::vector<std::size_t> Dataset::indices(Partition partition) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.examples.size(); ++i) {
    const auto it = split.assignment.partitions.find(split.examples[i].example_id);
    if (it != split.assignment.partitions.end() && it->second == partition) out.push_back(i);
  }
  return out;
}

void assert_video_disjoint(const corpus::DatasetSplit& split) {
  std::map<std::string, Partition> owner;
  for (const Example& ex : split.examples) {
    const auto it = split.assignment.partitions.find(ex.example_id);
    if (it == split.assignment.partitions.end()) {
      throw DataError(fmt::format("example {} has no partition", ex.example_id));
    }
    const auto [pos, inserted] = owner.emplace(ex.video_post_id, it->second);
    if (!inserted && pos->second != it->second) {
      throw DataError(fmt::format("video {} appears in both {} and {}", ex.video_post_id,
                                  corpus::to_string(pos->second), corpus::to_string(it->second)));
    }
  }
}

std::vector<fusion::ExampleFeatures> load_features(std::span<const Example> examples,
                                                   std::span<const Post> posts,
                                                   const extractors::FeatureCache& cache,
                                                   const std::string& version,
                                                   const fusion::FusionConfig& blocks) {
  const fusion::FusionDims& dims = blocks.dims;
  std::map<std::string, const Post*> by_id;
  for (const Post& p : posts) by_id.emplace(p.post_id, &p);
  Loader loader(cache, version);
  std::vector<fusion::ExampleFeatures> out;
  out.reserve(examples.size());

  for (const Example& ex : examples) {
    for (const std::string* id : {&ex.video_post_id, &ex.caption_post_id}) {
      if (!by_id.contains(*id)) {
        throw DataError(fmt::format("example {} refers to unknown post {}", ex.example_id, *id));
      }
    }
    const Post& video_post = *by_id.at(ex.video_post_id);
    fusion::ExampleFeatures f;
    f.example_id = ex.example_id;
    f.label = ex.label == corpus::Label::inconsistent ? 1 : 0;

    // The clip count comes from the video features when present, otherwise
    // from the object features; text-only models still step once per clip.
    const FeatureRecord* video = loader.get(ex.video_post_id, kinds::kVideo, blocks.has(Block::video));
    const FeatureRecord* object =
        blocks.has(Block::object) || !video
            ? loader.get(ex.video_post_id, kinds::kObject, blocks.has(Block::object))
            : nullptr;
    const FeatureRecord* clips_from = video ? video : object;
    f.clip_count = clips_from ? static_cast<int>(std::min<std::int64_t>(clips_from->shape.at(0),
                                                                          dims.max_clips))
                              : 1;
    if (blocks.has(Block::video) && video) {
      require_width(*video, dims.video_feature);
      f.video = rows_as_columns(*video);
    }
    if (blocks.has(Block::object) && object) {
      require_width(*object, dims.object_feature);
      f.object = rows_as_columns(*object);
    }
    auto text = [&](const std::string& post, std::string_view kind, Eigen::VectorXf& dst) {
      const FeatureRecord* r = loader.get(post, kind);
      if (!r) return;
      if (r->shape != Shape{2, dims.text_feature}) {
        throw DataError(fmt::format("{} for post {} has shape {}, expected [2, {}]", kind, post,
                                    shape_to_string(r->shape), dims.text_feature));
      }
      dst = Eigen::Map<const Eigen::VectorXf>(r->payload.data(), 2 * dims.text_feature);
    };
    if (blocks.has(Block::caption)) text(ex.caption_post_id, kinds::kCaption, f.caption);
    if (blocks.has(Block::transcript)) text(ex.video_post_id, kinds::kTranscript, f.transcript);
    if (blocks.has(Block::names)) {
      const auto* cap = loader.names(ex.caption_post_id);
      const auto* vid = loader.names(ex.video_post_id);
      if (cap) {
        for (const auto& n : cap->caption_names) f.caption_names.push_back(entity::encode_name_chars(n));
      }
      if (vid) {
        for (const auto& n : vid->transcript_names) {
          f.transcript_names.push_back(entity::encode_name_chars(n));
        }
      }
    }
    if (blocks.has(Block::faces)) {
      const FeatureRecord* prof = loader.get(ex.caption_post_id, kinds::kFaceProfile);
      const FeatureRecord* kf = loader.get(ex.video_post_id, kinds::kKeyframeFaces);
      if (prof && kf) f.faces = face_features(*prof, *kf, dims.face_feature);
    }
    if (blocks.has(Block::reactions)) {
      const auto r = corpus::normalize_reactions(video_post.reactions_raw);
      f.reactions.resize(static_cast<Eigen::Index>(r.size()));
      for (std::size_t i = 0; i < r.size(); ++i) f.reactions(static_cast<Eigen::Index>(i)) = static_cast<float>(r[i]);
    }
    out.push_back(std::move(f));
  }
  loader.throw_if_missing();
  for (const auto& f : out) fusion::check_example(f, blocks);
  return out;
}

Dataset load_dataset(const TrainRunConfig& config) {
  if (config.manifest.empty()) throw UsageError("run config has no manifest");
  if (config.cache.empty()) throw UsageError("run config has no cache directory");
  Dataset ds;
  ds.posts = corpus::load_manifest(config.manifest);
  std::vector<Example> examples = config.examples.empty()
                                      ? corpus::generate_examples(ds.posts, config.seed)
                                      : corpus::load_examples(config.examples);
  if (!config.split.empty()) {
    ds.split.assignment = corpus::split_from_json(read_json_file(config.split));
    ds.split.examples = std::move(examples);
  } else {
    ds.split = corpus::split_dataset(examples, config.seed, config.val_fraction);
  }
  assert_video_disjoint(ds.split);
  const extractors::FeatureCache cache(config.cache);
  ds.features = load_features(ds.split.examples, ds.posts, cache, config.feature_version, config.fusion);
  return ds;
}

}  // namespace mmsi::harness
