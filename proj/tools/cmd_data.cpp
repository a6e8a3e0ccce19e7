#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>

#include <fmt/format.h>

#include "commands.hpp"
#include "mmsi/corpus.hpp"
#include "mmsi/errors.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/json_util.hpp"
#include "mmsi/pipeline.hpp"

namespace mmsi::cli {
namespace fs = std::filesystem;

namespace {

std::string failure_summary(std::string_view what, const std::vector<std::string>& failed) {
  std::string msg = fmt::format("{} failed for {} post(s):", what, failed.size());
  for (const std::string& f : failed) msg += "\n  " + f;
  return msg;
}

fs::path manifest_root(const fs::path& manifest) {
  return fs::absolute(manifest).parent_path();
}

}  // namespace

void add_corpus_command(CLI::App& app) {
  CLI::App* corpus = app.add_subcommand("corpus", "Build pristine/inconsistent examples and splits");
  corpus->require_subcommand(1);

  struct MakeOpts {
    fs::path manifest, out;
    std::uint64_t seed = 0;
  };
  auto mk = std::make_shared<MakeOpts>();
  CLI::App* make = corpus->add_subcommand("make-examples", "Pair every post with its own or a swapped caption");
  make->add_option("--manifest", mk->manifest, "Post manifest (JSONL)")->required();
  make->add_option("--seed", mk->seed, "Random seed")->capture_default_str();
  make->add_option("--out", mk->out, "Output examples file (JSONL)")->required();
  make->callback([mk] {
    const auto posts = corpus::load_manifest(mk->manifest);
    const auto examples = corpus::generate_examples(posts, mk->seed);
    corpus::write_examples(mk->out, examples);
    std::size_t bad = 0;
    for (const auto& e : examples) bad += e.label == corpus::Label::inconsistent ? 1 : 0;
    std::cout << fmt::format("{} examples ({} pristine, {} inconsistent) -> {}\n", examples.size(),
                             examples.size() - bad, bad, mk->out.string());
  });

  struct SplitOpts {
    fs::path manifest, examples, out, examples_out;
    std::uint64_t seed = 0;
    double val_fraction = 0.15;
  };
  auto so = std::make_shared<SplitOpts>();
  CLI::App* split = corpus->add_subcommand(
      "split", "Assign examples to train/val/test, keeping each video post in one partition");
  auto* man = split->add_option("--manifest", so->manifest, "Post manifest; examples are generated with --seed");
  auto* ex = split->add_option("--examples", so->examples, "Existing examples file (JSONL)");
  man->excludes(ex);
  split->add_option("--seed", so->seed, "Random seed")->capture_default_str();
  split->add_option("--val-fraction", so->val_fraction, "Fraction of all examples used for validation")
      ->capture_default_str();
  split->add_option("--out", so->out, "Output split file (JSON)")->required();
  split->add_option("--examples-out", so->examples_out,
                    "Where to write the split's example list (default: <out stem>.examples.jsonl)");
  split->callback([so] {
    std::vector<corpus::Example> examples;
    if (!so->examples.empty()) {
      examples = corpus::load_examples(so->examples);
    } else if (!so->manifest.empty()) {
      examples = corpus::generate_examples(corpus::load_manifest(so->manifest), so->seed);
    } else {
      throw UsageError("corpus split needs --manifest or --examples");
    }
    const corpus::DatasetSplit ds = corpus::split_dataset(examples, so->seed, so->val_fraction);
    fs::path examples_out = so->examples_out;
    if (examples_out.empty()) {
      examples_out = so->out;
      examples_out.replace_extension(".examples.jsonl");
    }
    write_json_file(so->out, corpus::split_to_json(ds.assignment));
    corpus::write_examples(examples_out, ds.examples);
    std::cout << fmt::format("train {}, val {}, test {} -> {} (examples: {})\n",
                             ds.assignment.count(corpus::Partition::train),
                             ds.assignment.count(corpus::Partition::val),
                             ds.assignment.count(corpus::Partition::test), so->out.string(),
                             examples_out.string());
    if (ds.cross_partition_swaps > 0) {
      note(fmt::format("warning: {} inconsistent example(s) kept a caption donor from another partition",
                       ds.cross_partition_swaps));
    }
  });
}

void add_media_command(CLI::App& app) {
  CLI::App* media = app.add_subcommand("media", "Standardize videos and find keyframes");
  media->require_subcommand(1);

  struct Opts {
    fs::path manifest, workdir;
    double threshold = media::kSceneThreshold;
    double fallback = media::kFallbackInterval;
    int jobs = 1;
    bool force = false;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* pre = media->add_subcommand(
      "preprocess", "Write <post>.mp4 (256x256, 10 fps), <post>.wav and <post>.keyframes.json per post");
  pre->add_option("--manifest", o->manifest, "Post manifest (JSONL); relative video paths resolve against it")
      ->required();
  pre->add_option("--workdir", o->workdir, "Output directory")->required();
  pre->add_option("--threshold", o->threshold, "Scene-change threshold in [0, 1]")->capture_default_str();
  pre->add_option("--fallback-interval", o->fallback, "Placeholder keyframe spacing in seconds")
      ->capture_default_str();
  pre->add_option("--jobs", o->jobs, "Posts processed in parallel")->capture_default_str();
  pre->add_flag("--force", o->force, "Redo posts whose outputs already exist");
  pre->callback([o] {
    if (!(o->threshold >= 0.0 && o->threshold <= 1.0)) throw UsageError("--threshold must lie in [0, 1]");
    if (!(o->fallback > 0.0)) throw UsageError("--fallback-interval must be positive");
    const auto posts = corpus::load_manifest(o->manifest);
    const fs::path root = manifest_root(o->manifest);
    pipeline::MediaOptions mo;
    mo.threshold = o->threshold;
    mo.fallback_interval = o->fallback;
    mo.force = o->force;
    std::atomic<std::size_t> done{0}, skipped{0};
    const auto failed = parallel_for(posts.size(), o->jobs, [&](std::size_t i) {
      const auto transcoder = media::default_transcoder();
      const auto detector = media::default_scene_detector();
      if (pipeline::preprocess_post(posts[i], root, o->workdir, mo, *transcoder, *detector)) {
        ++done;
      } else {
        ++skipped;
      }
    });
    std::cout << fmt::format("preprocessed {}, skipped {} (already present), failed {}\n", done.load(),
                             skipped.load(), failed.size());
    if (!failed.empty()) throw DataError(failure_summary("media preprocess", failed));
  });
}

void add_features_command(CLI::App& app) {
  CLI::App* features = app.add_subcommand("features", "Run feature extractors into the cache");
  features->require_subcommand(1);

  struct Opts {
    fs::path manifest, workdir, cache, refs, gazetteer;
    std::string extractors = "all";
    std::string version = std::string(extractors::kStubVersion);
    bool stub = false;
    bool real = false;
    int jobs = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* ex = features->add_subcommand("extract", "Compute missing cache entries for every post");
  ex->add_option("--manifest", o->manifest, "Post manifest (JSONL)")->required();
  ex->add_option("--workdir", o->workdir, "Directory written by media preprocess")->required();
  ex->add_option("--cache", o->cache, "Feature cache root")->required();
  ex->add_option("--extractors", o->extractors,
                 "Comma-separated subset of video,object,text,transcriber,ner,face, or all")
      ->capture_default_str();
  ex->add_option("--feature-version", o->version, "Version label the features are stored under")
      ->capture_default_str();
  auto* stub = ex->add_flag("--stub", o->stub, "Deterministic hash-based extractors (default)");
  auto* real = ex->add_flag("--real", o->real, "Registered model plugins");
  stub->excludes(real);
  ex->add_option("--jobs", o->jobs, "Posts processed in parallel")->capture_default_str();
  ex->add_option("--refs", o->refs, "Reference image root: <refs>/<name-slug>/*.png|jpg|...");
  ex->add_option("--gazetteer", o->gazetteer, "Person names for the stub NER, one per line");
  ex->callback([o] {
    const auto which = pipeline::parse_extractors(o->extractors);
    const auto posts = corpus::load_manifest(o->manifest);
    extractors::AdapterOptions ao;
    if (!o->gazetteer.empty()) ao.gazetteer = extractors::GazetteerNer::from_file(o->gazetteer).names();
    if (!o->refs.empty()) ao.reference_root = o->refs;
    const extractors::AdapterSet adapters =
        o->real ? extractors::make_real_adapters(ao) : extractors::make_stub_adapters(ao);
    const extractors::FeatureCache cache(o->cache);
    std::mutex mu;
    pipeline::ExtractStats total;
    const auto failed = parallel_for(posts.size(), o->jobs, [&](std::size_t i) {
      const auto stats = pipeline::extract_post_features(posts[i], o->workdir, adapters, cache, o->version, which);
      const std::lock_guard lock(mu);
      total += stats;
    });
    std::cout << fmt::format("computed {}, skipped {} (cached), failed posts {}\n", total.computed,
                             total.skipped, failed.size());
    if (!failed.empty()) throw DataError(failure_summary("feature extraction", failed));
  });
}

void add_synth_command(CLI::App& app) {
  CLI::App* synth = app.add_subcommand("synth", "Synthetic corpora with a planted caption-video signal");
  synth->require_subcommand(1);
  struct Opts {
    harness::SyntheticOptions s;
    fs::path out;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* gen = synth->add_subcommand(
      "generate", "Write manifest.jsonl, a filled feature cache and config.json; no media needed");
  gen->add_option("--n", o->s.n, "Number of posts (at least 4)")->capture_default_str();
  gen->add_option("--seed", o->s.seed, "Random seed")->capture_default_str();
  gen->add_option("--signal", o->s.signal, "Caption-video agreement in [0, 1]")->capture_default_str();
  gen->add_option("--latent-dim", o->s.latent_dim, "Dimension of the planted topic")->capture_default_str();
  gen->add_option("--feature-scale", o->s.feature_scale, "Per-coordinate std of the planted caption/video features")
      ->capture_default_str();
  gen->add_option("--noise", o->s.feature_noise, "Per-coordinate feature noise")->capture_default_str();
  gen->add_option("--distractor-noise", o->s.distractor_noise, "Std of the uninformative transcript/object features")
      ->capture_default_str();
  gen->add_option("--max-clips", o->s.max_clips, "Clips per video are uniform in [1, max]")->capture_default_str();
  gen->add_option("--out", o->out, "Output directory")->required();
  gen->callback([o] {
    const auto corpus = harness::generate_synthetic_corpus(o->s, o->out);
    std::cout << fmt::format("{} posts -> {} (config {})\n", corpus.posts.size(), o->out.string(),
                             corpus.config.string());
  });
}

}  // namespace mmsi::cli
