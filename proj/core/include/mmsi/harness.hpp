#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsi/corpus.hpp"
#include "mmsi/extractors.hpp"
#include "mmsi/fusion.hpp"

namespace mmsi::harness {

// --- run configuration -----------------------------------------------------------

struct TrainRunConfig {
  std::uint64_t seed = 0;
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double weight_decay = 0.0;
  fusion::OptimizerKind optimizer = fusion::OptimizerKind::adam;
  double val_fraction = 0.15;
  int patience = 5;  // epochs without validation improvement; 0 disables early stopping
  std::filesystem::path manifest;
  std::filesystem::path cache;
  std::string feature_version = std::string(extractors::kStubVersion);
  // Optional precomputed corpus files; generated from the manifest when empty.
  std::filesystem::path examples;
  std::filesystem::path split;
  fusion::FusionConfig fusion;

  bool operator==(const TrainRunConfig&) const = default;
};

nlohmann::json run_config_to_json(const TrainRunConfig& config);
// Relative paths are resolved against `base_dir`. Unknown keys are rejected.
TrainRunConfig run_config_from_json(const nlohmann::json& value,
                                    const std::filesystem::path& base_dir = {});
TrainRunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const TrainRunConfig& config);
// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const TrainRunConfig& config);

// --- datasets ----------------------------------------------------------------------

// Feature kinds stored in the cache, all under the run's feature_version.
namespace kinds {
inline constexpr std::string_view kVideo = "video-encoder";          // [clips, D_vid]
inline constexpr std::string_view kObject = "object-encoder";        // [clips, D_obj]
inline constexpr std::string_view kCaption = "caption-text";         // [2, D_text]
inline constexpr std::string_view kTranscript = "transcript-text";   // [2, D_text]
inline constexpr std::string_view kFaceProfile = "face-profile";     // [<=4, D_face], zero row = no profile
inline constexpr std::string_view kKeyframeFaces = "keyframe-faces"; // [faces, 1 + D_face], col 0 = keyframe
}  // namespace kinds

struct Dataset {
  std::vector<corpus::Post> posts;
  corpus::DatasetSplit split;                     // split.examples is the example list
  std::vector<fusion::ExampleFeatures> features;  // aligned with split.examples

  std::vector<std::size_t> indices(corpus::Partition partition) const;
};

// Throws DataError if any video post appears in more than one partition.
void assert_video_disjoint(const corpus::DatasetSplit& split);

// Model inputs for every example, reading only what `blocks` enables. Missing
// cache entries are collected and reported together as (post_id, extractor).
std::vector<fusion::ExampleFeatures> load_features(std::span<const corpus::Example> examples,
                                                   std::span<const corpus::Post> posts,
                                                   const extractors::FeatureCache& cache,
                                                   const std::string& version,
                                                   const fusion::FusionConfig& blocks);

// Manifest -> examples -> split -> features, for the blocks the config enables.
Dataset load_dataset(const TrainRunConfig& config);

// --- training and evaluation ------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean batch loss over the epoch
  std::optional<double> val_accuracy;
  std::optional<double> val_loss;  // mean cross-entropy; breaks accuracy ties when picking the best epoch

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  fusion::FusionParams<float> params;  // best validation epoch (last epoch without validation data)
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  bool stopped_early = false;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

TrainResult train(const TrainRunConfig& config, const Dataset& dataset, const ProgressFn& progress = {});

nlohmann::json history_to_json(std::span<const EpochRecord> history);

struct Prediction {
  std::string example_id;
  int label = 0;
  int predicted = 0;
  double p_inconsistent = 0.0;

  bool operator==(const Prediction&) const = default;
};

struct EvalReport {
  std::string split;  // partition name or free-form label
  double accuracy = 0.0;  // percent
  std::array<std::array<double, 2>, 2> confusion{};  // percent, rows = true class
  std::size_t n_examples = 0;
  std::string config_hash;
  int classifier_input_width = 0;
  std::vector<Prediction> predictions;

  bool operator==(const EvalReport&) const = default;
};

// Accuracy and row-normalized confusion from stored predictions.
EvalReport report_from_predictions(std::vector<Prediction> predictions, std::string split,
                                   std::string hash);

std::vector<Prediction> predict(const fusion::FusionConfig& config,
                                const fusion::FusionParams<float>& params,
                                std::span<const fusion::ExampleFeatures> features,
                                std::span<const std::size_t> indices, int batch_size = 64);

EvalReport evaluate(const fusion::Checkpoint& checkpoint, const Dataset& dataset,
                    corpus::Partition partition, const std::string& hash);

// --- ablation -----------------------------------------------------------------------

struct AblationRow {
  std::string family;   // "all" or "no-od"
  std::string removed;  // "None", a block name, or blocks joined by '+'
  double accuracy = 0.0;
  int classifier_input_width = 0;
  int lstm_input_width = 0;

  bool operator==(const AblationRow&) const = default;
};

struct AblationTable {
  std::string kind = "removal";  // "removal" (one block removed per row) or "subset" (blocks kept)
  std::vector<AblationRow> rows;
  std::string config_hash;
  std::uint64_t seed = 0;

  bool operator==(const AblationTable&) const = default;
};

// "caption" or "names+faces".
std::vector<fusion::Block> parse_block_spec(std::string_view spec);
std::string block_spec_name(std::span<const fusion::Block> blocks);

struct AblationOptions {
  std::vector<std::string> removals;  // block specs
  bool no_object_family = false;      // repeat the sweep with object features removed everywhere
  corpus::Partition partition = corpus::Partition::test;
};

// Retrains from scratch once per row with the base seed and hyperparameters.
// `dataset` must carry features for every block the base config enables.
AblationTable run_ablation_suite(const TrainRunConfig& base, const Dataset& dataset,
                                 const AblationOptions& options,
                                 const std::function<void(const AblationRow&)>& progress = {});

// One row per kept-block subset (uni- and bi-modal models).
AblationTable run_subset_suite(const TrainRunConfig& base, const Dataset& dataset,
                               std::span<const std::string> subsets,
                               corpus::Partition partition = corpus::Partition::test,
                               const std::function<void(const AblationRow&)>& progress = {});

// --- synthetic corpus -----------------------------------------------------------------

struct SyntheticOptions {
  int n = 200;
  std::uint64_t seed = 0;
  double signal = 1.0;
  int latent_dim = 2;
  int max_clips = 3;
  double feature_scale = 1.0;  // per-coordinate std of the planted caption / video features
  double feature_noise = 0.02;
  double clip_jitter = 0.02;      // per-clip latent perturbation of the video
  double distractor_noise = 0.02;  // std of the uninformative transcript / object features
  extractors::ExtractorDims dims;
  std::string version = std::string(extractors::kStubVersion);
};

struct SyntheticCorpus {
  std::filesystem::path manifest;
  std::filesystem::path cache;
  std::filesystem::path config;
  std::vector<corpus::Post> posts;
};

// Orthonormal [dim, latent_dim] projection used to plant the latent topic in
// `kind` features. Deterministic in (seed, kind, dim, latent_dim).
Eigen::MatrixXd synthetic_projection(std::uint64_t seed, std::string_view kind, int dim,
                                     int latent_dim);

// Writes manifest.jsonl, cache/ and config.json under `out_dir`. Each post has a
// latent topic; caption and video features are noisy projections of it mixed
// with independent noise in proportion to `signal`, so pristine pairs agree
// and swapped pairs do not. Every other block is independent noise.
SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& options,
                                          const std::filesystem::path& out_dir);

// --- reports ----------------------------------------------------------------------

using ReportItem = std::variant<EvalReport, AblationTable>;

nlohmann::json report_to_json(const ReportItem& item);
ReportItem report_from_json(const nlohmann::json& value);
nlohmann::json reports_to_json(std::span<const ReportItem> items);
std::vector<ReportItem> reports_from_json(const nlohmann::json& value);
std::string render_markdown(std::span<const ReportItem> items);

// Writes `<base>.json` and `<base>.md`. Throws UsageError("nothing to report")
// for an empty list.
void emit_report(std::span<const ReportItem> items, const std::filesystem::path& base);

}  // namespace mmsi::harness
