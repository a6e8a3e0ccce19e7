#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsi/entity.hpp"
#include "mmsi/nn.hpp"

namespace mmsi::fusion {

// Feature blocks in classifier-assembly order. The first four are clip-level
// and feed the LSTM; the rest are concatenated after it.
enum class Block { video, object, caption, transcript, names, faces, reactions };

inline constexpr std::array<Block, 7> kAllBlocks = {Block::video,  Block::object, Block::caption,
                                                    Block::transcript, Block::names, Block::faces,
                                                    Block::reactions};
inline constexpr std::array<Block, 4> kClipBlocks = {Block::video, Block::object, Block::caption,
                                                     Block::transcript};

std::string_view block_name(Block block);
Block block_from_name(std::string_view name);
constexpr bool is_clip_block(Block b) { return static_cast<int>(b) < 4; }
constexpr std::size_t block_index(Block b) { return static_cast<std::size_t>(b); }

struct FusionDims {
  int video_feature = 1024;
  int object_feature = 2048;
  int text_feature = 768;
  int face_feature = 512;
  int shared = 256;
  int lstm_hidden = 1024;
  int name_block = 32;  // per source (caption, transcript)
  int face_block = 8;
  int reaction_block = 7;
  std::vector<int> classifier_hidden = {512, 128};
  int classes = 2;
  int max_clips = 16;

  bool operator==(const FusionDims&) const = default;
};

struct FusionConfig {
  std::array<bool, 7> enabled = {true, true, true, true, true, true, true};
  FusionDims dims;

  bool has(Block b) const { return enabled[block_index(b)]; }
  FusionConfig with(Block b, bool on) const;

  // Feature width entering the block's modality embedder (clip blocks only).
  int embedder_input_width(Block b) const;
  // Width a block adds to the LSTM input (clip blocks) or to the classifier
  // input (the others). The LSTM summary width itself never changes.
  int lstm_contribution(Block b) const;
  int classifier_contribution(Block b) const;

  int lstm_input_width() const;
  int classifier_input_width() const;

  // Throws UsageError on an unusable configuration.
  void validate() const;

  bool operator==(const FusionConfig&) const = default;
};

void to_json(nlohmann::json& j, const FusionConfig& c);
void from_json(const nlohmann::json& j, FusionConfig& c);

// Everything the model consumes for one example. Clip features hold one
// column per clip; columns past clip_count are padding and never read.
struct ExampleFeatures {
  std::string example_id;
  int label = 0;  // 0 pristine, 1 inconsistent
  int clip_count = 0;
  Eigen::MatrixXf video;       // [D_vid, n_clips]
  Eigen::MatrixXf object;      // [D_obj, n_clips]
  Eigen::VectorXf caption;     // flattened [2, D_text], segment 0 first
  Eigen::VectorXf transcript;  // flattened [2, D_text]
  std::vector<entity::CharEncoding> caption_names;
  std::vector<entity::CharEncoding> transcript_names;
  Eigen::VectorXf faces;       // [8]
  Eigen::VectorXf reactions;   // [7]
};

// Checks that the example carries every block `config` enables with the
// configured widths. Throws DataError naming the block and both widths.
void check_example(const ExampleFeatures& ex, const FusionConfig& config);

template <typename T>
struct FusionParams {
  std::array<std::optional<nn::Mlp<T>>, 4> embedders;  // indexed by clip block
  std::optional<nn::Mlp<T>> names;
  nn::Lstm<T> lstm;
  nn::Mlp<T> classifier;

  template <typename U>
  FusionParams<U> cast() const {
    FusionParams<U> out;
    for (std::size_t i = 0; i < embedders.size(); ++i) {
      if (embedders[i]) out.embedders[i] = embedders[i]->template cast<U>();
    }
    if (names) out.names = names->template cast<U>();
    out.lstm = lstm.template cast<U>();
    out.classifier = classifier.template cast<U>();
    return out;
  }
};

template <typename T>
FusionParams<T> init_params(const FusionConfig& config, std::uint64_t seed);
template <typename T>
FusionParams<T> zero_params(const FusionConfig& config);

// Stable, ordered view of every parameter tensor (biases are 1-column matrices).
template <typename T>
struct NamedParam {
  std::string name;
  nn::Matrix<T>* tensor;
};
template <typename T>
std::vector<NamedParam<T>> named_params(FusionParams<T>& params);
template <typename T>
std::size_t parameter_count(const FusionParams<T>& params);

// --- single-example reference operations ---------------------------------------

template <typename T>
nn::Vector<T> embed_modality(const nn::Vector<T>& feature, const nn::Mlp<T>& params);

// Final LSTM hidden state over the first clip_count clips.
template <typename T>
nn::Vector<T> fuse_clip_sequence(const ExampleFeatures& ex, const FusionConfig& config,
                                 const FusionParams<T>& params);

struct ClassifierExtras {
  std::optional<Eigen::VectorXd> caption_names;     // [name_block]
  std::optional<Eigen::VectorXd> transcript_names;  // [name_block]
  std::optional<Eigen::VectorXd> faces;             // [face_block]
  std::optional<Eigen::VectorXd> reactions;         // [reaction_block]
};

// [summary, caption-names, transcript-names, faces, reactions], skipping
// disabled blocks. A missing or mis-sized enabled block is an error.
template <typename T>
nn::Vector<T> assemble_classifier_input(const nn::Vector<T>& summary, const ClassifierExtras& extras,
                                        const FusionConfig& config);

template <typename T>
struct Classification {
  nn::Vector<T> logits;
  nn::Vector<T> probabilities;
};

template <typename T>
Classification<T> classify(const nn::Vector<T>& input, const nn::Mlp<T>& params);

// Mean over columns of -log(max(p[label], 1e-12)).
template <typename T>
T loss(const nn::Matrix<T>& probabilities, std::span<const int> labels);

// Per-example reference forward pass composed from the operations above.
template <typename T>
Classification<T> forward_example(const ExampleFeatures& ex, const FusionConfig& config,
                                  const FusionParams<T>& params);

// --- batched path ----------------------------------------------------------------

// Logits [classes, batch].
template <typename T>
nn::Matrix<T> forward_batch(std::span<const ExampleFeatures* const> batch, const FusionConfig& config,
                            const FusionParams<T>& params);

// Mean loss of the batch; adds d(loss)/d(param) into `grad`.
template <typename T>
T loss_and_gradient(std::span<const ExampleFeatures* const> batch, const FusionConfig& config,
                    const FusionParams<T>& params, FusionParams<T>& grad);

// --- optimizers -------------------------------------------------------------------

enum class OptimizerKind { sgd, adam };
std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.0;  // SGD only
  double weight_decay = 0.0;  // decoupled: params -= lr * weight_decay * params
};

class Optimizer {
 public:
  Optimizer(OptimizerSettings settings, FusionParams<float>& params);
  // params -= update(grad)
  void step(FusionParams<float>& params, FusionParams<float>& grad);
  const OptimizerSettings& settings() const { return settings_; }

 private:
  OptimizerSettings settings_;
  std::vector<nn::Matrix<float>> m_;
  std::vector<nn::Matrix<float>> v_;
  std::int64_t t_ = 0;
};

// --- checkpoints ------------------------------------------------------------------

struct Checkpoint {
  FusionConfig config;
  FusionParams<float> params;
  nlohmann::json metadata;  // free-form run information
};

// Magic, format version, config JSON, then named little-endian float32 tensors.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws DataError when a stored tensor disagrees with the shapes its config implies.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mmsi::fusion
