#include <fmt/format.h>

#include "mmsi/corpus.hpp"
#include "mmsi/errors.hpp"
#include "mmsi/fusion.hpp"

namespace mmsi::fusion {
using nlohmann::json;

namespace {
constexpr std::array<std::string_view, 7> kBlockNames = {"video", "object",     "caption", "transcript",
                                                         "names", "faces",      "reactions"};
}

std::string_view block_name(Block block) { return kBlockNames[block_index(block)]; }

Block block_from_name(std::string_view name) {
  for (Block b : kAllBlocks) {
    if (block_name(b) == name) return b;
  }
  throw UsageError(fmt::format("unknown block \"{}\" (expected one of video, object, caption, "
                               "transcript, names, faces, reactions)",
                               name));
}

FusionConfig FusionConfig::with(Block b, bool on) const {
  FusionConfig c = *this;
  c.enabled[block_index(b)] = on;
  return c;
}

int FusionConfig::embedder_input_width(Block b) const {
  switch (b) {
    case Block::video: return dims.video_feature;
    case Block::object: return dims.object_feature;
    case Block::caption:
    case Block::transcript: return 2 * dims.text_feature;
    default: throw UsageError(fmt::format("{} is not a clip-level block", block_name(b)));
  }
}

int FusionConfig::lstm_contribution(Block b) const {
  return is_clip_block(b) && has(b) ? dims.shared : 0;
}

int FusionConfig::classifier_contribution(Block b) const {
  if (!has(b)) return 0;
  switch (b) {
    case Block::names: return 2 * dims.name_block;
    case Block::faces: return dims.face_block;
    case Block::reactions: return dims.reaction_block;
    default: return 0;
  }
}

int FusionConfig::lstm_input_width() const {
  int w = 0;
  for (Block b : kClipBlocks) w += lstm_contribution(b);
  return w;
}

int FusionConfig::classifier_input_width() const {
  int w = dims.lstm_hidden;
  for (Block b : kAllBlocks) w += classifier_contribution(b);
  return w;
}

void FusionConfig::validate() const {
  bool any_clip = false;
  for (Block b : kClipBlocks) any_clip = any_clip || has(b);
  if (!any_clip) {
    throw UsageError("at least one clip-level block (video, object, caption, transcript) must be enabled");
  }
  const auto positive = {dims.video_feature, dims.object_feature, dims.text_feature, dims.face_feature,
                         dims.shared,        dims.lstm_hidden,    dims.classes,      dims.max_clips};
  for (int v : positive) {
    if (v <= 0) throw UsageError("fusion dimensions must be positive");
  }
  for (int v : dims.classifier_hidden) {
    if (v <= 0) throw UsageError("classifier hidden widths must be positive");
  }
  if (dims.name_block != entity::kNameEmbedding) {
    throw UsageError(fmt::format("name_block must be {} (name network output)", entity::kNameEmbedding));
  }
  if (dims.face_block != entity::kFaceFeatureWidth) {
    throw UsageError(fmt::format("face_block must be {}", entity::kFaceFeatureWidth));
  }
  if (dims.reaction_block != static_cast<int>(corpus::kReactionCount)) {
    throw UsageError(fmt::format("reaction_block must be {}", corpus::kReactionCount));
  }
  if (dims.classes != 2) throw UsageError("the classifier is binary; classes must be 2");
}

void to_json(json& j, const FusionConfig& c) {
  json blocks = json::object();
  for (Block b : kAllBlocks) blocks[std::string(block_name(b))] = c.has(b);
  j = {{"blocks", blocks},
       {"dims",
        {{"video_feature", c.dims.video_feature},
         {"object_feature", c.dims.object_feature},
         {"text_feature", c.dims.text_feature},
         {"face_feature", c.dims.face_feature},
         {"shared", c.dims.shared},
         {"lstm_hidden", c.dims.lstm_hidden},
         {"name_block", c.dims.name_block},
         {"face_block", c.dims.face_block},
         {"reaction_block", c.dims.reaction_block},
         {"classifier_hidden", c.dims.classifier_hidden},
         {"classes", c.dims.classes},
         {"max_clips", c.dims.max_clips}}}};
}

void from_json(const json& j, FusionConfig& c) {
  c = FusionConfig{};
  try {
    if (j.contains("blocks")) {
      for (const auto& [key, value] : j.at("blocks").items()) {
        c.enabled[block_index(block_from_name(key))] = value.get<bool>();
      }
    }
    if (j.contains("dims")) {
      const json& d = j.at("dims");
      FusionDims& o = c.dims;
      o.video_feature = d.value("video_feature", o.video_feature);
      o.object_feature = d.value("object_feature", o.object_feature);
      o.text_feature = d.value("text_feature", o.text_feature);
      o.face_feature = d.value("face_feature", o.face_feature);
      o.shared = d.value("shared", o.shared);
      o.lstm_hidden = d.value("lstm_hidden", o.lstm_hidden);
      o.name_block = d.value("name_block", o.name_block);
      o.face_block = d.value("face_block", o.face_block);
      o.reaction_block = d.value("reaction_block", o.reaction_block);
      o.classifier_hidden = d.value("classifier_hidden", o.classifier_hidden);
      o.classes = d.value("classes", o.classes);
      o.max_clips = d.value("max_clips", o.max_clips);
    }
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("invalid fusion config: {}", e.what()));
  }
}

void check_example(const ExampleFeatures& ex, const FusionConfig& config) {
  auto fail = [&](std::string_view block, Eigen::Index got, int want) {
    throw DataError(fmt::format("example {}: {} block has width {}, config expects {}", ex.example_id,
                                block, got, want));
  };
  if (ex.clip_count < 1) {
    throw DataError(fmt::format("example {} has clip_count {}", ex.example_id, ex.clip_count));
  }
  if (ex.clip_count > config.dims.max_clips) {
    throw DataError(fmt::format("example {} has {} clips, at most {} allowed", ex.example_id,
                                ex.clip_count, config.dims.max_clips));
  }
  auto check_clips = [&](Block b, const Eigen::MatrixXf& m) {
    if (!config.has(b)) return;
    if (m.rows() != config.embedder_input_width(b)) fail(block_name(b), m.rows(), config.embedder_input_width(b));
    if (m.cols() < ex.clip_count) {
      throw DataError(fmt::format("example {}: {} block has {} clips, clip_count is {}", ex.example_id,
                                  block_name(b), m.cols(), ex.clip_count));
    }
  };
  check_clips(Block::video, ex.video);
  check_clips(Block::object, ex.object);
  if (config.has(Block::caption) && ex.caption.size() != config.embedder_input_width(Block::caption)) {
    fail("caption", ex.caption.size(), config.embedder_input_width(Block::caption));
  }
  if (config.has(Block::transcript) &&
      ex.transcript.size() != config.embedder_input_width(Block::transcript)) {
    fail("transcript", ex.transcript.size(), config.embedder_input_width(Block::transcript));
  }
  if (config.has(Block::faces) && ex.faces.size() != config.dims.face_block) {
    fail("faces", ex.faces.size(), config.dims.face_block);
  }
  if (config.has(Block::reactions) && ex.reactions.size() != config.dims.reaction_block) {
    fail("reactions", ex.reactions.size(), config.dims.reaction_block);
  }
}

}  // namespace mmsi::fusion
