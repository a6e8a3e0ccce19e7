#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <regex>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/media.hpp"
#include "subprocess.hpp"

namespace mmsi::media {
namespace fs = std::filesystem;
namespace {

// Timestamps are kept on a microsecond grid so 3 * 3.2 prints and compares as 9.6.
double quantize(double seconds) { return std::round(seconds * 1e6) / 1e6; }

}  // namespace

nlohmann::json keyframes_to_json(const KeyframeIndex& index) {
  return {{"timestamps", index.timestamps},
          {"source", index.source == KeyframeSource::detected ? "detected" : "placeholder"}};
}

KeyframeIndex keyframes_from_json(const nlohmann::json& value) {
  KeyframeIndex index;
  try {
    index.timestamps = value.at("timestamps").get<std::vector<double>>();
    const std::string source = value.at("source").get<std::string>();
    if (source == "detected") {
      index.source = KeyframeSource::detected;
    } else if (source == "placeholder") {
      index.source = KeyframeSource::placeholder;
    } else {
      throw DataError(fmt::format("unknown keyframe source '{}'", source));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("malformed keyframe index: {}", e.what()));
  }
  return index;
}

KeyframeIndex placeholder_keyframes(double duration, double interval) {
  if (!(duration > 0)) throw DataError(fmt::format("video duration must be positive, got {}", duration));
  if (!(interval > 0)) throw UsageError("fallback interval must be positive");
  KeyframeIndex index;
  index.source = KeyframeSource::placeholder;
  for (int k = 0;; ++k) {
    const double t = quantize(k * interval);
    if (t >= duration - 1e-9) break;
    index.timestamps.push_back(t);
  }
  return index;
}

std::vector<double> FrameDifferenceDetector::scene_changes(const fs::path& video, double threshold,
                                                           double* duration) {
  VideoReader reader(video);
  const double rate = reader.info().frame_rate > 0 ? reader.info().frame_rate : 10.0;
  std::vector<double> out;
  Image prev;
  Image cur;
  std::int64_t index = 0;
  while (reader.read(cur)) {
    if (index > 0 && cur.rgb.size() == prev.rgb.size()) {
      std::uint64_t total = 0;
      for (std::size_t i = 0; i < cur.rgb.size(); ++i) {
        total += static_cast<std::uint64_t>(std::abs(int(cur.rgb[i]) - int(prev.rgb[i])));
      }
      const double score = static_cast<double>(total) / (255.0 * static_cast<double>(cur.rgb.size()));
      if (score > threshold) out.push_back(quantize(static_cast<double>(index) / rate));
    }
    std::swap(prev, cur);
    ++index;
  }
  if (index == 0) throw DataError(fmt::format("{}: no decodable frames", video.string()));
  if (duration != nullptr) *duration = quantize(static_cast<double>(index) / rate);
  return out;
}

CommandSceneDetector::CommandSceneDetector(std::string command_template)
    : template_(std::move(command_template)) {}

CommandSceneDetector CommandSceneDetector::ffmpeg() {
  return CommandSceneDetector(
      "ffmpeg -nostdin -hide_banner -i {input} "
      "-vf \"select='gt(scene,{threshold})',showinfo\" -f null -");
}

std::vector<double> parse_pts_times(const std::string& tool_output) {
  static const std::regex pts(R"(pts_time:\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?))");
  std::vector<double> out;
  for (auto it = std::sregex_iterator(tool_output.begin(), tool_output.end(), pts);
       it != std::sregex_iterator(); ++it) {
    out.push_back(quantize(std::strtod((*it)[1].str().c_str(), nullptr)));
  }
  return out;
}

std::vector<double> CommandSceneDetector::scene_changes(const fs::path& video, double threshold,
                                                        double* duration) {
  const std::string cmd = detail::substitute(
      template_, {{"input", detail::shell_quote(video.string())}, {"threshold", fmt::format("{}", threshold)}});
  const detail::CommandResult r = detail::run_command(cmd);
  if (r.exit_code != 0) {
    throw DataError(fmt::format("scene detector failed on {} (exit {}): {}", video.string(), r.exit_code,
                                r.output));
  }
  if (duration != nullptr) {
    // The tool's own duration banner is not part of the parse contract; count frames instead.
    VideoReader reader(video);
    const double rate = reader.info().frame_rate > 0 ? reader.info().frame_rate : 10.0;
    Image frame;
    std::int64_t n = 0;
    while (reader.read(frame)) ++n;
    *duration = quantize(static_cast<double>(n) / rate);
  }
  return parse_pts_times(r.output);
}

std::unique_ptr<SceneDetector> default_scene_detector() {
  if (executable_on_path("ffmpeg")) {
    return std::make_unique<CommandSceneDetector>(CommandSceneDetector::ffmpeg());
  }
  return std::make_unique<FrameDifferenceDetector>();
}

KeyframeIndex detect_keyframes(const fs::path& video, SceneDetector& detector, double threshold,
                               double fallback_interval) {
  double duration = 0.0;
  std::vector<double> times = detector.scene_changes(video, threshold, &duration);
  if (!(duration > 0)) throw DataError(fmt::format("{}: zero-duration video", video.string()));

  std::sort(times.begin(), times.end());
  KeyframeIndex index;
  index.source = KeyframeSource::detected;
  for (double t : times) {
    if (t < 0 || t >= duration) continue;
    if (!index.timestamps.empty() && t <= index.timestamps.back()) continue;
    index.timestamps.push_back(t);
  }
  if (index.timestamps.empty()) return placeholder_keyframes(duration, fallback_interval);
  return index;
}

KeyframeIndex detect_keyframes(const fs::path& video, double threshold, double fallback_interval) {
  FrameDifferenceDetector detector;
  return detect_keyframes(video, detector, threshold, fallback_interval);
}

}  // namespace mmsi::media
