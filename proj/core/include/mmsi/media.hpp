#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsi/media_io.hpp"
#include "mmsi/tensor.hpp"

namespace mmsi::media {

struct VideoSpec {
  int width = 256;
  int height = 256;
  int frame_rate = 10;
  std::string container = "mp4";
};

struct AudioSpec {
  int sample_rate = 16000;
  int channels = 1;
  double highpass_hz = 200.0;
  double lowpass_hz = 3000.0;
};

inline constexpr double kSceneThreshold = 0.4;
inline constexpr double kFallbackInterval = 3.2;
inline constexpr int kMaxKeyframes = 16;
inline constexpr int kClipLength = 32;

enum class KeyframeSource { detected, placeholder };

struct KeyframeIndex {
  std::vector<double> timestamps;  // seconds, strictly increasing
  KeyframeSource source = KeyframeSource::detected;

  bool operator==(const KeyframeIndex&) const = default;
};

nlohmann::json keyframes_to_json(const KeyframeIndex& index);
KeyframeIndex keyframes_from_json(const nlohmann::json& value);

// One [clip_len, H, W, 3] tensor per keyframe, in keyframe order.
struct ClipSet {
  std::vector<ByteTensor> clips;
  std::vector<double> origin_timestamps;

  std::size_t clip_count() const { return clips.size(); }
  // First frame of clip `i` as an image ([H, W, 3] view copied out).
  Image first_frame(std::size_t i) const;
  ByteTensor first_frame_tensor(std::size_t i) const;
};

// --- adapters ----------------------------------------------------------------

class Transcoder {
 public:
  virtual ~Transcoder() = default;
  // Writes a VideoSpec-conforming file at `output`. Throws DataError carrying
  // the backend diagnostic on failure.
  virtual void transcode(const std::filesystem::path& input, const std::filesystem::path& output,
                         const VideoSpec& spec) = 0;
};

// In-process libav backend.
class LibavTranscoder : public Transcoder {
 public:
  void transcode(const std::filesystem::path& input, const std::filesystem::path& output,
                 const VideoSpec& spec) override;
};

// External-tool backend. The template is run through /bin/sh with
// {input} {output} {width} {height} {fps} substituted (paths shell-quoted);
// a non-zero exit status is an error carrying the tool's stderr.
class CommandTranscoder : public Transcoder {
 public:
  explicit CommandTranscoder(std::string command_template);
  static CommandTranscoder ffmpeg();

  void transcode(const std::filesystem::path& input, const std::filesystem::path& output,
                 const VideoSpec& spec) override;

 private:
  std::string template_;
};

// Reports the timestamps (seconds) where the scene-change score exceeds a threshold.
class SceneDetector {
 public:
  virtual ~SceneDetector() = default;
  virtual std::vector<double> scene_changes(const std::filesystem::path& video, double threshold,
                                            double* duration) = 0;
};

// Score = mean absolute difference between consecutive RGB frames, divided by 255.
class FrameDifferenceDetector : public SceneDetector {
 public:
  std::vector<double> scene_changes(const std::filesystem::path& video, double threshold,
                                    double* duration) override;
};

// Runs an external scene filter and parses `pts_time:<seconds>` tokens from its
// output, one per triggered frame.
class CommandSceneDetector : public SceneDetector {
 public:
  explicit CommandSceneDetector(std::string command_template);
  static CommandSceneDetector ffmpeg();

  std::vector<double> scene_changes(const std::filesystem::path& video, double threshold,
                                    double* duration) override;

 private:
  std::string template_;
};

// Parse contract of CommandSceneDetector, exposed for testing.
std::vector<double> parse_pts_times(const std::string& tool_output);

bool executable_on_path(const std::string& name);

// ffmpeg-backed adapters when ffmpeg is installed, in-process ones otherwise.
std::unique_ptr<Transcoder> default_transcoder();
std::unique_ptr<SceneDetector> default_scene_detector();

// --- operations ---------------------------------------------------------------

// Standardizes `input` into `output` (written via temp file + rename). On any
// failure no file is left at `output`.
std::filesystem::path transcode_video(const std::filesystem::path& input,
                                      const std::filesystem::path& output,
                                      const VideoSpec& spec, Transcoder& transcoder);

// Placeholder keyframes 0, interval, 2*interval, ... strictly below duration.
KeyframeIndex placeholder_keyframes(double duration, double interval = kFallbackInterval);

KeyframeIndex detect_keyframes(const std::filesystem::path& video, SceneDetector& detector,
                               double threshold = kSceneThreshold,
                               double fallback_interval = kFallbackInterval);
KeyframeIndex detect_keyframes(const std::filesystem::path& video,
                               double threshold = kSceneThreshold,
                               double fallback_interval = kFallbackInterval);

ClipSet extract_clips(const std::filesystem::path& video, const KeyframeIndex& keyframes,
                      const VideoSpec& spec = {}, int max_keyframes = kMaxKeyframes,
                      int clip_len = kClipLength);

// Either a path to the prepared WAV or the no-audio marker (nullopt).
struct PreparedAudio {
  std::optional<std::filesystem::path> wav;
  bool has_audio() const { return wav.has_value(); }
};

// Second-order (RBJ, Q = 1/sqrt(2)) section used for the band limits.
class Biquad {
 public:
  static Biquad highpass(double cutoff_hz, double sample_rate);
  static Biquad lowpass(double cutoff_hz, double sample_rate);

  double process(double x);
  // |H(e^{jw})| at `freq_hz`.
  double magnitude(double freq_hz, double sample_rate) const;

 private:
  double b0_ = 1, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

// High-pass then low-pass, in place, with s16 saturation.
void band_limit(std::vector<std::int16_t>& samples, const AudioSpec& spec);

// Mono 16 kHz s16le WAV with both filters applied, or the no-audio marker when
// the input has no audio stream.
PreparedAudio prepare_audio(const std::filesystem::path& video, const std::filesystem::path& output,
                            const AudioSpec& spec = {});

}  // namespace mmsi::media
