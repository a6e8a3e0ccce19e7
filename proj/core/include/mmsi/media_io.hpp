#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmsi::media {

// 8-bit RGB, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  bool operator==(const Image&) const = default;
};

struct VideoInfo {
  int width = 0;
  int height = 0;
  double frame_rate = 0.0;  // average rate reported by the container
  bool has_audio = false;
};

VideoInfo probe_video(const std::filesystem::path& path);

// Sequential decoder for the best video stream of any container libav can
// open (including single still images). Frames come out as RGB, optionally
// rescaled.
class VideoReader {
 public:
  struct Size {
    int width;
    int height;
  };

  explicit VideoReader(const std::filesystem::path& path, std::optional<Size> scale_to = std::nullopt);
  ~VideoReader();
  VideoReader(VideoReader&&) noexcept;
  VideoReader& operator=(VideoReader&&) noexcept;

  // Returns false at end of stream. `pts_seconds` is relative to the first frame.
  bool read(Image& frame, double* pts_seconds = nullptr);

  const VideoInfo& info() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct AudioTrack {
  int sample_rate = 16000;
  int channels = 1;
  std::vector<std::int16_t> interleaved;
};

// Encoder for test fixtures and standardized output: MPEG-4 Part 2 video,
// bit-exact muxing, optional audio (AAC in mp4, PCM elsewhere).
class VideoWriter {
 public:
  VideoWriter(const std::filesystem::path& path, int width, int height, int frame_rate,
              std::optional<AudioTrack> audio = std::nullopt);
  ~VideoWriter();
  VideoWriter(VideoWriter&&) noexcept;
  VideoWriter& operator=(VideoWriter&&) noexcept;

  void write(const Image& frame);
  // Flushes encoders and writes the trailer; called by the destructor if needed.
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct TranscodeStats {
  std::int64_t frames_written = 0;
  bool audio_copied = false;
  bool source_had_audio = false;
};

// Constant-rate resample (nearest preceding source frame), rescale, re-encode
// into mp4. The audio stream is copied packet-for-packet when the mp4 muxer
// accepts its codec.
TranscodeStats transcode_constant_rate(const std::filesystem::path& input,
                                       const std::filesystem::path& output, int width, int height,
                                       int frame_rate);

// Decodes the best audio stream, downmixed to mono s16 at `sample_rate`.
// nullopt when the file has no audio stream.
std::optional<std::vector<std::int16_t>> decode_audio_mono(const std::filesystem::path& path,
                                                           int sample_rate);

Image load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& image);

// Canonical 44-byte-header PCM s16le mono WAV.
void write_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples,
               int sample_rate);
std::vector<std::int16_t> read_wav(const std::filesystem::path& path, int* sample_rate = nullptr);

}  // namespace mmsi::media
