#include <algorithm>
#include <cmath>
#include <cstring>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/media.hpp"

namespace mmsi::media {
namespace fs = std::filesystem;

Image ClipSet::first_frame(std::size_t i) const {
  const ByteTensor& clip = clips.at(i);
  Image img;
  img.height = static_cast<int>(clip.shape[1]);
  img.width = static_cast<int>(clip.shape[2]);
  const std::size_t frame_bytes = static_cast<std::size_t>(img.width) * img.height * 3;
  img.rgb.assign(clip.data.begin(), clip.data.begin() + static_cast<std::ptrdiff_t>(frame_bytes));
  return img;
}

ByteTensor ClipSet::first_frame_tensor(std::size_t i) const {
  Image img = first_frame(i);
  return ByteTensor({img.height, img.width, 3}, std::move(img.rgb));
}

ClipSet extract_clips(const fs::path& video, const KeyframeIndex& keyframes, const VideoSpec& spec,
                      int max_keyframes, int clip_len) {
  if (keyframes.timestamps.empty()) throw UsageError("keyframe index is empty");
  if (max_keyframes <= 0 || clip_len <= 0) throw UsageError("max_keyframes and clip_len must be positive");

  VideoReader reader(video);
  if (reader.info().width != spec.width || reader.info().height != spec.height) {
    throw DataError(fmt::format("{} is {}x{}, expected {}x{}", video.string(), reader.info().width,
                                reader.info().height, spec.width, spec.height));
  }

  const std::size_t n_clips = std::min<std::size_t>(keyframes.timestamps.size(), max_keyframes);
  const std::size_t frame_bytes = static_cast<std::size_t>(spec.width) * spec.height * 3;

  ClipSet out;
  std::vector<std::int64_t> starts(n_clips);
  std::vector<int> filled(n_clips, 0);
  for (std::size_t c = 0; c < n_clips; ++c) {
    const double t = keyframes.timestamps[c];
    starts[c] = std::llround(t * spec.frame_rate);
    out.clips.emplace_back(Shape{clip_len, spec.height, spec.width, 3});
    out.origin_timestamps.push_back(t);
  }

  Image frame;
  Image last;
  std::int64_t index = 0;
  while (reader.read(frame)) {
    for (std::size_t c = 0; c < n_clips; ++c) {
      const std::int64_t slot = index - starts[c];
      if (slot < 0 || slot >= clip_len) continue;
      std::memcpy(out.clips[c].data.data() + static_cast<std::size_t>(slot) * frame_bytes,
                  frame.rgb.data(), frame_bytes);
      filled[c] = static_cast<int>(slot) + 1;
    }
    std::swap(last, frame);
    ++index;
  }
  if (index == 0) throw DataError(fmt::format("{}: no decodable frames", video.string()));

  // Tails past the end of the video repeat the final frame.
  for (std::size_t c = 0; c < n_clips; ++c) {
    for (int slot = filled[c]; slot < clip_len; ++slot) {
      std::memcpy(out.clips[c].data.data() + static_cast<std::size_t>(slot) * frame_bytes,
                  last.rgb.data(), frame_bytes);
    }
  }
  return out;
}

}  // namespace mmsi::media
