#pragma once

// Per-post pipeline stages: media standardization and feature extraction into
// the cache. Each call touches only its own post's files, so posts can be
// processed concurrently.

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mmsi/corpus.hpp"
#include "mmsi/extractors.hpp"
#include "mmsi/media.hpp"

namespace mmsi::pipeline {

struct MediaOptions {
  double threshold = media::kSceneThreshold;
  double fallback_interval = media::kFallbackInterval;
  media::VideoSpec video;
  media::AudioSpec audio;
  bool force = false;
};

struct MediaPaths {
  std::filesystem::path video;      // <post>.mp4
  std::filesystem::path wav;        // <post>.wav
  std::filesystem::path no_audio;   // <post>.noaudio marker
  std::filesystem::path keyframes;  // <post>.keyframes.json
};

MediaPaths media_paths(const std::filesystem::path& workdir, std::string_view post_id);

// Prepared audio recorded in the work directory (wav or no-audio marker).
media::PreparedAudio prepared_audio(const MediaPaths& paths);

// Resolves a manifest video_ref against the manifest's directory.
std::filesystem::path resolve_video(const corpus::Post& post, const std::filesystem::path& media_root);

// Returns false when every output already existed and `force` is off.
bool preprocess_post(const corpus::Post& post, const std::filesystem::path& media_root,
                     const std::filesystem::path& workdir, const MediaOptions& options,
                     media::Transcoder& transcoder, media::SceneDetector& detector);

enum class Extractor { video, object, text, transcriber, ner, face };

std::string_view extractor_name(Extractor e);
// Comma-separated list, or "all".
std::set<Extractor> parse_extractors(std::string_view list);

struct ExtractStats {
  std::size_t computed = 0;
  std::size_t skipped = 0;  // already cached

  ExtractStats& operator+=(const ExtractStats& o) {
    computed += o.computed;
    skipped += o.skipped;
    return *this;
  }
};

// Writes every artifact of the selected extractors for one post. Feature
// records go under `version`; existing entries are left untouched.
ExtractStats extract_post_features(const corpus::Post& post, const std::filesystem::path& workdir,
                                   const extractors::AdapterSet& adapters,
                                   const extractors::FeatureCache& cache, const std::string& version,
                                   const std::set<Extractor>& which, const MediaOptions& options = {});

}  // namespace mmsi::pipeline
