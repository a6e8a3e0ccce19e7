#include <algorithm>
#include "mmsi/pipeline.hpp"

#include <optional>

#include <fmt/format.h>

#include "mmsi/entity.hpp"
#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/json_util.hpp"

namespace mmsi::pipeline {
namespace fs = std::filesystem;
using extractors::FeatureRecord;

namespace {

constexpr std::array<std::string_view, 6> kExtractorNames = {"video", "object", "text",
                                                             "transcriber", "ner", "face"};

std::vector<float> flatten_rows(const std::vector<std::vector<float>>& rows) {
  std::vector<float> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

}  // namespace

MediaPaths media_paths(const fs::path& workdir, std::string_view post_id) {
  const std::string stem = encode_filename(post_id);
  return {workdir / (stem + ".mp4"), workdir / (stem + ".wav"), workdir / (stem + ".noaudio"),
          workdir / (stem + ".keyframes.json")};
}

media::PreparedAudio prepared_audio(const MediaPaths& paths) {
  if (fs::exists(paths.wav)) return {paths.wav};
  if (fs::exists(paths.no_audio)) return {};
  throw DataError(fmt::format("no prepared audio at {} (run media preprocess first)", paths.wav.string()));
}

fs::path resolve_video(const corpus::Post& post, const fs::path& media_root) {
  fs::path p(post.video_ref);
  if (p.is_relative() && !media_root.empty()) p = media_root / p;
  return p;
}

bool preprocess_post(const corpus::Post& post, const fs::path& media_root, const fs::path& workdir,
                     const MediaOptions& options, media::Transcoder& transcoder,
                     media::SceneDetector& detector) {
  const MediaPaths paths = media_paths(workdir, post.post_id);
  const bool have_audio = fs::exists(paths.wav) || fs::exists(paths.no_audio);
  if (!options.force && fs::exists(paths.video) && fs::exists(paths.keyframes) && have_audio) {
    return false;
  }
  const fs::path source = resolve_video(post, media_root);
  if (!fs::is_regular_file(source)) {
    throw DataError(fmt::format("post {}: video {} not found", post.post_id, source.string()));
  }
  fs::create_directories(workdir);
  try {
    media::transcode_video(source, paths.video, options.video, transcoder);
    const media::KeyframeIndex kf =
        media::detect_keyframes(paths.video, detector, options.threshold, options.fallback_interval);
    write_json_file(paths.keyframes, media::keyframes_to_json(kf));
    const media::PreparedAudio audio = media::prepare_audio(source, paths.wav, options.audio);
    if (audio.has_audio()) {
      fs::remove(paths.no_audio);
    } else {
      fs::remove(paths.wav);
      write_file_atomic(paths.no_audio, std::string_view("no audio stream\n"));
    }
  } catch (const Error& e) {
    throw DataError(fmt::format("post {}: {}", post.post_id, e.what()));
  }
  return true;
}

std::string_view extractor_name(Extractor e) { return kExtractorNames[static_cast<std::size_t>(e)]; }

std::set<Extractor> parse_extractors(std::string_view list) {
  std::set<Extractor> out;
  if (list == "all" || list.empty()) {
    for (std::size_t i = 0; i < kExtractorNames.size(); ++i) out.insert(static_cast<Extractor>(i));
    return out;
  }
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = list.find(',', start);
    const std::string_view part =
        list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const auto it = std::find(kExtractorNames.begin(), kExtractorNames.end(), part);
    if (it == kExtractorNames.end()) {
      throw UsageError(fmt::format("unknown extractor \"{}\" (expected video, object, text, "
                                   "transcriber, ner, face or all)",
                                   part));
    }
    out.insert(static_cast<Extractor>(it - kExtractorNames.begin()));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

ExtractStats extract_post_features(const corpus::Post& post, const fs::path& workdir,
                                   const extractors::AdapterSet& adapters,
                                   const extractors::FeatureCache& cache, const std::string& version,
                                   const std::set<Extractor>& which, const MediaOptions& options) {
  namespace kinds = harness::kinds;
  ExtractStats stats;
  const std::string& id = post.post_id;
  const MediaPaths paths = media_paths(workdir, id);
  auto key = [&](std::string_view kind) { return extractors::ExtractorId{std::string(kind), version}; };
  auto wants = [&](Extractor e) { return which.contains(e); };

  std::optional<media::ClipSet> clips;
  auto load_clips = [&]() -> const media::ClipSet& {
    if (!clips) {
      if (!fs::exists(paths.video) || !fs::exists(paths.keyframes)) {
        throw DataError(fmt::format("post {}: no preprocessed media in {} (run media preprocess first)",
                                    id, workdir.string()));
      }
      clips = media::extract_clips(paths.video, media::keyframes_from_json(read_json_file(paths.keyframes)),
                                   options.video);
    }
    return *clips;
  };
  auto put = [&](std::string_view kind, Shape shape, std::vector<float> payload) {
    cache.put(FeatureRecord{id, key(kind), std::move(shape), std::move(payload)});
    ++stats.computed;
  };
  auto cached = [&](std::string_view kind) {
    if (!cache.contains(id, key(kind))) return false;
    ++stats.skipped;
    return true;
  };

  try {
    if (wants(Extractor::video) && !cached(kinds::kVideo)) {
      const media::ClipSet& cs = load_clips();
      std::vector<std::vector<float>> rows;
      for (const ByteTensor& clip : cs.clips) rows.push_back(adapters.video->encode(clip));
      put(kinds::kVideo, {static_cast<std::int64_t>(rows.size()), adapters.video->dim()}, flatten_rows(rows));
    }
    if (wants(Extractor::object) && !cached(kinds::kObject)) {
      const media::ClipSet& cs = load_clips();
      std::vector<std::vector<float>> rows;
      for (std::size_t i = 0; i < cs.clip_count(); ++i) {
        rows.push_back(adapters.object->encode(cs.first_frame_tensor(i)));
      }
      put(kinds::kObject, {static_cast<std::int64_t>(rows.size()), adapters.object->dim()}, flatten_rows(rows));
    }

    // Transcript: needed by the transcriber stage itself and by text / ner.
    std::optional<std::string> transcript;
    auto get_transcript = [&]() -> const std::string& {
      if (!transcript) {
        if (auto rec = cache.get_transcript(id)) {
          transcript = rec->text;
        } else {
          const extractors::TranscriptRecord rec2 = adapters.transcriber->transcribe(id, prepared_audio(paths));
          cache.put_transcript(rec2);
          ++stats.computed;
          transcript = rec2.text;
        }
      }
      return *transcript;
    };
    if (wants(Extractor::transcriber)) {
      if (cache.get_transcript(id)) {
        ++stats.skipped;
      } else {
        get_transcript();
      }
    }
    if (wants(Extractor::text)) {
      if (!cached(kinds::kCaption)) {
        const FloatTensor t = adapters.text->encode(post.caption_text);
        put(kinds::kCaption, t.shape, t.data);
      }
      if (!cached(kinds::kTranscript)) {
        const FloatTensor t = adapters.text->encode(get_transcript());
        put(kinds::kTranscript, t.shape, t.data);
      }
    }

    std::optional<extractors::PostNames> names;
    auto get_names = [&]() -> const extractors::PostNames& {
      if (!names) {
        if (auto cachedn = cache.get_names(id)) {
          names = *cachedn;
        } else {
          names = extractors::PostNames{adapters.ner->extract_person_names(post.caption_text),
                                        adapters.ner->extract_person_names(get_transcript())};
          cache.put_names(id, *names);
          ++stats.computed;
        }
      }
      return *names;
    };
    if (wants(Extractor::ner)) {
      if (cache.get_names(id)) {
        ++stats.skipped;
      } else {
        get_names();
      }
    }
    if (wants(Extractor::face)) {
      const int dim = adapters.face->dim();
      if (!cached(kinds::kFaceProfile)) {
        const auto& caption_names = get_names().caption_names;
        const std::size_t count = std::min<std::size_t>(caption_names.size(), entity::kMaxFaceNames);
        std::vector<float> rows(count * static_cast<std::size_t>(dim), 0.0f);
        for (std::size_t i = 0; i < count; ++i) {
          const auto images = adapters.images->fetch_reference_images(caption_names[i]);
          const auto profile = entity::build_reference_profile(caption_names[i], images, *adapters.face);
          if (profile) std::copy(profile->embedding.begin(), profile->embedding.end(), rows.begin() + i * dim);
        }
        put(kinds::kFaceProfile, {static_cast<std::int64_t>(count), dim}, std::move(rows));
      }
      if (!cached(kinds::kKeyframeFaces)) {
        const media::ClipSet& cs = load_clips();
        std::vector<float> rows;
        std::int64_t n = 0;
        for (std::size_t i = 0; i < cs.clip_count(); ++i) {
          for (const auto& f : adapters.face->detect_faces(cs.first_frame(i))) {
            rows.push_back(static_cast<float>(i));
            rows.insert(rows.end(), f.begin(), f.end());
            ++n;
          }
        }
        put(kinds::kKeyframeFaces, {n, dim + 1}, std::move(rows));
      }
    }
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.rfind("post " + id, 0) == 0) throw;
    throw DataError(fmt::format("post {}: {}", id, msg));
  }
  return stats;
}

}  // namespace mmsi::pipeline
