#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsi/media.hpp"
#include "mmsi/tensor.hpp"

namespace mmsi::extractors {

struct ExtractorId {
  std::string name;
  std::string version;

  auto operator<=>(const ExtractorId&) const = default;
};

std::string to_string(const ExtractorId& id);

struct FeatureRecord {
  std::string post_id;
  ExtractorId extractor;
  Shape shape;
  std::vector<float> payload;  // row-major

  bool operator==(const FeatureRecord&) const = default;
};

struct TranscriptRecord {
  std::string post_id;
  std::string text;

  bool operator==(const TranscriptRecord&) const = default;
};

struct ExtractorDims {
  int text = 768;
  int video = 1024;
  int object = 2048;
  int face = 512;

  bool operator==(const ExtractorDims&) const = default;
};

void to_json(nlohmann::json& j, const ExtractorDims& d);
void from_json(const nlohmann::json& j, ExtractorDims& d);

inline constexpr std::size_t kTextWindow = 1024;
inline constexpr std::size_t kTextSegment = 512;
inline constexpr int kReferenceImages = 10;
inline constexpr std::string_view kStubVersion = "stub-1";

// --- adapter interfaces -------------------------------------------------------
// Adapters are immutable after construction and safe to call concurrently.

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual ExtractorId id() const = 0;
  virtual int dim() const = 0;
  // [2, dim]: one row per 512-character segment of the first 1024 characters.
  virtual FloatTensor encode(std::string_view text) const = 0;
};

class VideoEncoder {
 public:
  virtual ~VideoEncoder() = default;
  virtual ExtractorId id() const = 0;
  virtual int dim() const = 0;
  virtual std::vector<float> encode(const ByteTensor& clip) const = 0;
};

class ObjectEncoder {
 public:
  virtual ~ObjectEncoder() = default;
  virtual ExtractorId id() const = 0;
  virtual int dim() const = 0;
  virtual std::vector<float> encode(const ByteTensor& frame) const = 0;
};

class FaceEncoder {
 public:
  virtual ~FaceEncoder() = default;
  virtual ExtractorId id() const = 0;
  virtual int dim() const = 0;
  // Unit-norm embedding of every face found in the image.
  virtual std::vector<std::vector<float>> detect_faces(const media::Image& image) const = 0;
};

class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual ExtractorId id() const = 0;
  virtual TranscriptRecord transcribe(std::string_view post_id,
                                      const media::PreparedAudio& audio) const = 0;
};

class PersonNer {
 public:
  virtual ~PersonNer() = default;
  virtual ExtractorId id() const = 0;
  virtual std::vector<std::string> extract_person_names(std::string_view text) const = 0;
};

class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual ExtractorId id() const = 0;
  virtual std::vector<media::Image> fetch_reference_images(std::string_view name,
                                                           int k = kReferenceImages) const = 0;
};

// --- stub implementations -------------------------------------------------------

// Unit-norm vector drawn from a Gaussian seeded by `seed`.
std::vector<float> hash_unit_vector(std::uint64_t seed, int dim);

// The two encoder segments of a text: code points [0, 512) and [512, 1024).
// Invalid UTF-8 bytes count as one character each.
std::array<std::string, 2> text_segments(std::string_view utf8);

class StubTextEncoder : public TextEncoder {
 public:
  explicit StubTextEncoder(int dim = 768, std::string version = std::string(kStubVersion));
  ExtractorId id() const override { return {"text-encoder", version_}; }
  int dim() const override { return dim_; }
  FloatTensor encode(std::string_view text) const override;

 private:
  int dim_;
  std::string version_;
  std::uint64_t salt_;
};

class StubVideoEncoder : public VideoEncoder {
 public:
  explicit StubVideoEncoder(int dim = 1024, Shape clip_shape = {32, 256, 256, 3},
                            std::string version = std::string(kStubVersion));
  ExtractorId id() const override { return {"video-encoder", version_}; }
  int dim() const override { return dim_; }
  std::vector<float> encode(const ByteTensor& clip) const override;

 private:
  int dim_;
  Shape clip_shape_;
  std::string version_;
  std::uint64_t salt_;
};

class StubObjectEncoder : public ObjectEncoder {
 public:
  explicit StubObjectEncoder(int dim = 2048, Shape frame_shape = {256, 256, 3},
                             std::string version = std::string(kStubVersion));
  ExtractorId id() const override { return {"object-encoder", version_}; }
  int dim() const override { return dim_; }
  std::vector<float> encode(const ByteTensor& frame) const override;

 private:
  int dim_;
  Shape frame_shape_;
  std::string version_;
  std::uint64_t salt_;
};

// Face count per image is the image hash modulo 3.
class StubFaceEncoder : public FaceEncoder {
 public:
  explicit StubFaceEncoder(int dim = 512, std::string version = std::string(kStubVersion));
  ExtractorId id() const override { return {"face-encoder", version_}; }
  int dim() const override { return dim_; }
  std::vector<std::vector<float>> detect_faces(const media::Image& image) const override;

 private:
  int dim_;
  std::string version_;
  std::uint64_t salt_;
};

// Returns the contents of `<wav>.transcript.txt` when present, otherwise a
// hash-derived word sequence. Silent audio transcribes to "".
class StubTranscriber : public Transcriber {
 public:
  explicit StubTranscriber(std::string version = std::string(kStubVersion));
  ExtractorId id() const override { return {"transcriber", version_}; }
  TranscriptRecord transcribe(std::string_view post_id,
                              const media::PreparedAudio& audio) const override;

 private:
  std::string version_;
};

// Whole-word, case-sensitive gazetteer lookup. Longer entries win over their
// prefixes; matches come back in text order with duplicates kept.
class GazetteerNer : public PersonNer {
 public:
  explicit GazetteerNer(std::vector<std::string> names,
                        std::string version = std::string(kStubVersion));
  // One name per line; blank lines and lines starting with '#' are ignored.
  static GazetteerNer from_file(const std::filesystem::path& path);

  ExtractorId id() const override { return {"person-ner", version_}; }
  std::vector<std::string> extract_person_names(std::string_view text) const override;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;  // longest first
  std::string version_;
};

// Images under `<root>/<slugify(name)>/`, first k by sorted filename.
class LocalDirectoryImageSource : public ImageSource {
 public:
  explicit LocalDirectoryImageSource(std::filesystem::path root);
  ExtractorId id() const override { return {"image-search", "local-1"}; }
  std::vector<media::Image> fetch_reference_images(std::string_view name,
                                                   int k = kReferenceImages) const override;

 private:
  std::filesystem::path root_;
};

// Image source that never finds anything; used when no reference directory is configured.
class EmptyImageSource : public ImageSource {
 public:
  ExtractorId id() const override { return {"image-search", "none"}; }
  std::vector<media::Image> fetch_reference_images(std::string_view name,
                                                   int k = kReferenceImages) const override;
};

// --- adapter sets -------------------------------------------------------------------

struct AdapterSet {
  std::unique_ptr<TextEncoder> text;
  std::unique_ptr<VideoEncoder> video;
  std::unique_ptr<ObjectEncoder> object;
  std::unique_ptr<FaceEncoder> face;
  std::unique_ptr<Transcriber> transcriber;
  std::unique_ptr<PersonNer> ner;
  std::unique_ptr<ImageSource> images;
};

struct AdapterOptions {
  ExtractorDims dims;
  std::vector<std::string> gazetteer;
  std::optional<std::filesystem::path> reference_root;
};

AdapterSet make_stub_adapters(const AdapterOptions& options);

// Real-model adapters are plugins registered at startup by whoever links them.
using AdapterFactory = std::function<AdapterSet(const AdapterOptions&)>;
void register_real_adapters(AdapterFactory factory);
bool real_adapters_available();
// Throws UsageError when no plugin has been registered.
AdapterSet make_real_adapters(const AdapterOptions& options);

// --- feature cache -----------------------------------------------------------------

struct CacheKey {
  std::string post_id;
  ExtractorId extractor;

  auto operator<=>(const CacheKey&) const = default;
};

struct PostNames {
  std::vector<std::string> caption_names;
  std::vector<std::string> transcript_names;

  bool operator==(const PostNames&) const = default;
};

// On-disk layout under the root:
//   features/<extractor>/<version>/<post>.json        sidecar (commit point)
//   features/<extractor>/<version>/<post>.<hash>.f32  payload, content addressed
//   transcripts/<post>.txt
//   names/<post>.json
// Every file is written through a temp file and rename. A reader that loads a
// sidecar always finds a complete payload for it.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  void put(const FeatureRecord& record) const;
  std::optional<FeatureRecord> get(std::string_view post_id, const ExtractorId& extractor) const;
  bool contains(std::string_view post_id, const ExtractorId& extractor) const;
  std::vector<CacheKey> list() const;

  void put_transcript(const TranscriptRecord& record) const;
  std::optional<TranscriptRecord> get_transcript(std::string_view post_id) const;

  void put_names(std::string_view post_id, const PostNames& names) const;
  std::optional<PostNames> get_names(std::string_view post_id) const;

  // Deletes payload files no sidecar refers to. Not safe to run alongside writers.
  std::size_t prune() const;

 private:
  std::filesystem::path sidecar_path(std::string_view post_id, const ExtractorId& id) const;

  std::filesystem::path root_;
};

}  // namespace mmsi::extractors
