#include <cmath>
#include <random>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/extractors.hpp"
#include "mmsi/hashing.hpp"

namespace mmsi::extractors {
namespace {

std::uint64_t salt_for(std::string_view name, std::string_view version) {
  return fnv1a64(version, fnv1a64(std::string(name) + "@"));
}

std::uint64_t hash_bytes(std::span<const std::uint8_t> bytes, std::uint64_t salt) {
  return mix64(fnv1a64(std::as_bytes(bytes), salt));
}

std::uint64_t hash_shape(const Shape& shape, std::uint64_t seed) {
  return fnv1a64(std::as_bytes(std::span(shape)), seed);
}

void require_shape(const Shape& got, const Shape& want, std::string_view what) {
  if (got != want) {
    throw DataError(fmt::format("{} has shape {}, expected {}", what, shape_to_string(got),
                                shape_to_string(want)));
  }
}

// Decodes one code point starting at s[i]; returns its byte length (>= 1).
// Malformed sequences count as a single one-byte character.
std::size_t utf8_length(std::string_view s, std::size_t i) {
  const auto lead = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  if (lead >= 0xF0 && lead <= 0xF4) {
    len = 4;
  } else if (lead >= 0xE0) {
    len = lead <= 0xEF ? 3 : 1;
  } else if (lead >= 0xC2) {
    len = 2;
  }
  if (len == 1 || i + len > s.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 1;
  }
  return len;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string to_string(const ExtractorId& id) { return id.name + "@" + id.version; }

void to_json(nlohmann::json& j, const ExtractorDims& d) {
  j = {{"text", d.text}, {"video", d.video}, {"object", d.object}, {"face", d.face}};
}

void from_json(const nlohmann::json& j, ExtractorDims& d) {
  ExtractorDims def;
  d.text = j.value("text", def.text);
  d.video = j.value("video", def.video);
  d.object = j.value("object", def.object);
  d.face = j.value("face", def.face);
  if (d.text <= 0 || d.video <= 0 || d.object <= 0 || d.face <= 0) {
    throw UsageError("extractor dimensions must be positive");
  }
}

std::vector<float> hash_unit_vector(std::uint64_t seed, int dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  for (double& x : v) {
    x = normal(rng);
    norm2 += x * x;
  }
  const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

std::array<std::string, 2> text_segments(std::string_view utf8) {
  std::array<std::string, 2> seg;
  std::size_t i = 0;
  for (std::size_t chars = 0; chars < kTextWindow && i < utf8.size(); ++chars) {
    const std::size_t len = utf8_length(utf8, i);
    seg[chars < kTextSegment ? 0 : 1].append(utf8.substr(i, len));
    i += len;
  }
  return seg;
}

StubTextEncoder::StubTextEncoder(int dim, std::string version)
    : dim_(dim), version_(std::move(version)), salt_(salt_for("text-encoder", version_)) {
  if (dim_ <= 0) throw UsageError("text encoder dimension must be positive");
}

FloatTensor StubTextEncoder::encode(std::string_view text) const {
  FloatTensor out({2, dim_});
  const auto segments = text_segments(text);
  for (std::size_t row = 0; row < 2; ++row) {
    const std::string& seg = segments[row];
    std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
    std::size_t tokens = 0;
    std::size_t i = 0;
    while (i < seg.size()) {
      while (i < seg.size() && is_space(seg[i])) ++i;
      std::size_t j = i;
      while (j < seg.size() && !is_space(seg[j])) ++j;
      if (j > i) {
        const auto tv = hash_unit_vector(mix64(fnv1a64(seg.substr(i, j - i), salt_)), dim_);
        for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += tv[d];
        ++tokens;
      }
      i = j;
    }
    if (tokens == 0) continue;
    double norm2 = 0.0;
    for (double a : acc) norm2 += a * a;
    if (norm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    float* dst = out.data.data() + row * static_cast<std::size_t>(dim_);
    for (std::size_t d = 0; d < acc.size(); ++d) dst[d] = static_cast<float>(acc[d] * inv);
  }
  return out;
}

StubVideoEncoder::StubVideoEncoder(int dim, Shape clip_shape, std::string version)
    : dim_(dim),
      clip_shape_(std::move(clip_shape)),
      version_(std::move(version)),
      salt_(salt_for("video-encoder", version_)) {
  if (dim_ <= 0) throw UsageError("video encoder dimension must be positive");
}

std::vector<float> StubVideoEncoder::encode(const ByteTensor& clip) const {
  require_shape(clip.shape, clip_shape_, "video clip");
  return hash_unit_vector(hash_bytes(clip.data, hash_shape(clip.shape, salt_)), dim_);
}

StubObjectEncoder::StubObjectEncoder(int dim, Shape frame_shape, std::string version)
    : dim_(dim),
      frame_shape_(std::move(frame_shape)),
      version_(std::move(version)),
      salt_(salt_for("object-encoder", version_)) {
  if (dim_ <= 0) throw UsageError("object encoder dimension must be positive");
}

std::vector<float> StubObjectEncoder::encode(const ByteTensor& frame) const {
  require_shape(frame.shape, frame_shape_, "object frame");
  return hash_unit_vector(hash_bytes(frame.data, hash_shape(frame.shape, salt_)), dim_);
}

StubFaceEncoder::StubFaceEncoder(int dim, std::string version)
    : dim_(dim), version_(std::move(version)), salt_(salt_for("face-encoder", version_)) {
  if (dim_ <= 0) throw UsageError("face encoder dimension must be positive");
}

std::vector<std::vector<float>> StubFaceEncoder::detect_faces(const media::Image& image) const {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw DataError(fmt::format("undecodable image ({}x{}, {} bytes)", image.width, image.height,
                                image.rgb.size()));
  }
  const Shape dims{image.height, image.width, 3};
  const std::uint64_t h = hash_bytes(image.rgb, hash_shape(dims, salt_));
  const std::size_t count = (h >> 56) % 3;
  std::vector<std::vector<float>> faces;
  for (std::size_t i = 0; i < count; ++i) faces.push_back(hash_unit_vector(mix64(h + i + 1), dim_));
  return faces;
}

}  // namespace mmsi::extractors
