#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmsi/errors.hpp"
#include "mmsi/extractors.hpp"
#include "mmsi/nn.hpp"

namespace mmsi::entity {

inline constexpr int kNameLength = 64;
inline constexpr int kNameHidden = 64;
inline constexpr int kNameEmbedding = 32;
inline constexpr int kMaxFaceNames = 4;
inline constexpr int kFaceFeatureWidth = 2 * kMaxFaceNames;
inline constexpr int kMaxKeyframes = 16;

// Lower-case ASCII codes, 0 = pad or unmappable.
using CharEncoding = std::array<std::uint8_t, kNameLength>;

// ASCII spelling of one code point: printable ASCII is lower-cased, Latin-1
// and Latin Extended-A letters lose their diacritics (some expand, e.g. "ß" ->
// "ss"). Returns "" for anything else.
std::string transliterate(char32_t code_point);

CharEncoding encode_name_chars(std::string_view utf8_name);

// Network input: codes scaled into [0, 1].
template <typename T>
nn::Vector<T> name_network_input(const CharEncoding& enc) {
  nn::Vector<T> x(kNameLength);
  for (int i = 0; i < kNameLength; ++i) x(i) = static_cast<T>(enc[i]) / T(127);
  return x;
}

template <typename T>
nn::Matrix<T> name_network_input(std::span<const CharEncoding> encs) {
  nn::Matrix<T> x(kNameLength, static_cast<Eigen::Index>(encs.size()));
  for (std::size_t j = 0; j < encs.size(); ++j) x.col(j) = name_network_input<T>(encs[j]);
  return x;
}

inline constexpr std::array<int, 3> kNameNetworkWidths = {kNameLength, kNameHidden, kNameEmbedding};

// Throws UsageError unless the network is exactly 64 -> 64 -> 32.
template <typename T>
void check_name_network(const nn::Mlp<T>& params) {
  if (params.widths() != std::vector<int>(kNameNetworkWidths.begin(), kNameNetworkWidths.end())) {
    throw UsageError("name network must map 64 -> 64 -> 32");
  }
}

template <typename T>
nn::Vector<T> embed_name(const CharEncoding& enc, const nn::Mlp<T>& params) {
  check_name_network(params);
  return params.forward(name_network_input<T>(enc));
}

// Elementwise mean, or the zero vector for an empty list.
template <typename T>
nn::Vector<T> pool_name_embeddings(std::span<const nn::Vector<T>> embeddings) {
  nn::Vector<T> out = nn::Vector<T>::Zero(kNameEmbedding);
  if (embeddings.empty()) return out;
  for (const auto& e : embeddings) out += e;
  return out / static_cast<T>(embeddings.size());
}

struct ReferenceProfile {
  std::string name;
  std::vector<float> embedding;  // unit norm
  int ref_count = 0;
};

// Mean of the first detected face of every image that has one, renormalized.
// nullopt when no image yields a face.
std::optional<ReferenceProfile> build_reference_profile(std::string_view name,
                                                        std::span<const media::Image> images,
                                                        const extractors::FaceEncoder& faces);

// 0 when either vector is all zeros.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Faces found in each keyframe, in keyframe order.
using KeyframeFaces = std::vector<std::vector<std::vector<float>>>;

// Entry (i, j): best cosine between profile i and any face of keyframe j; 0
// when the keyframe has no faces or the profile is absent.
Eigen::MatrixXd face_similarity_matrix(std::span<const std::optional<ReferenceProfile>> profiles,
                                       const KeyframeFaces& keyframe_faces);

// (max, mean) over keyframes for the first four names, zero padded.
std::array<float, kFaceFeatureWidth> pool_face_features(const Eigen::MatrixXd& similarity);

}  // namespace mmsi::entity
