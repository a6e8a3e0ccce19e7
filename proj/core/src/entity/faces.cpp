#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mmsi/entity.hpp"
#include "mmsi/errors.hpp"

namespace mmsi::entity {

std::optional<ReferenceProfile> build_reference_profile(std::string_view name,
                                                        std::span<const media::Image> images,
                                                        const extractors::FaceEncoder& faces) {
  std::vector<double> sum;
  int used = 0;
  for (const media::Image& img : images) {
    const auto detected = faces.detect_faces(img);
    if (detected.empty()) continue;
    const std::vector<float>& first = detected.front();
    if (sum.empty()) sum.assign(first.size(), 0.0);
    if (first.size() != sum.size()) {
      throw DataError(fmt::format("face embeddings for \"{}\" have inconsistent widths", name));
    }
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += first[d];
    ++used;
  }
  if (used == 0) return std::nullopt;
  double norm2 = 0.0;
  for (double v : sum) norm2 += v * v;
  ReferenceProfile profile{std::string(name), std::vector<float>(sum.size(), 0.0f), used};
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t d = 0; d < sum.size(); ++d) profile.embedding[d] = static_cast<float>(sum[d] * inv);
  }
  return profile;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DataError(fmt::format("cosine of vectors with widths {} and {}", a.size(), b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

Eigen::MatrixXd face_similarity_matrix(std::span<const std::optional<ReferenceProfile>> profiles,
                                       const KeyframeFaces& keyframe_faces) {
  if (keyframe_faces.size() > static_cast<std::size_t>(kMaxKeyframes)) {
    throw UsageError(fmt::format("{} keyframes given, at most {} allowed", keyframe_faces.size(),
                                 kMaxKeyframes));
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(profiles.size()),
                                            static_cast<Eigen::Index>(keyframe_faces.size()));
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (!profiles[i]) continue;
    for (std::size_t j = 0; j < keyframe_faces.size(); ++j) {
      const auto& faces = keyframe_faces[j];
      if (faces.empty()) continue;
      double best = -1.0;
      for (const auto& f : faces) {
        if (f.size() != profiles[i]->embedding.size()) {
          throw DataError(fmt::format("profile \"{}\" has width {} but a keyframe face has width {}",
                                      profiles[i]->name, profiles[i]->embedding.size(), f.size()));
        }
        best = std::max(best, cosine_similarity(profiles[i]->embedding, f));
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = best;
    }
  }
  return m;
}

std::array<float, kFaceFeatureWidth> pool_face_features(const Eigen::MatrixXd& similarity) {
  std::array<float, kFaceFeatureWidth> out{};
  const Eigen::Index names = std::min<Eigen::Index>(similarity.rows(), kMaxFaceNames);
  if (similarity.cols() == 0) return out;
  for (Eigen::Index i = 0; i < names; ++i) {
    out[2 * i] = static_cast<float>(similarity.row(i).maxCoeff());
    out[2 * i + 1] = static_cast<float>(similarity.row(i).mean());
  }
  return out;
}

}  // namespace mmsi::entity
