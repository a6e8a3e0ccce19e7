#include <cctype>
#include <random>

#include <gtest/gtest.h>

#include "mmsi/entity.hpp"
#include "mmsi/errors.hpp"
#include "test_support.hpp"

namespace mmsi::entity {
namespace {

using testing::solid_image;

TEST(NameEncoding, AlExample) {
  const CharEncoding e = encode_name_chars("Al");
  EXPECT_EQ(e[0], 97);
  EXPECT_EQ(e[1], 108);
  for (int i = 2; i < kNameLength; ++i) EXPECT_EQ(e[i], 0);
}

TEST(NameEncoding, RandomAsciiNamesArePaddedLowerCase) {
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::string name = testing::random_ascii(rng, 64);
    const CharEncoding e = encode_name_chars(name);
    ASSERT_EQ(e.size(), 64u);
    for (std::size_t i = 0; i < 64; ++i) {
      if (i < name.size()) {
        EXPECT_EQ(e[i], std::tolower(static_cast<unsigned char>(name[i]))) << name;
      } else {
        EXPECT_EQ(e[i], 0) << name;
      }
    }
  }
}

TEST(NameEncoding, TruncatesAt64) {
  const CharEncoding e = encode_name_chars(std::string(100, 'Q'));
  for (std::uint8_t c : e) EXPECT_EQ(c, 'q');
}

TEST(NameEncoding, Transliteration) {
  const CharEncoding e = encode_name_chars("Jos\xC3\xA9 Stra\xC3\x9F" "e");
  const std::string expect = "jose strasse";
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(e[i], expect[i]);
  EXPECT_EQ(e[expect.size()], 0);
  EXPECT_EQ(transliterate(U'Ł'), "l");
  EXPECT_EQ(transliterate(U'中'), "");
  EXPECT_EQ(transliterate(U'\n'), "");
}

TEST(NameEncoding, UnmappableCharactersBecomeZero) {
  // CJK and malformed bytes occupy one zero slot each.
  const CharEncoding e = encode_name_chars("a\xE4\xB8\xAD" "b\xFF" "c");
  EXPECT_EQ(e[0], 'a');
  EXPECT_EQ(e[1], 0);
  EXPECT_EQ(e[2], 'b');
  EXPECT_EQ(e[3], 0);
  EXPECT_EQ(e[4], 'c');
}

TEST(NameNetwork, ShapesAndPooling) {
  std::mt19937_64 rng(1);
  const auto net = nn::Mlp<double>::init(kNameNetworkWidths, rng);
  const auto v = embed_name(encode_name_chars("Ada"), net);
  EXPECT_EQ(v.size(), kNameEmbedding);
  const std::vector<nn::Vector<double>> none;
  EXPECT_TRUE(pool_name_embeddings<double>(none).isZero());
  const std::vector<nn::Vector<double>> two = {v, 3 * v};
  EXPECT_TRUE(pool_name_embeddings<double>(two).isApprox(2 * v));
  const auto wrong = nn::Mlp<double>::init(std::vector<int>{64, 32}, rng);
  EXPECT_THROW(embed_name(encode_name_chars("Ada"), wrong), UsageError);
}

TEST(NameNetwork, InputScaledToUnitInterval) {
  const auto x = name_network_input<double>(encode_name_chars("~"));
  EXPECT_DOUBLE_EQ(x(0), 126.0 / 127.0);
  EXPECT_DOUBLE_EQ(x(1), 0.0);
}

// A face encoder that returns canned embeddings keyed by the red channel.
class ScriptedFaces : public extractors::FaceEncoder {
 public:
  std::map<int, std::vector<std::vector<float>>> table;
  extractors::ExtractorId id() const override { return {"scripted", "1"}; }
  int dim() const override { return 2; }
  std::vector<std::vector<float>> detect_faces(const media::Image& image) const override {
    auto it = table.find(image.rgb[0]);
    return it == table.end() ? std::vector<std::vector<float>>{} : it->second;
  }
};

TEST(ReferenceProfile, MeanOfFirstFacesRenormalized) {
  ScriptedFaces faces;
  faces.table[1] = {{1, 0}, {0, 1}};
  faces.table[2] = {{0, 1}};
  const std::vector<media::Image> imgs = {solid_image(2, 2, 1, 0, 0), solid_image(2, 2, 2, 0, 0),
                                          solid_image(2, 2, 3, 0, 0)};
  const auto p = build_reference_profile("X", imgs, faces);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->ref_count, 2);
  EXPECT_NEAR(p->embedding[0], 1 / std::sqrt(2.0), 1e-6);
  EXPECT_NEAR(p->embedding[1], 1 / std::sqrt(2.0), 1e-6);
  EXPECT_FALSE(build_reference_profile("X", std::span(imgs).subspan(2), faces).has_value());
}

TEST(Cosine, EdgeCases) {
  const std::vector<float> a = {1, 0}, b = {0, 2}, z = {0, 0}, c = {3, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, c), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, z), 0.0);
  EXPECT_THROW(cosine_similarity(a, std::vector<float>{1}), DataError);
}

TEST(FaceSimilarity, BestFacePerKeyframeAndPooling) {
  const std::vector<std::optional<ReferenceProfile>> profiles = {
      ReferenceProfile{"A", {1, 0}, 1}, std::nullopt, ReferenceProfile{"C", {0, 1}, 1}};
  const KeyframeFaces kf = {{{0, 1}, {1, 0}}, {}, {{0.6f, 0.8f}}};
  const Eigen::MatrixXd m = face_similarity_matrix(profiles, kf);
  ASSERT_EQ(m.rows(), 3);
  ASSERT_EQ(m.cols(), 3);
  EXPECT_NEAR(m(0, 0), 1.0, 1e-6);
  EXPECT_EQ(m(0, 1), 0.0);
  EXPECT_NEAR(m(0, 2), 0.6, 1e-6);
  EXPECT_TRUE(m.row(1).isZero());
  EXPECT_NEAR(m(2, 2), 0.8, 1e-6);

  const auto pooled = pool_face_features(m);
  EXPECT_NEAR(pooled[0], 1.0, 1e-6);
  EXPECT_NEAR(pooled[1], 1.6 / 3, 1e-6);
  EXPECT_EQ(pooled[2], 0.0f);
  EXPECT_EQ(pooled[3], 0.0f);
  EXPECT_NEAR(pooled[4], 1.0, 1e-6);
  EXPECT_NEAR(pooled[5], 1.8 / 3, 1e-6);
  EXPECT_EQ(pooled[6], 0.0f);
  EXPECT_EQ(pooled[7], 0.0f);
}

TEST(FaceSimilarity, LimitsAndErrors) {
  const std::vector<std::optional<ReferenceProfile>> one = {ReferenceProfile{"A", {1, 0}, 1}};
  EXPECT_THROW(face_similarity_matrix(one, KeyframeFaces(17)), UsageError);
  EXPECT_THROW(face_similarity_matrix(one, KeyframeFaces{{{1, 0, 0}}}), DataError);
  // Only the first four names are pooled.
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(6, 2);
  const auto pooled = pool_face_features(m);
  for (float v : pooled) EXPECT_EQ(v, 1.0f);
  for (float v : pool_face_features(Eigen::MatrixXd(3, 0))) EXPECT_EQ(v, 0.0f);
}

}  // namespace
}  // namespace mmsi::entity
