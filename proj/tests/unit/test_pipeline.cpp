#include <gtest/gtest.h>

#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/json_util.hpp"
#include "mmsi/pipeline.hpp"
#include "test_support.hpp"

namespace mmsi::pipeline {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct Fixture {
  TempDir root;
  std::vector<corpus::Post> posts = testing::make_posts(2);
  fs::path workdir = root / "work";
  MediaOptions options;

  Fixture() {
    fs::create_directories(root / "videos");
    testing::write_cut_video(root / posts[0].video_ref, 3.0, 10, {1.5});
    testing::write_cut_video(root / posts[1].video_ref, 2.0, 10, {});
  }

  bool preprocess(const corpus::Post& p) {
    auto transcoder = media::default_transcoder();
    auto detector = media::default_scene_detector();
    return preprocess_post(p, root.path(), workdir, options, *transcoder, *detector);
  }
};

extractors::AdapterSet stub_adapters() {
  extractors::AdapterOptions o;
  o.dims = {8, 8, 6, 4};
  o.gazetteer = {"Ada Lovelace"};
  return extractors::make_stub_adapters(o);
}

TEST(Pipeline, ParseExtractors) {
  EXPECT_EQ(parse_extractors("all").size(), 6u);
  EXPECT_EQ(parse_extractors("video,face"), (std::set<Extractor>{Extractor::video, Extractor::face}));
  EXPECT_THROW(parse_extractors("video,audio"), UsageError);
  EXPECT_THROW(parse_extractors("video,"), UsageError);
  for (Extractor e : parse_extractors("all")) {
    EXPECT_EQ(parse_extractors(extractor_name(e)), std::set<Extractor>{e});
  }
}

TEST(Pipeline, MediaPathsEncodePostIds) {
  const MediaPaths p = media_paths("/w", "a/b");
  EXPECT_EQ(p.video, fs::path("/w/a%2Fb.mp4"));
  EXPECT_EQ(p.keyframes, fs::path("/w/a%2Fb.keyframes.json"));
  corpus::Post post;
  post.video_ref = "v.mp4";
  EXPECT_EQ(resolve_video(post, "/media"), fs::path("/media/v.mp4"));
  post.video_ref = "/abs/v.mp4";
  EXPECT_EQ(resolve_video(post, "/media"), fs::path("/abs/v.mp4"));
}

TEST(Pipeline, PreprocessWritesOutputsAndSkips) {
  Fixture f;
  EXPECT_TRUE(f.preprocess(f.posts[0]));
  const MediaPaths paths = media_paths(f.workdir, f.posts[0].post_id);
  EXPECT_TRUE(fs::exists(paths.video));
  EXPECT_TRUE(fs::exists(paths.no_audio));
  EXPECT_FALSE(prepared_audio(paths).has_audio());
  const media::KeyframeIndex kf = media::keyframes_from_json(read_json_file(paths.keyframes));
  ASSERT_EQ(kf.source, media::KeyframeSource::detected);
  ASSERT_EQ(kf.timestamps.size(), 1u);
  EXPECT_NEAR(kf.timestamps[0], 1.5, 0.1);

  const auto before = fs::last_write_time(paths.keyframes);
  EXPECT_FALSE(f.preprocess(f.posts[0]));
  EXPECT_EQ(fs::last_write_time(paths.keyframes), before);
  f.options.force = true;
  EXPECT_TRUE(f.preprocess(f.posts[0]));
}

TEST(Pipeline, ConstantVideoFallsBackToPlaceholders) {
  Fixture f;
  f.preprocess(f.posts[1]);
  const auto kf = media::keyframes_from_json(read_json_file(media_paths(f.workdir, f.posts[1].post_id).keyframes));
  EXPECT_EQ(kf.source, media::KeyframeSource::placeholder);
  EXPECT_EQ(kf.timestamps, std::vector<double>{0.0});
}

TEST(Pipeline, MissingVideoNamesThePost) {
  Fixture f;
  corpus::Post ghost = f.posts[0];
  ghost.post_id = "ghost";
  ghost.video_ref = "videos/none.mp4";
  try {
    f.preprocess(ghost);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Pipeline, ExtractFillsEveryKindAndIsIdempotent) {
  Fixture f;
  f.preprocess(f.posts[0]);
  const extractors::FeatureCache cache(f.root / "cache");
  const auto adapters = stub_adapters();
  const auto all = parse_extractors("all");
  const ExtractStats first = extract_post_features(f.posts[0], f.workdir, adapters, cache, "v1", all);
  EXPECT_GT(first.computed, 0u);
  EXPECT_EQ(first.skipped, 0u);

  namespace k = harness::kinds;
  for (std::string_view kind : {k::kVideo, k::kObject, k::kCaption, k::kTranscript, k::kFaceProfile,
                                k::kKeyframeFaces}) {
    EXPECT_TRUE(cache.contains(f.posts[0].post_id, {std::string(kind), "v1"})) << kind;
  }
  const auto video = cache.get(f.posts[0].post_id, {std::string(k::kVideo), "v1"});
  EXPECT_EQ(video->shape, (Shape{1, 8}));
  EXPECT_EQ(cache.get(f.posts[0].post_id, {std::string(k::kCaption), "v1"})->shape, (Shape{2, 8}));
  EXPECT_TRUE(cache.get_transcript(f.posts[0].post_id).has_value());
  EXPECT_TRUE(cache.get_names(f.posts[0].post_id).has_value());

  const auto files_before = cache.list();
  const ExtractStats second = extract_post_features(f.posts[0], f.workdir, adapters, cache, "v1", all);
  EXPECT_EQ(second.computed, 0u);
  EXPECT_GT(second.skipped, 0u);
  EXPECT_EQ(cache.list(), files_before);
}

TEST(Pipeline, ExtractOnlySelectedKinds) {
  Fixture f;
  f.preprocess(f.posts[0]);
  const extractors::FeatureCache cache(f.root / "cache");
  const auto adapters = stub_adapters();
  extract_post_features(f.posts[0], f.workdir, adapters, cache, "v1", {Extractor::text});
  namespace k = harness::kinds;
  EXPECT_TRUE(cache.contains(f.posts[0].post_id, {std::string(k::kCaption), "v1"}));
  EXPECT_FALSE(cache.contains(f.posts[0].post_id, {std::string(k::kVideo), "v1"}));
  // Text needs the transcript, which is cached along the way.
  EXPECT_TRUE(cache.get_transcript(f.posts[0].post_id).has_value());
}

TEST(Pipeline, ExtractWithoutMediaIsADataError) {
  Fixture f;
  const extractors::FeatureCache cache(f.root / "cache");
  try {
    extract_post_features(f.posts[1], f.workdir, stub_adapters(), cache, "v1", {Extractor::video});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(f.posts[1].post_id), std::string::npos);
  }
}

}  // namespace
}  // namespace mmsi::pipeline
