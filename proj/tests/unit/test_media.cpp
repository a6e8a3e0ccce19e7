#include <cmath>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "mmsi/errors.hpp"
#include "mmsi/media.hpp"
#include "test_support.hpp"

namespace mmsi::media {
namespace {

using testing::solid_image;
using testing::TempDir;
using testing::write_cut_video;

// --- keyframes -------------------------------------------------------------------

TEST(Placeholder, TenSecondsAtDefaultInterval) {
  const KeyframeIndex k = placeholder_keyframes(10.0);
  EXPECT_EQ(k.source, KeyframeSource::placeholder);
  EXPECT_EQ(k.timestamps, (std::vector<double>{0.0, 3.2, 6.4, 9.6}));
}

TEST(Placeholder, StrictlyBelowDuration) {
  EXPECT_EQ(placeholder_keyframes(9.6).timestamps, (std::vector<double>{0.0, 3.2, 6.4}));
  EXPECT_EQ(placeholder_keyframes(0.5).timestamps, (std::vector<double>{0.0}));
  EXPECT_EQ(placeholder_keyframes(2.0, 0.5).timestamps.size(), 4u);
}

TEST(Placeholder, Errors) {
  EXPECT_THROW(placeholder_keyframes(0.0), DataError);
  EXPECT_THROW(placeholder_keyframes(5.0, 0.0), UsageError);
}

TEST(Keyframes, JsonRoundTrip) {
  const KeyframeIndex k{{0.0, 1.5, 4.25}, KeyframeSource::detected};
  EXPECT_EQ(keyframes_from_json(keyframes_to_json(k)), k);
  EXPECT_EQ(keyframes_from_json(keyframes_to_json(placeholder_keyframes(7))), placeholder_keyframes(7));
  EXPECT_THROW(keyframes_from_json(nlohmann::json{{"timestamps", {0}}, {"source", "guess"}}), DataError);
  EXPECT_THROW(keyframes_from_json(nlohmann::json::object()), DataError);
}

TEST(Keyframes, ConstantVideoFallsBackToPlaceholders) {
  TempDir dir;
  write_cut_video(dir / "flat.mp4", 10.0, 10, {});
  const KeyframeIndex k = detect_keyframes(dir / "flat.mp4");
  EXPECT_EQ(k.source, KeyframeSource::placeholder);
  EXPECT_EQ(k.timestamps, (std::vector<double>{0.0, 3.2, 6.4, 9.6}));
}

TEST(Keyframes, HardCutsAreDetected) {
  TempDir dir;
  write_cut_video(dir / "cuts.mp4", 8.0, 10, {2.0, 5.0});
  const KeyframeIndex k = detect_keyframes(dir / "cuts.mp4");
  EXPECT_EQ(k.source, KeyframeSource::detected);
  ASSERT_EQ(k.timestamps.size(), 2u);
  EXPECT_NEAR(k.timestamps[0], 2.0, 0.1);
  EXPECT_NEAR(k.timestamps[1], 5.0, 0.1);
}

TEST(Keyframes, HigherThresholdNeverFindsMore) {
  TempDir dir;
  // Cuts of decreasing contrast: dark->light is strong, the colour swaps are weaker.
  write_cut_video(dir / "mixed.mp4", 8.0, 10, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  std::size_t previous = SIZE_MAX;
  for (double th : {0.05, 0.2, 0.4, 0.6, 0.9}) {
    FrameDifferenceDetector det;
    double duration = 0;
    const std::size_t found = det.scene_changes(dir / "mixed.mp4", th, &duration).size();
    EXPECT_LE(found, previous) << "threshold " << th;
    EXPECT_NEAR(duration, 8.0, 1e-9);
    previous = found;
  }
}

class FixedDetector : public SceneDetector {
 public:
  FixedDetector(std::vector<double> t, double d) : times_(std::move(t)), duration_(d) {}
  std::vector<double> scene_changes(const std::filesystem::path&, double, double* duration) override {
    *duration = duration_;
    return times_;
  }

 private:
  std::vector<double> times_;
  double duration_;
};

TEST(Keyframes, DetectorOutputIsSortedDedupedAndClipped) {
  FixedDetector det({4.0, 1.0, 1.0, -1.0, 12.0, 2.5}, 10.0);
  const KeyframeIndex k = detect_keyframes("unused.mp4", det);
  EXPECT_EQ(k.timestamps, (std::vector<double>{1.0, 2.5, 4.0}));
  FixedDetector zero({}, 0.0);
  EXPECT_THROW(detect_keyframes("unused.mp4", zero), DataError);
}

TEST(Keyframes, ParsesToolTimestamps) {
  const std::string out =
      "[Parsed_showinfo_1 @ 0x1] n:   0 pts:  20480 pts_time:2       duration:512\n"
      "[Parsed_showinfo_1 @ 0x1] n:   1 pts:  51200 pts_time:5.04 pos: 1\n"
      "junk pts_time:1e1\n";
  EXPECT_EQ(parse_pts_times(out), (std::vector<double>{2.0, 5.04, 10.0}));
  EXPECT_TRUE(parse_pts_times("nothing here").empty());
}

TEST(Keyframes, CommandDetectorReportsToolFailure) {
  TempDir dir;
  write_cut_video(dir / "v.mp4", 1.0, 10, {});
  CommandSceneDetector det("echo broken >&2; exit 4");
  EXPECT_THROW(detect_keyframes(dir / "v.mp4", det), DataError);
  CommandSceneDetector fake("echo 'pts_time:0.5'");
  const KeyframeIndex k = detect_keyframes(dir / "v.mp4", fake);
  EXPECT_EQ(k.timestamps, (std::vector<double>{0.5}));
}

// --- transcoding -------------------------------------------------------------------

TEST(Transcode, StandardizesSizeAndRate) {
  TempDir dir;
  testing::write_video(dir / "in.mp4", 2.0, 25, 96, 64, [](int i) {
    return solid_image(96, 64, static_cast<std::uint8_t>(i * 5), 40, 90);
  });
  LibavTranscoder tc;
  const auto out = transcode_video(dir / "in.mp4", dir / "out" / "std.mp4", VideoSpec{}, tc);
  const VideoInfo info = probe_video(out);
  EXPECT_EQ(info.width, 256);
  EXPECT_EQ(info.height, 256);
  EXPECT_NEAR(info.frame_rate, 10.0, 1e-3);
  VideoReader r(out);
  Image f;
  int frames = 0;
  while (r.read(f)) ++frames;
  EXPECT_NEAR(frames, 20, 1);
}

TEST(Transcode, FailureLeavesNoOutput) {
  TempDir dir;
  write_cut_video(dir / "in.mp4", 1.0, 10, {});
  CommandTranscoder broken("echo nope >&2; exit 1");
  EXPECT_THROW(transcode_video(dir / "in.mp4", dir / "out.mp4", VideoSpec{}, broken), DataError);
  EXPECT_FALSE(std::filesystem::exists(dir / "out.mp4"));
  std::size_t leftovers = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) leftovers += e.path() != dir / "in.mp4";
  EXPECT_EQ(leftovers, 0u);
}

TEST(Transcode, MissingInputIsDataError) {
  TempDir dir;
  LibavTranscoder tc;
  EXPECT_THROW(transcode_video(dir / "none.mp4", dir / "out.mp4", VideoSpec{}, tc), DataError);
  VideoSpec avi;
  avi.container = "avi";
  EXPECT_THROW(transcode_video(dir / "none.mp4", dir / "out.avi", avi, tc), UsageError);
}

TEST(Transcode, UndecodableInputIsDataError) {
  TempDir dir;
  {
    std::ofstream(dir / "junk.mp4") << "this is not a video";
  }
  LibavTranscoder tc;
  EXPECT_THROW(transcode_video(dir / "junk.mp4", dir / "out.mp4", VideoSpec{}, tc), DataError);
  EXPECT_FALSE(std::filesystem::exists(dir / "out.mp4"));
}

// --- clips ---------------------------------------------------------------------------

TEST(Clips, TwentyKeyframesGiveSixteenFullClips) {
  TempDir dir;
  write_cut_video(dir / "v.mp4", 10.0, 10, {}, 256, 256);
  const KeyframeIndex k = placeholder_keyframes(10.0, 0.5);
  ASSERT_EQ(k.timestamps.size(), 20u);
  const ClipSet clips = extract_clips(dir / "v.mp4", k);
  ASSERT_EQ(clips.clip_count(), 16u);
  for (const ByteTensor& c : clips.clips) {
    EXPECT_EQ(c.shape, (Shape{32, 256, 256, 3}));
    EXPECT_EQ(c.numel(), 32u * 256 * 256 * 3);
  }
  EXPECT_EQ(clips.origin_timestamps.front(), 0.0);
  EXPECT_DOUBLE_EQ(clips.origin_timestamps.back(), 7.5);
}

TEST(Clips, FramesComeFromTheKeyframe) {
  TempDir dir;
  write_cut_video(dir / "v.mp4", 6.0, 10, {2.0, 4.0}, 256, 256);
  const ClipSet clips = extract_clips(dir / "v.mp4", KeyframeIndex{{0.0, 2.0, 4.0}, KeyframeSource::detected});
  ASSERT_EQ(clips.clip_count(), 3u);
  // Palette of write_cut_video: scene 0 dark, scene 1 light, scene 2 red.
  const Image a = clips.first_frame(0);
  const Image b = clips.first_frame(1);
  const Image c = clips.first_frame(2);
  EXPECT_NEAR(a.rgb[0], 20, 12);
  EXPECT_NEAR(b.rgb[0], 230, 12);
  EXPECT_NEAR(c.rgb[0], 200, 12);
  EXPECT_NEAR(c.rgb[1], 30, 12);
  EXPECT_EQ(clips.first_frame_tensor(1).shape, (Shape{256, 256, 3}));
  // The last clip runs past the end and repeats the final frame.
  const ByteTensor& tail = clips.clips[2];
  const std::size_t frame = 256 * 256 * 3;
  EXPECT_TRUE(std::equal(tail.data.end() - frame, tail.data.end(), tail.data.end() - 2 * frame));
}

TEST(Clips, RejectsWrongGeometryAndEmptyIndex) {
  TempDir dir;
  write_cut_video(dir / "small.mp4", 1.0, 10, {});
  EXPECT_THROW(extract_clips(dir / "small.mp4", placeholder_keyframes(1.0)), DataError);
  EXPECT_THROW(extract_clips(dir / "small.mp4", KeyframeIndex{}), UsageError);
}

// --- audio ----------------------------------------------------------------------------

TEST(Biquad, ButterworthCornerAndBands) {
  const double fs = 16000;
  const Biquad hp = Biquad::highpass(200, fs);
  const Biquad lp = Biquad::lowpass(3000, fs);
  EXPECT_NEAR(hp.magnitude(200, fs), 1 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(lp.magnitude(3000, fs), 1 / std::sqrt(2.0), 1e-9);
  EXPECT_LT(hp.magnitude(20, fs), 0.02);
  EXPECT_NEAR(hp.magnitude(4000, fs), 1.0, 0.01);
  EXPECT_NEAR(lp.magnitude(100, fs), 1.0, 0.01);
  EXPECT_LT(lp.magnitude(7500, fs), 0.05);
}

// Steady-state gain measured by filtering a sinusoid, independent of magnitude().
double measured_gain(Biquad f, double freq, double fs) {
  double peak = 0;
  for (int n = 0; n < 16000; ++n) {
    const double y = f.process(std::sin(2 * std::numbers::pi * freq * n / fs));
    if (n > 8000) peak = std::max(peak, std::abs(y));
  }
  return peak;
}

TEST(Biquad, MagnitudeMatchesSimulation) {
  const double fs = 16000;
  for (double freq : {50.0, 200.0, 700.0, 2500.0, 3000.0, 5000.0}) {
    EXPECT_NEAR(measured_gain(Biquad::highpass(200, fs), freq, fs), Biquad::highpass(200, fs).magnitude(freq, fs),
                0.01)
        << freq;
    EXPECT_NEAR(measured_gain(Biquad::lowpass(3000, fs), freq, fs), Biquad::lowpass(3000, fs).magnitude(freq, fs),
                0.01)
        << freq;
  }
}

TEST(Audio, BandLimitSaturates) {
  std::vector<std::int16_t> s(2000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = (i / 20) % 2 ? 32767 : -32768;
  band_limit(s, AudioSpec{});
  for (std::int16_t v : s) {
    EXPECT_GE(v, -32768);
    EXPECT_LE(v, 32767);
  }
}

TEST(Audio, WavRoundTrip) {
  TempDir dir;
  std::vector<std::int16_t> s = {0, 1, -1, 32767, -32768, 1234};
  write_wav(dir / "a.wav", s, 16000);
  int rate = 0;
  EXPECT_EQ(read_wav(dir / "a.wav", &rate), s);
  EXPECT_EQ(rate, 16000);
  EXPECT_EQ(std::filesystem::file_size(dir / "a.wav"), 44u + 2 * s.size());
}

TEST(Audio, PreparedFromVideoWithAudio) {
  TempDir dir;
  AudioTrack track;
  track.sample_rate = 44100;
  track.channels = 2;
  for (int i = 0; i < 44100; ++i) {
    const auto v = static_cast<std::int16_t>(8000 * std::sin(2 * std::numbers::pi * 1000 * i / 44100.0));
    track.interleaved.push_back(v);
    track.interleaved.push_back(v);
  }
  testing::write_video(dir / "talk.mp4", 1.0, 10, 64, 64, [](int) { return solid_image(64, 64, 1, 2, 3); }, track);
  EXPECT_TRUE(probe_video(dir / "talk.mp4").has_audio);
  const PreparedAudio a = prepare_audio(dir / "talk.mp4", dir / "talk.wav");
  ASSERT_TRUE(a.has_audio());
  int rate = 0;
  const auto samples = read_wav(*a.wav, &rate);
  EXPECT_EQ(rate, 16000);
  EXPECT_NEAR(static_cast<double>(samples.size()), 16000.0, 1600.0);
  // A 1 kHz tone sits inside the pass band: most of its energy survives.
  double peak = 0;
  for (std::size_t i = samples.size() / 4; i < 3 * samples.size() / 4; ++i) {
    peak = std::max(peak, std::abs(static_cast<double>(samples[i])));
  }
  EXPECT_GT(peak, 5000.0);
}

TEST(Audio, SilentVideoHasNoAudioMarker) {
  TempDir dir;
  write_cut_video(dir / "mute.mp4", 1.0, 10, {});
  const PreparedAudio a = prepare_audio(dir / "mute.mp4", dir / "mute.wav");
  EXPECT_FALSE(a.has_audio());
  EXPECT_FALSE(std::filesystem::exists(dir / "mute.wav"));
}

TEST(MediaIo, PngRoundTrip) {
  TempDir dir;
  Image img = solid_image(7, 5, 10, 20, 30);
  img.rgb[4] = 200;
  save_png(dir / "x.png", img);
  EXPECT_EQ(load_image(dir / "x.png"), img);
}

}  // namespace
}  // namespace mmsi::media
