#include <map>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mmsi/corpus.hpp"
#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"
#include "test_support.hpp"

namespace mmsi::corpus {
namespace {

using testing::make_posts;
using testing::TempDir;

// --- reactions -----------------------------------------------------------------

TEST(Reactions, NormalizedCountsSumToOne) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> count(0, 1'000'000);
  std::bernoulli_distribution zero(0.3);
  for (int trial = 0; trial < 1000; ++trial) {
    ReactionCounts raw{};
    for (auto& c : raw) c = zero(rng) ? 0 : count(rng);
    raw[trial % kReactionCount] += 1;
    const ReactionVector v = normalize_reactions(raw);
    const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
    double sum = 0;
    for (std::size_t i = 0; i < kReactionCount; ++i) {
      EXPECT_NEAR(v[i], static_cast<double>(raw[i]) / total, 1e-12);
      EXPECT_GE(v[i], 0.0);
      sum += v[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Reactions, ZeroTotalGivesZeroVector) {
  const ReactionVector v = normalize_reactions(ReactionCounts{});
  for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(Reactions, KeyedVariant) {
  const ReactionVector v = normalize_reactions(std::map<std::string, std::int64_t>{{"Like", 3}, {"Angry", 1}});
  EXPECT_DOUBLE_EQ(v[0], 0.75);
  EXPECT_DOUBLE_EQ(v[5], 0.25);
  EXPECT_THROW(normalize_reactions(std::map<std::string, std::int64_t>{{"Meh", 1}}), DataError);
  EXPECT_THROW(normalize_reactions(std::map<std::string, std::int64_t>{{"Like", -1}}), DataError);
}

TEST(Reactions, CanonicalOrder) {
  ASSERT_EQ(kReactionNames.size(), 7u);
  EXPECT_EQ(reaction_index("Like"), 0u);
  EXPECT_EQ(reaction_index("Care"), 6u);
  EXPECT_FALSE(reaction_index("like").has_value());
}

// --- manifest -------------------------------------------------------------------

TEST(Manifest, RoundTrip) {
  TempDir dir;
  auto posts = make_posts(5);
  posts[2].posted_at = "2020-06-01T12:00:00Z";
  posts[3].caption_text = "unicode caption \xC3\xA9\xE2\x82\xAC \"quoted\"\nnewline";
  write_manifest(dir / "m.jsonl", posts);
  EXPECT_EQ(load_manifest(dir / "m.jsonl"), posts);
}

TEST(Manifest, SkipsBlankLines) {
  const auto posts = parse_manifest(
      "\n{\"post_id\":\"a\",\"source_org\":\"o\",\"caption_text\":\"c\",\"video_ref\":\"v\",\"reactions\":{}}\n\n");
  ASSERT_EQ(posts.size(), 1u);
  EXPECT_FALSE(posts[0].posted_at.has_value());
}

TEST(Manifest, ErrorsNameTheLine) {
  const std::string good =
      "{\"post_id\":\"a\",\"source_org\":\"o\",\"caption_text\":\"c\",\"video_ref\":\"v\",\"reactions\":{}}\n";
  auto message = [](const std::string& text) {
    try {
      parse_manifest(text, "m.jsonl");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message(good + "{not json\n").find("m.jsonl:2"), std::string::npos);
  EXPECT_NE(message(good + good).find("duplicate post_id"), std::string::npos);
  EXPECT_NE(message("{\"post_id\":\"a\"}\n").find("missing key"), std::string::npos);
  EXPECT_NE(message("{\"post_id\":\"a\",\"source_org\":\"o\",\"caption_text\":\"c\",\"video_ref\":\"v\","
                    "\"reactions\":{\"Like\":-2}}")
                .find("negative"),
            std::string::npos);
}

TEST(Manifest, MissingFileIsDataError) {
  TempDir dir;
  EXPECT_THROW(load_manifest(dir / "none.jsonl"), DataError);
}

// --- examples --------------------------------------------------------------------

void check_example_properties(std::span<const Post> posts, std::span<const Example> examples) {
  ASSERT_EQ(examples.size(), posts.size());
  std::set<std::string> ids;
  std::set<std::string> donors;
  std::size_t inconsistent = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Example& e = examples[i];
    EXPECT_EQ(e.video_post_id, posts[i].post_id) << "output follows manifest order";
    EXPECT_TRUE(ids.insert(e.example_id).second);
    if (e.label == Label::pristine) {
      EXPECT_EQ(e.caption_post_id, e.video_post_id);
    } else {
      ++inconsistent;
      EXPECT_NE(e.caption_post_id, e.video_post_id) << "self-swap";
      EXPECT_TRUE(donors.insert(e.caption_post_id).second) << "donor used twice";
    }
  }
  EXPECT_EQ(inconsistent, posts.size() / 2);
}

TEST(Examples, PropertiesOverRandomSizesAndSeeds) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(2, 300);
  for (int trial = 0; trial < 60; ++trial) {
    const auto posts = make_posts(size(rng));
    const std::uint64_t seed = rng();
    const auto ex = generate_examples(posts, seed);
    check_example_properties(posts, ex);
    EXPECT_EQ(serialize_examples(ex), serialize_examples(generate_examples(posts, seed)));
  }
}

TEST(Examples, TwoPostsSwapEachOther) {
  const auto posts = make_posts(2);
  const auto ex = generate_examples(posts, 3);
  check_example_properties(posts, ex);
}

TEST(Examples, SeedChangesAssignment) {
  const auto posts = make_posts(100);
  EXPECT_NE(serialize_examples(generate_examples(posts, 1)), serialize_examples(generate_examples(posts, 2)));
}

TEST(Examples, Errors) {
  EXPECT_THROW(generate_examples(make_posts(1), 0), DataError);
  auto dup = make_posts(3);
  dup[2].post_id = dup[0].post_id;
  EXPECT_THROW(generate_examples(dup, 0), DataError);
}

TEST(Examples, FileRoundTripAndLabelCheck) {
  TempDir dir;
  const auto ex = generate_examples(make_posts(20), 4);
  write_examples(dir / "ex.jsonl", ex);
  EXPECT_EQ(load_examples(dir / "ex.jsonl"), ex);
  write_file_atomic(dir / "bad.jsonl",
                    std::string_view("{\"example_id\":\"e\",\"video_post_id\":\"a\",\"caption_post_id\":\"b\","
                                     "\"label\":\"pristine\"}\n"));
  EXPECT_THROW(load_examples(dir / "bad.jsonl"), DataError);
}

// --- split -----------------------------------------------------------------------

TEST(Split, PartitionSizesDisjointnessAndDonors) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> size(20, 400);
  std::uniform_real_distribution<double> vf(0.0, 0.3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = size(rng);
    const auto posts = make_posts(n);
    const std::uint64_t seed = rng();
    const double val_fraction = vf(rng);
    const auto ex = generate_examples(posts, seed);
    const DatasetSplit s = split_dataset(ex, seed, val_fraction);

    ASSERT_EQ(s.examples.size(), n);
    ASSERT_EQ(s.assignment.partitions.size(), n);
    const auto n_test = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    // One example per video here, so the greedy fill hits the targets exactly.
    EXPECT_EQ(s.assignment.count(Partition::test), n_test);
    EXPECT_EQ(s.assignment.count(Partition::val), n_val);
    EXPECT_EQ(s.assignment.count(Partition::train), n - n_test - n_val);
    // Held-out partitions keep the floor(n/2) inconsistent share.
    std::map<Partition, std::size_t> inconsistent;
    for (const Example& e : s.examples) {
      if (e.label == Label::inconsistent) ++inconsistent[s.assignment.partitions.at(e.example_id)];
    }
    const double share = static_cast<double>(n / 2) / static_cast<double>(n);
    EXPECT_EQ(inconsistent[Partition::test], static_cast<std::size_t>(std::llround(n_test * share))) << n;
    EXPECT_EQ(inconsistent[Partition::val], static_cast<std::size_t>(std::llround(n_val * share))) << n;

    std::map<std::string, Partition> video_part;
    for (const Example& e : s.examples) {
      const Partition p = s.assignment.partitions.at(e.example_id);
      auto [it, inserted] = video_part.emplace(e.video_post_id, p);
      EXPECT_TRUE(inserted || it->second == p);
    }
    std::set<std::string> used_donors;
    for (const Example& e : s.examples) {
      if (e.label != Label::inconsistent) continue;
      EXPECT_NE(e.caption_post_id, e.video_post_id);
      if (s.cross_partition_swaps == 0) {
        EXPECT_EQ(video_part.at(e.caption_post_id), video_part.at(e.video_post_id))
            << "caption donor must come from the same partition";
      }
    }
  }
}

TEST(Split, EveryPartitionSeesBothLabels) {
  // Regression: the split stream must not replay the example generator's shuffle.
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto posts = make_posts(200);
    const DatasetSplit s = split_dataset(generate_examples(posts, seed), seed, 0.15);
    std::map<Partition, std::array<int, 2>> labels;
    for (const Example& e : s.examples) {
      ++labels[s.assignment.partitions.at(e.example_id)][e.label == Label::inconsistent ? 1 : 0];
    }
    for (Partition p : {Partition::train, Partition::val, Partition::test}) {
      EXPECT_GT(labels[p][0], 0) << "seed " << seed;
      EXPECT_GT(labels[p][1], 0) << "seed " << seed;
    }
  }
}

TEST(Split, GroupsExamplesSharingAVideo) {
  std::vector<Example> ex;
  for (int v = 0; v < 30; ++v) {
    for (int k = 0; k < 3; ++k) {
      ex.push_back({"e" + std::to_string(v) + "-" + std::to_string(k), "v" + std::to_string(v),
                    "v" + std::to_string(v), Label::pristine});
    }
  }
  const DatasetSplit s = split_dataset(ex, 12, 0.15);
  for (int v = 0; v < 30; ++v) {
    const std::string base = "e" + std::to_string(v) + "-";
    EXPECT_EQ(s.assignment.partitions.at(base + "0"), s.assignment.partitions.at(base + "1"));
    EXPECT_EQ(s.assignment.partitions.at(base + "0"), s.assignment.partitions.at(base + "2"));
  }
}

TEST(Split, DeterministicAndJsonRoundTrip) {
  const auto ex = generate_examples(make_posts(50), 8);
  const DatasetSplit a = split_dataset(ex, 8, 0.15);
  const DatasetSplit b = split_dataset(ex, 8, 0.15);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.examples, b.examples);
  EXPECT_EQ(split_from_json(split_to_json(a.assignment)), a.assignment);
}

TEST(Split, RejectsBadArguments) {
  const auto ex = generate_examples(make_posts(10), 0);
  EXPECT_THROW(split_dataset({}, 0, 0.15), UsageError);
  EXPECT_THROW(split_dataset(ex, 0, 0.85), UsageError);
  EXPECT_THROW(split_dataset(ex, 0, -0.1), UsageError);
}

TEST(Labels, StringRoundTrip) {
  for (Label l : {Label::pristine, Label::inconsistent}) EXPECT_EQ(label_from_string(to_string(l)), l);
  for (Partition p : {Partition::train, Partition::val, Partition::test}) {
    EXPECT_EQ(partition_from_string(to_string(p)), p);
  }
  EXPECT_THROW(label_from_string("maybe"), DataError);
}

}  // namespace
}  // namespace mmsi::corpus
