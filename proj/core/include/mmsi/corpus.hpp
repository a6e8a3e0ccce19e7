#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mmsi::corpus {

inline constexpr std::size_t kReactionCount = 7;

// Canonical order used by every reaction vector and file format.
inline constexpr std::array<std::string_view, kReactionCount> kReactionNames = {
    "Like", "Love", "Wow", "Haha", "Sad", "Angry", "Care"};

using ReactionCounts = std::array<std::int64_t, kReactionCount>;
using ReactionVector = std::array<double, kReactionCount>;

std::optional<std::size_t> reaction_index(std::string_view name);

struct Post {
  std::string post_id;
  std::string source_org;
  std::string caption_text;
  std::string video_ref;
  ReactionCounts reactions_raw{};
  std::optional<std::string> posted_at;

  bool operator==(const Post&) const = default;
};

enum class Label { pristine, inconsistent };

struct Example {
  std::string example_id;
  std::string video_post_id;
  std::string caption_post_id;
  Label label = Label::pristine;

  bool operator==(const Example&) const = default;
};

enum class Partition { train, val, test };

struct SplitAssignment {
  std::map<std::string, Partition> partitions;  // example_id -> partition
  std::uint64_t seed = 0;

  std::size_t count(Partition p) const;
  bool operator==(const SplitAssignment&) const = default;
};

// Result of splitting: inconsistent examples whose caption donor landed in a
// different partition get a donor re-drawn from their own partition, so the
// example list is returned alongside the assignment.
struct DatasetSplit {
  SplitAssignment assignment;
  std::vector<Example> examples;
  // Inconsistent examples that kept a cross-partition donor because their own
  // partition had no other post to draw from.
  std::size_t cross_partition_swaps = 0;
};

inline constexpr double kTestFraction = 0.15;

std::string_view to_string(Label label);
Label label_from_string(std::string_view text);
std::string_view to_string(Partition partition);
Partition partition_from_string(std::string_view text);

// Divides each count by the total. All-zero input maps to the all-zero vector.
ReactionVector normalize_reactions(const ReactionCounts& raw);
// Keyed variant; rejects unknown reaction names and negative counts.
ReactionVector normalize_reactions(const std::map<std::string, std::int64_t>& raw);

// --- manifest / examples / split files -------------------------------------

Post post_from_json(const nlohmann::json& record);
nlohmann::json post_to_json(const Post& post);

// Line-delimited JSON, one post per line. Blank lines are skipped. Errors name
// the offending line number or duplicate id.
std::vector<Post> load_manifest(const std::filesystem::path& path);
std::vector<Post> parse_manifest(std::string_view text, std::string_view origin = "<memory>");
void write_manifest(const std::filesystem::path& path, std::span<const Post> posts);

std::vector<Example> load_examples(const std::filesystem::path& path);
std::string serialize_examples(std::span<const Example> examples);
void write_examples(const std::filesystem::path& path, std::span<const Example> examples);

nlohmann::json split_to_json(const SplitAssignment& split);
SplitAssignment split_from_json(const nlohmann::json& value);

// --- dataset construction ---------------------------------------------------

// One example per post: a uniformly chosen half of the posts (floor(n/2))
// become inconsistent, each taking its caption from a distinct other post.
// Output follows manifest order and depends only on (posts, seed).
std::vector<Example> generate_examples(std::span<const Post> posts, std::uint64_t seed);

// 15% test; val_fraction of all examples to validation; the rest train.
// Test and val follow the overall label proportions, so generated examples give
// a balanced test set. Examples sharing a video_post_id stay together.
DatasetSplit split_dataset(std::span<const Example> examples, std::uint64_t seed,
                           double val_fraction);

}  // namespace mmsi::corpus
