#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <fmt/format.h>

#include "mmsi/corpus.hpp"
#include "mmsi/errors.hpp"
#include "mmsi/hashing.hpp"

namespace mmsi::corpus {

DatasetSplit split_dataset(std::span<const Example> examples, std::uint64_t seed,
                           double val_fraction) {
  const std::size_t n = examples.size();
  if (n == 0) throw UsageError("cannot split an empty example list");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0 - kTestFraction)) {
    throw UsageError(fmt::format("val_fraction must lie in [0, {}), got {}", 1.0 - kTestFraction,
                                 val_fraction));
  }

  const auto n_test = static_cast<std::size_t>(std::llround(kTestFraction * static_cast<double>(n)));
  const auto n_val = std::min(n - n_test,
                              static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n))));

  // Group by video post, in order of first appearance.
  std::vector<std::string> video_order;
  std::map<std::string, std::vector<std::size_t>> groups;
  std::array<std::size_t, 2> label_total{};
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = groups.try_emplace(examples[i].video_post_id);
    if (inserted) video_order.push_back(examples[i].video_post_id);
    it->second.push_back(i);
    ++label_total[static_cast<std::size_t>(examples[i].label)];
  }

  // Test and val keep the overall label proportions (balanced for generated examples).
  auto quotas = [&](std::size_t size) {
    const auto inc = static_cast<std::size_t>(std::llround(static_cast<double>(size) *
                                                          static_cast<double>(label_total[1]) /
                                                          static_cast<double>(n)));
    return std::array<std::size_t, 2>{size - inc, inc};
  };
  const std::array<std::size_t, 2> test_quota = quotas(n_test);
  const std::array<std::size_t, 2> val_quota = quotas(n_val);

  // Own stream: generate_examples shuffles a same-sized list with the raw seed.
  std::mt19937_64 rng(mix64(seed ^ 0x73706c6974ULL));
  std::vector<std::string> shuffled = video_order;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  std::map<std::string, Partition> video_partition;
  std::array<std::size_t, 2> test_count{};
  std::array<std::size_t, 2> val_count{};
  auto fits = [](const std::array<std::size_t, 2>& count, const std::array<std::size_t, 2>& add,
                 const std::array<std::size_t, 2>& quota) {
    return count[0] + add[0] <= quota[0] && count[1] + add[1] <= quota[1];
  };
  for (const std::string& vid : shuffled) {
    std::array<std::size_t, 2> add{};
    for (std::size_t i : groups[vid]) ++add[static_cast<std::size_t>(examples[i].label)];
    Partition p = Partition::train;
    if (fits(test_count, add, test_quota)) {
      p = Partition::test;
      test_count[0] += add[0];
      test_count[1] += add[1];
    } else if (fits(val_count, add, val_quota)) {
      p = Partition::val;
      val_count[0] += add[0];
      val_count[1] += add[1];
    }
    video_partition[vid] = p;
  }

  DatasetSplit result;
  result.assignment.seed = seed;
  result.examples.assign(examples.begin(), examples.end());
  for (const Example& ex : result.examples) {
    result.assignment.partitions[ex.example_id] = video_partition.at(ex.video_post_id);
  }

  // Candidate donors per partition, in first-appearance order.
  std::map<Partition, std::vector<std::string>> members;
  for (const std::string& vid : video_order) members[video_partition[vid]].push_back(vid);

  auto partition_of_post = [&](const std::string& post) -> std::optional<Partition> {
    auto it = video_partition.find(post);
    if (it == video_partition.end()) return std::nullopt;
    return it->second;
  };

  std::map<Partition, std::set<std::string>> used;
  for (const Example& ex : result.examples) {
    if (ex.label != Label::inconsistent) continue;
    const Partition own = video_partition.at(ex.video_post_id);
    if (partition_of_post(ex.caption_post_id) == own) used[own].insert(ex.caption_post_id);
  }

  for (Example& ex : result.examples) {
    if (ex.label != Label::inconsistent) continue;
    const Partition own = video_partition.at(ex.video_post_id);
    if (partition_of_post(ex.caption_post_id) == own) continue;

    std::vector<const std::string*> pool;
    for (const std::string& cand : members[own]) {
      if (cand != ex.video_post_id && !used[own].contains(cand)) pool.push_back(&cand);
    }
    if (pool.empty()) {
      for (const std::string& cand : members[own]) {
        if (cand != ex.video_post_id) pool.push_back(&cand);
      }
    }
    if (pool.empty()) {
      ++result.cross_partition_swaps;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    ex.caption_post_id = *pool[pick(rng)];
    used[own].insert(ex.caption_post_id);
  }
  return result;
}

}  // namespace mmsi::corpus
