#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "mmsi/corpus.hpp"
#include "mmsi/errors.hpp"

namespace mmsi::corpus {

std::vector<Example> generate_examples(std::span<const Post> posts, std::uint64_t seed) {
  const std::size_t n = posts.size();
  if (n < 2) {
    throw DataError(fmt::format("need at least 2 posts to build swapped examples, got {}", n));
  }
  {
    std::set<std::string_view> ids;
    for (const Post& p : posts) {
      if (!ids.insert(p.post_id).second) {
        throw DataError(fmt::format("duplicate post_id \"{}\"", p.post_id));
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // donor[i] == i means post i stays pristine.
  std::vector<std::size_t> donor(n);
  std::iota(donor.begin(), donor.end(), 0);

  // Every post donates at most once. With k <= n/2 swaps made so far at least
  // n - k >= 2 candidates remain, so a non-self donor always exists.
  std::vector<std::size_t> unused(n);
  std::iota(unused.begin(), unused.end(), 0);
  const std::size_t n_inconsistent = n / 2;
  for (std::size_t k = 0; k < n_inconsistent; ++k) {
    const std::size_t target = order[k];
    for (;;) {
      std::uniform_int_distribution<std::size_t> pick(0, unused.size() - 1);
      const std::size_t j = pick(rng);
      if (unused[j] == target) continue;
      donor[target] = unused[j];
      unused[j] = unused.back();
      unused.pop_back();
      break;
    }
  }

  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.example_id = "ex-" + posts[i].post_id;
    ex.video_post_id = posts[i].post_id;
    ex.caption_post_id = posts[donor[i]].post_id;
    ex.label = donor[i] == i ? Label::pristine : Label::inconsistent;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace mmsi::corpus
