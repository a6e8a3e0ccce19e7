#include <cmath>

#include <fmt/format.h>

#include "mmsi/corpus.hpp"
#include "mmsi/errors.hpp"

namespace mmsi::corpus {

std::optional<std::size_t> reaction_index(std::string_view name) {
  for (std::size_t i = 0; i < kReactionNames.size(); ++i) {
    if (kReactionNames[i] == name) return i;
  }
  return std::nullopt;
}

ReactionVector normalize_reactions(const ReactionCounts& raw) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0) {
      throw DataError(fmt::format("negative reaction count {} for {}", raw[i], kReactionNames[i]));
    }
    total += raw[i];
  }
  ReactionVector out{};
  if (total == 0) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = static_cast<double>(raw[i]) / static_cast<double>(total);
  }
  return out;
}

ReactionVector normalize_reactions(const std::map<std::string, std::int64_t>& raw) {
  ReactionCounts counts{};
  for (const auto& [name, count] : raw) {
    auto idx = reaction_index(name);
    if (!idx) throw DataError(fmt::format("unknown reaction '{}'", name));
    counts[*idx] = count;
  }
  return normalize_reactions(counts);
}

std::string_view to_string(Label label) {
  return label == Label::pristine ? "pristine" : "inconsistent";
}

Label label_from_string(std::string_view text) {
  if (text == "pristine") return Label::pristine;
  if (text == "inconsistent") return Label::inconsistent;
  throw DataError(fmt::format("unknown label '{}'", text));
}

std::string_view to_string(Partition partition) {
  switch (partition) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
  }
  return "train";
}

Partition partition_from_string(std::string_view text) {
  if (text == "train") return Partition::train;
  if (text == "val") return Partition::val;
  if (text == "test") return Partition::test;
  throw DataError(fmt::format("unknown partition '{}'", text));
}

std::size_t SplitAssignment::count(Partition p) const {
  std::size_t n = 0;
  for (const auto& [id, part] : partitions) n += part == p;
  return n;
}

}  // namespace mmsi::corpus
