#pragma once

#include <filesystem>

#include "mmsi/harness.hpp"

namespace mmsi::testing {

struct SmallCorpus {
  harness::SyntheticCorpus corpus;
  harness::TrainRunConfig config;  // loaded back from corpus.config
};

// Synthetic corpus with narrow features and a small model, so training takes
// milliseconds. The shrunk config is written back to config.json.
inline SmallCorpus small_synthetic(const std::filesystem::path& dir, int n = 40, std::uint64_t seed = 0,
                                   int epochs = 3, double signal = 1.0) {
  harness::SyntheticOptions o;
  o.n = n;
  o.seed = seed;
  o.signal = signal;
  o.dims = {8, 8, 6, 4};
  SmallCorpus s{harness::generate_synthetic_corpus(o, dir), {}};
  harness::TrainRunConfig c = harness::load_run_config(s.corpus.config);
  c.fusion.dims.shared = 8;
  c.fusion.dims.lstm_hidden = 16;
  c.fusion.dims.classifier_hidden = {16, 8};
  c.epochs = epochs;
  c.patience = 0;
  harness::TrainRunConfig relative = c;
  relative.manifest = "manifest.jsonl";
  relative.cache = "cache";
  harness::save_run_config(s.corpus.config, relative);
  s.config = harness::load_run_config(s.corpus.config);
  return s;
}

}  // namespace mmsi::testing
