#include <set>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/hashing.hpp"
#include "mmsi/json_util.hpp"

namespace mmsi::harness {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

json run_config_to_json(const TrainRunConfig& c) {
  return {{"seed", c.seed},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"optimizer", fusion::to_string(c.optimizer)},
          {"val_fraction", c.val_fraction},
          {"patience", c.patience},
          {"manifest", c.manifest.string()},
          {"cache", c.cache.string()},
          {"feature_version", c.feature_version},
          {"examples", c.examples.string()},
          {"split", c.split.string()},
          {"fusion", c.fusion}};
}

TrainRunConfig run_config_from_json(const json& v, const fs::path& base_dir) {
  if (!v.is_object()) throw UsageError("run config must be a JSON object");
  static const std::set<std::string> known = {
      "seed",     "epochs", "batch_size",      "learning_rate", "weight_decay", "optimizer", "val_fraction",
      "patience", "manifest", "cache", "feature_version", "examples",  "split", "fusion"};
  for (const auto& [key, _] : v.items()) {
    if (!known.contains(key)) throw UsageError(fmt::format("unknown run config key \"{}\"", key));
  }
  TrainRunConfig c;
  try {
    c.seed = v.value("seed", c.seed);
    c.epochs = v.value("epochs", c.epochs);
    c.batch_size = v.value("batch_size", c.batch_size);
    c.learning_rate = v.value("learning_rate", c.learning_rate);
    c.weight_decay = v.value("weight_decay", c.weight_decay);
    c.optimizer = fusion::optimizer_from_string(v.value("optimizer", std::string("adam")));
    c.val_fraction = v.value("val_fraction", c.val_fraction);
    c.patience = v.value("patience", c.patience);
    c.manifest = resolve(base_dir, v.value("manifest", std::string()));
    c.cache = resolve(base_dir, v.value("cache", std::string()));
    c.feature_version = v.value("feature_version", c.feature_version);
    c.examples = resolve(base_dir, v.value("examples", std::string()));
    c.split = resolve(base_dir, v.value("split", std::string()));
    if (v.contains("fusion")) c.fusion = v.at("fusion").get<fusion::FusionConfig>();
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("invalid run config: {}", e.what()));
  }
  if (c.epochs < 1) throw UsageError("epochs must be at least 1");
  if (c.batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (!(c.learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (c.patience < 0) throw UsageError("patience must be non-negative");
  if (c.weight_decay < 0.0) throw UsageError("weight_decay must be non-negative");
  if (c.val_fraction < 0.0 || c.val_fraction >= 1.0 - corpus::kTestFraction) {
    throw UsageError("val_fraction must lie in [0, 0.85)");
  }
  c.fusion.validate();
  return c;
}

TrainRunConfig load_run_config(const fs::path& path) {
  json v;
  try {
    v = read_json_file(path);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  return run_config_from_json(v, path.parent_path());
}

void save_run_config(const fs::path& path, const TrainRunConfig& config) {
  write_json_file(path, run_config_to_json(config));
}

std::string config_hash(const TrainRunConfig& config) {
  return to_hex(fnv1a64(run_config_to_json(config).dump()));
}

}  // namespace mmsi::harness
