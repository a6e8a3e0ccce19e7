#include <algorithm>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/harness.hpp"

namespace mmsi::harness {
using fusion::Block;

std::vector<Block> parse_block_spec(std::string_view spec) {
  std::vector<Block> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t plus = spec.find('+', start);
    const std::string_view part =
        spec.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
    if (part.empty()) throw UsageError(fmt::format("malformed block list \"{}\"", spec));
    const Block b = fusion::block_from_name(part);
    if (std::find(out.begin(), out.end(), b) != out.end()) {
      throw UsageError(fmt::format("block \"{}\" repeated in \"{}\"", part, spec));
    }
    out.push_back(b);
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return out;
}

std::string block_spec_name(std::span<const Block> blocks) {
  std::string out;
  for (Block b : blocks) {
    if (!out.empty()) out += '+';
    out += fusion::block_name(b);
  }
  return out;
}

namespace {

AblationRow train_row(const TrainRunConfig& cfg, const Dataset& dataset, std::string family,
                      std::string removed, corpus::Partition partition) {
  const TrainResult tr = train(cfg, dataset);
  const auto preds = predict(cfg.fusion, tr.params, dataset.features, dataset.indices(partition));
  const EvalReport r = report_from_predictions(preds, std::string(corpus::to_string(partition)), "");
  return {std::move(family), std::move(removed), r.accuracy, cfg.fusion.classifier_input_width(),
          cfg.fusion.lstm_input_width()};
}

}  // namespace

AblationTable run_ablation_suite(const TrainRunConfig& base, const Dataset& dataset,
                                 const AblationOptions& options,
                                 const std::function<void(const AblationRow&)>& progress) {
  base.fusion.validate();
  std::vector<std::vector<Block>> removals;
  for (const std::string& spec : options.removals) removals.push_back(parse_block_spec(spec));

  AblationTable table;
  table.kind = "removal";
  table.seed = base.seed;
  table.config_hash = config_hash(base);

  auto sweep = [&](const TrainRunConfig& family_base, const std::string& family) {
    auto emit = [&](AblationRow row) {
      if (progress) progress(row);
      table.rows.push_back(std::move(row));
    };
    emit(train_row(family_base, dataset, family, "None", options.partition));
    for (const auto& blocks : removals) {
      TrainRunConfig cfg = family_base;
      bool changed = false;
      for (Block b : blocks) {
        changed = changed || cfg.fusion.has(b);
        cfg.fusion = cfg.fusion.with(b, false);
      }
      if (!changed) continue;  // already absent in this family
      cfg.fusion.validate();
      emit(train_row(cfg, dataset, family, block_spec_name(blocks), options.partition));
    }
  };

  sweep(base, "all");
  if (options.no_object_family) {
    TrainRunConfig no_od = base;
    no_od.fusion = no_od.fusion.with(Block::object, false);
    no_od.fusion.validate();
    sweep(no_od, "no-od");
  }
  return table;
}

AblationTable run_subset_suite(const TrainRunConfig& base, const Dataset& dataset,
                               std::span<const std::string> subsets, corpus::Partition partition,
                               const std::function<void(const AblationRow&)>& progress) {
  AblationTable table;
  table.kind = "subset";
  table.seed = base.seed;
  table.config_hash = config_hash(base);
  for (const std::string& spec : subsets) {
    const std::vector<Block> keep = parse_block_spec(spec);
    TrainRunConfig cfg = base;
    for (Block b : fusion::kAllBlocks) {
      cfg.fusion = cfg.fusion.with(b, std::find(keep.begin(), keep.end(), b) != keep.end());
    }
    cfg.fusion.validate();
    AblationRow row = train_row(cfg, dataset, "subset", block_spec_name(keep), partition);
    if (progress) progress(row);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace mmsi::harness
