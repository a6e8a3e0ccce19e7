#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

#include <fmt/format.h>

#include "commands.hpp"
#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/json_util.hpp"

namespace mmsi::cli {
namespace fs = std::filesystem;
using harness::TrainRunConfig;

namespace {

constexpr std::string_view kAllBlockList = "video,object,caption,transcript,names,faces,reactions";

// Flags shared by train, eval and ablate. Flag values override the config file.
struct RunOpts {
  fs::path config;
  fs::path run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> weight_decay;
  std::optional<int> patience;
  std::optional<std::string> optimizer;
};

void add_run_flags(CLI::App* cmd, RunOpts& o, bool hyper) {
  cmd->add_option("--config", o.config, "Run config (JSON); defaults to <run-dir>/config.json");
  cmd->add_option("--run-dir", o.run_dir, "Directory for run outputs")->required();
  if (!hyper) return;
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--epochs", o.epochs, "Override the epoch count");
  cmd->add_option("--batch-size", o.batch_size, "Override the batch size");
  cmd->add_option("--lr", o.learning_rate, "Override the learning rate");
  cmd->add_option("--weight-decay", o.weight_decay, "Override the decoupled weight decay");
  cmd->add_option("--patience", o.patience, "Override early-stopping patience (0 disables)");
  cmd->add_option("--optimizer", o.optimizer, "Override the optimizer (adam or sgd)");
}

TrainRunConfig resolve_config(const RunOpts& o) {
  fs::path path = o.config;
  if (path.empty()) {
    path = o.run_dir / "config.json";
    if (!fs::exists(path)) throw UsageError("--config is required (no config.json in --run-dir)");
  }
  TrainRunConfig c = harness::load_run_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.weight_decay) c.weight_decay = *o.weight_decay;
  if (o.patience) c.patience = *o.patience;
  if (o.optimizer) c.optimizer = fusion::optimizer_from_string(*o.optimizer);
  // Re-validate overridden values through the JSON route.
  return harness::run_config_from_json(harness::run_config_to_json(c));
}

fusion::FusionConfig with_enabled(fusion::FusionConfig f, std::string_view list) {
  const auto names = split_list(list);
  if (names.empty()) throw UsageError("--blocks needs at least one block");
  std::array<bool, 7> on{};
  for (const std::string& n : names) on[fusion::block_index(fusion::block_from_name(n))] = true;
  f.enabled = on;
  f.validate();
  return f;
}

corpus::Partition partition_flag(const std::string& s) {
  try {
    return corpus::partition_from_string(s);
  } catch (const Error&) {
    throw UsageError(fmt::format("--split must be train, val or test, got \"{}\"", s));
  }
}

void print_row(const harness::AblationRow& r) {
  note(fmt::format("  [{}] removed {:<24} accuracy {:6.2f}%  classifier input {}", r.family, r.removed,
                   r.accuracy, r.classifier_input_width));
}

harness::ReportItem read_report_item(const fs::path& path) {
  return harness::report_from_json(read_json_file(path));
}

}  // namespace

void add_model_commands(CLI::App& app) {
  // --- train ----------------------------------------------------------------
  struct TrainOpts {
    RunOpts run;
    std::string blocks;
  };
  auto t = std::make_shared<TrainOpts>();
  CLI::App* train = app.add_subcommand(
      "train", "Train the fusion model; writes config.json, examples.jsonl, split.json, checkpoint.bin, history.json");
  add_run_flags(train, t->run, true);
  train->add_option("--blocks", t->blocks, fmt::format("Enabled feature blocks, subset of {}", kAllBlockList));
  train->callback([t] {
    TrainRunConfig cfg = resolve_config(t->run);
    if (!t->blocks.empty()) cfg.fusion = with_enabled(cfg.fusion, t->blocks);
    const harness::Dataset ds = harness::load_dataset(cfg);
    fs::create_directories(t->run.run_dir);
    note(fmt::format("train {} / val {} / test {} examples, classifier input {}",
                     ds.indices(corpus::Partition::train).size(), ds.indices(corpus::Partition::val).size(),
                     ds.indices(corpus::Partition::test).size(), cfg.fusion.classifier_input_width()));
    const harness::TrainResult result = harness::train(cfg, ds, [](const harness::EpochRecord& r) {
      note(fmt::format("epoch {:3d}  loss {:.5f}  val {}", r.epoch, r.train_loss,
                       r.val_accuracy ? fmt::format("{:.2f}%", *r.val_accuracy) : "-"));
    });

    // The run directory is self-contained: eval reuses exactly these examples and split.
    TrainRunConfig saved = cfg;
    saved.manifest = fs::absolute(cfg.manifest);
    saved.cache = fs::absolute(cfg.cache);
    saved.examples = "examples.jsonl";
    saved.split = "split.json";
    corpus::write_examples(t->run.run_dir / "examples.jsonl", ds.split.examples);
    write_json_file(t->run.run_dir / "split.json", corpus::split_to_json(ds.split.assignment));
    harness::save_run_config(t->run.run_dir / "config.json", saved);
    const std::string hash = harness::config_hash(cfg);
    fusion::Checkpoint ckpt{cfg.fusion, result.params,
                            {{"config_hash", hash},
                             {"seed", cfg.seed},
                             {"best_epoch", result.best_epoch},
                             {"stopped_early", result.stopped_early}}};
    fusion::save_checkpoint(t->run.run_dir / "checkpoint.bin", ckpt);
    write_json_file(t->run.run_dir / "history.json", harness::history_to_json(result.history));
    std::cout << fmt::format("best epoch {} of {}{} -> {}\n", result.best_epoch, result.history.size(),
                             result.stopped_early ? " (stopped early)" : "",
                             (t->run.run_dir / "checkpoint.bin").string());
  });

  // --- eval -----------------------------------------------------------------
  struct EvalOpts {
    RunOpts run;
    fs::path checkpoint;
    std::string split = "test";
  };
  auto e = std::make_shared<EvalOpts>();
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint; writes eval.json");
  add_run_flags(eval, e->run, false);
  eval->add_option("--checkpoint", e->checkpoint, "Checkpoint file (default: <run-dir>/checkpoint.bin)");
  eval->add_option("--split", e->split, "Partition to evaluate: train, val or test")->capture_default_str();
  eval->callback([e] {
    const corpus::Partition part = partition_flag(e->split);
    TrainRunConfig cfg = resolve_config(e->run);
    const fs::path ckpt_path = e->checkpoint.empty() ? e->run.run_dir / "checkpoint.bin" : e->checkpoint;
    const fusion::Checkpoint ckpt = fusion::load_checkpoint(ckpt_path);
    cfg.fusion = ckpt.config;  // the checkpoint decides which blocks and widths are read
    const harness::Dataset ds = harness::load_dataset(cfg);
    const harness::EvalReport r = harness::evaluate(ckpt, ds, part, harness::config_hash(cfg));
    write_json_file(e->run.run_dir / "eval.json", harness::report_to_json(r));
    std::cout << fmt::format("{} accuracy {:.2f}% on {} examples\n", r.split, r.accuracy, r.n_examples);
    std::cout << fmt::format("confusion (% of true class): pristine [{:.1f}, {:.1f}]  inconsistent [{:.1f}, {:.1f}]\n",
                             r.confusion[0][0], r.confusion[0][1], r.confusion[1][0], r.confusion[1][1]);
  });

  // --- ablate ---------------------------------------------------------------
  struct AblateOpts {
    RunOpts run;
    std::string blocks = std::string(kAllBlockList);
    std::string subsets;
    std::string split = "test";
    bool no_od = false;
  };
  auto a = std::make_shared<AblateOpts>();
  CLI::App* ablate = app.add_subcommand(
      "ablate", "Retrain with each block removed; writes ablation.json (and subsets.json with --subsets)");
  add_run_flags(ablate, a->run, true);
  ablate->add_option("--blocks", a->blocks,
                     "Comma-separated removals; join blocks with '+' to remove them together")
      ->capture_default_str();
  ablate->add_option("--subsets", a->subsets,
                     "Also train models on only these block sets, e.g. \"caption,video+caption\"");
  ablate->add_flag("--no-od", a->no_od, "Repeat the sweep with object features removed everywhere");
  ablate->add_option("--split", a->split, "Partition to score: val or test")->capture_default_str();
  ablate->callback([a] {
    const corpus::Partition part = partition_flag(a->split);
    const TrainRunConfig cfg = resolve_config(a->run);
    harness::AblationOptions opts;
    opts.removals = split_list(a->blocks);
    for (const std::string& spec : opts.removals) harness::parse_block_spec(spec);
    const auto subsets = split_list(a->subsets);
    for (const std::string& spec : subsets) harness::parse_block_spec(spec);
    opts.no_object_family = a->no_od;
    opts.partition = part;
    const harness::Dataset ds = harness::load_dataset(cfg);
    fs::create_directories(a->run.run_dir);

    const harness::AblationTable table = harness::run_ablation_suite(cfg, ds, opts, print_row);
    write_json_file(a->run.run_dir / "ablation.json", harness::report_to_json(table));
    std::cout << fmt::format("{} ablation rows -> {}\n", table.rows.size(),
                             (a->run.run_dir / "ablation.json").string());
    if (!subsets.empty()) {
      const harness::AblationTable st = harness::run_subset_suite(cfg, ds, subsets, part, print_row);
      write_json_file(a->run.run_dir / "subsets.json", harness::report_to_json(st));
      std::cout << fmt::format("{} subset rows -> {}\n", st.rows.size(),
                               (a->run.run_dir / "subsets.json").string());
    }
  });

  // --- report ---------------------------------------------------------------
  struct ReportOpts {
    fs::path run_dir;
    std::vector<fs::path> inputs;
    fs::path out;
  };
  auto r = std::make_shared<ReportOpts>();
  CLI::App* report = app.add_subcommand("report", "Render eval and ablation results as report.md and report.json");
  report->add_option("--run-dir", r->run_dir, "Run directory holding eval.json / ablation.json / subsets.json");
  report->add_option("--inputs", r->inputs, "Explicit result files instead of the run directory's");
  report->add_option("--out", r->out, "Output path without extension (default: <run-dir>/report)");
  report->callback([r] {
    std::vector<fs::path> inputs = r->inputs;
    if (inputs.empty()) {
      if (r->run_dir.empty()) throw UsageError("report needs --run-dir or --inputs");
      for (const char* name : {"eval.json", "ablation.json", "subsets.json"}) {
        if (fs::exists(r->run_dir / name)) inputs.push_back(r->run_dir / name);
      }
    }
    std::vector<harness::ReportItem> items;
    for (const fs::path& p : inputs) items.push_back(read_report_item(p));
    fs::path base = r->out;
    if (base.empty()) {
      if (r->run_dir.empty()) throw UsageError("report needs --out when --run-dir is not given");
      base = r->run_dir / "report";
    }
    harness::emit_report(items, base);
    std::cout << fmt::format("{} item(s) -> {}.md / {}.json\n", items.size(), base.string(), base.string());
  });
}

}  // namespace mmsi::cli
