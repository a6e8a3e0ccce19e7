#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/json_util.hpp"

namespace mmsi::harness {
using nlohmann::json;

namespace {

json eval_to_json(const EvalReport& r) {
  json preds = json::array();
  for (const Prediction& p : r.predictions) {
    preds.push_back({{"example_id", p.example_id},
                     {"label", p.label},
                     {"predicted", p.predicted},
                     {"p_inconsistent", p.p_inconsistent}});
  }
  return {{"type", "eval"},
          {"split", r.split},
          {"accuracy", r.accuracy},
          {"confusion", r.confusion},
          {"n_examples", r.n_examples},
          {"config_hash", r.config_hash},
          {"classifier_input_width", r.classifier_input_width},
          {"predictions", preds}};
}

EvalReport eval_from_json(const json& j) {
  EvalReport r;
  r.split = j.at("split").get<std::string>();
  r.accuracy = j.at("accuracy").get<double>();
  r.confusion = j.at("confusion").get<std::array<std::array<double, 2>, 2>>();
  r.n_examples = j.at("n_examples").get<std::size_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.classifier_input_width = j.value("classifier_input_width", 0);
  for (const json& p : j.at("predictions")) {
    r.predictions.push_back({p.at("example_id").get<std::string>(), p.at("label").get<int>(),
                             p.at("predicted").get<int>(), p.at("p_inconsistent").get<double>()});
  }
  return r;
}

json ablation_to_json(const AblationTable& t) {
  json rows = json::array();
  for (const AblationRow& r : t.rows) {
    rows.push_back({{"family", r.family},
                    {"removed", r.removed},
                    {"accuracy", r.accuracy},
                    {"classifier_input_width", r.classifier_input_width},
                    {"lstm_input_width", r.lstm_input_width}});
  }
  return {{"type", "ablation"}, {"kind", t.kind}, {"rows", rows}, {"config_hash", t.config_hash}, {"seed", t.seed}};
}

AblationTable ablation_from_json(const json& j) {
  AblationTable t;
  t.kind = j.at("kind").get<std::string>();
  t.config_hash = j.at("config_hash").get<std::string>();
  t.seed = j.at("seed").get<std::uint64_t>();
  for (const json& r : j.at("rows")) {
    t.rows.push_back({r.at("family").get<std::string>(), r.at("removed").get<std::string>(),
                      r.at("accuracy").get<double>(), r.at("classifier_input_width").get<int>(),
                      r.at("lstm_input_width").get<int>()});
  }
  return t;
}

std::string pct(double v) { return fmt::format("{:.1f}", v); }

void render_eval(std::string& md, const EvalReport& r) {
  md += fmt::format("## Evaluation ({})\n\n", r.split);
  md += fmt::format("Accuracy: **{}%** on {} examples. Config hash `{}`.\n\n", pct(r.accuracy),
                    r.n_examples, r.config_hash);
  md += "Confusion matrix (%)\n\n";
  md += "| True \\ Predicted | Pristine | Inconsistent |\n|---|---|---|\n";
  md += fmt::format("| Pristine | {} | {} |\n", pct(r.confusion[0][0]), pct(r.confusion[0][1]));
  md += fmt::format("| Inconsistent | {} | {} |\n\n", pct(r.confusion[1][0]), pct(r.confusion[1][1]));
}

void render_ablation(std::string& md, const AblationTable& t) {
  if (t.kind == "subset") {
    md += "## Uni- and bi-modal models\n\n";
    md += fmt::format("Seed {}, config hash `{}`.\n\n", t.seed, t.config_hash);
    md += "| Modalities | Accuracy (%) | Classifier input |\n|---|---|---|\n";
    for (const AblationRow& r : t.rows) {
      md += fmt::format("| {} | {} | {} |\n", r.removed, pct(r.accuracy), r.classifier_input_width);
    }
    md += "\n";
    return;
  }
  // One row per family, one column per removed block.
  std::vector<std::string> columns;
  std::vector<std::string> families;
  std::map<std::pair<std::string, std::string>, const AblationRow*> cell;
  for (const AblationRow& r : t.rows) {
    if (std::find(columns.begin(), columns.end(), r.removed) == columns.end()) columns.push_back(r.removed);
    if (std::find(families.begin(), families.end(), r.family) == families.end()) families.push_back(r.family);
    cell[{r.family, r.removed}] = &r;
  }
  md += "## Ablation: accuracy (%) with one feature block removed\n\n";
  md += fmt::format("Seed {}, config hash `{}`.\n\n", t.seed, t.config_hash);
  md += "| Model |";
  for (const std::string& c : columns) md += fmt::format(" {} |", c);
  md += "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) md += "---|";
  md += "\n";
  for (const std::string& f : families) {
    md += fmt::format("| {} |", f == "no-od" ? "No OD" : "All features");
    for (const std::string& c : columns) {
      const auto it = cell.find({f, c});
      md += it == cell.end() ? " - |" : fmt::format(" {} |", pct(it->second->accuracy));
    }
    md += "\n";
  }
  md += "\nClassifier input width per row:\n\n| Model | Removed | Width | LSTM input |\n|---|---|---|---|\n";
  for (const AblationRow& r : t.rows) {
    md += fmt::format("| {} | {} | {} | {} |\n", r.family == "no-od" ? "No OD" : "All features", r.removed,
                      r.classifier_input_width, r.lstm_input_width);
  }
  md += "\n";
}

}  // namespace

json report_to_json(const ReportItem& item) {
  return std::visit(
      [](const auto& v) -> json {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, EvalReport>) {
          return eval_to_json(v);
        } else {
          return ablation_to_json(v);
        }
      },
      item);
}

ReportItem report_from_json(const json& value) {
  try {
    const std::string type = value.at("type").get<std::string>();
    if (type == "eval") return eval_from_json(value);
    if (type == "ablation") return ablation_from_json(value);
    throw DataError(fmt::format("unknown report type \"{}\"", type));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed report: {}", e.what()));
  }
}

json reports_to_json(std::span<const ReportItem> items) {
  json arr = json::array();
  for (const ReportItem& it : items) arr.push_back(report_to_json(it));
  return {{"reports", arr}};
}

std::vector<ReportItem> reports_from_json(const json& value) {
  std::vector<ReportItem> out;
  if (!value.contains("reports")) throw DataError("report file has no \"reports\" array");
  for (const json& j : value.at("reports")) out.push_back(report_from_json(j));
  return out;
}

std::string render_markdown(std::span<const ReportItem> items) {
  std::string md = "# Cheapfake detection report\n\n";
  for (const ReportItem& it : items) {
    std::visit(
        [&](const auto& v) {
          if constexpr (std::is_same_v<std::decay_t<decltype(v)>, EvalReport>) {
            render_eval(md, v);
          } else {
            render_ablation(md, v);
          }
        },
        it);
  }
  return md;
}

void emit_report(std::span<const ReportItem> items, const std::filesystem::path& base) {
  if (items.empty()) throw UsageError("nothing to report");
  std::filesystem::path json_path = base, md_path = base;
  json_path += ".json";
  md_path += ".md";
  write_json_file(json_path, reports_to_json(items));
  write_file_atomic(md_path, render_markdown(items));
}

}  // namespace mmsi::harness
