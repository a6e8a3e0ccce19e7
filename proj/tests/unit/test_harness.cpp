#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mmsi/errors.hpp"
#include "mmsi/fs_util.hpp"
#include "mmsi/harness.hpp"
#include "synthetic_fixtures.hpp"
#include "test_support.hpp"

namespace mmsi::harness {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

std::vector<Prediction> counted(int label, int correct, int wrong, const std::string& prefix) {
  std::vector<Prediction> out;
  for (int i = 0; i < correct + wrong; ++i) {
    const int pred = i < correct ? label : 1 - label;
    out.push_back({prefix + std::to_string(i), label, pred, pred == 1 ? 0.9 : 0.1});
  }
  return out;
}

TEST(Report, TableTwoConfusion) {
  // 1000 pristine (510 right) and 1000 inconsistent (714 right).
  auto preds = counted(0, 510, 490, "p");
  const auto inc = counted(1, 714, 286, "i");
  preds.insert(preds.end(), inc.begin(), inc.end());
  const EvalReport r = report_from_predictions(preds, "test", "h");
  const double expected[2][2] = {{51.0, 49.0}, {28.6, 71.4}};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(r.confusion[i][j], expected[i][j], 0.1);
  }
  EXPECT_NEAR(r.accuracy, 61.2, 1e-9);
  EXPECT_EQ(r.n_examples, 2000u);
}

TEST(Report, RandomPredictionsAreConsistent) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 300);
    std::vector<Prediction> preds;
    int agree = 0;
    std::array<std::array<int, 2>, 2> counts{};
    for (int i = 0; i < n; ++i) {
      const int l = static_cast<int>(rng() % 2), p = static_cast<int>(rng() % 2);
      preds.push_back({std::to_string(i), l, p, 0.5});
      agree += l == p;
      ++counts[l][p];
    }
    const EvalReport r = report_from_predictions(preds, "x", "");
    EXPECT_NEAR(r.accuracy, 100.0 * agree / n, 1e-9);
    for (int l = 0; l < 2; ++l) {
      const int row = counts[l][0] + counts[l][1];
      if (row == 0) continue;
      EXPECT_NEAR(r.confusion[l][0] + r.confusion[l][1], 100.0, 0.1);
      EXPECT_NEAR(r.confusion[l][1], 100.0 * counts[l][1] / row, 1e-9);
    }
  }
}

TEST(Report, RejectsBadLabels) {
  EXPECT_THROW(report_from_predictions({{"a", 2, 0, 0.0}}, "x", ""), UsageError);
}

TEST(RunConfig, JsonRoundTripAndHash) {
  TrainRunConfig c;
  c.seed = 9;
  c.learning_rate = 3e-4;
  c.manifest = "/data/m.jsonl";
  c.cache = "/data/cache";
  c.fusion = c.fusion.with(fusion::Block::faces, false);
  EXPECT_EQ(run_config_from_json(run_config_to_json(c)), c);
  EXPECT_EQ(config_hash(c), config_hash(run_config_from_json(run_config_to_json(c))));
  EXPECT_EQ(config_hash(c).size(), 16u);
  TrainRunConfig d = c;
  d.seed = 10;
  EXPECT_NE(config_hash(c), config_hash(d));
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  auto j = run_config_to_json(TrainRunConfig{});
  j["learning_rat"] = 1.0;
  EXPECT_THROW(run_config_from_json(j), UsageError);
  for (const auto& [key, value] : std::vector<std::pair<std::string, nlohmann::json>>{
           {"epochs", 0}, {"batch_size", 0}, {"learning_rate", 0.0}, {"patience", -1},
           {"weight_decay", -0.1}, {"val_fraction", 0.9}, {"optimizer", "rmsprop"}, {"seed", "x"}}) {
    auto bad = run_config_to_json(TrainRunConfig{});
    bad[key] = value;
    EXPECT_THROW(run_config_from_json(bad), UsageError) << key;
  }
  EXPECT_THROW(run_config_from_json(nlohmann::json::array()), UsageError);
}

TEST(RunConfig, RelativePathsResolveAgainstConfigDir) {
  TempDir dir;
  TrainRunConfig c;
  c.manifest = "m.jsonl";
  c.cache = "/abs/cache";
  save_run_config(dir / "cfg.json", c);
  const TrainRunConfig back = load_run_config(dir / "cfg.json");
  EXPECT_EQ(back.manifest, dir / "m.jsonl");
  EXPECT_EQ(back.cache, fs::path("/abs/cache"));
  EXPECT_TRUE(back.examples.empty());
  EXPECT_THROW(load_run_config(dir / "absent.json"), UsageError);
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

TEST(Synthetic, DeterministicInSeed) {
  TempDir a, b, c;
  SyntheticOptions o;
  o.n = 12;
  o.dims = {8, 8, 6, 4};
  generate_synthetic_corpus(o, a.path());
  generate_synthetic_corpus(o, b.path());
  EXPECT_EQ(tree(a.path()), tree(b.path()));
  o.seed = 1;
  generate_synthetic_corpus(o, c.path());
  EXPECT_NE(tree(a.path()), tree(c.path()));
}

TEST(Synthetic, RejectsBadOptions) {
  TempDir dir;
  SyntheticOptions o;
  o.dims = {8, 8, 6, 4};
  o.n = 3;
  EXPECT_THROW(generate_synthetic_corpus(o, dir.path()), UsageError);
  o.n = 8;
  o.signal = 1.5;
  EXPECT_THROW(generate_synthetic_corpus(o, dir.path()), UsageError);
  o.signal = 1.0;
  o.latent_dim = 9;
  EXPECT_THROW(generate_synthetic_corpus(o, dir.path()), UsageError);
}

TEST(Synthetic, ProjectionIsOrthonormal) {
  const Eigen::MatrixXd p = synthetic_projection(3, kinds::kVideo, 10, 3);
  EXPECT_TRUE((p.transpose() * p).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
  EXPECT_TRUE(p.isApprox(synthetic_projection(3, kinds::kVideo, 10, 3)));
  EXPECT_FALSE(p.isApprox(synthetic_projection(3, kinds::kCaption, 10, 3)));
}

TEST(Synthetic, PlantedCaptionsRecoverTheLatent) {
  // With full signal and no noise, a pristine caption and its video project to
  // the same latent (up to clip jitter).
  TempDir dir;
  SyntheticOptions o;
  o.n = 6;
  o.dims = {8, 8, 6, 4};
  o.feature_noise = 0.0;
  o.clip_jitter = 0.0;
  const SyntheticCorpus corpus = generate_synthetic_corpus(o, dir.path());
  const extractors::FeatureCache cache(corpus.cache);
  const Eigen::MatrixXd pc = synthetic_projection(0, kinds::kCaption, 8, 2);
  const Eigen::MatrixXd pv = synthetic_projection(0, kinds::kVideo, 8, 2);
  const double scale = std::sqrt(8.0 / 2.0);
  for (const corpus::Post& post : corpus.posts) {
    const auto cap = cache.get(post.post_id, {std::string(kinds::kCaption), o.version});
    const auto vid = cache.get(post.post_id, {std::string(kinds::kVideo), o.version});
    ASSERT_TRUE(cap && vid);
    Eigen::VectorXd c(8), v(8);
    for (int i = 0; i < 8; ++i) {
      c(i) = cap->payload[i];
      v(i) = vid->payload[i];
    }
    EXPECT_TRUE((pc.transpose() * c / scale).isApprox(pv.transpose() * v / scale, 1e-5)) << post.post_id;
  }
}

TEST(Dataset, LoadsEveryExampleAndKeepsVideosDisjoint) {
  TempDir dir;
  const auto s = testing::small_synthetic(dir.path(), 30);
  const Dataset d = load_dataset(s.config);
  EXPECT_EQ(d.posts.size(), 30u);
  EXPECT_EQ(d.features.size(), 30u);
  EXPECT_EQ(d.indices(corpus::Partition::test).size(), static_cast<std::size_t>(std::llround(0.15 * 30)));
  std::size_t total = 0;
  for (auto p : {corpus::Partition::train, corpus::Partition::val, corpus::Partition::test}) {
    total += d.indices(p).size();
  }
  EXPECT_EQ(total, 30u);
  assert_video_disjoint(d.split);
  for (std::size_t i = 0; i < d.features.size(); ++i) {
    EXPECT_EQ(d.features[i].example_id, d.split.examples[i].example_id);
    EXPECT_EQ(d.features[i].label, d.split.examples[i].label == corpus::Label::inconsistent ? 1 : 0);
    fusion::check_example(d.features[i], s.config.fusion);
  }
}

TEST(Dataset, VideoOverlapIsRejected) {
  corpus::DatasetSplit split;
  split.examples = {{"a", "v1", "v1", corpus::Label::pristine}, {"b", "v1", "v2", corpus::Label::inconsistent}};
  split.assignment.partitions = {{"a", corpus::Partition::train}, {"b", corpus::Partition::test}};
  EXPECT_THROW(assert_video_disjoint(split), DataError);
  split.assignment.partitions["b"] = corpus::Partition::train;
  EXPECT_NO_THROW(assert_video_disjoint(split));
  split.assignment.partitions.erase("b");
  EXPECT_THROW(assert_video_disjoint(split), DataError);
}

TEST(Dataset, MissingCacheEntriesAreListed) {
  TempDir dir;
  auto s = testing::small_synthetic(dir.path(), 8);
  for (const auto& e : fs::recursive_directory_iterator(s.corpus.cache / "features")) {
    if (e.is_regular_file() && e.path().filename().string().rfind("syn-00005.", 0) == 0) fs::remove(e.path());
  }
  try {
    load_dataset(s.config);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(syn-00005, video-encoder@stub-1)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(syn-00005, caption-text@stub-1)"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("syn-00004"), std::string::npos) << msg;
  }
  // Long lists are truncated.
  s.config.feature_version = "never-extracted";
  try {
    load_dataset(s.config);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("more"), std::string::npos) << e.what();
  }
}

TEST(Dataset, DisabledBlocksNeedNoCacheEntries) {
  TempDir dir;
  auto s = testing::small_synthetic(dir.path(), 8);
  for (const auto& e : fs::recursive_directory_iterator(s.corpus.cache)) {
    if (e.is_regular_file() && e.path().string().find("object-encoder") != std::string::npos) {
      fs::remove(e.path());
    }
  }
  EXPECT_THROW(load_dataset(s.config), DataError);
  s.config.fusion = s.config.fusion.with(fusion::Block::object, false);
  EXPECT_NO_THROW(load_dataset(s.config));
}

TEST(Training, DeterministicAndReducesLoss) {
  TempDir dir;
  const auto s = testing::small_synthetic(dir.path(), 40, 0, 6);
  const Dataset d = load_dataset(s.config);
  const TrainResult a = train(s.config, d);
  const TrainResult b = train(s.config, d);
  EXPECT_EQ(a.history, b.history);
  ASSERT_EQ(a.history.size(), 6u);
  EXPECT_LT(a.history.back().train_loss, a.history.front().train_loss);
  EXPECT_GE(a.best_epoch, 1);

  const fusion::Checkpoint ck{s.config.fusion, a.params, {}};
  const EvalReport ra = evaluate(ck, d, corpus::Partition::test, "h");
  const EvalReport rb = evaluate(fusion::Checkpoint{s.config.fusion, b.params, {}}, d, corpus::Partition::test, "h");
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(ra.n_examples, d.indices(corpus::Partition::test).size());
  EXPECT_EQ(ra.classifier_input_width, s.config.fusion.classifier_input_width());
}

TEST(Training, EarlyStoppingHonoursPatience) {
  TempDir dir;
  auto s = testing::small_synthetic(dir.path(), 40, 0, 30);
  s.config.patience = 1;
  s.config.learning_rate = 1e-9;  // validation accuracy and loss cannot improve
  const Dataset d = load_dataset(s.config);
  const TrainResult r = train(s.config, d);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.best_epoch, 1);
}

TEST(Training, BestEpochMaximisesAccuracyThenLoss) {
  TempDir dir;
  auto s = testing::small_synthetic(dir.path(), 40, 0, 8);
  s.config.learning_rate = 1e-3;
  const Dataset d = load_dataset(s.config);
  const TrainResult r = train(s.config, d);
  ASSERT_EQ(r.history.size(), 8u);
  const EpochRecord* best = &r.history.front();
  for (const EpochRecord& e : r.history) {
    ASSERT_TRUE(e.val_accuracy && e.val_loss);
    if (*e.val_accuracy > *best->val_accuracy ||
        (*e.val_accuracy == *best->val_accuracy && *e.val_loss < *best->val_loss)) {
      best = &e;
    }
  }
  EXPECT_EQ(r.best_epoch, best->epoch);

  // The kept parameters are the ones a run stopped at that epoch ends with.
  auto shorter = s.config;
  shorter.epochs = r.best_epoch;
  const TrainResult t = train(shorter, d);
  const auto all = d.indices(corpus::Partition::val);
  EXPECT_EQ(predict(s.config.fusion, r.params, d.features, all), predict(s.config.fusion, t.params, d.features, all));
}

TEST(Training, EmptyPartitionsAreErrors) {
  TempDir dir;
  const auto s = testing::small_synthetic(dir.path(), 8);
  Dataset d = load_dataset(s.config);
  Dataset only_test = d;
  for (auto& [id, p] : only_test.split.assignment.partitions) p = corpus::Partition::test;
  EXPECT_THROW(train(s.config, only_test), DataError);
  const TrainResult r = train(s.config, d);
  Dataset no_test = d;
  for (auto& [id, p] : no_test.split.assignment.partitions) p = corpus::Partition::train;
  EXPECT_THROW(evaluate({s.config.fusion, r.params, {}}, no_test, corpus::Partition::test, ""), DataError);
}

TEST(Ablation, OneRowPerRemovalPlusNone) {
  TempDir dir;
  const auto s = testing::small_synthetic(dir.path(), 24, 0, 1);
  const Dataset d = load_dataset(s.config);
  AblationOptions o;
  o.removals = {"caption", "video", "names", "faces", "reactions"};
  std::vector<AblationRow> seen;
  const AblationTable t = run_ablation_suite(s.config, d, o, [&](const AblationRow& r) { seen.push_back(r); });
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(seen, t.rows);
  EXPECT_EQ(t.rows[0].removed, "None");
  EXPECT_EQ(t.rows[0].classifier_input_width, s.config.fusion.classifier_input_width());
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    EXPECT_EQ(t.rows[i].removed, o.removals[i - 1]);
    EXPECT_EQ(t.rows[i].family, "all");
  }
  // Caption is a clip block: it narrows the LSTM input only.
  EXPECT_EQ(t.rows[1].lstm_input_width, t.rows[0].lstm_input_width - 8);
  EXPECT_EQ(t.rows[1].classifier_input_width, t.rows[0].classifier_input_width);
  EXPECT_EQ(t.rows[5].classifier_input_width, t.rows[0].classifier_input_width - 7);
  EXPECT_EQ(t.config_hash, config_hash(s.config));
}

TEST(Ablation, NoObjectFamilySkipsAbsentBlocks) {
  TempDir dir;
  const auto s = testing::small_synthetic(dir.path(), 24, 0, 1);
  const Dataset d = load_dataset(s.config);
  AblationOptions o;
  o.removals = {"object", "caption"};
  o.no_object_family = true;
  const AblationTable t = run_ablation_suite(s.config, d, o);
  // all: None, object, caption; no-od: None, caption.
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.rows[3].family, "no-od");
  EXPECT_EQ(t.rows[3].removed, "None");
  EXPECT_EQ(t.rows[4].removed, "caption");
}

TEST(Ablation, SubsetSuite) {
  TempDir dir;
  const auto s = testing::small_synthetic(dir.path(), 24, 0, 1);
  const Dataset d = load_dataset(s.config);
  const std::vector<std::string> subsets = {"video", "caption+video"};
  const AblationTable t = run_subset_suite(s.config, d, subsets);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.kind, "subset");
  EXPECT_EQ(t.rows[1].removed, "caption+video");
  EXPECT_EQ(t.rows[0].lstm_input_width, 8);
  const std::vector<std::string> none = {"names"};
  EXPECT_THROW(run_subset_suite(s.config, d, none), UsageError);
}

TEST(BlockSpec, Parsing) {
  using fusion::Block;
  EXPECT_EQ(parse_block_spec("caption"), std::vector<Block>{Block::caption});
  EXPECT_EQ(parse_block_spec("names+faces"), (std::vector<Block>{Block::names, Block::faces}));
  EXPECT_EQ(block_spec_name(parse_block_spec("names+faces")), "names+faces");
  for (const char* bad : {"", "+", "names+", "names+names", "audio"}) {
    EXPECT_THROW(parse_block_spec(bad), UsageError) << bad;
  }
}

TEST(Reports, JsonRoundTripAndMarkdown) {
  const EvalReport r = report_from_predictions(counted(0, 3, 1, "a"), "test", "abc");
  AblationTable t;
  t.rows = {{"all", "None", 80.0, 1103, 1024}, {"all", "caption", 52.5, 1103, 768},
            {"no-od", "None", 78.0, 1103, 768}};
  t.config_hash = "abc";
  t.seed = 4;
  const std::vector<ReportItem> items = {r, t};
  const auto back = reports_from_json(reports_to_json(items));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(std::get<EvalReport>(back[0]), r);
  EXPECT_EQ(std::get<AblationTable>(back[1]), t);

  const std::string md = render_markdown(items);
  EXPECT_NE(md.find("75.0"), std::string::npos);
  EXPECT_NE(md.find("52.5"), std::string::npos);
  EXPECT_NE(md.find("No OD"), std::string::npos);

  TempDir dir;
  emit_report(items, dir / "report");
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_EQ(read_file(dir / "report.md"), md);
  EXPECT_THROW(emit_report({}, dir / "empty"), UsageError);
}

}  // namespace
}  // namespace mmsi::harness
