#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/harness.hpp"
#include "mmsi/hashing.hpp"

namespace mmsi::harness {
namespace {

void set_zero(fusion::FusionParams<float>& p) {
  for (const auto& np : fusion::named_params(p)) np.tensor->setZero();
}

double accuracy_of(const std::vector<Prediction>& preds) {
  if (preds.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Prediction& p : preds) correct += p.label == p.predicted ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
}

double loss_of(const std::vector<Prediction>& preds) {
  if (preds.empty()) return 0.0;
  double sum = 0.0;
  for (const Prediction& p : preds) {
    sum -= std::log(std::max(p.label == 1 ? p.p_inconsistent : 1.0 - p.p_inconsistent, 1e-12));
  }
  return sum / static_cast<double>(preds.size());
}

}  // namespace

TrainResult train(const TrainRunConfig& config, const Dataset& dataset, const ProgressFn& progress) {
  config.fusion.validate();
  assert_video_disjoint(dataset.split);
  const std::vector<std::size_t> train_idx = dataset.indices(corpus::Partition::train);
  const std::vector<std::size_t> val_idx = dataset.indices(corpus::Partition::val);
  if (train_idx.empty()) throw DataError("the training partition is empty");

  TrainResult result;
  fusion::FusionParams<float> params = fusion::init_params<float>(config.fusion, config.seed);
  fusion::FusionParams<float> grad = fusion::zero_params<float>(config.fusion);
  fusion::OptimizerSettings settings;
  settings.kind = config.optimizer;
  settings.learning_rate = config.learning_rate;
  settings.weight_decay = config.weight_decay;
  fusion::Optimizer optimizer(settings, params);

  std::mt19937_64 rng(mix64(config.seed ^ 0x747261696eULL));
  std::vector<std::size_t> order = train_idx;
  std::optional<std::pair<double, double>> best_val;  // (accuracy, loss)
  int since_best = 0;
  std::vector<const fusion::ExampleFeatures*> batch;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&dataset.features[order[i]]);
      set_zero(grad);
      loss_sum += fusion::loss_and_gradient<float>(batch, config.fusion, params, grad);
      optimizer.step(params, grad);
      ++batches;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), std::nullopt, std::nullopt};
    if (!val_idx.empty()) {
      const auto preds = predict(config.fusion, params, dataset.features, val_idx);
      rec.val_accuracy = accuracy_of(preds);
      rec.val_loss = loss_of(preds);
    }
    result.history.push_back(rec);
    if (progress) progress(rec);

    if (!rec.val_accuracy) {
      result.best_epoch = epoch;
      continue;
    }
    // Accuracy on a small validation set ties often; the loss breaks ties.
    const bool better = !best_val || *rec.val_accuracy > best_val->first ||
                        (*rec.val_accuracy == best_val->first && *rec.val_loss < best_val->second);
    if (better) {
      best_val = {*rec.val_accuracy, *rec.val_loss};
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      result.stopped_early = epoch < config.epochs;
      break;
    }
  }
  if (!best_val) result.params = std::move(params);
  return result;
}

nlohmann::json history_to_json(std::span<const EpochRecord> history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EpochRecord& r : history) {
    nlohmann::json j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}};
    j["val_accuracy"] = r.val_accuracy ? nlohmann::json(*r.val_accuracy) : nlohmann::json(nullptr);
    j["val_loss"] = r.val_loss ? nlohmann::json(*r.val_loss) : nlohmann::json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace mmsi::harness
