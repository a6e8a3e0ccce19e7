#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/harness.hpp"

namespace mmsi::harness {

EvalReport report_from_predictions(std::vector<Prediction> predictions, std::string split,
                                   std::string hash) {
  EvalReport r;
  r.split = std::move(split);
  r.config_hash = std::move(hash);
  r.n_examples = predictions.size();
  std::array<std::array<std::size_t, 2>, 2> counts{};
  std::size_t correct = 0;
  for (const Prediction& p : predictions) {
    if (p.label < 0 || p.label > 1 || p.predicted < 0 || p.predicted > 1) {
      throw UsageError(fmt::format("prediction for {} has a label outside {{0, 1}}", p.example_id));
    }
    ++counts[p.label][p.predicted];
    correct += p.label == p.predicted ? 1 : 0;
  }
  if (!predictions.empty()) {
    r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
  }
  for (int t = 0; t < 2; ++t) {
    const std::size_t row = counts[t][0] + counts[t][1];
    for (int p = 0; p < 2; ++p) {
      r.confusion[t][p] = row == 0 ? 0.0 : 100.0 * static_cast<double>(counts[t][p]) / static_cast<double>(row);
    }
  }
  r.predictions = std::move(predictions);
  return r;
}

std::vector<Prediction> predict(const fusion::FusionConfig& config,
                                const fusion::FusionParams<float>& params,
                                std::span<const fusion::ExampleFeatures> features,
                                std::span<const std::size_t> indices, int batch_size) {
  std::vector<Prediction> out;
  out.reserve(indices.size());
  std::vector<const fusion::ExampleFeatures*> batch;
  const auto step = static_cast<std::size_t>(std::max(batch_size, 1));
  for (std::size_t start = 0; start < indices.size(); start += step) {
    const std::size_t end = std::min(indices.size(), start + step);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(&features[indices[i]]);
    const nn::Matrix<float> probs = nn::softmax<float>(fusion::forward_batch<float>(batch, config, params));
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      out.push_back({batch[j]->example_id, batch[j]->label, probs(1, col) > probs(0, col) ? 1 : 0,
                     static_cast<double>(probs(1, col))});
    }
  }
  return out;
}

EvalReport evaluate(const fusion::Checkpoint& checkpoint, const Dataset& dataset,
                    corpus::Partition partition, const std::string& hash) {
  const std::vector<std::size_t> idx = dataset.indices(partition);
  if (idx.empty()) {
    throw DataError(fmt::format("the {} partition is empty", corpus::to_string(partition)));
  }
  EvalReport r = report_from_predictions(
      predict(checkpoint.config, checkpoint.params, dataset.features, idx),
      std::string(corpus::to_string(partition)), hash);
  r.classifier_input_width = checkpoint.config.classifier_input_width();
  return r;
}

}  // namespace mmsi::harness
