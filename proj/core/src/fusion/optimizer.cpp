#include <cmath>

#include <fmt/format.h>

#include "mmsi/errors.hpp"
#include "mmsi/fusion.hpp"

namespace mmsi::fusion {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw UsageError(fmt::format("unknown optimizer \"{}\" (expected sgd or adam)", name));
}

Optimizer::Optimizer(OptimizerSettings settings, FusionParams<float>& params)
    : settings_(settings) {
  if (!(settings_.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (settings_.weight_decay < 0.0) throw UsageError("weight decay must be non-negative");
  for (const NamedParam<float>& p : named_params(params)) {
    m_.push_back(nn::Matrix<float>::Zero(p.tensor->rows(), p.tensor->cols()));
    if (settings_.kind == OptimizerKind::adam) {
      v_.push_back(nn::Matrix<float>::Zero(p.tensor->rows(), p.tensor->cols()));
    }
  }
}

void Optimizer::step(FusionParams<float>& params, FusionParams<float>& grad) {
  auto ps = named_params(params);
  auto gs = named_params(grad);
  if (ps.size() != m_.size() || gs.size() != m_.size()) {
    throw UsageError("optimizer state does not match the parameter set");
  }
  ++t_;
  const auto lr = static_cast<float>(settings_.learning_rate);
  if (settings_.weight_decay != 0.0) {
    const auto keep = static_cast<float>(1.0 - settings_.learning_rate * settings_.weight_decay);
    for (const NamedParam<float>& p : ps) *p.tensor *= keep;
  }
  if (settings_.kind == OptimizerKind::sgd) {
    const auto mu = static_cast<float>(settings_.momentum);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (mu != 0.0f) {
        m_[i] = mu * m_[i] + *gs[i].tensor;
        *ps[i].tensor -= lr * m_[i];
      } else {
        *ps[i].tensor -= lr * *gs[i].tensor;
      }
    }
    return;
  }
  const auto b1 = static_cast<float>(settings_.beta1);
  const auto b2 = static_cast<float>(settings_.beta2);
  const auto eps = static_cast<float>(settings_.epsilon);
  const auto c1 = static_cast<float>(1.0 - std::pow(settings_.beta1, static_cast<double>(t_)));
  const auto c2 = static_cast<float>(1.0 - std::pow(settings_.beta2, static_cast<double>(t_)));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& g = gs[i].tensor->array();
    m_[i].array() = b1 * m_[i].array() + (1.0f - b1) * g;
    v_[i].array() = b2 * v_[i].array() + (1.0f - b2) * g.square();
    ps[i].tensor->array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
}

}  // namespace mmsi::fusion
