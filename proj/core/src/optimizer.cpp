#include "ucvme/optimizer.hpp"

#include <cmath>

#include "ucvme/errors.hpp"

namespace ucvme {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd_momentum"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
  throw ParameterError("unknown optimizer '" + s + "' (expected adam or sgd_momentum)");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("optimizer: learning_rate must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("optimizer: momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("optimizer: Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ParameterError("optimizer: epsilon must be > 0");
  if (!(weight_decay >= 0.0)) throw ParameterError("optimizer: weight_decay must be >= 0");
}

void optimizer_update(ParameterSet& params, const GradientSet& grads, OptimizerState& state,
                      const OptimizerConfig& config) {
  auto& p = params.tensors;
  const auto& g = grads.tensors;
  if (p.size() != g.size()) throw ShapeError("optimizer_update: tensor count mismatch");
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].rows() != g[k].rows() || p[k].cols() != g[k].cols()) {
      throw ShapeError("optimizer_update: gradient " + g[k].shape_string() +
                       " does not match parameter " + p[k].shape_string());
    }
  }
  if (state.first.empty()) {
    for (const auto& t : p) {
      state.first.emplace_back(t.rows(), t.cols());
      state.second.emplace_back(t.rows(), t.cols());
    }
  }
  ++state.steps;
  const double lr = config.learning_rate;
  const double wd = config.weight_decay;

  if (config.kind == OptimizerKind::sgd_momentum) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto pd = p[k].data();
      const auto gd = g[k].data();
      auto vd = state.first[k].data();
      for (std::size_t i = 0; i < pd.size(); ++i) {
        vd[i] = config.momentum * vd[i] + (gd[i] + wd * pd[i]);
        pd[i] -= lr * vd[i];
      }
    }
    return;
  }

  const double t = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto pd = p[k].data();
    const auto gd = g[k].data();
    auto md = state.first[k].data();
    auto vd = state.second[k].data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      const double grad = gd[i] + wd * pd[i];
      md[i] = config.beta1 * md[i] + (1.0 - config.beta1) * grad;
      vd[i] = config.beta2 * vd[i] + (1.0 - config.beta2) * grad * grad;
      pd[i] -= lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + config.epsilon);
    }
  }
}

}  // namespace ucvme
