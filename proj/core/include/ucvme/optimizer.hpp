#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ucvme/mlp.hpp"

namespace ucvme {

enum class OptimizerKind { sgd_momentum, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

/// Defaults: Adam(beta1 0.9, beta2 0.999, eps 1e-8), SGD momentum 0.9,
/// no weight decay.
struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// L2 penalty added to the gradient before the update.
  double weight_decay = 0.0;

  void validate() const;
};

/// Per-model accumulators: the SGD velocity or Adam's first moment in
/// `first`, Adam's second moment in `second`.
struct OptimizerState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  std::uint64_t steps = 0;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One in-place update.
///   sgd_momentum: v <- mu v + g;  p <- p - lr v
///   adam:         m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///                 p <- p - lr (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void optimizer_update(ParameterSet& params, const GradientSet& grads, OptimizerState& state,
                      const OptimizerConfig& config);

}  // namespace ucvme
