#pragma once

#include <span>

#include "ucvme/matrix.hpp"

namespace ucvme {

/// Heteroscedastic regression loss with log-variance z:
///   L = mean_i [ (y_hat_i - y_i)^2 / (2 exp(z_i)) + z_i / 2 ]
/// With z held at 0 this is MSE / 2; it is the Gaussian negative
/// log-likelihood without the (1/2) ln(2 pi) constant.
struct HeteroLoss {
  double loss = 0.0;
  Vector d_y_hat;
  Vector d_z_hat;
};

HeteroLoss hetero_loss(std::span<const double> y_hat, std::span<const double> z_hat,
                       std::span<const double> y_target);

/// Uncertainty consistency between two co-trained models on the same inputs:
/// mean_i (z_a,i - z_b,i)^2.
struct PairConsistency {
  double loss = 0.0;
  Vector d_z_a;
  Vector d_z_b;
};

PairConsistency consistency_loss_labeled(std::span<const double> z_a, std::span<const double> z_b);

/// Consistency of one model's log-variance with a fixed pseudo-label z_tilde:
/// mean_i (z_m,i - z_tilde_i)^2. The target is a constant, so the result
/// carries a gradient for z_m only.
struct TargetConsistency {
  double loss = 0.0;
  Vector d_z_m;
};

TargetConsistency consistency_loss_unlabeled(std::span<const double> z_m,
                                             std::span<const double> z_tilde);

/// The four loss terms of one co-training step and their weighted sum.
struct LossBreakdown {
  double reg_lb = 0.0;   // heteroscedastic loss on labeled data, summed over both models
  double unc_lb = 0.0;   // labeled uncertainty consistency
  double reg_ulb = 0.0;  // heteroscedastic loss against pseudo-labels, summed over models
  double unc_ulb = 0.0;  // unlabeled uncertainty consistency, summed over models
  double w_ulb = 0.0;
  double total = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// reg_lb + unc_lb + w_ulb * (reg_ulb + unc_ulb). Throws ValueError naming
/// the first non-finite component.
double total_loss(const LossBreakdown& parts);

}  // namespace ucvme
