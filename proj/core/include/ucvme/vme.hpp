#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ucvme/data.hpp"
#include "ucvme/mlp.hpp"

namespace ucvme {

/// Outputs of one variational draw t from both models on the same batch.
struct DrawOutputs {
  Vector y_a, z_a;
  Vector y_b, z_b;
};

/// Ensembled pseudo-labels for a batch. Plain values: nothing here refers
/// back to either model, so no gradient can flow into them.
struct PseudoLabelBatch {
  Vector y_tilde;
  Vector z_tilde;
  std::size_t t_draws = 0;
  /// Per-draw raw predictions, filled only when requested.
  std::vector<DrawOutputs> draws;

  friend bool operator==(const PseudoLabelBatch&, const PseudoLabelBatch&) = default;
};

/// y_tilde_i = (1/T) sum_t (y_a^t + y_b^t) / 2, likewise for z_tilde.
/// Draws are reduced in index order.
PseudoLabelBatch ensemble_draws(std::span<const DrawOutputs> draws);

/// T stochastic passes per model with independent dropout masks. For each
/// t, model a then model b draw their masks from rng.
PseudoLabelBatch generate_pseudo_labels(const MlpModel& model_a, const MlpModel& model_b,
                                        const Matrix& x, std::size_t t_draws, Rng& rng,
                                        bool keep_draws = false);

struct Prediction {
  Vector y_pred;
  Vector z_pred;
};

/// Test-time inference: the same ensemble as generate_pseudo_labels.
Prediction predict(const MlpModel& model_a, const MlpModel& model_b, const Matrix& x,
                   std::size_t t_draws, Rng& rng);

/// Monte Carlo estimate of the bias-variance decomposition of the expected
/// squared error, for the single-draw predictor (T = 1) and the T-draw
/// ensemble. Expectations run over the dropout distribution: each rerun is
/// a fresh independent prediction of every sample. Averaged over samples,
///   mse = bias + var
/// holds exactly for both predictors, where bias is the squared distance of
/// the per-sample rerun mean from the truth and var the spread around it.
struct VarianceReport {
  std::size_t t_draws = 0;
  std::size_t reruns = 0;
  double mse_single = 0.0;
  double mse_ensemble = 0.0;
  double bias_single = 0.0;
  double bias_ensemble = 0.0;
  double var_single = 0.0;
  double var_ensemble = 0.0;
  /// Standard errors of the per-rerun MSE means.
  double mse_single_se = 0.0;
  double mse_ensemble_se = 0.0;
  /// Paired difference mse_ensemble - mse_single and its standard error.
  double mse_diff = 0.0;
  double mse_diff_se = 0.0;
  /// Signed mean error (ensemble minus single) and its standard error.
  double mean_error_diff = 0.0;
  double mean_error_diff_se = 0.0;

  /// Ensemble expected MSE is not above the single-draw one beyond k SE.
  bool ensemble_not_worse(double k = 2.0) const { return mse_diff <= k * mse_diff_se + rounding_floor(); }
  /// The two predictors' biases agree within k SE.
  bool bias_equal(double k = 2.0) const;
  /// Absolute slack for summation-order differences when both SEs vanish.
  double rounding_floor() const { return 1e-12 * (1.0 + mse_single); }

  friend bool operator==(const VarianceReport&, const VarianceReport&) = default;
};

/// Throws ParameterError when reruns < 30 or t_draws == 0, UsageError when
/// the dataset has no targets.
VarianceReport variance_reduction_check(const MlpModel& model_a, const MlpModel& model_b,
                                        const RegressionDataset& dataset_with_truth,
                                        std::size_t t_draws, std::size_t reruns, Rng& rng);

/// JSON object with the fields of VarianceReport (stable key order).
std::string to_json(const VarianceReport& report);

}  // namespace ucvme
