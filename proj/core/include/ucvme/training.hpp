#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ucvme/data.hpp"
#include "ucvme/errors.hpp"
#include "ucvme/evaluation.hpp"
#include "ucvme/losses.hpp"
#include "ucvme/mlp.hpp"
#include "ucvme/optimizer.hpp"
#include "ucvme/vme.hpp"

namespace ucvme {

/// Ablation variants.
///   baseline      co-trained pair, heteroscedastic losses only; each model's
///                 unlabeled target is one stochastic pass of the other model
///                 (cross-supervision)
///   baseline_con  baseline plus the labeled and unlabeled uncertainty
///                 consistency losses
///   baseline_ens  baseline with cross-supervision replaced by variational
///                 model ensembling of both models over T draws
///   full          consistency losses and ensembling
enum class Variant { baseline, baseline_con, baseline_ens, full };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
constexpr bool uses_consistency(Variant v) { return v == Variant::baseline_con || v == Variant::full; }
constexpr bool uses_ensembling(Variant v) { return v == Variant::baseline_ens || v == Variant::full; }

struct TrainConfig {
  double w_ulb = 10.0;
  std::size_t t_draws = 5;
  double dropout_p = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_labeled = 16;
  std::size_t batch_unlabeled = 64;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  Variant variant = Variant::full;

  std::vector<std::size_t> hidden_dims = {64, 64};
  Activation activation = Activation::relu;
  double z_min = -6.0;
  double z_max = 6.0;

  /// Throws ParameterError naming the offending field.
  void validate() const;
  MlpConfig model_config(std::size_t input_dim) const;
  OptimizerConfig optimizer_config() const;
};

/// Both co-trained models and everything needed to continue training.
///
/// Random streams are derived from the seed: models are initialised from
/// the "init_a" / "init_b" substreams and every dropout mask drawn during
/// training comes from the "dropout" substream, in call order.
struct TrainState {
  MlpModel model_a;
  MlpModel model_b;
  OptimizerState opt_a;
  OptimizerState opt_b;
  std::size_t epoch = 0;
  std::vector<LossBreakdown> history;
  Rng rng;

  static TrainState initial(const TrainConfig& config, std::size_t input_dim);
};

/// Unlabeled targets for one step. With ensembling both models share one
/// target; with cross-supervision model a is trained on model b's pass and
/// vice versa.
struct PseudoTargets {
  Vector y_for_a, z_for_a;
  Vector y_for_b, z_for_b;
};

/// Pseudo-targets for a batch with the state's current weights, drawing
/// dropout masks from state.rng.
PseudoTargets make_pseudo_targets(TrainState& state, const Matrix& x_unlabeled,
                                  const TrainConfig& config);

/// Stochastic passes of both models that one step differentiates through.
struct StepTraces {
  ForwardTrace labeled_a, labeled_b;
  std::optional<ForwardTrace> unlabeled_a, unlabeled_b;
};

struct StepObjective {
  LossBreakdown parts;
  GradientSet grad_a;
  GradientSet grad_b;
};

/// Total loss of one step and its exact gradients for both models, given
/// the forward traces (and hence the dropout masks) and the pseudo-targets.
/// Pseudo-targets are constants. Unlabeled traces may be absent only when
/// w_ulb == 0. Kernel failures on non-finite values raise ValueError.
StepObjective evaluate_objective(const MlpModel& model_a, const MlpModel& model_b,
                                 const StepTraces& traces, std::span<const double> y_labeled,
                                 const PseudoTargets& targets, const TrainConfig& config);

/// A loss or updated parameter was not finite. The step was not applied.
class NonFiniteLoss : public ValueError {
 public:
  NonFiniteLoss(const std::string& what, LossBreakdown partial)
      : ValueError(what), partial_(partial) {}
  const LossBreakdown& partial() const noexcept { return partial_; }

 private:
  LossBreakdown partial_;
};

/// One co-training step: pseudo-labels for the unlabeled batch (from
/// `frozen` if given, otherwise freshly generated), one stochastic pass per
/// model on the labeled batch and on the unlabeled batch, the total loss,
/// and one optimizer update for each model. Appends the breakdown to
/// state.history and returns it.
///
/// x_unlabeled may be empty only when w_ulb == 0 (UsageError otherwise).
LossBreakdown train_step(TrainState& state, const Matrix& x_labeled, std::span<const double> y_labeled,
                         const Matrix& x_unlabeled, const TrainConfig& config,
                         const PseudoTargets* frozen = nullptr);

struct ReportOptions {
  std::size_t n_bins = 10;
  /// Epoch after which the uncertainty bin report is captured; 0 means the
  /// selected (best-validation) models.
  std::size_t bin_report_epoch = 0;
};

/// Everything a finished run produces. Metrics are in original target units.
struct ExperimentResult {
  double test_mae = 0.0;
  double test_r2 = 0.0;
  double best_val_mae = 0.0;
  std::size_t best_epoch = 0;
  std::size_t skipped_steps = 0;
  std::vector<LossBreakdown> history;
  std::vector<double> val_mae_history;  // index 0 is the untrained models
  /// Pseudo-label quality on the unlabeled set. Uses the hidden targets, so
  /// these are oracle-only diagnostics.
  BinReport bin_report;
  double uncertainty_spearman = 0.0;
  std::size_t bin_report_epoch = 0;
  MlpModel model_a{MlpConfig{}};
  MlpModel model_b{MlpConfig{}};
  Normalizer normalizer;

  friend bool operator==(const ExperimentResult&, const ExperimentResult&) = default;
};

/// Training failed for good: a non-finite loss on two consecutive steps.
class ExperimentFailure : public Error {
 public:
  ExperimentFailure(const std::string& what, std::vector<LossBreakdown> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<LossBreakdown>& history() const noexcept { return history_; }

 private:
  std::vector<LossBreakdown> history_;
};

struct TestScore {
  double mae = 0.0;
  double r2 = 0.0;
};

/// Test metrics in original units: predict() with config.t_draws draws on the
/// "test" substream of config.seed. run_experiment scores its selected
/// models with this.
TestScore score_models(const MlpModel& model_a, const MlpModel& model_b, const Normalizer& normalizer,
                       const RegressionDataset& test, const TrainConfig& config);

/// Normalises the split on its labeled part, trains for config.epochs
/// (one epoch = one pass over the shuffled labeled set; the unlabeled set is
/// an independent stream that reshuffles when exhausted), keeps the models
/// with the lowest validation MAE under predict(), and scores them on test.
ExperimentResult run_experiment(const TrainConfig& config, const SemiSupervisedSplit& data,
                                const ReportOptions& report = {});

}  // namespace ucvme
