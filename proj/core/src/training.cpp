#include "ucvme/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace ucvme {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::baseline_con: return "baseline_con";
    case Variant::baseline_ens: return "baseline_ens";
    case Variant::full: return "full";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "baseline") return Variant::baseline;
  if (s == "baseline_con") return Variant::baseline_con;
  if (s == "baseline_ens") return Variant::baseline_ens;
  if (s == "full") return Variant::full;
  throw ParameterError("unknown variant '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(w_ulb >= 0.0) || !std::isfinite(w_ulb)) throw ParameterError("w_ulb: must be finite and >= 0");
  if (t_draws < 1) throw ParameterError("t_draws: must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ParameterError("dropout_p: must lie in [0, 1)");
  if (batch_labeled < 1) throw ParameterError("batch_labeled: must be >= 1");
  if (batch_unlabeled < 1) throw ParameterError("batch_unlabeled: must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("learning_rate: must be finite and > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum: must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight_decay: must be >= 0");
  for (auto d : hidden_dims)
    if (d < 1) throw ParameterError("hidden_dims: every width must be >= 1");
  if (!(z_min < z_max)) throw ParameterError("z_min/z_max: need z_min < z_max");
}

MlpConfig TrainConfig::model_config(std::size_t input_dim) const {
  MlpConfig m;
  m.input_dim = input_dim;
  m.hidden_dims = hidden_dims;
  m.dropout_p = dropout_p;
  m.activation = activation;
  m.z_min = z_min;
  m.z_max = z_max;
  return m;
}

OptimizerConfig TrainConfig::optimizer_config() const {
  OptimizerConfig o;
  o.kind = optimizer;
  o.learning_rate = learning_rate;
  o.momentum = momentum;
  o.weight_decay = weight_decay;
  return o;
}

TrainState TrainState::initial(const TrainConfig& config, std::size_t input_dim) {
  config.validate();
  const Rng root(config.seed);
  Rng init_a = root.substream("init_a");
  Rng init_b = root.substream("init_b");
  const MlpConfig mc = config.model_config(input_dim);
  return TrainState{init_model(mc, init_a), init_model(mc, init_b), {}, {}, 0, {}, root.substream("dropout")};
}

namespace {

PseudoTargets pseudo_targets_for(const MlpModel& a, const MlpModel& b, const Matrix& x,
                                 const TrainConfig& config, Rng& rng) {
  PseudoTargets out;
  if (uses_ensembling(config.variant)) {
    PseudoLabelBatch batch = generate_pseudo_labels(a, b, x, config.t_draws, rng);
    out.y_for_a = batch.y_tilde;
    out.z_for_a = batch.z_tilde;
    out.y_for_b = std::move(batch.y_tilde);
    out.z_for_b = std::move(batch.z_tilde);
  } else {
    ForwardTrace pa = forward(a, x, rng);
    ForwardTrace pb = forward(b, x, rng);
    out.y_for_a = std::move(pb.y_hat);
    out.z_for_a = std::move(pb.z_hat);
    out.y_for_b = std::move(pa.y_hat);
    out.z_for_b = std::move(pa.z_hat);
  }
  return out;
}

Vector scaled(const Vector& v, double s) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = s * v[i];
  return out;
}

void add_into(Vector& acc, const Vector& v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

}  // namespace

PseudoTargets make_pseudo_targets(TrainState& state, const Matrix& x_unlabeled,
                                  const TrainConfig& config) {
  return pseudo_targets_for(state.model_a, state.model_b, x_unlabeled, config, state.rng);
}

StepObjective evaluate_objective(const MlpModel& model_a, const MlpModel& model_b,
                                 const StepTraces& traces, std::span<const double> y_labeled,
                                 const PseudoTargets& targets, const TrainConfig& config) {
  const bool consistency = uses_consistency(config.variant);
  const double w = config.w_ulb;
  const auto& la = traces.labeled_a;
  const auto& lb = traces.labeled_b;

  StepObjective out;
  LossBreakdown& parts = out.parts;
  parts.w_ulb = w;

  const HeteroLoss ha = hetero_loss(la.y_hat, la.z_hat, y_labeled);
  const HeteroLoss hb = hetero_loss(lb.y_hat, lb.z_hat, y_labeled);
  parts.reg_lb = ha.loss + hb.loss;
  Vector dz_a = ha.d_z_hat;
  Vector dz_b = hb.d_z_hat;
  if (consistency) {
    const PairConsistency c = consistency_loss_labeled(la.z_hat, lb.z_hat);
    parts.unc_lb = c.loss;
    add_into(dz_a, c.d_z_a);
    add_into(dz_b, c.d_z_b);
  }
  out.grad_a = backward(model_a, la, ha.d_y_hat, dz_a);
  out.grad_b = backward(model_b, lb, hb.d_y_hat, dz_b);

  if (traces.unlabeled_a.has_value() != traces.unlabeled_b.has_value()) {
    throw UsageError("evaluate_objective: need unlabeled traces for both models or neither");
  }
  if (!traces.unlabeled_a) {
    if (w > 0.0) throw UsageError("evaluate_objective: no unlabeled traces but w_ulb > 0");
    parts.total = total_loss(parts);
    return out;
  }
  const ForwardTrace& ua = *traces.unlabeled_a;
  const ForwardTrace& ub = *traces.unlabeled_b;
  // The pseudo log-variance sets the weighting but is a constant here.
  const HeteroLoss ra = hetero_loss(ua.y_hat, targets.z_for_a, targets.y_for_a);
  const HeteroLoss rb = hetero_loss(ub.y_hat, targets.z_for_b, targets.y_for_b);
  parts.reg_ulb = ra.loss + rb.loss;
  const std::size_t n = ua.y_hat.size();
  Vector uz_a(n, 0.0), uz_b(n, 0.0);
  if (consistency) {
    const TargetConsistency ca = consistency_loss_unlabeled(ua.z_hat, targets.z_for_a);
    const TargetConsistency cb = consistency_loss_unlabeled(ub.z_hat, targets.z_for_b);
    parts.unc_ulb = ca.loss + cb.loss;
    uz_a = scaled(ca.d_z_m, w);
    uz_b = scaled(cb.d_z_m, w);
  }
  if (w > 0.0) {
    out.grad_a += backward(model_a, ua, scaled(ra.d_y_hat, w), uz_a);
    out.grad_b += backward(model_b, ub, scaled(rb.d_y_hat, w), uz_b);
  }
  parts.total = total_loss(parts);
  return out;
}

LossBreakdown train_step(TrainState& state, const Matrix& x_labeled, std::span<const double> y_labeled,
                         const Matrix& x_unlabeled, const TrainConfig& config,
                         const PseudoTargets* frozen) {
  if (x_labeled.rows() == 0) throw UsageError("train_step: labeled batch is empty");
  if (y_labeled.size() != x_labeled.rows()) {
    throw ShapeError("train_step: " + std::to_string(y_labeled.size()) + " targets for " +
                     std::to_string(x_labeled.rows()) + " labeled rows");
  }
  const bool has_unlabeled = x_unlabeled.rows() > 0;
  if (!has_unlabeled && config.w_ulb > 0.0) {
    throw UsageError("train_step: unlabeled batch is empty but w_ulb > 0");
  }
  LossBreakdown parts;
  parts.w_ulb = config.w_ulb;
  StepObjective objective;
  try {
    PseudoTargets targets;
    if (has_unlabeled) targets = frozen ? *frozen : make_pseudo_targets(state, x_unlabeled, config);
    StepTraces traces{forward(state.model_a, x_labeled, state.rng),
                      forward(state.model_b, x_labeled, state.rng), std::nullopt, std::nullopt};
    if (has_unlabeled) {
      traces.unlabeled_a = forward(state.model_a, x_unlabeled, state.rng);
      traces.unlabeled_b = forward(state.model_b, x_unlabeled, state.rng);
    }
    objective = evaluate_objective(state.model_a, state.model_b, traces, y_labeled, targets, config);
  } catch (const ValueError& e) {
    throw NonFiniteLoss(std::string("train_step aborted: ") + e.what(), parts);
  }
  parts = objective.parts;
  const GradientSet& grad_a = objective.grad_a;
  const GradientSet& grad_b = objective.grad_b;

  const OptimizerConfig opt = config.optimizer_config();
  ParameterSet next_a = state.model_a.parameters();
  ParameterSet next_b = state.model_b.parameters();
  OptimizerState next_opt_a = state.opt_a;
  OptimizerState next_opt_b = state.opt_b;
  optimizer_update(next_a, grad_a, next_opt_a, opt);
  optimizer_update(next_b, grad_b, next_opt_b, opt);
  if (!next_a.all_finite() || !next_b.all_finite()) {
    throw NonFiniteLoss("train_step aborted: update produced non-finite parameters", parts);
  }
  state.model_a.parameters() = std::move(next_a);
  state.model_b.parameters() = std::move(next_b);
  state.opt_a = std::move(next_opt_a);
  state.opt_b = std::move(next_opt_b);
  state.history.push_back(parts);
  return parts;
}

namespace {

struct BinCapture {
  BinReport report;
  double spearman = 0.0;
};

BinCapture capture_bins(const MlpModel& a, const MlpModel& b, const UnlabeledDataset& unlabeled,
                        const Normalizer& norm, const TrainConfig& config, std::size_t n_bins) {
  BinCapture out;
  if (unlabeled.size() < std::max<std::size_t>(n_bins, 3)) return out;
  Rng rng = Rng(config.seed).substream("bin_report");
  const PseudoTargets pt = pseudo_targets_for(a, b, unlabeled.features(), config, rng);
  const Vector y_pseudo = norm.inverse_targets(pt.y_for_a);
  const double log_scale2 = 2.0 * std::log(norm.target_scale);
  Vector z_orig(pt.z_for_a.size());
  for (std::size_t i = 0; i < z_orig.size(); ++i) z_orig[i] = pt.z_for_a[i] + log_scale2;
  const Vector& truth = oracle_targets(unlabeled);
  out.report = uncertainty_binning(z_orig, y_pseudo, truth, n_bins);
  Vector sq_err(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) sq_err[i] = (y_pseudo[i] - truth[i]) * (y_pseudo[i] - truth[i]);
  try {
    out.spearman = spearman_rank_corr(z_orig, sq_err);
  } catch (const UndefinedMetricError&) {
    out.spearman = 0.0;
  }
  return out;
}

class UnlabeledStream {
 public:
  UnlabeledStream(std::size_t n, Rng rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    if (order_.empty()) return out;
    while (out.size() < batch) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

}  // namespace

TestScore score_models(const MlpModel& model_a, const MlpModel& model_b, const Normalizer& normalizer,
                       const RegressionDataset& test, const TrainConfig& config) {
  Rng rng = Rng(config.seed).substream("test");
  const Prediction p = predict(model_a, model_b, normalizer.transform_features(test.features), config.t_draws, rng);
  const Vector y_pred = normalizer.inverse_targets(p.y_pred);
  const Vector& truth = test.require_targets();
  return {mae(y_pred, truth), r_squared(y_pred, truth)};
}

ExperimentResult run_experiment(const TrainConfig& config, const SemiSupervisedSplit& data,
                                const ReportOptions& report) {
  config.validate();
  const NormalizedSplit ns = normalize(data);
  const auto& labeled = ns.split.labeled;
  const auto& unlabeled = ns.split.unlabeled;
  const Vector& y_lab = labeled.require_targets();
  if (unlabeled.empty() && config.w_ulb > 0.0) {
    throw UsageError("run_experiment: no unlabeled data but w_ulb > 0");
  }

  const Rng root(config.seed);
  TrainState state = TrainState::initial(config, labeled.dim());
  Rng batch_rng = root.substream("batches");
  const Rng eval_root = root.substream("eval");
  UnlabeledStream stream(unlabeled.size(), root.substream("unlabeled_stream"));

  const Vector& val_truth = data.validation.require_targets();
  auto validation_mae = [&](const MlpModel& a, const MlpModel& b, std::size_t epoch) {
    Rng rng = eval_root.substream(static_cast<std::uint64_t>(epoch));
    const Prediction p = predict(a, b, ns.split.validation.features, config.t_draws, rng);
    return mae(ns.normalizer.inverse_targets(p.y_pred), val_truth);
  };

  ExperimentResult result;
  result.normalizer = ns.normalizer;
  result.best_val_mae = validation_mae(state.model_a, state.model_b, 0);
  result.val_mae_history.push_back(result.best_val_mae);
  MlpModel best_a = state.model_a;
  MlpModel best_b = state.model_b;
  bool captured = false;

  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t consecutive_failures = 0;
  const Matrix no_unlabeled;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[batch_rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += config.batch_labeled) {
      const std::size_t end = std::min(order.size(), start + config.batch_labeled);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      const Matrix x_l = labeled.features.select_rows(rows);
      Vector y_l;
      y_l.reserve(rows.size());
      for (auto r : rows) y_l.push_back(y_lab[r]);
      const std::vector<std::size_t> urows = stream.next(config.batch_unlabeled);
      const Matrix x_u = urows.empty() ? no_unlabeled : unlabeled.features().select_rows(urows);
      try {
        train_step(state, x_l, y_l, x_u, config);
        consecutive_failures = 0;
      } catch (const NonFiniteLoss& e) {
        ++result.skipped_steps;
        if (++consecutive_failures >= 2) {
          throw ExperimentFailure(std::string("training diverged at epoch ") + std::to_string(epoch) +
                                      ": " + e.what(),
                                  state.history);
        }
      }
    }
    state.epoch = epoch;
    const double v = validation_mae(state.model_a, state.model_b, epoch);
    result.val_mae_history.push_back(v);
    if (v < result.best_val_mae) {
      result.best_val_mae = v;
      result.best_epoch = epoch;
      best_a = state.model_a;
      best_b = state.model_b;
    }
    if (report.bin_report_epoch == epoch) {
      const BinCapture c = capture_bins(state.model_a, state.model_b, unlabeled, ns.normalizer, config, report.n_bins);
      result.bin_report = c.report;
      result.uncertainty_spearman = c.spearman;
      result.bin_report_epoch = epoch;
      captured = true;
    }
  }
  if (!captured) {
    const BinCapture c = capture_bins(best_a, best_b, unlabeled, ns.normalizer, config, report.n_bins);
    result.bin_report = c.report;
    result.uncertainty_spearman = c.spearman;
    result.bin_report_epoch = result.best_epoch;
  }

  const TestScore score = score_models(best_a, best_b, ns.normalizer, data.test, config);
  result.test_mae = score.mae;
  result.test_r2 = score.r2;
  result.history = std::move(state.history);
  result.model_a = std::move(best_a);
  result.model_b = std::move(best_b);
  return result;
}

}  // namespace ucvme
