#include "ucvme/vme.hpp"

#include <cmath>

#include <json.hpp>

#include "ucvme/errors.hpp"

namespace ucvme {

PseudoLabelBatch ensemble_draws(std::span<const DrawOutputs> draws) {
  if (draws.empty()) throw ParameterError("ensemble_draws: need at least one draw");
  const std::size_t n = draws.front().y_a.size();
  PseudoLabelBatch out;
  out.t_draws = draws.size();
  out.y_tilde.assign(n, 0.0);
  out.z_tilde.assign(n, 0.0);
  for (const auto& d : draws) {
    if (d.y_a.size() != n || d.z_a.size() != n || d.y_b.size() != n || d.z_b.size() != n) {
      throw ShapeError("ensemble_draws: draws disagree on batch size");
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.y_tilde[i] += (d.y_a[i] + d.y_b[i]) / 2.0;
      out.z_tilde[i] += (d.z_a[i] + d.z_b[i]) / 2.0;
    }
  }
  const double t = static_cast<double>(draws.size());
  for (std::size_t i = 0; i < n; ++i) {
    out.y_tilde[i] /= t;
    out.z_tilde[i] /= t;
  }
  return out;
}

PseudoLabelBatch generate_pseudo_labels(const MlpModel& model_a, const MlpModel& model_b,
                                        const Matrix& x, std::size_t t_draws, Rng& rng,
                                        bool keep_draws) {
  if (t_draws == 0) throw ParameterError("generate_pseudo_labels: t_draws must be >= 1");
  std::vector<DrawOutputs> draws;
  draws.reserve(t_draws);
  for (std::size_t t = 0; t < t_draws; ++t) {
    ForwardTrace a = forward(model_a, x, rng);
    ForwardTrace b = forward(model_b, x, rng);
    draws.push_back({std::move(a.y_hat), std::move(a.z_hat), std::move(b.y_hat), std::move(b.z_hat)});
  }
  PseudoLabelBatch out = ensemble_draws(draws);
  if (keep_draws) out.draws = std::move(draws);
  return out;
}

Prediction predict(const MlpModel& model_a, const MlpModel& model_b, const Matrix& x,
                   std::size_t t_draws, Rng& rng) {
  PseudoLabelBatch batch = generate_pseudo_labels(model_a, model_b, x, t_draws, rng);
  return {std::move(batch.y_tilde), std::move(batch.z_tilde)};
}

bool VarianceReport::bias_equal(double k) const {
  return std::abs(mean_error_diff) <= k * mean_error_diff_se + rounding_floor();
}

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments mean_and_se(const Vector& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

// Plug-in decomposition over an R x N table of predictions.
void decompose(const std::vector<Vector>& preds, const Vector& truth, double& bias, double& var) {
  const std::size_t n = truth.size();
  const double r = static_cast<double>(preds.size());
  bias = 0.0;
  var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const auto& p : preds) mean += p[i];
    mean /= r;
    double spread = 0.0;
    for (const auto& p : preds) spread += (p[i] - mean) * (p[i] - mean);
    bias += (mean - truth[i]) * (mean - truth[i]);
    var += spread / r;
  }
  bias /= static_cast<double>(n);
  var /= static_cast<double>(n);
}

}  // namespace

VarianceReport variance_reduction_check(const MlpModel& model_a, const MlpModel& model_b,
                                        const RegressionDataset& dataset_with_truth,
                                        std::size_t t_draws, std::size_t reruns, Rng& rng) {
  if (reruns < 30) throw ParameterError("variance_reduction_check: reruns must be >= 30");
  if (t_draws == 0) throw ParameterError("variance_reduction_check: t_draws must be >= 1");
  const Vector& truth = dataset_with_truth.require_targets();
  const std::size_t n = truth.size();
  if (n == 0) throw ParameterError("variance_reduction_check: empty dataset");

  std::vector<Vector> single(reruns), ensemble(reruns);
  Vector mse_s(reruns), mse_e(reruns), mse_d(reruns), err_d(reruns);
  for (std::size_t r = 0; r < reruns; ++r) {
    single[r] = predict(model_a, model_b, dataset_with_truth.features, 1, rng).y_pred;
    ensemble[r] = predict(model_a, model_b, dataset_with_truth.features, t_draws, rng).y_pred;
    double ss = 0.0, se = 0.0, ed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ss += (single[r][i] - truth[i]) * (single[r][i] - truth[i]);
      se += (ensemble[r][i] - truth[i]) * (ensemble[r][i] - truth[i]);
      ed += ensemble[r][i] - single[r][i];
    }
    const double dn = static_cast<double>(n);
    mse_s[r] = ss / dn;
    mse_e[r] = se / dn;
    mse_d[r] = mse_e[r] - mse_s[r];
    err_d[r] = ed / dn;
  }

  VarianceReport report;
  report.t_draws = t_draws;
  report.reruns = reruns;
  const auto ms = mean_and_se(mse_s);
  const auto me = mean_and_se(mse_e);
  const auto md = mean_and_se(mse_d);
  const auto ed = mean_and_se(err_d);
  report.mse_single = ms.mean;
  report.mse_single_se = ms.se;
  report.mse_ensemble = me.mean;
  report.mse_ensemble_se = me.se;
  report.mse_diff = md.mean;
  report.mse_diff_se = md.se;
  report.mean_error_diff = ed.mean;
  report.mean_error_diff_se = ed.se;
  decompose(single, truth, report.bias_single, report.var_single);
  decompose(ensemble, truth, report.bias_ensemble, report.var_ensemble);
  return report;
}

std::string to_json(const VarianceReport& r) {
  nlohmann::ordered_json j;
  j["t_draws"] = r.t_draws;
  j["reruns"] = r.reruns;
  j["mse_single"] = r.mse_single;
  j["mse_ensemble"] = r.mse_ensemble;
  j["bias_single"] = r.bias_single;
  j["bias_ensemble"] = r.bias_ensemble;
  j["var_single"] = r.var_single;
  j["var_ensemble"] = r.var_ensemble;
  j["mse_single_se"] = r.mse_single_se;
  j["mse_ensemble_se"] = r.mse_ensemble_se;
  j["mse_diff"] = r.mse_diff;
  j["mse_diff_se"] = r.mse_diff_se;
  j["mean_error_diff"] = r.mean_error_diff;
  j["mean_error_diff_se"] = r.mean_error_diff_se;
  return j.dump(2);
}

}  // namespace ucvme
