#include "ucvme/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "ucvme/errors.hpp"

namespace ucvme {

const Vector& oracle_targets(const UnlabeledDataset& data) {
  if (data.hidden_targets_.size() != data.size()) {
    throw UsageError("oracle_targets: unlabeled set carries no ground truth");
  }
  return data.hidden_targets_;
}

namespace {

void require_pair(std::size_t a, std::size_t b, std::size_t min_len, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(a) + " vs " +
                     std::to_string(b));
  }
  if (a < min_len) {
    throw ShapeError(std::string(op) + ": need at least " + std::to_string(min_len) + " samples");
  }
}

Vector average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&v](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  Vector ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  require_pair(pred.size(), truth.size(), 1, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

double r_squared(std::span<const double> pred, std::span<const double> truth) {
  require_pair(pred.size(), truth.size(), 2, "r_squared");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) throw UndefinedMetricError("r_squared: truth is constant");
  return 1.0 - ss_res / ss_tot;
}

double spearman_rank_corr(std::span<const double> a, std::span<const double> b) {
  require_pair(a.size(), b.size(), 3, "spearman_rank_corr");
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (va == 0.0 || vb == 0.0) throw UndefinedMetricError("spearman_rank_corr: constant input");
  return cov / std::sqrt(va * vb);
}

BinReport uncertainty_binning(std::span<const double> z_pred, std::span<const double> y_pseudo,
                              std::span<const double> y_truth, std::size_t n_bins) {
  if (z_pred.size() != y_pseudo.size() || z_pred.size() != y_truth.size()) {
    throw ShapeError("uncertainty_binning: inputs differ in length");
  }
  if (n_bins == 0 || n_bins > z_pred.size()) {
    throw ParameterError("uncertainty_binning: n_bins must lie in [1, " +
                         std::to_string(z_pred.size()) + "]");
  }
  std::vector<std::size_t> order(z_pred.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&z_pred](std::size_t i, std::size_t j) { return z_pred[i] < z_pred[j]; });

  BinReport report;
  report.n_bins = n_bins;
  const std::size_t base = z_pred.size() / n_bins;
  const std::size_t extra = z_pred.size() % n_bins;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t count = base + (b < extra ? 1 : 0);
    double unc = 0.0, se = 0.0;
    for (std::size_t k = pos; k < pos + count; ++k) {
      const std::size_t i = order[k];
      unc += std::exp(z_pred[i]);
      se += (y_pseudo[i] - y_truth[i]) * (y_pseudo[i] - y_truth[i]);
    }
    report.mean_uncertainty.push_back(unc / static_cast<double>(count));
    report.pseudo_label_mse.push_back(se / static_cast<double>(count));
    report.counts.push_back(count);
    pos += count;
  }
  return report;
}

void write_bin_report_csv(const BinReport& report, std::ostream& out,
                          const std::vector<std::pair<std::string, std::string>>& extra) {
  out << "bin_index,mean_uncertainty,pseudo_label_mse,count";
  for (const auto& [name, value] : extra) out << ',' << name;
  out << '\n';
  char buf[64];
  for (std::size_t b = 0; b < report.n_bins; ++b) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%zu", b, report.mean_uncertainty[b],
                  report.pseudo_label_mse[b], report.counts[b]);
    out << buf;
    for (const auto& [name, value] : extra) out << ',' << value;
    out << '\n';
  }
}

}  // namespace ucvme
