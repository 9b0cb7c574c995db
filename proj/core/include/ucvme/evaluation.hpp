#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "ucvme/data.hpp"
#include "ucvme/matrix.hpp"

namespace ucvme {

/// Mean absolute error. Throws ShapeError on length mismatch or empty input.
double mae(std::span<const double> pred, std::span<const double> truth);

/// Coefficient of determination 1 - SS_res / SS_tot. Needs at least two
/// samples; throws UndefinedMetricError when truth is constant.
double r_squared(std::span<const double> pred, std::span<const double> truth);

/// Spearman rank correlation with average ranks for ties. Needs at least
/// three samples; throws UndefinedMetricError if either input is constant.
double spearman_rank_corr(std::span<const double> a, std::span<const double> b);

/// Pseudo-label quality per uncertainty bin, bins in ascending uncertainty.
struct BinReport {
  std::size_t n_bins = 0;
  Vector mean_uncertainty;  // mean exp(z) per bin
  Vector pseudo_label_mse;  // MSE(y_pseudo, y_truth) per bin
  std::vector<std::size_t> counts;

  friend bool operator==(const BinReport&, const BinReport&) = default;
};

/// Sorts samples by z_pred (ties by original index), cuts them into n_bins
/// contiguous equal-size groups (the first N mod n_bins bins get one extra
/// sample) and reports mean exp(z) and pseudo-label MSE per group.
BinReport uncertainty_binning(std::span<const double> z_pred, std::span<const double> y_pseudo,
                              std::span<const double> y_truth, std::size_t n_bins);

/// CSV with columns bin_index,mean_uncertainty,pseudo_label_mse,count followed
/// by any extra constant columns (name, value) appended to every row.
void write_bin_report_csv(const BinReport& report, std::ostream& out,
                          const std::vector<std::pair<std::string, std::string>>& extra = {});

}  // namespace ucvme
