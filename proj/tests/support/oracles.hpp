#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace ucvme::testing {

/// Central difference (f(x+h) - f(x-h)) / 2h.
inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a - b| within rel * max(|a|, |b|), or within an absolute floor.
inline bool gradients_agree(double analytic, double numeric, double rel, double abs_floor = 1e-8) {
  const double diff = std::abs(analytic - numeric);
  return diff <= abs_floor || diff <= rel * std::max(std::abs(analytic), std::abs(numeric));
}

/// ln N(y; mu, var).
inline double gaussian_log_density(double y, double mu, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - (y - mu) * (y - mu) / (2.0 * var);
}

/// Plain-formula heteroscedastic loss (no gradients).
inline double reference_hetero(std::span<const double> y_hat, std::span<const double> z,
                               std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s += (y_hat[i] - y[i]) * (y_hat[i] - y[i]) / (2.0 * std::exp(z[i])) + z[i] / 2.0;
  }
  return s / static_cast<double>(y.size());
}

inline double reference_mean_sq_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double sample_mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(std::span<const double> v) {
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace ucvme::testing
