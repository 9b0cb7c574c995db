#include "ucvme/losses.hpp"

#include <cmath>
#include <string>

#include "ucvme/errors.hpp"

namespace ucvme {

namespace {

void require_lengths(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(a) + " vs " +
                     std::to_string(b));
  }
  if (a == 0) throw ShapeError(std::string(op) + ": empty input");
}

void require_finite(std::span<const double> v, const char* op, const char* name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw ValueError(std::string(op) + ": non-finite " + name + "[" + std::to_string(i) + "]");
    }
  }
}

}  // namespace

HeteroLoss hetero_loss(std::span<const double> y_hat, std::span<const double> z_hat,
                       std::span<const double> y_target) {
  require_lengths(y_hat.size(), z_hat.size(), "hetero_loss");
  require_lengths(y_hat.size(), y_target.size(), "hetero_loss");
  require_finite(y_hat, "hetero_loss", "y_hat");
  require_finite(z_hat, "hetero_loss", "z_hat");
  require_finite(y_target, "hetero_loss", "y_target");

  const std::size_t n = y_hat.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  HeteroLoss out;
  out.d_y_hat.resize(n);
  out.d_z_hat.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y_hat[i] - y_target[i];
    const double inv_var = std::exp(-z_hat[i]);
    const double weighted = r * r * inv_var / 2.0;
    sum += weighted + z_hat[i] / 2.0;
    out.d_y_hat[i] = r * inv_var * inv_n;
    out.d_z_hat[i] = (0.5 - weighted) * inv_n;
  }
  out.loss = sum * inv_n;
  if (!std::isfinite(out.loss)) throw ValueError("hetero_loss: loss is not finite");
  return out;
}

PairConsistency consistency_loss_labeled(std::span<const double> z_a, std::span<const double> z_b) {
  require_lengths(z_a.size(), z_b.size(), "consistency_loss_labeled");
  const std::size_t n = z_a.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  PairConsistency out;
  out.d_z_a.resize(n);
  out.d_z_b.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = z_a[i] - z_b[i];
    sum += d * d;
    out.d_z_a[i] = 2.0 * d * inv_n;
    out.d_z_b[i] = -2.0 * d * inv_n;
  }
  out.loss = sum * inv_n;
  if (!std::isfinite(out.loss)) throw ValueError("consistency_loss_labeled: loss is not finite");
  return out;
}

TargetConsistency consistency_loss_unlabeled(std::span<const double> z_m,
                                             std::span<const double> z_tilde) {
  require_lengths(z_m.size(), z_tilde.size(), "consistency_loss_unlabeled");
  const std::size_t n = z_m.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  TargetConsistency out;
  out.d_z_m.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = z_m[i] - z_tilde[i];
    sum += d * d;
    out.d_z_m[i] = 2.0 * d * inv_n;
  }
  out.loss = sum * inv_n;
  if (!std::isfinite(out.loss)) throw ValueError("consistency_loss_unlabeled: loss is not finite");
  return out;
}

double total_loss(const LossBreakdown& parts) {
  const std::pair<const char*, double> fields[] = {
      {"reg_lb", parts.reg_lb},   {"unc_lb", parts.unc_lb}, {"reg_ulb", parts.reg_ulb},
      {"unc_ulb", parts.unc_ulb}, {"w_ulb", parts.w_ulb},
  };
  for (const auto& [name, value] : fields) {
    if (!std::isfinite(value)) throw ValueError(std::string("total_loss: component ") + name + " is not finite");
  }
  return parts.reg_lb + parts.unc_lb + parts.w_ulb * (parts.reg_ulb + parts.unc_ulb);
}

}  // namespace ucvme
