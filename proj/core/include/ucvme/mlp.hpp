#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ucvme/matrix.hpp"
#include "ucvme/rng.hpp"

namespace ucvme {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  double dropout_p = 0.05;
  Activation activation = Activation::relu;
  /// Range the log-variance head is clamped to.
  double z_min = -6.0;
  double z_max = 6.0;

  /// Throws ParameterError on an invalid configuration.
  void validate() const;
  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

/// Parameter (or gradient) storage in a fixed order:
/// [W_0, b_0, ..., W_{L-1}, b_{L-1}, W_y, b_y, W_z, b_z].
/// W_l is (dim_l x dim_{l+1}); every bias is a 1 x dim row.
struct ParameterSet {
  std::vector<Matrix> tensors;

  std::size_t scalar_count() const;
  bool all_finite() const;
  ParameterSet& operator+=(const ParameterSet& other);
  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

using GradientSet = ParameterSet;

/// Feedforward regressor with a shared trunk and two scalar heads:
/// head_y predicts the target, head_z the log aleatoric variance.
/// Dropout follows every hidden activation.
class MlpModel {
 public:
  /// All parameters zero; use init_model for a trainable network.
  explicit MlpModel(MlpConfig config);

  const MlpConfig& config() const noexcept { return config_; }
  std::size_t hidden_layers() const noexcept { return config_.hidden_dims.size(); }
  /// Width of the trunk output fed to both heads.
  std::size_t trunk_width() const noexcept;

  Matrix& hidden_weight(std::size_t l) { return params_.tensors[2 * l]; }
  Matrix& hidden_bias(std::size_t l) { return params_.tensors[2 * l + 1]; }
  Matrix& head_y_weight() { return params_.tensors[2 * hidden_layers()]; }
  Matrix& head_y_bias() { return params_.tensors[2 * hidden_layers() + 1]; }
  Matrix& head_z_weight() { return params_.tensors[2 * hidden_layers() + 2]; }
  Matrix& head_z_bias() { return params_.tensors[2 * hidden_layers() + 3]; }
  const Matrix& hidden_weight(std::size_t l) const { return params_.tensors[2 * l]; }
  const Matrix& hidden_bias(std::size_t l) const { return params_.tensors[2 * l + 1]; }
  const Matrix& head_y_weight() const { return params_.tensors[2 * hidden_layers()]; }
  const Matrix& head_y_bias() const { return params_.tensors[2 * hidden_layers() + 1]; }
  const Matrix& head_z_weight() const { return params_.tensors[2 * hidden_layers() + 2]; }
  const Matrix& head_z_bias() const { return params_.tensors[2 * hidden_layers() + 3]; }

  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }
  /// Zero-filled set with the same shapes as the parameters.
  GradientSet zero_gradients() const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  MlpConfig config_;
  ParameterSet params_;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn layer by layer in
/// storage order; all biases zero (so the initial variance is exp(0) = 1).
MlpModel init_model(const MlpConfig& config, Rng& rng);

/// Everything backward() needs from one forward pass.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_activations;  // per hidden layer
  std::vector<Matrix> masks;            // per hidden layer, inverted-dropout scaled
  std::vector<Matrix> outputs;          // per hidden layer, after activation and mask
  Vector y_hat;
  Vector z_raw;  // head_z output before clamping
  Vector z_hat;
};

/// Deterministic pass: every mask is all ones.
ForwardTrace forward(const MlpModel& model, const Matrix& x);
/// Stochastic pass: one fresh dropout mask per hidden layer, drawn from rng
/// in layer order. This is one Monte Carlo dropout draw.
ForwardTrace forward(const MlpModel& model, const Matrix& x, Rng& rng);
/// Replays a pass with the given masks (one per hidden layer).
ForwardTrace forward_with_masks(const MlpModel& model, const Matrix& x,
                                const std::vector<Matrix>& masks);

/// Reverse-mode gradients of a scalar loss given its gradients with respect
/// to y_hat and z_hat. Gradients only flow through units kept by the stored
/// masks, and z receives none where the clamp was active.
GradientSet backward(const MlpModel& model, const ForwardTrace& trace,
                     std::span<const double> d_y_hat, std::span<const double> d_z_hat);

/// Text checkpoint, format version 1. Every real is written as a C99
/// hexadecimal float, so save followed by load is bit-exact.
///
///   ucvme-mlp-checkpoint 1
///   input_dim <n>
///   hidden_dims <count> <d_0> ... <d_{count-1}>
///   activation relu|tanh
///   dropout_p <hex>
///   z_range <hex> <hex>
///   tensors <k>
///   tensor <index> <rows> <cols>
///   <rows*cols hex values, one row per line>
///   ...
///   end
void save_checkpoint(const MlpModel& model, std::ostream& out);
MlpModel load_checkpoint(std::istream& in);
void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace ucvme
