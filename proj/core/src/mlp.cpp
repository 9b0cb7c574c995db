#include "ucvme/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "ucvme/errors.hpp"

namespace ucvme {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ParameterError("unknown activation '" + name + "' (expected relu or tanh)");
}

void MlpConfig::validate() const {
  if (input_dim < 1) throw ParameterError("MlpConfig: input_dim must be >= 1");
  for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
    if (hidden_dims[i] < 1) {
      throw ParameterError("MlpConfig: hidden_dims[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ParameterError("MlpConfig: dropout_p must lie in [0, 1), got " +
                         std::to_string(dropout_p));
  }
  if (!(z_min < z_max) || !std::isfinite(z_min) || !std::isfinite(z_max)) {
    throw ParameterError("MlpConfig: need finite z_min < z_max");
  }
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

bool ParameterSet::all_finite() const {
  return std::all_of(tensors.begin(), tensors.end(),
                     [](const Matrix& m) { return m.all_finite(); });
}

ParameterSet& ParameterSet::operator+=(const ParameterSet& other) {
  if (other.tensors.size() != tensors.size()) {
    throw ShapeError("ParameterSet: tensor count mismatch");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i] += other.tensors[i];
  return *this;
}

MlpModel::MlpModel(MlpConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t in = config_.input_dim;
  for (std::size_t width : config_.hidden_dims) {
    params_.tensors.emplace_back(in, width);
    params_.tensors.emplace_back(1, width);
    in = width;
  }
  for (int head = 0; head < 2; ++head) {
    params_.tensors.emplace_back(in, 1);
    params_.tensors.emplace_back(1, 1);
  }
}

std::size_t MlpModel::trunk_width() const noexcept {
  return config_.hidden_dims.empty() ? config_.input_dim : config_.hidden_dims.back();
}

GradientSet MlpModel::zero_gradients() const {
  GradientSet g;
  g.tensors.reserve(params_.tensors.size());
  for (const auto& t : params_.tensors) g.tensors.emplace_back(t.rows(), t.cols());
  return g;
}

MlpModel init_model(const MlpConfig& config, Rng& rng) {
  MlpModel model(config);
  auto& tensors = model.parameters().tensors;
  for (std::size_t i = 0; i < tensors.size(); i += 2) {
    Matrix& w = tensors[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
  }
  return model;
}

namespace {

double activate(Activation a, double v) {
  return a == Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
}

double activation_slope(Activation a, double pre) {
  if (a == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

ForwardTrace run_forward(const MlpModel& model, const Matrix& x, std::vector<Matrix> masks) {
  const auto& cfg = model.config();
  if (x.cols() != cfg.input_dim) {
    throw ShapeError("forward: input " + x.shape_string() + " does not match input_dim " +
                     std::to_string(cfg.input_dim));
  }
  if (masks.size() != model.hidden_layers()) {
    throw ShapeError("forward: expected " + std::to_string(model.hidden_layers()) +
                     " dropout masks, got " + std::to_string(masks.size()));
  }

  ForwardTrace trace;
  trace.input = x;
  const Matrix* h = &trace.input;
  for (std::size_t l = 0; l < model.hidden_layers(); ++l) {
    Matrix pre = add_row_broadcast(matmul(*h, model.hidden_weight(l)), model.hidden_bias(l));
    if (masks[l].rows() != pre.rows() || masks[l].cols() != pre.cols()) {
      throw ShapeError("forward: mask " + masks[l].shape_string() + " does not match layer " +
                       pre.shape_string());
    }
    Matrix out(pre.rows(), pre.cols());
    const auto p = pre.data();
    const auto m = masks[l].data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = activate(cfg.activation, p[i]) * m[i];
    trace.pre_activations.push_back(std::move(pre));
    trace.outputs.push_back(std::move(out));
    h = &trace.outputs.back();
  }
  trace.masks = std::move(masks);

  const Matrix y = matmul(*h, model.head_y_weight());
  const Matrix z = matmul(*h, model.head_z_weight());
  const std::size_t n = x.rows();
  trace.y_hat.resize(n);
  trace.z_raw.resize(n);
  trace.z_hat.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    trace.y_hat[i] = y(i, 0) + model.head_y_bias()(0, 0);
    trace.z_raw[i] = z(i, 0) + model.head_z_bias()(0, 0);
    trace.z_hat[i] = std::clamp(trace.z_raw[i], cfg.z_min, cfg.z_max);
  }
  return trace;
}

}  // namespace

ForwardTrace forward(const MlpModel& model, const Matrix& x) {
  std::vector<Matrix> masks;
  for (std::size_t width : model.config().hidden_dims) masks.push_back(Matrix::ones(x.rows(), width));
  return run_forward(model, x, std::move(masks));
}

ForwardTrace forward(const MlpModel& model, const Matrix& x, Rng& rng) {
  std::vector<Matrix> masks;
  for (std::size_t width : model.config().hidden_dims) {
    masks.push_back(sample_dropout_mask(rng, x.rows(), width, model.config().dropout_p));
  }
  return run_forward(model, x, std::move(masks));
}

ForwardTrace forward_with_masks(const MlpModel& model, const Matrix& x,
                                const std::vector<Matrix>& masks) {
  return run_forward(model, x, masks);
}

GradientSet backward(const MlpModel& model, const ForwardTrace& trace,
                     std::span<const double> d_y_hat, std::span<const double> d_z_hat) {
  const auto& cfg = model.config();
  const std::size_t n = trace.input.rows();
  const std::size_t layers = model.hidden_layers();
  if (trace.input.cols() != cfg.input_dim || trace.pre_activations.size() != layers ||
      trace.outputs.size() != layers || trace.masks.size() != layers ||
      trace.y_hat.size() != n || trace.z_raw.size() != n) {
    throw StateError("backward: trace was not produced by a model of this shape");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (trace.pre_activations[l].rows() != n || trace.pre_activations[l].cols() != cfg.hidden_dims[l]) {
      throw StateError("backward: trace layer " + std::to_string(l) + " has stale shape " +
                       trace.pre_activations[l].shape_string());
    }
  }
  if (d_y_hat.size() != n || d_z_hat.size() != n) {
    throw ShapeError("backward: upstream gradients must have batch length " + std::to_string(n));
  }

  GradientSet grads = model.zero_gradients();
  auto& g = grads.tensors;

  Matrix dy(n, 1), dz(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    dy(i, 0) = d_y_hat[i];
    const bool clamped = trace.z_raw[i] < cfg.z_min || trace.z_raw[i] > cfg.z_max;
    dz(i, 0) = clamped ? 0.0 : d_z_hat[i];
  }

  const Matrix& trunk = layers == 0 ? trace.input : trace.outputs.back();
  g[2 * layers] = matmul_tn(trunk, dy);
  g[2 * layers + 1] = column_sums(dy);
  g[2 * layers + 2] = matmul_tn(trunk, dz);
  g[2 * layers + 3] = column_sums(dz);
  if (layers == 0) return grads;

  Matrix d_h = matmul_nt(dy, model.head_y_weight());
  d_h += matmul_nt(dz, model.head_z_weight());

  for (std::size_t l = layers; l-- > 0;) {
    Matrix d_pre(n, cfg.hidden_dims[l]);
    const auto dh = d_h.data();
    const auto m = trace.masks[l].data();
    const auto p = trace.pre_activations[l].data();
    auto dp = d_pre.data();
    for (std::size_t i = 0; i < dp.size(); ++i) dp[i] = dh[i] * m[i] * activation_slope(cfg.activation, p[i]);

    const Matrix& below = l == 0 ? trace.input : trace.outputs[l - 1];
    g[2 * l] = matmul_tn(below, d_pre);
    g[2 * l + 1] = column_sums(d_pre);
    if (l > 0) d_h = matmul_nt(d_pre, model.hidden_weight(l));
  }
  return grads;
}

}  // namespace ucvme
