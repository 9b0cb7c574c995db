#include "ucvme/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ucvme/errors.hpp"

namespace ucvme {

const Vector& RegressionDataset::require_targets() const {
  if (!targets) throw UsageError("dataset has no targets");
  return *targets;
}

void RegressionDataset::validate() const {
  if (targets && targets->size() != size()) {
    throw ShapeError("dataset: " + std::to_string(targets->size()) + " targets for " +
                     std::to_string(size()) + " rows");
  }
  if (true_noise_sigma && true_noise_sigma->size() != size()) {
    throw ShapeError("dataset: noise sigma length does not match row count");
  }
  if (!source_rows.empty() && source_rows.size() != size()) {
    throw ShapeError("dataset: source_rows length does not match row count");
  }
  if (!features.all_finite()) throw ValueError("dataset: non-finite feature value");
  if (targets) {
    for (double v : *targets)
      if (!std::isfinite(v)) throw ValueError("dataset: non-finite target value");
  }
}

RegressionDataset RegressionDataset::subset(const std::vector<std::size_t>& rows) const {
  RegressionDataset out;
  out.features = features.select_rows(rows);
  auto pick = [&rows](const Vector& v) {
    Vector o;
    o.reserve(rows.size());
    for (auto r : rows) o.push_back(v[r]);
    return o;
  };
  if (targets) out.targets = pick(*targets);
  if (true_noise_sigma) out.true_noise_sigma = pick(*true_noise_sigma);
  out.source_rows.reserve(rows.size());
  for (auto r : rows) out.source_rows.push_back(source_rows.empty() ? r : source_rows[r]);
  return out;
}

UnlabeledDataset UnlabeledDataset::conceal(RegressionDataset data) {
  UnlabeledDataset out;
  out.features_ = std::move(data.features);
  out.hidden_targets_ = data.targets ? std::move(*data.targets) : Vector{};
  out.source_rows_ = std::move(data.source_rows);
  return out;
}

UnlabeledDataset UnlabeledDataset::with_features(Matrix features) const {
  if (features.rows() != features_.rows()) {
    throw ShapeError("with_features: row count changed");
  }
  UnlabeledDataset out = *this;
  out.features_ = std::move(features);
  return out;
}

std::string to_string(TargetFunction f) {
  switch (f) {
    case TargetFunction::linear: return "linear";
    case TargetFunction::sinusoidal: return "sinusoidal";
    case TargetFunction::piecewise: return "piecewise";
  }
  return "?";
}

std::string to_string(NoiseModel m) {
  return m == NoiseModel::constant ? "constant" : "input_dependent";
}

TargetFunction target_function_from_string(const std::string& s) {
  if (s == "linear") return TargetFunction::linear;
  if (s == "sinusoidal") return TargetFunction::sinusoidal;
  if (s == "piecewise") return TargetFunction::piecewise;
  throw ParameterError("unknown target function '" + s + "'");
}

NoiseModel noise_model_from_string(const std::string& s) {
  if (s == "constant") return NoiseModel::constant;
  if (s == "input_dependent") return NoiseModel::input_dependent;
  throw ParameterError("unknown noise model '" + s + "'");
}

void SyntheticSpec::validate() const {
  if (n_samples < 40) throw ParameterError("synthetic: n_samples must be >= 40");
  if (input_dim < 1) throw ParameterError("synthetic: input_dim must be >= 1");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ParameterError("synthetic: noise_scale must be finite and >= 0");
  }
}

double synthetic_target(TargetFunction f, std::span<const double> x) {
  double y = 0.0;
  switch (f) {
    case TargetFunction::linear:
      for (std::size_t j = 0; j < x.size(); ++j) y += 2.0 * x[j] / static_cast<double>(j + 1);
      break;
    case TargetFunction::sinusoidal:
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double k = static_cast<double>(j + 1);
        y += std::sin(std::numbers::pi * k * x[j]) / k;
      }
      break;
    case TargetFunction::piecewise: {
      const double u = x[0];
      y = u < -0.5 ? -1.0 : (u <= 0.5 ? 2.0 * u : 0.5);
      for (std::size_t j = 1; j < x.size(); ++j) y += x[j] / static_cast<double>(j + 1);
      break;
    }
  }
  return y;
}

double synthetic_noise_sigma(NoiseModel m, double noise_scale, std::span<const double> x) {
  if (m == NoiseModel::constant) return noise_scale;
  const double s = 1.0 + x[0];
  return noise_scale * (0.1 + s * s / 2.0);
}

RegressionDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  RegressionDataset data;
  data.features = Matrix(spec.n_samples, spec.input_dim);
  Vector targets(spec.n_samples), sigmas(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    auto row = data.features.row(i);
    for (double& v : row) v = rng.uniform(-1.0, 1.0);
    sigmas[i] = synthetic_noise_sigma(spec.noise_model, spec.noise_scale, row);
    targets[i] = gaussian_sample(rng, synthetic_target(spec.target_function, row), sigmas[i]);
  }
  data.targets = std::move(targets);
  data.true_noise_sigma = std::move(sigmas);
  data.source_rows.resize(spec.n_samples);
  std::iota(data.source_rows.begin(), data.source_rows.end(), std::size_t{0});
  return data;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return fields;
}

std::size_t resolve_column(const std::string& name, const std::vector<std::string>& header,
                           bool has_header) {
  if (has_header) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw FormatError("csv: missing column '" + name + "'");
  }
  std::size_t idx = 0;
  const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
  if (ec != std::errc{} || ptr != name.data() + name.size()) {
    throw FormatError("csv: column '" + name + "' must be a zero-based index when the file has no header");
  }
  return idx;
}

}  // namespace

RegressionDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw FormatError("csv: cannot open '" + path + "'");
  if (schema.feature_columns.empty()) throw FormatError("csv: schema lists no feature columns");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_fields(line));
  }
  if (rows.empty()) throw FormatError("csv: '" + path + "' is empty");

  std::vector<std::string> header;
  std::size_t first_data = 0;
  if (schema.has_header) {
    header = rows.front();
    first_data = 1;
  }
  std::vector<std::size_t> feature_idx;
  std::vector<std::string> feature_names = schema.feature_columns;
  for (const auto& name : feature_names) feature_idx.push_back(resolve_column(name, header, schema.has_header));
  std::optional<std::size_t> target_idx;
  if (schema.target_column) target_idx = resolve_column(*schema.target_column, header, schema.has_header);

  const std::size_t n = rows.size() - first_data;
  if (n == 0) throw FormatError("csv: '" + path + "' has no data rows");

  auto cell = [&](std::size_t r, std::size_t c, const std::string& col_name) {
    const auto& fields = rows[r];
    const std::size_t data_row = r - first_data + 1;
    if (c >= fields.size()) {
      throw FormatError("csv: row " + std::to_string(data_row) + " has no column '" + col_name + "'");
    }
    const std::string& text = fields[c];
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
      throw FormatError("csv: bad value '" + text + "' at row " + std::to_string(data_row) +
                        ", column '" + col_name + "'");
    }
    return v;
  };

  RegressionDataset data;
  data.features = Matrix(n, feature_idx.size());
  Vector targets;
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < feature_idx.size(); ++j) {
      data.features(r - first_data, j) = cell(r, feature_idx[j], feature_names[j]);
    }
    if (target_idx) targets.push_back(cell(r, *target_idx, *schema.target_column));
  }
  if (target_idx) data.targets = std::move(targets);
  data.source_rows.resize(n);
  std::iota(data.source_rows.begin(), data.source_rows.end(), std::size_t{0});
  return data;
}

void save_csv(const RegressionDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("csv: cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < data.dim(); ++j) out << (j ? "," : "") << 'x' << j;
  if (data.targets) out << ",y";
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      out << (j ? "," : "") << buf;
    }
    if (data.targets) {
      std::snprintf(buf, sizeof buf, "%.17g", (*data.targets)[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

SemiSupervisedSplit split_semi_supervised(const RegressionDataset& data, double label_fraction,
                                          double val_fraction, double test_fraction, Rng& rng) {
  data.validate();
  data.require_targets();
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
    throw ParameterError("split: label_fraction must lie in (0, 1]");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0) || !(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ParameterError("split: val_fraction and test_fraction must lie in (0, 1)");
  }
  if (val_fraction + test_fraction >= 1.0) {
    throw ParameterError("split: val_fraction + test_fraction must be < 1");
  }

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_val == 0 || n_test + n_val >= n) {
    throw ParameterError("split: fractions leave an empty test, validation or training partition");
  }
  const std::size_t n_train = n - n_test - n_val;
  const auto n_labeled =
      static_cast<std::size_t>(std::llround(label_fraction * static_cast<double>(n_train)));
  if (n_labeled == 0) throw ParameterError("split: label_fraction yields no labeled rows");

  auto slice = [&order](std::size_t begin, std::size_t end) {
    return std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
  };
  SemiSupervisedSplit split;
  split.label_fraction = label_fraction;
  split.test = data.subset(slice(0, n_test));
  split.validation = data.subset(slice(n_test, n_test + n_val));
  split.labeled = data.subset(slice(n_test + n_val, n_test + n_val + n_labeled));
  split.unlabeled = UnlabeledDataset::conceal(data.subset(slice(n_test + n_val + n_labeled, n)));
  return split;
}

Normalizer Normalizer::fit(const RegressionDataset& source) {
  if (source.size() == 0) throw ParameterError("normalize: source dataset is empty");
  const auto& y = source.require_targets();
  const double n = static_cast<double>(source.size());
  Normalizer norm;
  const std::size_t d = source.dim();
  norm.feature_mean.assign(d, 0.0);
  norm.feature_scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) mean += source.features(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const double c = source.features(i, j) - mean;
      var += c * c;
    }
    var /= n;
    if (var > 0.0) {
      norm.feature_mean[j] = mean;
      norm.feature_scale[j] = std::sqrt(var);
    } else {
      norm.warnings.push_back("feature " + std::to_string(j) + " has zero variance; passed through");
    }
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= n;
  if (var > 0.0) {
    norm.target_mean = mean;
    norm.target_scale = std::sqrt(var);
  } else {
    norm.warnings.push_back("target has zero variance; passed through");
  }
  return norm;
}

Matrix Normalizer::transform_features(const Matrix& x) const {
  if (x.cols() != feature_mean.size()) throw ShapeError("normalizer: feature count mismatch");
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = (x(i, j) - feature_mean[j]) / feature_scale[j];
  return out;
}

Matrix Normalizer::inverse_features(const Matrix& x) const {
  if (x.cols() != feature_mean.size()) throw ShapeError("normalizer: feature count mismatch");
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = x(i, j) * feature_scale[j] + feature_mean[j];
  return out;
}

Vector Normalizer::transform_targets(std::span<const double> y) const {
  Vector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - target_mean) / target_scale;
  return out;
}

Vector Normalizer::inverse_targets(std::span<const double> y) const {
  Vector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * target_scale + target_mean;
  return out;
}

RegressionDataset Normalizer::transform(const RegressionDataset& data) const {
  RegressionDataset out = data;
  out.features = transform_features(data.features);
  if (data.targets) out.targets = transform_targets(*data.targets);
  if (data.true_noise_sigma) {
    for (double& s : *out.true_noise_sigma) s /= target_scale;
  }
  return out;
}

UnlabeledDataset Normalizer::transform(const UnlabeledDataset& data) const {
  return data.with_features(transform_features(data.features()));
}

NormalizedSplit normalize(const SemiSupervisedSplit& split) {
  NormalizedSplit out;
  out.normalizer = Normalizer::fit(split.labeled);
  out.split.label_fraction = split.label_fraction;
  out.split.labeled = out.normalizer.transform(split.labeled);
  out.split.unlabeled = out.normalizer.transform(split.unlabeled);
  out.split.validation = out.normalizer.transform(split.validation);
  out.split.test = out.normalizer.transform(split.test);
  return out;
}

}  // namespace ucvme
