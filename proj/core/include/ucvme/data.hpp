#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ucvme/matrix.hpp"
#include "ucvme/rng.hpp"

namespace ucvme {

/// Feature rows with optional targets.
struct RegressionDataset {
  Matrix features;
  std::optional<Vector> targets;
  /// Standard deviation of the noise that generated each target (synthetic data only).
  std::optional<Vector> true_noise_sigma;
  /// Row index of each sample in the dataset it was taken from.
  std::vector<std::size_t> source_rows;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  const Vector& require_targets() const;
  /// Checks the length and finiteness invariants; throws ShapeError / ValueError.
  void validate() const;
  RegressionDataset subset(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const RegressionDataset&, const RegressionDataset&) = default;
};

class UnlabeledDataset;
const Vector& oracle_targets(const UnlabeledDataset& data);

/// Inputs whose targets are withheld from training. The targets are kept
/// (in original units) only so the evaluation oracle can score pseudo-labels;
/// the sole accessor is oracle_targets().
class UnlabeledDataset {
 public:
  UnlabeledDataset() = default;
  /// Hides the targets of a labeled dataset.
  static UnlabeledDataset conceal(RegressionDataset data);

  const Matrix& features() const noexcept { return features_; }
  const std::vector<std::size_t>& source_rows() const noexcept { return source_rows_; }
  std::size_t size() const noexcept { return features_.rows(); }
  bool empty() const noexcept { return features_.rows() == 0; }
  /// Same rows with transformed features; hidden targets are untouched.
  UnlabeledDataset with_features(Matrix features) const;

 private:
  friend const Vector& oracle_targets(const UnlabeledDataset& data);

  Matrix features_;
  Vector hidden_targets_;
  std::vector<std::size_t> source_rows_;
};

struct SemiSupervisedSplit {
  RegressionDataset labeled;
  UnlabeledDataset unlabeled;
  RegressionDataset validation;
  RegressionDataset test;
  double label_fraction = 0.0;
};

enum class TargetFunction { linear, sinusoidal, piecewise };
enum class NoiseModel { constant, input_dependent };

std::string to_string(TargetFunction f);
std::string to_string(NoiseModel m);
TargetFunction target_function_from_string(const std::string& s);
NoiseModel noise_model_from_string(const std::string& s);

/// Synthetic regression task. Inputs are uniform on [-1, 1]^input_dim and
///   y = f(x) + sigma(x) * eps,  eps ~ N(0, 1)
/// with
///   linear:      f(x) = sum_j 2 x_j / (j + 1)
///   sinusoidal:  f(x) = sum_j sin(pi (j + 1) x_j) / (j + 1)
///   piecewise:   f(x) = g(x_0) + sum_{j>=1} x_j / (j + 1),
///                g(u) = -1 for u < -1/2, 2u for -1/2 <= u <= 1/2, 1/2 for u > 1/2
/// and noise
///   constant:         sigma(x) = noise_scale
///   input_dependent:  sigma(x) = noise_scale * (0.1 + (1 + x_0)^2 / 2)
struct SyntheticSpec {
  std::size_t n_samples = 1000;
  std::size_t input_dim = 1;
  TargetFunction target_function = TargetFunction::sinusoidal;
  NoiseModel noise_model = NoiseModel::input_dependent;
  double noise_scale = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

double synthetic_target(TargetFunction f, std::span<const double> x);
double synthetic_noise_sigma(NoiseModel m, double noise_scale, std::span<const double> x);

RegressionDataset generate_synthetic(const SyntheticSpec& spec);

struct CsvSchema {
  /// Column names when has_header is true, otherwise zero-based column indices.
  std::vector<std::string> feature_columns;
  std::optional<std::string> target_column;
  bool has_header = true;
};

/// Comma-separated, at most one header row, plain decimal reals. Row order
/// is preserved. Errors name the offending column or the row/column of a bad cell.
RegressionDataset load_csv(const std::string& path, const CsvSchema& schema);
/// Writes a header row (x0, ..., x{D-1}[, y]) and values with 17 significant
/// digits so load_csv reads back identical doubles.
void save_csv(const RegressionDataset& data, const std::string& path);

/// Uniform seeded shuffle into test, validation and training rows; the
/// training rows are split into round(label_fraction * n_train) labeled rows
/// and the unlabeled remainder.
SemiSupervisedSplit split_semi_supervised(const RegressionDataset& data, double label_fraction,
                                          double val_fraction, double test_fraction, Rng& rng);

/// Per-feature and target standardisation fitted on labeled training data.
/// Zero-variance columns are passed through unchanged (scale 1) and reported
/// in `warnings`.
struct Normalizer {
  Vector feature_mean;
  Vector feature_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;
  std::vector<std::string> warnings;

  static Normalizer fit(const RegressionDataset& source);

  Matrix transform_features(const Matrix& x) const;
  Matrix inverse_features(const Matrix& x) const;
  Vector transform_targets(std::span<const double> y) const;
  Vector inverse_targets(std::span<const double> y) const;
  /// Converts a variance in standardised target units to original units.
  double variance_to_original(double variance) const { return variance * target_scale * target_scale; }

  RegressionDataset transform(const RegressionDataset& data) const;
  UnlabeledDataset transform(const UnlabeledDataset& data) const;

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

struct NormalizedSplit {
  Normalizer normalizer;
  SemiSupervisedSplit split;
};

/// Fits on split.labeled and transforms every partition.
NormalizedSplit normalize(const SemiSupervisedSplit& split);

}  // namespace ucvme
