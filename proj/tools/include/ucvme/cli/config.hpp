#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ucvme/data.hpp"
#include "ucvme/errors.hpp"
#include "ucvme/training.hpp"

namespace ucvme::cli {

/// A config file could not be parsed or failed validation. Each diagnostic
/// names the line and/or key it refers to.
class ConfigError : public UsageError {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

enum class TaskKind { synthetic, csv };

/// Everything one experiment needs. Parsed from a flat `key = value` file;
/// see docs/config.md for the key reference.
struct ExperimentConfig {
  TaskKind task = TaskKind::synthetic;
  /// The seed field is ignored; data is generated from the "data" substream.
  SyntheticSpec synthetic;

  std::string csv_path;
  std::vector<std::string> csv_features;
  std::string csv_target;
  bool csv_has_header = true;

  double label_fraction = 0.1;
  double val_fraction = 0.1;
  double test_fraction = 0.2;

  /// train.seed is overwritten by `seed` when an experiment is built.
  TrainConfig train;
  std::uint64_t seed = 0;
  /// Seeds run by `ablate`.
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  ReportOptions report;
  std::size_t variance_reruns = 200;
  std::vector<std::size_t> variance_t_draws = {1, 2, 5, 20};

  std::string output_dir = "ucvme_out";

  /// Cross-field checks; throws ConfigError listing every problem.
  void validate() const;
};

/// The default synthetic benchmark.
ExperimentConfig default_config();

/// Parses config text on top of default_config(). Unknown keys, duplicate
/// keys and malformed values are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Every key with its resolved value, in a fixed order. Parsing the result
/// gives back the same config.
std::string canonical_text(const ExperimentConfig& config);

/// 16 hex digits of FNV-1a over canonical_text with `seed`, `seeds` and
/// `output_dir` left out, so runs that differ only in seed share a hash.
/// Artifacts record their seeds next to the hash.
std::string config_hash(const ExperimentConfig& config);

/// Dataset for the config's task. Synthetic data depends only on
/// synthetic.seed, so every run seed sees the same rows.
RegressionDataset build_dataset(const ExperimentConfig& config);

/// build_dataset then split_semi_supervised with Rng(seed).substream("split").
SemiSupervisedSplit build_split(const ExperimentConfig& config, std::uint64_t seed);

/// config.train with its seed set.
TrainConfig train_config(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace ucvme::cli
