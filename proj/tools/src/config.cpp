#include "ucvme/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace ucvme::cli {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double parse_real(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ParameterError("expected a finite real number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ParameterError("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t parse_count(const std::string& v) { return static_cast<std::size_t>(parse_u64(v)); }

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParameterError("expected true or false, got '" + v + "'");
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::vector<std::string> parts;
  for (const auto& x : v) parts.push_back(std::to_string(x));
  return join(parts, ",");
}

std::string to_string(TaskKind t) { return t == TaskKind::synthetic ? "synthetic" : "csv"; }

TaskKind task_from_string(const std::string& s) {
  if (s == "synthetic") return TaskKind::synthetic;
  if (s == "csv") return TaskKind::csv;
  throw ParameterError("expected synthetic or csv, got '" + s + "'");
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// Key table; the order here is the canonical order.
const std::vector<std::pair<std::string, Field>>& fields() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::vector<std::pair<std::string, Field>> table = {
      {"task", {[](C& c, S v) { c.task = task_from_string(v); }, [](const C& c) { return to_string(c.task); }}},
      {"synthetic.n_samples",
       {[](C& c, S v) { c.synthetic.n_samples = parse_count(v); },
        [](const C& c) { return std::to_string(c.synthetic.n_samples); }}},
      {"synthetic.input_dim",
       {[](C& c, S v) { c.synthetic.input_dim = parse_count(v); },
        [](const C& c) { return std::to_string(c.synthetic.input_dim); }}},
      {"synthetic.target_function",
       {[](C& c, S v) { c.synthetic.target_function = target_function_from_string(v); },
        [](const C& c) { return to_string(c.synthetic.target_function); }}},
      {"synthetic.noise_model",
       {[](C& c, S v) { c.synthetic.noise_model = noise_model_from_string(v); },
        [](const C& c) { return to_string(c.synthetic.noise_model); }}},
      {"synthetic.seed",
       {[](C& c, S v) { c.synthetic.seed = parse_count(v); },
        [](const C& c) { return std::to_string(c.synthetic.seed); }}},
      {"synthetic.noise_scale",
       {[](C& c, S v) { c.synthetic.noise_scale = parse_real(v); },
        [](const C& c) { return fmt_real(c.synthetic.noise_scale); }}},
      {"csv.path", {[](C& c, S v) { c.csv_path = v; }, [](const C& c) { return c.csv_path; }}},
      {"csv.features",
       {[](C& c, S v) { c.csv_features = split_list(v); }, [](const C& c) { return join(c.csv_features, ","); }}},
      {"csv.target", {[](C& c, S v) { c.csv_target = v; }, [](const C& c) { return c.csv_target; }}},
      {"csv.has_header",
       {[](C& c, S v) { c.csv_has_header = parse_bool(v); },
        [](const C& c) { return std::string(c.csv_has_header ? "true" : "false"); }}},
      {"split.label_fraction",
       {[](C& c, S v) { c.label_fraction = parse_real(v); }, [](const C& c) { return fmt_real(c.label_fraction); }}},
      {"split.val_fraction",
       {[](C& c, S v) { c.val_fraction = parse_real(v); }, [](const C& c) { return fmt_real(c.val_fraction); }}},
      {"split.test_fraction",
       {[](C& c, S v) { c.test_fraction = parse_real(v); }, [](const C& c) { return fmt_real(c.test_fraction); }}},
      {"train.variant",
       {[](C& c, S v) { c.train.variant = variant_from_string(v); },
        [](const C& c) { return to_string(c.train.variant); }}},
      {"train.w_ulb",
       {[](C& c, S v) { c.train.w_ulb = parse_real(v); }, [](const C& c) { return fmt_real(c.train.w_ulb); }}},
      {"train.t_draws",
       {[](C& c, S v) { c.train.t_draws = parse_count(v); },
        [](const C& c) { return std::to_string(c.train.t_draws); }}},
      {"train.dropout_p",
       {[](C& c, S v) { c.train.dropout_p = parse_real(v); },
        [](const C& c) { return fmt_real(c.train.dropout_p); }}},
      {"train.epochs",
       {[](C& c, S v) { c.train.epochs = parse_count(v); }, [](const C& c) { return std::to_string(c.train.epochs); }}},
      {"train.batch_labeled",
       {[](C& c, S v) { c.train.batch_labeled = parse_count(v); },
        [](const C& c) { return std::to_string(c.train.batch_labeled); }}},
      {"train.batch_unlabeled",
       {[](C& c, S v) { c.train.batch_unlabeled = parse_count(v); },
        [](const C& c) { return std::to_string(c.train.batch_unlabeled); }}},
      {"train.learning_rate",
       {[](C& c, S v) { c.train.learning_rate = parse_real(v); },
        [](const C& c) { return fmt_real(c.train.learning_rate); }}},
      {"train.optimizer",
       {[](C& c, S v) { c.train.optimizer = optimizer_from_string(v); },
        [](const C& c) { return to_string(c.train.optimizer); }}},
      {"train.momentum",
       {[](C& c, S v) { c.train.momentum = parse_real(v); }, [](const C& c) { return fmt_real(c.train.momentum); }}},
      {"train.weight_decay",
       {[](C& c, S v) { c.train.weight_decay = parse_real(v); },
        [](const C& c) { return fmt_real(c.train.weight_decay); }}},
      {"train.hidden_dims",
       {[](C& c, S v) {
          c.train.hidden_dims.clear();
          for (const auto& item : split_list(v)) c.train.hidden_dims.push_back(parse_count(item));
        },
        [](const C& c) { return fmt_list(c.train.hidden_dims); }}},
      {"train.activation",
       {[](C& c, S v) { c.train.activation = activation_from_string(v); },
        [](const C& c) { return to_string(c.train.activation); }}},
      {"train.z_min",
       {[](C& c, S v) { c.train.z_min = parse_real(v); }, [](const C& c) { return fmt_real(c.train.z_min); }}},
      {"train.z_max",
       {[](C& c, S v) { c.train.z_max = parse_real(v); }, [](const C& c) { return fmt_real(c.train.z_max); }}},
      {"report.n_bins",
       {[](C& c, S v) { c.report.n_bins = parse_count(v); }, [](const C& c) { return std::to_string(c.report.n_bins); }}},
      {"report.bin_report_epoch",
       {[](C& c, S v) { c.report.bin_report_epoch = parse_count(v); },
        [](const C& c) { return std::to_string(c.report.bin_report_epoch); }}},
      {"variance.reruns",
       {[](C& c, S v) { c.variance_reruns = parse_count(v); },
        [](const C& c) { return std::to_string(c.variance_reruns); }}},
      {"variance.t_draws",
       {[](C& c, S v) {
          c.variance_t_draws.clear();
          for (const auto& item : split_list(v)) c.variance_t_draws.push_back(parse_count(item));
        },
        [](const C& c) { return fmt_list(c.variance_t_draws); }}},
      {"seeds",
       {[](C& c, S v) {
          c.seeds.clear();
          for (const auto& item : split_list(v)) c.seeds.push_back(parse_u64(item));
        },
        [](const C& c) { return fmt_list(c.seeds); }}},
      {"seed", {[](C& c, S v) { c.seed = parse_u64(v); }, [](const C& c) { return std::to_string(c.seed); }}},
      {"output_dir", {[](C& c, S v) { c.output_dir = v; }, [](const C& c) { return c.output_dir; }}},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : fields())
    if (name == key) return &field;
  return nullptr;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : UsageError("invalid config:\n  " + join(diagnostics, "\n  ")), diagnostics_(std::move(diagnostics)) {}

// Default benchmark: a scarce-label regime (about 28 labeled rows) where the
// unlabeled stream has something to contribute.
ExperimentConfig default_config() {
  ExperimentConfig c;
  c.synthetic.n_samples = 400;
  c.synthetic.input_dim = 2;
  c.synthetic.target_function = TargetFunction::sinusoidal;
  c.synthetic.noise_model = NoiseModel::input_dependent;
  c.synthetic.noise_scale = 0.3;
  c.train.epochs = 300;
  return c;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> errs;
  try {
    train.validate();
  } catch (const ParameterError& e) {
    errs.push_back(std::string("train.") + e.what());
  }
  if (task == TaskKind::synthetic) {
    try {
      synthetic.validate();
    } catch (const ParameterError& e) {
      errs.push_back(e.what());
    }
  } else {
    if (csv_path.empty()) errs.push_back("csv.path: required when task = csv");
    if (csv_features.empty()) errs.push_back("csv.features: required when task = csv");
    if (csv_target.empty()) errs.push_back("csv.target: required when task = csv");
  }
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) errs.push_back("split.label_fraction: must lie in (0, 1]");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) errs.push_back("split.val_fraction: must lie in (0, 1)");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) errs.push_back("split.test_fraction: must lie in (0, 1)");
  if (val_fraction + test_fraction >= 1.0) errs.push_back("split: val_fraction + test_fraction must be < 1");
  if (label_fraction >= 1.0 && train.w_ulb > 0.0) {
    errs.push_back("train.w_ulb: must be 0 when split.label_fraction = 1 (no unlabeled data)");
  }
  if (report.n_bins < 1) errs.push_back("report.n_bins: must be >= 1");
  if (variance_reruns < 30) errs.push_back("variance.reruns: must be >= 30");
  if (variance_t_draws.empty()) errs.push_back("variance.t_draws: must list at least one value");
  for (auto t : variance_t_draws)
    if (t < 1) errs.push_back("variance.t_draws: every value must be >= 1");
  if (seeds.empty()) errs.push_back("seeds: must list at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    errs.push_back("seeds: duplicate seed");
  }
  if (!errs.empty()) throw ConfigError(errs);
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config = default_config();
  std::vector<std::string> errs;
  std::map<std::string, std::size_t> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(std::string_view(raw).substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errs.push_back(where + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const Field* field = find_field(key);
    if (!field) {
      errs.push_back(where + ": unknown key '" + key + "'");
      continue;
    }
    if (auto it = seen.find(key); it != seen.end()) {
      errs.push_back(where + ": key '" + key + "' already set on line " + std::to_string(it->second));
      continue;
    }
    seen[key] = line_no;
    try {
      field->set(config, value);
    } catch (const Error& e) {
      errs.push_back(where + ": " + key + ": " + e.what());
    }
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    errs.insert(errs.end(), e.diagnostics().begin(), e.diagnostics().end());
  }
  if (!errs.empty()) throw ConfigError(errs);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(config) + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  std::string text;
  for (const auto& [name, field] : fields()) {
    if (name == "seed" || name == "seeds" || name == "output_dir") continue;
    text += name + " = " + field.get(config) + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

RegressionDataset build_dataset(const ExperimentConfig& config) {
  if (config.task == TaskKind::csv) {
    return load_csv(config.csv_path, CsvSchema{config.csv_features, config.csv_target, config.csv_has_header});
  }
  return generate_synthetic(config.synthetic);
}

SemiSupervisedSplit build_split(const ExperimentConfig& config, std::uint64_t seed) {
  Rng rng = Rng(seed).substream("split");
  return split_semi_supervised(build_dataset(config), config.label_fraction, config.val_fraction,
                               config.test_fraction, rng);
}

TrainConfig train_config(const ExperimentConfig& config, std::uint64_t seed) {
  TrainConfig t = config.train;
  t.seed = seed;
  return t;
}

}  // namespace ucvme::cli
