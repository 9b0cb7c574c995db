#include "ucvme/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ucvme/mlp.hpp"
#include "ucvme/evaluation.hpp"
#include "ucvme/vme.hpp"

namespace ucvme::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kOracleNote =
    "computed from unlabeled-set targets that training never sees; diagnostic only";

struct Resolved {
  ExperimentConfig config;
  std::uint64_t seed;
  fs::path out;
  std::string hash;
};

Resolved resolve(const CommandOptions& options) {
  Resolved r{load_config(options.config_path), 0, {}, {}};
  if (options.seed) {
    r.config.seed = *options.seed;
    r.config.seeds = {*options.seed};
  }
  r.seed = r.config.seed;
  r.out = options.out_dir ? fs::path(*options.out_dir) : fs::path(r.config.output_dir);
  r.hash = config_hash(r.config);
  fs::create_directories(r.out);
  return r;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write '" + path.string() + "'");
  f << text;
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

ordered_json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot read '" + path.string() + "'");
  try {
    return ordered_json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

void write_loss_history(const fs::path& path, const std::vector<LossBreakdown>& history, const Resolved& r) {
  std::ostringstream s;
  s << "step,reg_lb,unc_lb,reg_ulb,unc_ulb,w_ulb,total,config_hash,seed\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    s << i + 1 << ',' << fmt(h.reg_lb) << ',' << fmt(h.unc_lb) << ',' << fmt(h.reg_ulb) << ','
      << fmt(h.unc_ulb) << ',' << fmt(h.w_ulb) << ',' << fmt(h.total) << ',' << r.hash << ',' << r.seed << '\n';
  }
  write_text(path, s.str());
}

ordered_json normalizer_json(const Normalizer& n) {
  ordered_json j;
  j["feature_mean"] = n.feature_mean;
  j["feature_scale"] = n.feature_scale;
  j["target_mean"] = n.target_mean;
  j["target_scale"] = n.target_scale;
  j["warnings"] = n.warnings;
  return j;
}

Normalizer normalizer_from_json(const ordered_json& j) {
  try {
    Normalizer n;
    n.feature_mean = j.at("feature_mean").get<Vector>();
    n.feature_scale = j.at("feature_scale").get<Vector>();
    n.target_mean = j.at("target_mean").get<double>();
    n.target_scale = j.at("target_scale").get<double>();
    n.warnings = j.at("warnings").get<std::vector<std::string>>();
    return n;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("normalizer.json: ") + e.what());
  }
}

ordered_json split_sizes(const SemiSupervisedSplit& s) {
  ordered_json j;
  j["label_fraction"] = s.label_fraction;
  j["labeled"] = s.labeled.size();
  j["unlabeled"] = s.unlabeled.size();
  j["validation"] = s.validation.size();
  j["test"] = s.test.size();
  return j;
}

double mean_of(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

int cmd_train(const CommandOptions& options, std::ostream& out) {
  const Resolved r = resolve(options);
  const SemiSupervisedSplit split = build_split(r.config, r.seed);
  const TrainConfig tc = train_config(r.config, r.seed);
  write_text(r.out / "config.txt", canonical_text(r.config));

  ExperimentResult res;
  try {
    res = run_experiment(tc, split, r.config.report);
  } catch (const ExperimentFailure& e) {
    write_loss_history(r.out / "loss_history.csv", e.history(), r);
    out << "training diverged: " << e.what() << "\n"
        << "loss history (" << e.history().size() << " steps) written to " << (r.out / "loss_history.csv").string()
        << "\n";
    return exit_diverged;
  }

  write_loss_history(r.out / "loss_history.csv", res.history, r);
  {
    std::ostringstream s;
    write_bin_report_csv(res.bin_report, s, {{"config_hash", r.hash}, {"seed", std::to_string(r.seed)}});
    write_text(r.out / "bin_report.csv", s.str());
  }
  save_checkpoint(res.model_a, (r.out / "model_a.ckpt").string());
  save_checkpoint(res.model_b, (r.out / "model_b.ckpt").string());
  write_json(r.out / "normalizer.json", normalizer_json(res.normalizer));

  ordered_json m;
  m["command"] = "train";
  m["config_hash"] = r.hash;
  m["seed"] = r.seed;
  m["variant"] = to_string(tc.variant);
  m["test_mae"] = res.test_mae;
  m["test_r2"] = res.test_r2;
  m["best_val_mae"] = res.best_val_mae;
  m["best_epoch"] = res.best_epoch;
  m["epochs"] = tc.epochs;
  m["steps"] = res.history.size();
  m["skipped_steps"] = res.skipped_steps;
  m["split"] = split_sizes(split);
  ordered_json oracle;
  oracle["note"] = kOracleNote;
  oracle["uncertainty_spearman"] = res.uncertainty_spearman;
  oracle["bin_report_epoch"] = res.bin_report_epoch;
  oracle["bin_report_pseudo_label_mse"] = res.bin_report.pseudo_label_mse;
  oracle["bin_report_file"] = "bin_report.csv";
  m["oracle_only"] = oracle;
  write_json(r.out / "metrics.json", m);

  out << "test MAE " << fmt(res.test_mae) << "  R2 " << fmt(res.test_r2) << "  (best epoch " << res.best_epoch
      << ", config " << r.hash << ", seed " << r.seed << ")\n";
  return exit_ok;
}

int cmd_ablate(const CommandOptions& options, std::ostream& out) {
  const Resolved r = resolve(options);
  write_text(r.out / "config.txt", canonical_text(r.config));

  const Variant variants[] = {Variant::baseline, Variant::baseline_con, Variant::baseline_ens, Variant::full};
  std::ostringstream runs_csv;
  runs_csv << "variant,seed,status,test_mae,test_r2,best_epoch,uncertainty_spearman,bin_first_mse,bin_last_mse,"
              "config_hash\n";
  std::ostringstream table;
  table << "variant,mae_mean,mae_std,r2_mean,r2_std,n_runs,n_failed,config_hash,seeds\n";

  std::string seeds_text;
  for (std::size_t i = 0; i < r.config.seeds.size(); ++i) seeds_text += (i ? ";" : "") + std::to_string(r.config.seeds[i]);

  ordered_json m;
  m["command"] = "ablate";
  m["config_hash"] = r.hash;
  m["seeds"] = r.config.seeds;
  m["variants"] = ordered_json::array();
  ordered_json oracle_runs = ordered_json::array();

  std::vector<SemiSupervisedSplit> splits;
  for (auto seed : r.config.seeds) splits.push_back(build_split(r.config, seed));

  out << "variant        MAE                      R2\n";
  for (Variant v : variants) {
    Vector maes, r2s;
    std::size_t failed = 0;
    for (std::size_t k = 0; k < r.config.seeds.size(); ++k) {
      const std::uint64_t seed = r.config.seeds[k];
      TrainConfig tc = train_config(r.config, seed);
      tc.variant = v;
      runs_csv << to_string(v) << ',' << seed << ',';
      try {
        const ExperimentResult res = run_experiment(tc, splits[k], r.config.report);
        maes.push_back(res.test_mae);
        r2s.push_back(res.test_r2);
        const auto& bins = res.bin_report.pseudo_label_mse;
        runs_csv << "ok," << fmt(res.test_mae) << ',' << fmt(res.test_r2) << ',' << res.best_epoch << ','
                 << fmt(res.uncertainty_spearman) << ',' << (bins.empty() ? "" : fmt(bins.front())) << ','
                 << (bins.empty() ? "" : fmt(bins.back())) << ',' << r.hash << '\n';
        ordered_json o;
        o["variant"] = to_string(v);
        o["seed"] = seed;
        o["uncertainty_spearman"] = res.uncertainty_spearman;
        o["bin_report_pseudo_label_mse"] = bins;
        oracle_runs.push_back(o);
      } catch (const ExperimentFailure& e) {
        ++failed;
        runs_csv << "diverged,,,,,,," << r.hash << '\n';
      }
    }
    const bool any = !maes.empty();
    const double mae_mean = any ? mean_of(maes) : NAN, mae_std = any ? std_of(maes) : NAN;
    const double r2_mean = any ? mean_of(r2s) : NAN, r2_std = any ? std_of(r2s) : NAN;
    table << to_string(v) << ',' << fmt(mae_mean) << ',' << fmt(mae_std) << ',' << fmt(r2_mean) << ','
          << fmt(r2_std) << ',' << maes.size() << ',' << failed << ',' << r.hash << ',' << seeds_text << '\n';

    ordered_json row;
    row["variant"] = to_string(v);
    row["mae_mean"] = any ? ordered_json(mae_mean) : ordered_json(nullptr);
    row["mae_std"] = any ? ordered_json(mae_std) : ordered_json(nullptr);
    row["r2_mean"] = any ? ordered_json(r2_mean) : ordered_json(nullptr);
    row["r2_std"] = any ? ordered_json(r2_std) : ordered_json(nullptr);
    row["test_mae"] = maes;
    row["test_r2"] = r2s;
    row["n_failed"] = failed;
    m["variants"].push_back(row);

    char line[160];
    std::snprintf(line, sizeof line, "%-14s %.4f +- %.4f        %.4f +- %.4f%s\n", to_string(v).c_str(), mae_mean,
                  mae_std, r2_mean, r2_std, failed ? "  (some runs diverged)" : "");
    out << line;
  }
  ordered_json oracle;
  oracle["note"] = kOracleNote;
  oracle["runs"] = oracle_runs;
  m["oracle_only"] = oracle;

  write_text(r.out / "ablation_table.csv", table.str());
  write_text(r.out / "ablation_runs.csv", runs_csv.str());
  write_json(r.out / "metrics.json", m);
  return exit_ok;
}

int cmd_variance_demo(const CommandOptions& options, std::ostream& out) {
  const Resolved r = resolve(options);
  write_text(r.out / "config.txt", canonical_text(r.config));
  const SemiSupervisedSplit split = build_split(r.config, r.seed);
  const TrainConfig tc = train_config(r.config, r.seed);
  ExperimentResult res;
  try {
    res = run_experiment(tc, split, r.config.report);
  } catch (const ExperimentFailure& e) {
    write_loss_history(r.out / "loss_history.csv", e.history(), r);
    out << "training diverged: " << e.what() << "\n";
    return exit_diverged;
  }

  // Ensembling is measured on the test set in standardised target units.
  const RegressionDataset test = res.normalizer.transform(split.test);
  const Rng root = Rng(r.seed).substream("variance");
  ordered_json rows = ordered_json::array();
  std::vector<VarianceReport> reports;
  for (std::size_t t : r.config.variance_t_draws) {
    Rng rng = root.substream(static_cast<std::uint64_t>(t));
    reports.push_back(variance_reduction_check(res.model_a, res.model_b, test, t, r.config.variance_reruns, rng));
    ordered_json row = ordered_json::parse(to_json(reports.back()));
    row["ensemble_not_worse"] = reports.back().ensemble_not_worse();
    row["bias_equal"] = reports.back().bias_equal();
    rows.push_back(row);
  }
  // Successive rows use independent draws, so their SEs combine in quadrature.
  bool non_increasing = true;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& a = reports[i - 1];
    const auto& b = reports[i];
    const double se = std::sqrt(a.mse_ensemble_se * a.mse_ensemble_se + b.mse_ensemble_se * b.mse_ensemble_se);
    if (b.t_draws > a.t_draws && b.mse_ensemble > a.mse_ensemble + 2.0 * se + b.rounding_floor()) {
      non_increasing = false;
    }
  }

  ordered_json v;
  v["command"] = "variance-demo";
  v["config_hash"] = r.hash;
  v["seed"] = r.seed;
  v["dropout_p"] = tc.dropout_p;
  v["reruns"] = r.config.variance_reruns;
  v["units"] = "standardised targets";
  v["dataset"] = "test";
  v["n_samples"] = test.size();
  v["rows"] = rows;
  v["mse_ensemble_non_increasing"] = non_increasing;
  write_json(r.out / "variance_report.json", v);

  ordered_json m;
  m["command"] = "variance-demo";
  m["config_hash"] = r.hash;
  m["seed"] = r.seed;
  m["test_mae"] = res.test_mae;
  m["test_r2"] = res.test_r2;
  m["mse_ensemble_non_increasing"] = non_increasing;
  m["variance_report_file"] = "variance_report.json";
  write_json(r.out / "metrics.json", m);

  out << "T     mse_single      mse_ensemble    var_single      var_ensemble\n";
  for (const auto& rep : reports) {
    char line[160];
    std::snprintf(line, sizeof line, "%-5zu %-15.6g %-15.6g %-15.6g %-15.6g\n", rep.t_draws, rep.mse_single,
                  rep.mse_ensemble, rep.var_single, rep.var_ensemble);
    out << line;
  }
  return exit_ok;
}

int cmd_evaluate(const CommandOptions& options, std::ostream& out) {
  CommandOptions opts = options;
  if (!opts.out_dir) opts.out_dir = (fs::path(options.from_dir) / "evaluation").string();
  const Resolved r = resolve(opts);
  const fs::path from(options.from_dir);

  const ordered_json trained = read_json(from / "metrics.json");
  const std::string trained_hash = trained.value("config_hash", "");
  const std::uint64_t trained_seed = trained.value("seed", std::uint64_t{0});
  if (trained_hash != r.hash || trained_seed != r.seed) {
    throw UsageError("evaluate: checkpoints in '" + from.string() + "' were trained with config " + trained_hash +
                     " seed " + std::to_string(trained_seed) + ", but the given config is " + r.hash + " seed " +
                     std::to_string(r.seed));
  }
  const MlpModel a = load_checkpoint((from / "model_a.ckpt").string());
  const MlpModel b = load_checkpoint((from / "model_b.ckpt").string());
  const Normalizer norm = normalizer_from_json(read_json(from / "normalizer.json"));

  const SemiSupervisedSplit split = build_split(r.config, r.seed);
  const TestScore score = score_models(a, b, norm, split.test, train_config(r.config, r.seed));

  ordered_json m;
  m["command"] = "evaluate";
  m["config_hash"] = r.hash;
  m["seed"] = r.seed;
  m["checkpoint_dir"] = from.string();
  m["test_mae"] = score.mae;
  m["test_r2"] = score.r2;
  m["n_test"] = split.test.size();
  write_json(r.out / "metrics.json", m);
  out << "test MAE " << fmt(score.mae) << "  R2 " << fmt(score.r2) << "\n";
  return exit_ok;
}

}  // namespace ucvme::cli
