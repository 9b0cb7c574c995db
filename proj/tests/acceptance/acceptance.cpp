// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "ucvme/cli/commands.hpp"
#include "ucvme/cli/config.hpp"
#include "ucvme/ucvme.hpp"

using namespace ucvme;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / "ucvme_acceptance";
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string write_config(const fs::path& dir, const std::string& name, const cli::ExperimentConfig& c) {
  const fs::path p = dir / name;
  std::ofstream(p) << cli::canonical_text(c);
  return p.string();
}

int run_quiet(int (*cmd)(const cli::CommandOptions&, std::ostream&), const cli::CommandOptions& o) {
  std::ostringstream sink;
  return cmd(o, sink);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  Rng rng(2024);
  const Variant variants[] = {Variant::baseline, Variant::baseline_con, Variant::baseline_ens, Variant::full};
  constexpr int kConfigs = 24;
  std::size_t checked = 0, bad = 0;
  double worst = 0.0;
  for (int k = 0; k < kConfigs; ++k) {
    TrainConfig c;
    c.variant = variants[k % 4];
    c.hidden_dims.clear();
    const std::size_t depth = rng.below(3);
    for (std::size_t l = 0; l < depth; ++l) c.hidden_dims.push_back(2 + rng.below(5));
    c.activation = rng.below(2) ? Activation::tanh : Activation::relu;
    c.dropout_p = rng.uniform(0.0, 0.4);
    c.w_ulb = (k % 6 == 0) ? 0.0 : rng.uniform(0.5, 10.0);
    c.t_draws = 1 + rng.below(4);
    c.seed = static_cast<std::uint64_t>(k);
    const std::size_t dim = 1 + rng.below(3);
    const std::size_t nl = 1 + rng.below(5), nu = 1 + rng.below(6);

    TrainState s = TrainState::initial(c, dim);
    // Zero-initialised biases put ReLU units exactly on their kink whenever
    // dropout empties the layer below. Check at a generic point instead.
    auto& ps = s.model_a.parameters().tensors;
    auto& qs = s.model_b.parameters().tensors;
    for (std::size_t ti = 1; ti < ps.size(); ti += 2) {
      for (double& v : ps[ti].data()) v = rng.uniform(-0.5, 0.5);
      for (double& v : qs[ti].data()) v = rng.uniform(-0.5, 0.5);
    }
    Matrix xl(nl, dim), xu(nu, dim);
    for (double& v : xl.data()) v = rng.uniform(-1.5, 1.5);
    for (double& v : xu.data()) v = rng.uniform(-1.5, 1.5);
    Vector yl(nl);
    for (double& v : yl) v = rng.standard_normal();

    const PseudoTargets targets = make_pseudo_targets(s, xu, c);
    const ForwardTrace la = forward(s.model_a, xl, s.rng), lb = forward(s.model_b, xl, s.rng);
    const ForwardTrace ua = forward(s.model_a, xu, s.rng), ub = forward(s.model_b, xu, s.rng);

    auto objective = [&](const MlpModel& a, const MlpModel& b) {
      const StepTraces t{forward_with_masks(a, xl, la.masks), forward_with_masks(b, xl, lb.masks),
                         forward_with_masks(a, xu, ua.masks), forward_with_masks(b, xu, ub.masks)};
      return evaluate_objective(a, b, t, yl, targets, c);
    };
    const StepObjective analytic = objective(s.model_a, s.model_b);

    for (int which = 0; which < 2; ++which) {
      const GradientSet& g = which == 0 ? analytic.grad_a : analytic.grad_b;
      MlpModel& target = which == 0 ? s.model_a : s.model_b;
      auto& tensors = target.parameters().tensors;
      for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        for (std::size_t e = 0; e < tensors[ti].data().size(); ++e) {
          double& p = tensors[ti].data()[e];
          const double orig = p;
          const double numeric = testing::central_difference(
              [&](double v) {
                p = v;
                return objective(s.model_a, s.model_b).parts.total;
              },
              orig);
          p = orig;
          const double a = g.tensors[ti].data()[e];
          const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
          if (std::abs(a - numeric) > 1e-8) worst = std::max(worst, rel);
          ++checked;
          if (!testing::gradients_agree(a, numeric, 1e-5)) ++bad;
        }
      }
    }
  }
  return {bad == 0, fmt("%d configs, %zu parameters, %zu outside 1e-5 relative (worst %.2e)", kConfigs, checked,
                        bad, worst)};
}

// ---------------------------------------------------------------- 2

Outcome loss_oracles() {
  const double h0 = hetero_loss(Vector{1.0}, Vector{0.0}, Vector{1.0}).loss;
  const double h1 = hetero_loss(Vector{0.0}, Vector{0.0}, Vector{1.0}).loss;
  const double h2 = hetero_loss(Vector{0.0}, Vector{std::log(4.0)}, Vector{1.0}).loss;
  const double e2 = 1.0 / 8.0 + std::log(4.0) / 2.0;
  const bool hand = std::abs(h0) <= 1e-12 && std::abs(h1 - 0.5) <= 1e-12 && std::abs(h2 - e2) <= 1e-12 &&
                    std::abs(h2 - 0.8181) < 5e-5;

  Rng rng(7);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double y_hat = rng.uniform(-5, 5), z = rng.uniform(-4, 4), y = rng.uniform(-5, 5);
    const double loss = hetero_loss(Vector{y_hat}, Vector{z}, Vector{y}).loss;
    const double nll = -testing::gaussian_log_density(y, y_hat, std::exp(z));
    worst = std::max(worst, std::abs(loss - (nll - 0.5 * std::log(2.0 * std::numbers::pi))));
  }
  return {hand && worst <= 1e-12,
          fmt("hand values %.15g / %.15g / %.15g, NLL equivalence max error %.2e over 1000 tuples", h0, h1, h2, worst)};
}

// ---------------------------------------------------------------- benchmark runs

struct Benchmark {
  fs::path dir;
  cli::ExperimentConfig config;
  std::vector<std::vector<std::string>> table;  // ablation_table.csv rows
  std::vector<std::vector<std::string>> runs;   // ablation_runs.csv rows
  double seconds = 0.0;
};

Benchmark run_ablation(const fs::path& root) {
  Benchmark b;
  b.dir = root / "ablate";
  b.config = cli::default_config();
  b.config.seeds = {0, 1, 2, 3, 4};
  cli::CommandOptions o;
  o.config_path = write_config(root, "benchmark.conf", b.config);
  o.out_dir = b.dir.string();
  const auto t0 = std::chrono::steady_clock::now();
  run_quiet(cli::cmd_ablate, o);
  b.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  b.table = read_csv(b.dir / "ablation_table.csv");
  b.runs = read_csv(b.dir / "ablation_runs.csv");
  return b;
}

const std::vector<std::string>* table_row(const Benchmark& b, const std::string& variant) {
  for (const auto& r : b.table)
    if (!r.empty() && r[0] == variant) return &r;
  return nullptr;
}

// ---------------------------------------------------------------- 3

Outcome variance_reduction(const fs::path& root) {
  cli::ExperimentConfig c = cli::default_config();
  c.train.dropout_p = 0.25;
  c.variance_reruns = 200;
  c.variance_t_draws = {5};
  cli::CommandOptions o;
  o.config_path = write_config(root, "variance.conf", c);
  o.out_dir = (root / "variance").string();
  const auto t0 = std::chrono::steady_clock::now();
  if (run_quiet(cli::cmd_variance_demo, o) != cli::exit_ok) return {false, "variance-demo failed"};
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto v = nlohmann::json::parse(slurp(root / "variance" / "variance_report.json"));
  const auto& row = v["rows"][0];
  const double d = row["mse_diff"], dse = row["mse_diff_se"];
  const double b = row["mean_error_diff"], bse = row["mean_error_diff_se"];
  const bool ok = row["ensemble_not_worse"].get<bool>() && row["bias_equal"].get<bool>() && secs < 300.0;
  return {ok, fmt("T=5, %zu reruns: mse %.5f -> %.5f (diff %.2e, 2 SE %.2e); mean error diff %.2e (2 SE %.2e); "
                  "var %.5f -> %.5f; %.0fs",
                  row["reruns"].get<std::size_t>(), row["mse_single"].get<double>(),
                  row["mse_ensemble"].get<double>(), d, 2 * dse, b, 2 * bse, row["var_single"].get<double>(),
                  row["var_ensemble"].get<double>(), secs)};
}

// ---------------------------------------------------------------- 4

Outcome ablation_ordering(const Benchmark& b) {
  const auto* base = table_row(b, "baseline");
  const auto* con = table_row(b, "baseline_con");
  const auto* ens = table_row(b, "baseline_ens");
  const auto* full = table_row(b, "full");
  if (!base || !con || !ens || !full) return {false, "ablation table incomplete"};
  auto num = [](const std::vector<std::string>* r, int i) { return std::stod((*r)[static_cast<std::size_t>(i)]); };
  const double n = num(full, 5);
  const double pooled = std::sqrt((num(full, 2) * num(full, 2) + num(base, 2) * num(base, 2)) / n);
  const double gap = num(base, 1) - num(full, 1);
  const bool ok = num(full, 1) < num(base, 1) && num(con, 1) < num(base, 1) && num(ens, 1) < num(base, 1) &&
                  gap > pooled && num(base, 6) + num(full, 6) + num(con, 6) + num(ens, 6) == 0 && b.seconds < 1800;
  return {ok, fmt("MAE baseline %.4f+-%.4f, con %.4f, ens %.4f, full %.4f+-%.4f; gap %.4f vs pooled SE %.4f; %.0fs",
                  num(base, 1), num(base, 2), num(con, 1), num(ens, 1), num(full, 1), num(full, 2), gap, pooled,
                  b.seconds)};
}

// ---------------------------------------------------------------- 5

Outcome uncertainty_quality(const Benchmark& b) {
  // runs: variant,seed,status,test_mae,test_r2,best_epoch,uncertainty_spearman,bin_first_mse,bin_last_mse,hash
  std::vector<double> rho_base, rho_con;
  std::size_t bins_ok = 0, con_runs = 0;
  for (const auto& r : b.runs) {
    if (r.size() < 9 || r[2] != "ok") continue;
    if (r[0] == "baseline") rho_base.push_back(std::stod(r[6]));
    if (r[0] == "baseline_con") {
      rho_con.push_back(std::stod(r[6]));
      ++con_runs;
      if (!r[7].empty() && std::stod(r[7]) < std::stod(r[8])) ++bins_ok;
    }
  }
  if (rho_base.size() != 5 || rho_con.size() != 5) return {false, "missing runs"};
  std::size_t wins = 0;
  std::string pairs;
  for (std::size_t i = 0; i < 5; ++i) {
    if (rho_con[i] > rho_base[i]) ++wins;
    pairs += fmt("%s%.3f/%.3f", i ? " " : "", rho_con[i], rho_base[i]);
  }
  return {wins >= 4 && bins_ok == con_runs,
          fmt("rho con/baseline per seed [%s]: con higher in %zu/5; first bin < last bin in %zu/%zu", pairs.c_str(),
              wins, bins_ok, con_runs)};
}

// ---------------------------------------------------------------- 6

Outcome semi_supervised_gain(const Benchmark& b) {
  const auto* full = table_row(b, "full");
  if (!full) return {false, "ablation table incomplete"};
  const double full_mae = std::stod((*full)[1]);
  Vector sup;
  for (std::uint64_t seed : b.config.seeds) {
    TrainConfig tc = cli::train_config(b.config, seed);
    tc.variant = Variant::full;
    tc.w_ulb = 0.0;
    sup.push_back(run_experiment(tc, cli::build_split(b.config, seed), b.config.report).test_mae);
  }
  const double sup_mae = testing::sample_mean(sup);
  return {full_mae < sup_mae,
          fmt("mean test MAE full (w_ulb=%g) %.4f vs labeled-only (w_ulb=0) %.4f over %zu seeds",
              b.config.train.w_ulb, full_mae, sup_mae, sup.size())};
}

// ---------------------------------------------------------------- 7

Outcome reproducibility(const fs::path& root) {
  cli::ExperimentConfig c = cli::default_config();
  c.synthetic.n_samples = 240;
  c.train.epochs = 5;
  c.seeds = {0, 1};
  c.variance_reruns = 30;
  const std::string path = write_config(root, "repro.conf", c);
  std::vector<std::string> mismatched;
  struct Cmd {
    const char* name;
    int (*fn)(const cli::CommandOptions&, std::ostream&);
  };
  for (const Cmd& cmd : {Cmd{"train", cli::cmd_train}, Cmd{"ablate", cli::cmd_ablate},
                         Cmd{"variance-demo", cli::cmd_variance_demo}}) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      cli::CommandOptions o;
      o.config_path = path;
      o.out_dir = (root / "repro" / (std::string(cmd.name) + std::to_string(rep))).string();
      run_quiet(cmd.fn, o);
      const std::string m = slurp(fs::path(*o.out_dir) / "metrics.json");
      if (rep == 0) first = m;
      else if (m != first || m.empty()) mismatched.push_back(cmd.name);
    }
  }
  std::string eval_first;
  for (int rep = 0; rep < 2; ++rep) {
    cli::CommandOptions o;
    o.config_path = path;
    o.from_dir = (root / "repro" / "train0").string();
    o.out_dir = (root / "repro" / ("evaluate" + std::to_string(rep))).string();
    run_quiet(cli::cmd_evaluate, o);
    const std::string m = slurp(fs::path(*o.out_dir) / "metrics.json");
    if (rep == 0) eval_first = m;
    else if (m != eval_first || m.empty()) mismatched.push_back("evaluate");
  }

  // Checkpoint round trip.
  const fs::path ckpt = root / "repro" / "train0" / "model_a.ckpt";
  const MlpModel loaded = load_checkpoint(ckpt.string());
  std::ostringstream again;
  save_checkpoint(loaded, again);
  const bool ckpt_ok = again.str() == slurp(ckpt) && load_checkpoint(ckpt.string()).parameters() == loaded.parameters();
  Rng rng(1);
  MlpConfig mc;
  mc.input_dim = 3;
  mc.hidden_dims = {5, 4};
  const MlpModel fresh = init_model(mc, rng);
  std::stringstream buf;
  save_checkpoint(fresh, buf);
  const bool fresh_ok = load_checkpoint(buf).parameters() == fresh.parameters();

  std::string bad;
  for (const auto& m : mismatched) bad += " " + m;
  return {mismatched.empty() && ckpt_ok && fresh_ok,
          fmt("metrics.json byte-identical for train, ablate, variance-demo, evaluate%s; checkpoint round trip %s",
              mismatched.empty() ? "" : (": MISMATCH" + bad).c_str(), ckpt_ok && fresh_ok ? "exact" : "NOT exact")};
}

// ---------------------------------------------------------------- 8

Outcome degenerate_cases() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) failed.emplace_back(what);
  };

  // dropout 0: VME is the deterministic two-model average for every T.
  {
    MlpConfig mc;
    mc.input_dim = 2;
    mc.hidden_dims = {6, 6};
    mc.dropout_p = 0.0;
    Rng r(3);
    MlpModel a = init_model(mc, r), b = init_model(mc, r);
    a.head_z_bias()(0, 0) = 0.4;
    Matrix x(7, 2);
    for (double& v : x.data()) v = r.uniform(-1, 1);
    const ForwardTrace da = forward(a, x), db = forward(b, x);
    bool ok = true;
    for (std::size_t t : {1u, 5u, 17u}) {
      Rng g(t);
      const PseudoLabelBatch p = generate_pseudo_labels(a, b, x, t, g);
      for (std::size_t i = 0; i < 7; ++i) {
        ok = ok && std::abs(p.y_tilde[i] - (da.y_hat[i] + db.y_hat[i]) / 2) <= 1e-14 &&
             std::abs(p.z_tilde[i] - (da.z_hat[i] + db.z_hat[i]) / 2) <= 1e-14;
      }
    }
    expect(ok, "dropout_p=0 VME collapse");
  }
  // z = 0: heteroscedastic loss is MSE / 2.
  {
    Rng r(4);
    Vector yh(50), y(50), z(50, 0.0);
    double mse = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
      yh[i] = r.standard_normal();
      y[i] = r.standard_normal();
      mse += (yh[i] - y[i]) * (yh[i] - y[i]);
    }
    mse /= 50.0;
    expect(std::abs(hetero_loss(yh, z, y).loss - mse / 2) <= 1e-15, "z=0 hetero == MSE/2");
  }
  // label_fraction boundary and empty unlabeled data.
  {
    SyntheticSpec s;
    s.n_samples = 200;
    s.input_dim = 2;
    const RegressionDataset data = generate_synthetic(s);
    Rng r(5);
    const SemiSupervisedSplit all = split_semi_supervised(data, 1.0, 0.1, 0.1, r);
    expect(all.unlabeled.empty() && all.labeled.size() == 160, "label_fraction=1 leaves no unlabeled rows");
    TrainConfig tc;
    tc.epochs = 2;
    tc.hidden_dims = {8};
    bool threw = false;
    try {
      run_experiment(tc, all);
    } catch (const UsageError&) {
      threw = true;
    }
    expect(threw, "w_ulb>0 with no unlabeled data is a usage error");
    tc.w_ulb = 0.0;
    expect(std::isfinite(run_experiment(tc, all).test_mae), "w_ulb=0 trains without unlabeled data");

    Rng r2(6);
    const SemiSupervisedSplit tenth = split_semi_supervised(data, 0.1, 0.1, 0.1, r2);
    expect(tenth.labeled.size() == 16 && tenth.unlabeled.size() == 144, "label_fraction=0.1 sizes");
    bool rejected = false;
    try {
      Rng r3(7);
      split_semi_supervised(data, 1.5, 0.1, 0.1, r3);
    } catch (const ParameterError&) {
      rejected = true;
    }
    expect(rejected, "label_fraction>1 rejected");

    TrainConfig step_cfg;
    step_cfg.hidden_dims = {4};
    TrainState st = TrainState::initial(step_cfg, 2);
    bool usage = false;
    try {
      train_step(st, tenth.labeled.features, tenth.labeled.require_targets(), Matrix(0, 2), step_cfg);
    } catch (const UsageError&) {
      usage = true;
    }
    expect(usage && st.history.empty(), "empty unlabeled batch with w_ulb>0 rejected");
    step_cfg.w_ulb = 0.0;
    train_step(st, tenth.labeled.features, tenth.labeled.require_targets(), Matrix(0, 2), step_cfg);
    expect(st.history.size() == 1, "empty unlabeled batch with w_ulb=0 trains");
  }

  std::string list;
  for (const auto& f : failed) list += " [" + f + "]";
  return {failed.empty(), failed.empty() ? "dropout_p=0 VME collapse, z=0 MSE/2, label_fraction boundary, "
                                           "empty unlabeled batch"
                                         : "failed:" + list};
}

}  // namespace

int main() {
  const fs::path root = scratch_dir();
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("criterion %d %s  %s: %s (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "gradient correctness", [] {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = gradient_correctness();
    if (std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= 60.0) {
      o.pass = false;
      o.detail += " (over 1 min)";
    }
    return o;
  });
  report(2, "loss-kernel oracles", loss_oracles);
  report(3, "variance reduction", [&] { return variance_reduction(root); });
  Benchmark bench;
  bool bench_ok = true;
  try {
    bench = run_ablation(root);
  } catch (const std::exception& e) {
    bench_ok = false;
    std::printf("benchmark ablation failed: %s\n", e.what());
  }
  report(4, "ablation ordering", [&] { return bench_ok ? ablation_ordering(bench) : Outcome{false, "no ablation"}; });
  report(5, "uncertainty quality", [&] { return bench_ok ? uncertainty_quality(bench) : Outcome{false, "no ablation"}; });
  report(6, "semi-supervised gain", [&] { return bench_ok ? semi_supervised_gain(bench) : Outcome{false, "no ablation"}; });
  report(7, "reproducibility", [&] { return reproducibility(root); });
  report(8, "degenerate cases", degenerate_cases);

  std::printf("%d of 8 criteria passed\n", 8 - failures);
  fs::remove_all(root);
  return failures == 0 ? 0 : 1;
}
