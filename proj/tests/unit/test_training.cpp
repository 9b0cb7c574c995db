#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "ucvme/data.hpp"
#include "ucvme/errors.hpp"
#include "ucvme/training.hpp"

using namespace ucvme;

namespace {

TrainConfig small_config(Variant v = Variant::full) {
  TrainConfig c;
  c.variant = v;
  c.hidden_dims = {8};
  c.epochs = 3;
  c.batch_labeled = 8;
  c.batch_unlabeled = 16;
  c.t_draws = 3;
  c.dropout_p = 0.1;
  c.seed = 42;
  return c;
}

Matrix ramp(std::size_t n, std::size_t d, double offset = 0.0) {
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = std::sin(0.7 * static_cast<double>(i * d + j) + offset);
  return x;
}

SemiSupervisedSplit small_split(std::uint64_t seed) {
  SyntheticSpec s;
  s.n_samples = 300;
  s.input_dim = 2;
  s.seed = seed;
  Rng rng = Rng(seed).substream("split");
  return split_semi_supervised(generate_synthetic(s), 0.2, 0.15, 0.15, rng);
}

// Linear model (no hidden layer) on one input: y = w x + c, z = v x + d.
struct Linear {
  double w, c, v, d;
};

void set_linear(MlpModel& m, const Linear& p) {
  m.head_y_weight()(0, 0) = p.w;
  m.head_y_bias()(0, 0) = p.c;
  m.head_z_weight()(0, 0) = p.v;
  m.head_z_bias()(0, 0) = p.d;
}

Linear get_linear(const MlpModel& m) {
  return {m.head_y_weight()(0, 0), m.head_y_bias()(0, 0), m.head_z_weight()(0, 0), m.head_z_bias()(0, 0)};
}

// Hand-differentiated total loss for one labeled sample (x, y) and one
// unlabeled sample u, with pseudo-targets from deterministic ensembling:
//   L = sum_m [ r_m^2 / (2 e^{z_m}) + z_m / 2 ]  +  (z_a - z_b)^2
//     + w * sum_m [ (y'_m - yt)^2 / (2 e^{zt}) + zt / 2  +  (z'_m - zt)^2 ]
// where yt = (y'_a + y'_b)/2 and zt = (z'_a + z'_b)/2 are held constant.
struct LinearGrad {
  Linear a, b;
};

LinearGrad hand_gradient(const Linear& a, const Linear& b, double x, double y, double u, double w) {
  const double ya = a.w * x + a.c, yb = b.w * x + b.c;
  const double za = a.v * x + a.d, zb = b.v * x + b.d;
  const double ua = a.w * u + a.c, ub = b.w * u + b.c;
  const double wa = a.v * u + a.d, wb = b.v * u + b.d;
  const double yt = (ua + ub) / 2, zt = (wa + wb) / 2;

  auto grad = [&](double y_hat, double z, double z_other, double y_u, double z_u, double sign) {
    const double dy_lab = (y_hat - y) * std::exp(-z);
    const double dz_lab = 0.5 - (y_hat - y) * (y_hat - y) * std::exp(-z) / 2 + sign * 2 * (z - z_other);
    const double dy_unl = w * (y_u - yt) * std::exp(-zt);
    const double dz_unl = w * 2 * (z_u - zt);
    return Linear{dy_lab * x + dy_unl * u, dy_lab + dy_unl, dz_lab * x + dz_unl * u, dz_lab + dz_unl};
  };
  return {grad(ya, za, zb, ua, wa, 1.0), grad(yb, zb, za, ub, wb, 1.0)};
}

}  // namespace

TEST_CASE("config validation names the field") {
  TrainConfig c;
  c.w_ulb = -1;
  try {
    c.validate();
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("w_ulb") != std::string::npos);
  }
  c = TrainConfig{};
  c.t_draws = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("t_draws"), ParameterError);
  c = TrainConfig{};
  c.learning_rate = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("learning_rate"), ParameterError);
  CHECK(variant_from_string("baseline_ens") == Variant::baseline_ens);
  CHECK_THROWS_AS(variant_from_string("ens"), ParameterError);
}

TEST_CASE("one SGD step on a linear pair matches the hand-derived gradient") {
  TrainConfig c;
  c.hidden_dims = {};
  c.dropout_p = 0.0;
  c.optimizer = OptimizerKind::sgd_momentum;
  c.momentum = 0.0;
  c.learning_rate = 0.1;
  c.t_draws = 2;

  SUBCASE("worked numbers") {
    TrainState s = TrainState::initial(c, 1);
    set_linear(s.model_a, {0.5, 0.0, 0.0, 0.0});
    set_linear(s.model_b, {1.5, 0.0, 0.0, 0.0});
    const Matrix xl{{1.0}}, xu{{2.0}};
    const Vector yl{2.0};
    train_step(s, xl, yl, xu, c);
    // dL/dw_a = (0.5 - 2) * 1 + 10 * (1 - 2) * 2 = -21.5
    const Linear a = get_linear(s.model_a), b = get_linear(s.model_b);
    CHECK(a.w == doctest::Approx(2.65).epsilon(1e-14));
    CHECK(a.c == doctest::Approx(1.15).epsilon(1e-14));
    CHECK(a.d == doctest::Approx(0.0625).epsilon(1e-14));
    CHECK(b.w == doctest::Approx(-0.45).epsilon(1e-14));
    CHECK(b.d == doctest::Approx(-0.0375).epsilon(1e-14));
  }

  SUBCASE("general point") {
    const Linear a0{0.3, -0.2, 0.4, 0.1}, b0{-0.7, 0.5, -0.3, 0.25};
    const double x = 0.8, y = -0.4, u = -1.3;
    for (double w : {0.0, 1.0, 10.0}) {
      c.w_ulb = w;
      TrainState s = TrainState::initial(c, 1);
      set_linear(s.model_a, a0);
      set_linear(s.model_b, b0);
      train_step(s, Matrix{{x}}, Vector{y}, Matrix{{u}}, c);
      const LinearGrad g = hand_gradient(a0, b0, x, y, u, w);
      const Linear a = get_linear(s.model_a), b = get_linear(s.model_b);
      CHECK(a.w == doctest::Approx(a0.w - 0.1 * g.a.w).epsilon(1e-12));
      CHECK(a.c == doctest::Approx(a0.c - 0.1 * g.a.c).epsilon(1e-12));
      CHECK(a.v == doctest::Approx(a0.v - 0.1 * g.a.v).epsilon(1e-12));
      CHECK(a.d == doctest::Approx(a0.d - 0.1 * g.a.d).epsilon(1e-12));
      CHECK(b.w == doctest::Approx(b0.w - 0.1 * g.b.w).epsilon(1e-12));
      CHECK(b.c == doctest::Approx(b0.c - 0.1 * g.b.c).epsilon(1e-12));
      CHECK(b.v == doctest::Approx(b0.v - 0.1 * g.b.v).epsilon(1e-12));
      CHECK(b.d == doctest::Approx(b0.d - 0.1 * g.b.d).epsilon(1e-12));
    }
  }
}

TEST_CASE("w_ulb = 0 reports the unlabeled terms but excludes them") {
  TrainConfig c = small_config();
  c.w_ulb = 0.0;
  const Matrix xl = ramp(8, 2), xu1 = ramp(16, 2, 0.3), xu2 = ramp(16, 2, 1.9);
  const Vector yl(8, 0.5);

  TrainState s1 = TrainState::initial(c, 2), s2 = s1;
  const LossBreakdown p = train_step(s1, xl, yl, xu1, c);
  CHECK(p.reg_ulb != 0.0);
  CHECK(p.total == p.reg_lb + p.unc_lb);

  // The update ignores the unlabeled inputs entirely.
  train_step(s2, xl, yl, xu2, c);
  CHECK(s1.model_a.parameters() == s2.model_a.parameters());
  CHECK(s1.model_b.parameters() == s2.model_b.parameters());

  // An empty unlabeled batch is allowed.
  TrainState s3 = TrainState::initial(c, 2);
  CHECK_NOTHROW(train_step(s3, xl, yl, Matrix(0, 2), c));
}

TEST_CASE("empty unlabeled batch with w_ulb > 0 is a usage error") {
  const TrainConfig c = small_config();
  TrainState s = TrainState::initial(c, 2);
  CHECK_THROWS_AS(train_step(s, ramp(8, 2), Vector(8, 0.0), Matrix(0, 2), c), UsageError);
  CHECK_THROWS_AS(train_step(s, Matrix(0, 2), Vector{}, ramp(4, 2), c), UsageError);
  CHECK(s.history.empty());
}

TEST_CASE("labeled fixed point") {
  TrainConfig c;
  c.hidden_dims = {};
  c.dropout_p = 0.0;
  c.w_ulb = 0.0;
  TrainState s = TrainState::initial(c, 1);
  set_linear(s.model_a, {1.0, 0.0, 0.0, 0.0});
  set_linear(s.model_b, {1.0, 0.0, 0.0, 0.0});
  const Matrix x{{2.0}};
  const StepTraces traces{forward(s.model_a, x), forward(s.model_b, x), std::nullopt, std::nullopt};
  const StepObjective o = evaluate_objective(s.model_a, s.model_b, traces, Vector{2.0}, PseudoTargets{}, c);
  CHECK(o.parts.reg_lb == 0.0);
  CHECK(o.parts.unc_lb == 0.0);
  for (const GradientSet* g : {&o.grad_a, &o.grad_b}) {
    // Mean head: W_y, b_y.
    CHECK(g->tensors[0](0, 0) == 0.0);
    CHECK(g->tensors[1](0, 0) == 0.0);
    // The variance head still sees d/dz (z/2) = 1/2: at r = 0 the loss keeps
    // decreasing as z falls.
    CHECK(g->tensors[3](0, 0) == 0.5);
  }
}

TEST_CASE("frozen pseudo-labels give a bitwise-identical step") {
  for (Variant v : {Variant::baseline, Variant::baseline_con, Variant::baseline_ens, Variant::full}) {
    const TrainConfig c = small_config(v);
    const Matrix xl = ramp(8, 2), xu = ramp(16, 2, 0.5);
    const Vector yl(8, -0.25);
    TrainState live = TrainState::initial(c, 2);
    TrainState frozen = live;
    const PseudoTargets t = make_pseudo_targets(frozen, xu, c);
    const LossBreakdown p1 = train_step(live, xl, yl, xu, c);
    const LossBreakdown p2 = train_step(frozen, xl, yl, xu, c, &t);
    CHECK(p1 == p2);
    CHECK(live.model_a.parameters() == frozen.model_a.parameters());
    CHECK(live.model_b.parameters() == frozen.model_b.parameters());
    CHECK(live.opt_a == frozen.opt_a);
  }
}

TEST_CASE("pseudo-target rule per variant") {
  TrainConfig c = small_config(Variant::baseline);
  c.dropout_p = 0.0;
  TrainState s = TrainState::initial(c, 2);
  const Matrix xu = ramp(5, 2);
  const ForwardTrace fa = forward(s.model_a, xu), fb = forward(s.model_b, xu);
  const PseudoTargets cross = make_pseudo_targets(s, xu, c);
  CHECK(cross.y_for_a == fb.y_hat);
  CHECK(cross.y_for_b == fa.y_hat);
  c.variant = Variant::baseline_ens;
  const PseudoTargets ens = make_pseudo_targets(s, xu, c);
  CHECK(ens.y_for_a == ens.y_for_b);
  for (std::size_t i = 0; i < 5; ++i) CHECK(ens.y_for_a[i] == doctest::Approx((fa.y_hat[i] + fb.y_hat[i]) / 2));
}

TEST_CASE("non-finite loss aborts the step without touching the models") {
  const TrainConfig c = small_config();
  TrainState s = TrainState::initial(c, 2);
  const ParameterSet before = s.model_a.parameters();
  Vector y(8, 0.0);
  y[3] = std::nan("");
  CHECK_THROWS_AS(train_step(s, ramp(8, 2), y, ramp(16, 2), c), NonFiniteLoss);
  CHECK(s.history.empty());
  CHECK(s.model_a.parameters() == before);
}

TEST_CASE("run_experiment") {
  const SemiSupervisedSplit split = small_split(1);

  SUBCASE("epochs = 0 scores the untrained models") {
    TrainConfig c = small_config();
    c.epochs = 0;
    const ExperimentResult r = run_experiment(c, split);
    CHECK(r.history.empty());
    CHECK(r.best_epoch == 0);
    CHECK(r.val_mae_history.size() == 1);
    CHECK(std::isfinite(r.test_mae));
    CHECK(r.bin_report.counts.size() == 10);
  }

  SUBCASE("deterministic") {
    const TrainConfig c = small_config();
    const ExperimentResult r1 = run_experiment(c, split);
    const ExperimentResult r2 = run_experiment(c, split);
    CHECK(r1 == r2);
    CHECK(r1.history.size() == 3 * ((split.labeled.size() + 7) / 8));
  }

  SUBCASE("label_fraction = 1 trains with w_ulb = 0 only") {
    SyntheticSpec s;
    s.n_samples = 200;
    s.input_dim = 2;
    Rng rng(3);
    const SemiSupervisedSplit full = split_semi_supervised(generate_synthetic(s), 1.0, 0.1, 0.1, rng);
    TrainConfig c = small_config();
    CHECK_THROWS_AS(run_experiment(c, full), UsageError);
    c.w_ulb = 0.0;
    const ExperimentResult r = run_experiment(c, full);
    CHECK(std::isfinite(r.test_mae));
    CHECK(r.bin_report.counts.empty());
  }

  SUBCASE("loss decreases") {
    TrainConfig c = small_config();
    c.epochs = 40;
    const ExperimentResult r = run_experiment(c, split);
    const std::size_t k = std::max<std::size_t>(1, r.history.size() / 10);
    auto median_labeled = [&](std::size_t from) {
      Vector v;
      for (std::size_t i = from; i < from + k; ++i) v.push_back(r.history[i].reg_lb + r.history[i].unc_lb);
      std::sort(v.begin(), v.end());
      return v[v.size() / 2];
    };
    CHECK(median_labeled(r.history.size() - k) < median_labeled(0));
    CHECK(r.test_r2 > 0.0);
  }

  SUBCASE("divergence fails the experiment with history") {
    TrainConfig c = small_config();
    c.optimizer = OptimizerKind::sgd_momentum;
    c.learning_rate = 1e6;
    CHECK_THROWS_AS(run_experiment(c, split), ExperimentFailure);
  }
}
