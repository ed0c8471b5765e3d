#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "pbound/errors.hpp"
#include "pbound/gpc.hpp"
#include "pbound/rng.hpp"

using namespace pbound;

namespace {

ParameterBox unit_box(std::size_t d) {
  std::vector<Dimension> dims;
  for (std::size_t i = 0; i < d; ++i) dims.push_back({"x" + std::to_string(i), 0.0, 1.0, ""});
  return ParameterBox(dims);
}

// Two-class data in the unit square labeled by a tilted line, with a few
// points placed on the wrong side.
TrainingSet noisy_set(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = rng.uniform();
    X(i, 1) = rng.uniform();
    y[i] = X(i, 0) + 0.3 * X(i, 1) > 0.65 ? 1.0 : -1.0;
    if (rng.uniform() < 0.1) y[i] = -y[i];
  }
  return TrainingSet::from_normalized(unit_box(2), X, y);
}

KernelParams kernel2(double sf2, double l0, double l1) { return {sf2, {l0, l1}, 1e-8}; }

}  // namespace

TEST_CASE("kernel values") {
  const KernelParams k{2.5, {0.5, 2.0}, 0.0};
  const std::vector<double> a{0.1, 0.2};
  CHECK(kernel_eval(a, a, k) == doctest::Approx(2.5).epsilon(1e-15));
  const KernelParams unit{1.0, {1.0, 1.0}, 0.0};
  const std::vector<double> o{0.0, 0.0}, p{1.0, 1.0};
  CHECK(kernel_eval(o, p, unit) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(kernel_eval(o, p, k) == doctest::Approx(2.5 * std::exp(-0.5 * (4.0 + 0.25))).epsilon(1e-15));
}

TEST_CASE("kernel parameter validation") {
  CHECK_THROWS_AS((KernelParams{0.0, {1.0}}.validate(1)), UsageError);
  CHECK_THROWS_AS((KernelParams{1.0, {1.0, -1.0}}.validate(2)), UsageError);
  CHECK_THROWS_AS((KernelParams{1.0, {1.0}}.validate(2)), UsageError);
  CHECK_NOTHROW((KernelParams{1.0, {1.0, 1.0}}.validate(2)));
}

TEST_CASE("kernel matrix agrees with element-wise evaluation") {
  const auto t = noisy_set(12, 3);
  const KernelParams k = kernel2(1.7, 0.3, 0.8);
  const Eigen::MatrixXd K = kernel_matrix(t.X, t.X, k);
  const Eigen::MatrixXd Xc = t.X;  // distinct object, general path
  const Eigen::MatrixXd K2 = kernel_matrix(t.X, Xc, k);
  for (Eigen::Index i = 0; i < t.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.X.rows(); ++j) {
      const std::vector<double> a{t.X(i, 0), t.X(i, 1)}, b{t.X(j, 0), t.X(j, 1)};
      CHECK(K(i, j) == doctest::Approx(kernel_eval(a, b, k)).epsilon(1e-14));
      CHECK(K2(i, j) == doctest::Approx(kernel_eval(a, b, k)).epsilon(1e-14));
    }
  }
}

TEST_CASE("training set construction") {
  const auto box = ParameterBox::scenario_default();
  const std::vector<LabeledSample> s{{{55, 12.5, 17.5}, Outcome::Collision}, {{40, 5, 10}, Outcome::NoCollision}};
  const auto t = TrainingSet::from_samples(box, s);
  CHECK(t.X(0, 0) == doctest::Approx(0.5));
  CHECK(t.X(0, 1) == doctest::Approx(0.5));
  CHECK(t.X(1, 2) == doctest::Approx(0.0));
  CHECK(t.y[0] == 1.0);
  CHECK(t.y[1] == -1.0);
  CHECK(t.has_both_classes());
  CHECK_FALSE(TrainingSet::from_samples(box, std::span(s).first(1)).has_both_classes());
}

TEST_CASE("sigmoid expectations") {
  CHECK(expected_sigmoid(0.0, 0.0) == 0.5);
  CHECK(expected_sigmoid(0.0, 5.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(expected_sigmoid(1.3, 0.0) == doctest::Approx(sigmoid(1.3)));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("predictive quadrature matches stratified Monte Carlo integration") {
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    const double mean = rng.uniform(-6.0, 6.0);
    const double var = rng.uniform(0.0, 20.0);
    CAPTURE(mean);
    CAPTURE(var);
    const double mc = testing::monte_carlo_expected_sigmoid(mean, var, 1000000, 77 + i);
    CHECK(std::abs(expected_sigmoid(mean, var) - mc) < 1e-3);
  }
}

TEST_CASE("predictive quadrature stays accurate for wide latent variances") {
  Rng rng(2025);
  for (int i = 0; i < 10; ++i) {
    const double mean = rng.uniform(-30.0, 30.0);
    const double var = std::exp(rng.uniform(std::log(20.0), std::log(900.0)));
    CAPTURE(mean);
    CAPTURE(var);
    const double mc = testing::monte_carlo_expected_sigmoid(mean, var, 1000000, 177 + i);
    CHECK(std::abs(expected_sigmoid(mean, var) - mc) < 1e-4);
  }
}

TEST_CASE("single positive point pushes the mode up") {
  Eigen::MatrixXd X(1, 1);
  X << 0.4;
  Eigen::VectorXd y(1);
  y << 1.0;
  const auto t = TrainingSet::from_normalized(unit_box(1), X, y);
  const auto m = laplace_fit(t, {1.0, {0.2}});
  CHECK(m.mode()[0] > 0.0);
  CHECK(m.stationarity_residual() < 1e-6);
  const std::vector<double> at{0.4};
  CHECK(m.predict(at).prob_collision > 0.5);
}

TEST_CASE("laplace mode properties") {
  const auto t = noisy_set(40, 9);
  const KernelParams k = kernel2(4.0, 0.3, 0.5);
  const auto m = laplace_fit(t, k);

  SUBCASE("stationarity and curvature") {
    CHECK(m.stationarity_residual() < 1e-6);
    for (Eigen::Index i = 0; i < m.hessian_diagonal().size(); ++i) {
      CHECK(m.hessian_diagonal()[i] > 0.0);
      CHECK(m.hessian_diagonal()[i] <= 0.25);
    }
  }

  SUBCASE("mode beats random perturbations") {
    const double best = testing::laplace_objective(t.X, t.y, k.signal_variance, k.lengthscales, k.jitter, m.mode());
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd f = m.mode();
      const double scale = 1e-3 * std::pow(10.0, static_cast<double>(trial % 4));
      for (Eigen::Index i = 0; i < f.size(); ++i) f[i] += scale * (2.0 * rng.uniform() - 1.0);
      CHECK(testing::laplace_objective(t.X, t.y, k.signal_variance, k.lengthscales, k.jitter, f) <= best);
    }
  }

  SUBCASE("label flip mirrors the mode and the predictions") {
    const auto flipped = TrainingSet::from_normalized(t.box, t.X, -t.y);
    const auto mf = laplace_fit(flipped, k);
    CHECK((m.mode() + mf.mode()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(m.log_marginal() == doctest::Approx(mf.log_marginal()).epsilon(1e-12));
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
      const std::vector<double> q{rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)};
      CHECK(std::abs(m.predict(q).prob_collision + mf.predict(q).prob_collision - 1.0) < 1e-10);
    }
  }

  SUBCASE("predictive variance bounds") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
      const std::vector<double> q{rng.uniform(-1.0, 2.0), rng.uniform(-1.0, 2.0)};
      const Prediction p = m.predict(q);
      CHECK(p.latent_var >= 0.0);
      CHECK(p.latent_var <= k.signal_variance + 1e-8);
      CHECK(p.prob_collision >= 0.0);
      CHECK(p.prob_collision <= 1.0);
    }
    for (Eigen::Index i = 0; i < t.X.rows(); ++i) {
      const std::vector<double> q{t.X(i, 0), t.X(i, 1)};
      CHECK(m.predict(q).latent_var >= 0.0);
    }
  }

  SUBCASE("permutation invariance") {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(t.X.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(8);
    rng.shuffle(perm);
    Eigen::MatrixXd Xp(t.X.rows(), t.X.cols());
    Eigen::VectorXd yp(t.y.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      Xp.row(static_cast<Eigen::Index>(i)) = t.X.row(perm[i]);
      yp[static_cast<Eigen::Index>(i)] = t.y[perm[i]];
    }
    const auto mp = laplace_fit(TrainingSet::from_normalized(t.box, Xp, yp), k);
    for (int i = 0; i < 200; ++i) {
      const std::vector<double> q{rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)};
      CHECK(std::abs(m.predict(q).prob_collision - mp.predict(q).prob_collision) < 1e-10);
    }
  }

  SUBCASE("far field reverts to one half") {
    for (double dist : {8.0, 12.0, 40.0}) {
      // Beyond every training point by `dist` lengthscales in each dimension.
      const std::vector<double> q{1.0 + dist * 0.3, 1.0 + dist * 0.5};
      CHECK(std::abs(m.predict(q).prob_collision - 0.5) < 0.02);
      const std::vector<double> r{-dist * 0.3, 0.5};
      CHECK(std::abs(m.predict(r).prob_collision - 0.5) < 0.02);
    }
  }

  SUBCASE("batch prediction matches single prediction for any thread count") {
    Eigen::MatrixXd Q(1100, 2);
    Rng rng(9);
    for (Eigen::Index i = 0; i < Q.rows(); ++i) Q.row(i) << rng.uniform(), rng.uniform();
    const auto b1 = m.predict_batch(Q, 1);
    const auto b3 = m.predict_batch(Q, 3);
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
      const std::vector<double> q{Q(i, 0), Q(i, 1)};
      const auto s = m.predict(q);
      CHECK(b1[static_cast<std::size_t>(i)].prob_collision == b3[static_cast<std::size_t>(i)].prob_collision);
      CHECK(b1[static_cast<std::size_t>(i)].prob_collision == doctest::Approx(s.prob_collision).epsilon(1e-12));
    }
  }

  SUBCASE("warm start converges to the same mode") {
    const Eigen::VectorXd g = m.likelihood_gradient();
    const auto mw = laplace_fit(t, kernel2(4.5, 0.32, 0.5), &g);
    const auto mc = laplace_fit(t, kernel2(4.5, 0.32, 0.5));
    CHECK((mw.mode() - mc.mode()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(mw.log_marginal() == doctest::Approx(mc.log_marginal()).epsilon(1e-9));
  }

  SUBCASE("json round trip") {
    const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
    CHECK(back.kernel() == m.kernel());
    CHECK(back.log_marginal() == m.log_marginal());
    Rng rng(10);
    for (int i = 0; i < 200; ++i) {
      const std::vector<double> q{rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)};
      const auto a = m.predict(q);
      const auto b = back.predict(q);
      CHECK(std::abs(a.prob_collision - b.prob_collision) < 1e-12);
      CHECK(std::abs(a.latent_mean - b.latent_mean) < 1e-12);
    }
  }
}

TEST_CASE("prior-only model predicts one half") {
  const auto m = GpcModel::prior_only(unit_box(2), kernel2(3.0, 0.2, 0.2));
  const std::vector<double> q{0.3, 0.9};
  const auto p = m.predict(q);
  CHECK(p.prob_collision == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.latent_var == doctest::Approx(3.0));
}

TEST_CASE("laplace fit refits identically") {
  const auto t = noisy_set(30, 21);
  const auto a = laplace_fit(t, kernel2(2.0, 0.4, 0.4));
  const auto b = laplace_fit(t, kernel2(2.0, 0.4, 0.4));
  CHECK(a.log_marginal() == b.log_marginal());
  CHECK(a.mode() == b.mode());
}

TEST_CASE("model json rejects bad documents") {
  const auto t = noisy_set(10, 4);
  auto j = to_json(laplace_fit(t, kernel2(1.0, 0.5, 0.5)));
  auto bad = j;
  bad["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(bad), DataError);
  bad = j;
  bad.erase("mode");
  CHECK_THROWS_AS(model_from_json(bad), DataError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::array()), DataError);
}

TEST_CASE("hyperparameter search") {
  const auto t = noisy_set(40, 31);
  HyperparamOptions opt;
  opt.restarts = 3;
  opt.seed = 4;
  opt.max_evals = 200;

  SUBCASE("contract") {
    const auto r = optimize_hyperparams(t, opt);
    REQUIRE(r.start_log_marginals.size() == 3);
    REQUIRE(r.restart_log_marginals.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      if (!std::isnan(r.start_log_marginals[i])) CHECK(r.restart_log_marginals[i] >= r.start_log_marginals[i]);
      CHECK(r.log_marginal >= r.restart_log_marginals[i]);
    }
    CHECK(r.kernel.signal_variance >= opt.bounds.signal_variance_min);
    CHECK(r.kernel.signal_variance <= opt.bounds.signal_variance_max);
    for (double l : r.kernel.lengthscales) {
      CHECK(l >= opt.bounds.lengthscale_min);
      CHECK(l <= opt.bounds.lengthscale_max);
    }
    const auto m = laplace_fit(t, r.kernel);
    CHECK(m.log_marginal() == doctest::Approx(r.log_marginal).epsilon(1e-6));
    CHECK(m.stationarity_residual() < 1e-6);
  }

  SUBCASE("more restarts never hurt") {
    const auto small = optimize_hyperparams(t, opt);
    opt.restarts = 6;
    const auto large = optimize_hyperparams(t, opt);
    CHECK(large.log_marginal >= small.log_marginal);
    for (std::size_t i = 0; i < 3; ++i) CHECK(large.restart_log_marginals[i] == small.restart_log_marginals[i]);
  }

  SUBCASE("result is reproducible and thread-count independent") {
    const auto a = optimize_hyperparams(t, opt);
    opt.threads = 3;
    const auto b = optimize_hyperparams(t, opt);
    CHECK(a.kernel == b.kernel);
    CHECK(a.log_marginal == b.log_marginal);
  }

  SUBCASE("single-class data is rejected") {
    const auto one = TrainingSet::from_normalized(t.box, t.X, Eigen::VectorXd::Ones(t.y.size()));
    CHECK_THROWS_AS(optimize_hyperparams(one, opt), SingleClassError);
  }
}

TEST_CASE("hyperparameter search agrees with a grid search in one dimension") {
  // Labels flip at x = 0.5 with two mislabeled points near the threshold.
  const std::size_t n = 30;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    X(r, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    y[r] = X(r, 0) > 0.5 ? 1.0 : -1.0;
  }
  y[13] = 1.0;
  y[17] = -1.0;
  const auto t = TrainingSet::from_normalized(unit_box(1), X, y);

  HyperparamOptions opt;
  opt.restarts = 6;
  opt.seed = 1;
  opt.max_evals = 400;
  opt.tolerance = 1e-9;
  const auto r = optimize_hyperparams(t, opt);
  CHECK(r.kernel.lengthscales[0] < 3.0);

  // 40 x 40 grid in log space over the search bounds.
  const int G = 40;
  const double ll0 = std::log(0.03), ll1 = std::log(3.0), ls0 = std::log(0.01), ls1 = std::log(900.0);
  double best = -1e300;
  double best_l = 0.0, best_s = 0.0;
  for (int a = 0; a < G; ++a) {
    for (int b = 0; b < G; ++b) {
      const double l = std::exp(ll0 + (ll1 - ll0) * a / (G - 1));
      const double s = std::exp(ls0 + (ls1 - ls0) * b / (G - 1));
      const double v = laplace_fit(t, {s, {l}}).log_marginal();
      if (v > best) {
        best = v;
        best_l = l;
        best_s = s;
      }
    }
  }
  CHECK(r.log_marginal >= best - 1e-6);
  const double cell_l = (ll1 - ll0) / (G - 1), cell_s = (ls1 - ls0) / (G - 1);
  CHECK(std::abs(std::log(r.kernel.lengthscales[0]) - std::log(best_l)) <= cell_l + 1e-9);
  CHECK(std::abs(std::log(r.kernel.signal_variance) - std::log(best_s)) <= cell_s + 1e-9);
}

TEST_CASE("evaluation metrics") {
  const auto box = ParameterBox::scenario_default();
  std::vector<LabeledSample> train;
  Rng rng(3);
  for (int i = 0; i < 60; ++i) {
    const ScenarioParams p{rng.uniform(40, 70), rng.uniform(5, 20), rng.uniform(10, 25)};
    train.push_back({p, p.speed_ego > 55 ? Outcome::Collision : Outcome::NoCollision});
  }
  const auto m = laplace_fit(TrainingSet::from_samples(box, train), {20.0, {0.2, 2.0, 2.0}});

  const std::vector<LabeledSample> test{{{68, 10, 15}, Outcome::Collision},
                                        {{42, 10, 15}, Outcome::NoCollision},
                                        {{69, 12, 20}, Outcome::NoCollision}};
  const Metrics r = evaluate(m, test);
  CHECK(r.n == 3);
  CHECK(r.n_misclassified == 1);
  CHECK(r.accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(r.misclassified == std::vector<bool>{false, false, true});
  CHECK(r.probabilities.size() == 3);

  const Metrics one = evaluate(m, std::span(test).first(1));
  CHECK(one.accuracy == 1.0);

  CHECK_THROWS_AS(evaluate(m, std::span<const LabeledSample>{}), EmptyInputError);
}

TEST_CASE("flexible model reproduces its own oracle-labeled training points") {
  const auto box = ParameterBox::scenario_default();
  const auto pts = monte_carlo(box, 200, 17);
  const auto labeled = label(pts, PhysicsConfig{});
  const auto m = laplace_fit(TrainingSet::from_samples(box, labeled), {100.0, {0.1, 0.1, 0.1}});
  CHECK(evaluate(m, labeled).accuracy >= 0.95);
}
