#include "gpssm/errors.hpp"
#include "gpssm/gp_prior.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gpssm;

namespace {

HyperParams se_theta(double lengthscale, double sf2, double q, bool include_x0 = false) {
  return testutil::make_theta(Kernel::squared_exponential({lengthscale}, sf2), q,
                              ObsModel::linear_gaussian({1.0}, 1.0), 0.0, include_x0);
}

Trajectory column(std::initializer_list<double> values) {
  Trajectory x(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) x(i++, 0) = v;
  return x;
}

const InputSeries kNoInputs(0, 0);

// Oracle kernel built from natural parameter values, independent of Kernel.
oracle::KernelFn oracle_kernel(int kind, const HyperParams& theta) {
  const auto nat = natural_values(theta);
  switch (kind) {
    case 0:
      return [nat](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < a.size(); ++i) s += nat[i] * a[i] * b[i];
        return s;
      };
    case 1:
      return [nat](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        std::vector<double> ls(static_cast<std::size_t>(a.size()));
        for (std::size_t i = 0; i < ls.size(); ++i) ls[i] = nat[static_cast<Eigen::Index>(i)];
        return oracle::se(a, b, ls, nat[a.size()]);
      };
    case 2:
      return [nat](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return oracle::matern32((a - b).norm(), nat[0], nat[1]);
      };
    default:
      return [nat](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        double s = 0.0;
        for (Eigen::Index i = 1; i < a.size(); ++i) s += std::pow((a[i] - b[i]) / nat[1 + i], 2);
        return oracle::matern32(std::abs(a[0] - b[0]), nat[0], nat[1]) * std::exp(-0.5 * s);
      };
  }
}

}  // namespace

TEST_CASE("first predictive step is the prior plus noise") {
  const HyperParams theta = se_theta(1.0, 1.0, 0.1);
  const auto state = GpPredictiveState::from_history(column({0.3}), kNoInputs, theta);
  const auto m = predictive_step(state, theta);
  CHECK(m.mean[0] == 0.0);
  CHECK(m.variance[0] == doctest::Approx(1.1).epsilon(1e-14));
  CHECK_THROWS_AS(predictive_step(GpPredictiveState(1, 0), theta), InputError);
}

TEST_CASE("two-point predictive matches joint Gaussian conditioning") {
  // Oracle: condition [f(x0)+v, f(x1)+v] jointly on the first entry.
  const double k01 = std::exp(-0.125), k00 = 1.0, q = 0.1;
  const double mu = k01 * 0.5 / (k00 + q);
  const double var = k00 + q - k01 * k01 / (k00 + q);
  CHECK(mu == doctest::Approx(0.40114).epsilon(1e-5));
  CHECK(var == doctest::Approx(0.39198).epsilon(1e-4));

  const HyperParams theta = se_theta(1.0, 1.0, q);
  const auto state = GpPredictiveState::from_history(column({0.0, 0.5}), kNoInputs, theta);
  const auto m = predictive_step(state, theta);
  CHECK(m.mean[0] == doctest::Approx(mu).epsilon(1e-13));
  CHECK(m.variance[0] == doctest::Approx(var).epsilon(1e-13));

  GpPredictiveState inc(1, 0);
  extend_in_place(inc, std::vector<double>{0.0}, {}, theta);
  extend_in_place(inc, std::vector<double>{0.5}, {}, theta);
  CHECK(predictive_step(inc, theta).mean[0] == doctest::Approx(mu).epsilon(1e-13));
}

TEST_CASE("duplicate conditioning points stay finite") {
  const HyperParams theta = se_theta(1.0, 1.0, 0.2);
  const auto state = GpPredictiveState::from_history(column({0.4, 0.4, 0.4, 0.4}), kNoInputs, theta);
  const auto m = predictive_step(state, theta);
  CHECK(std::isfinite(m.mean[0]));
  CHECK(m.variance[0] >= 0.2 - 1e-10);
  CHECK(std::isfinite(trajectory_log_prior(column({0.4, 0.4, 0.4, 0.4}), kNoInputs, theta)));
}

TEST_CASE("near-singular noise lift triggers jitter rather than failure") {
  const HyperParams theta = se_theta(1.0, 1.0, 1e-18);
  GpPredictiveState s(1, 0);
  for (int i = 0; i < 4; ++i) extend_in_place(s, std::vector<double>{0.4}, {}, theta);
  CHECK(s.max_jitter() > 0.0);
  CHECK(std::isfinite(s.log_density()));
}

TEST_CASE("non-finite conditioning values are input errors") {
  const HyperParams theta = se_theta(1.0, 1.0, 0.2);
  CHECK_THROWS_AS(GpPredictiveState::from_history(column({0.0, NAN}), kNoInputs, theta), InputError);
  GpPredictiveState s(1, 0);
  extend_in_place(s, std::vector<double>{0.0}, {}, theta);
  CHECK_THROWS_AS(extend_in_place(s, std::vector<double>{INFINITY}, {}, theta), InputError);
}

TEST_CASE("extend: empty state and incremental equals scratch") {
  const HyperParams theta0 = se_theta(1.0, 1.0, 0.3);
  const auto one = extend(GpPredictiveState(1, 0), std::vector<double>{0.2}, {}, theta0);
  CHECK(one.num_points() == 1);
  CHECK(one.factor_dim() == 0);

  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const int kind = rep % 4;
    const HyperParams theta = testutil::random_theta(kind, 1, rng);
    const std::size_t n = 2 + rng() % 25;
    const Trajectory x = testutil::random_walk(n, rng);
    const InputSeries u = testutil::random_inputs(n, 1, rng);
    GpPredictiveState inc(1, 1);
    for (std::size_t t = 0; t < n; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      extend_in_place(inc, std::vector<double>{x(ti, 0)}, std::vector<double>{u(ti, 0)}, theta);
    }
    const auto scratch = GpPredictiveState::from_history(x, u, theta);
    const auto a = predictive_step(inc, theta), b = predictive_step(scratch, theta);
    CHECK(oracle::rel_err(a.mean[0], b.mean[0]) < 1e-10);
    CHECK(std::abs(a.variance[0] - b.variance[0]) / b.variance[0] < 1e-10);
    CHECK(std::abs(inc.log_density() - scratch.log_density()) <=
          1e-10 * std::max(1.0, std::abs(scratch.log_density())));
    for (std::size_t i = 0; i < inc.factor_dim(); ++i) {
      const auto ra = inc.factor_row(0, i), rb = scratch.factor_row(0, i);
      for (std::size_t j = 0; j <= i; ++j) CHECK(std::abs(ra[j] - rb[j]) < 1e-10 * (1.0 + std::abs(rb[j])));
      CHECK(ra[i] > 0.0);
    }
    CHECK(inc.num_points() == inc.factor_dim() + 1);
  }
}

TEST_CASE("trajectory log prior closed form at T=1") {
  const HyperParams theta = se_theta(1.0, 1.0, 0.5, false);
  const double expect = -0.5 * std::log(2.0 * std::numbers::pi * 1.5);
  CHECK(expect == doctest::Approx(-1.12167).epsilon(1e-5));
  CHECK(trajectory_log_prior(column({0.0, 0.0}), kNoInputs, theta) ==
        doctest::Approx(expect).epsilon(1e-14));
  // Including the initial-state term adds log N(0; 0, 25).
  const HyperParams with_x0 = se_theta(1.0, 1.0, 0.5, true);
  CHECK(trajectory_log_prior(column({0.0, 0.0}), kNoInputs, with_x0) ==
        doctest::Approx(expect + oracle::gaussian_log_pdf(0.0, 0.0, 25.0)).epsilon(1e-14));
}

TEST_CASE("sequential prior equals the dense joint Gaussian") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 40; ++rep) {
    const int kind = rep % 4;
    const HyperParams theta = testutil::random_theta(kind, 1, rng);
    const std::size_t T = 20;
    const Trajectory x = testutil::random_walk(T + 1, rng);
    const InputSeries u = testutil::random_inputs(T + 1, 1, rng);
    const double seq = trajectory_log_prior(x, u, theta);
    const double dense = oracle::dense_log_prior(x.col(0), u, oracle_kernel(kind, theta),
                                                 theta.noise.variance(0), theta.mean.component(0),
                                                 theta.initial.std, true);
    CHECK(std::abs(seq - dense) / std::abs(dense) < 1e-8);
    // The batch value+gradient path agrees too.
    CHECK(std::abs(trajectory_log_prior_grad(x, u, theta).value - dense) / std::abs(dense) < 1e-8);
  }
}

TEST_CASE("parameter round trip leaves the prior unchanged") {
  std::mt19937_64 rng(4);
  HyperParams theta = testutil::random_theta(1, 1, rng);
  const Trajectory x = testutil::random_walk(12, rng);
  const InputSeries u = testutil::random_inputs(12, 1, rng);
  const double before = trajectory_log_prior(x, u, theta);
  const Eigen::VectorXd p = pack(theta);
  unpack(theta, p + Eigen::VectorXd::Constant(p.size(), 0.3));
  CHECK(trajectory_log_prior(x, u, theta) != before);
  unpack(theta, p);
  CHECK(trajectory_log_prior(x, u, theta) == doctest::Approx(before).epsilon(1e-14));
}

TEST_CASE("conditional future density") {
  std::mt19937_64 rng(9);
  const HyperParams theta = testutil::random_theta(3, 1, rng);
  const std::size_t T = 15;
  const Trajectory x = testutil::random_walk(T + 1, rng);
  const InputSeries u = testutil::random_inputs(T + 1, 1, rng);

  CHECK(conditional_future_log_density(x.topRows(5), Trajectory(0, 1), u, theta) == 0.0);

  const auto state = GpPredictiveState::from_history(x.topRows(6), u, theta);
  const auto m = predictive_step(state, theta);
  CHECK(conditional_future_log_density(x.topRows(6), x.middleRows(6, 1), u, theta) ==
        doctest::Approx(oracle::gaussian_log_pdf(x(6, 0), m.mean[0], m.variance[0])).epsilon(1e-12));

  const double full = trajectory_log_prior(x, u, theta);
  for (std::size_t t = 1; t <= T; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double prefix = trajectory_log_prior(x.topRows(ti), u, theta);
    const double future = conditional_future_log_density(x.topRows(ti), x.bottomRows(x.rows() - ti), u, theta);
    CHECK(std::abs(prefix + future - full) < 1e-9 * std::max(1.0, std::abs(full)));
  }
  CHECK_THROWS_AS(conditional_future_log_density(Trajectory(0, 1), x, u, theta), InputError);
}

TEST_CASE("log-Q gradient closed form") {
  const HyperParams theta = se_theta(1.0, 1.0, 1.0, false);
  const auto vg = trajectory_log_prior_grad(column({0.0, 0.0}), kNoInputs, theta);
  const auto layout = param_layout(theta);
  CHECK(vg.grad[static_cast<Eigen::Index>(layout.noise_begin)] == doctest::Approx(-0.25).epsilon(1e-14));
  // Oracle: finite difference in log q.
  const auto f = [&](const Eigen::VectorXd& p) {
    return trajectory_log_prior(column({0.0, 0.0}), kNoInputs, with_params(theta, p));
  };
  CHECK(oracle::central_diff(f, pack(theta), static_cast<Eigen::Index>(layout.noise_begin), 1e-6) ==
        doctest::Approx(-0.25).epsilon(1e-8));
}

TEST_CASE("hyperparameter that does not enter the model has zero gradient") {
  const HyperParams theta = testutil::make_theta(Kernel::squared_exponential({1.0, 0.7}, 1.3), 0.4,
                                                 ObsModel::linear_gaussian({1.0}, 1.0));
  std::mt19937_64 rng(2);
  const Trajectory x = testutil::random_walk(10, rng);
  const InputSeries u = InputSeries::Zero(10, 1);
  const auto vg = trajectory_log_prior_grad(x, u, theta);
  CHECK(vg.grad[1] == 0.0);
  CHECK(vg.grad[0] != 0.0);
  // Observation entries are left to the observation model.
  CHECK(vg.grad.tail(static_cast<Eigen::Index>(param_layout(theta).obs_count)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("prior gradients match finite differences") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const int kind = rep % 4;
    const std::size_t nu = rep % 3 == 0 ? 0 : 1;
    const HyperParams theta = testutil::random_theta(kind, nu, rng);
    const std::size_t n = 3 + rng() % 15;
    const Trajectory x = testutil::random_walk(n, rng);
    const InputSeries u = nu == 0 ? InputSeries(0, 0) : testutil::random_inputs(n, nu, rng);
    const auto vg = trajectory_log_prior_grad(x, u, theta);
    const auto f = [&](const Eigen::VectorXd& p) {
      return trajectory_log_prior(x, u, with_params(theta, p));
    };
    const Eigen::VectorXd p0 = pack(theta);
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
      CHECK(oracle::rel_err(vg.grad[i], oracle::central_diff(f, p0, i, 1e-5)) < 1e-5);
    }
  }
}

TEST_CASE("predictive variance never drops below the process noise") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 30; ++rep) {
    const HyperParams theta = testutil::random_theta(rep % 4, 1, rng);
    const Trajectory x = testutil::random_walk(25, rng);
    const InputSeries u = testutil::random_inputs(25, 1, rng);
    GpPredictiveState s(1, 1);
    for (Eigen::Index t = 0; t < 25; ++t) {
      extend_in_place(s, std::vector<double>{x(t, 0)}, std::vector<double>{u(t, 0)}, theta);
      CHECK(predictive_step(s, theta).variance[0] >= theta.noise.min_variance() - 1e-10);
    }
  }
}
