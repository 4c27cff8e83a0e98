#include "gpssm/diagnostics.hpp"

#include "gpssm/bfgs.hpp"
#include "gpssm/gp_prior.hpp"
#include "gpssm/hyperparams.hpp"
#include "gpssm/kernels.hpp"
#include "gpssm/pgas.hpp"
#include "gpssm/saem.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace gpssm {

namespace {

constexpr double kGradTol = 1e-5;
constexpr double kFdStep = 1e-5;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Kinds: 0 linear, 1 SE, 2 Matern over the joint point (random order),
// 3 Matern(x) x SE(u).
Kernel random_kernel(int kind, std::mt19937_64& rng) {
  const std::vector<MaternOrder> orders{MaternOrder::one_half, MaternOrder::three_halves,
                                        MaternOrder::five_halves};
  switch (kind) {
    case 0:
      return Kernel::linear({uniform(rng, 0.3, 2.0), uniform(rng, 0.3, 2.0)});
    case 1:
      return Kernel::squared_exponential({uniform(rng, 0.5, 3.0), uniform(rng, 0.5, 3.0)},
                                         uniform(rng, 0.5, 3.0));
    case 2:
      return Kernel::matern(2, uniform(rng, 0.5, 3.0), uniform(rng, 0.5, 3.0), orders[rng() % 3]);
    default:
      return Kernel::product({Kernel::matern(1, uniform(rng, 0.5, 3.0), uniform(rng, 0.5, 3.0),
                                             orders[rng() % 3]),
                              Kernel::squared_exponential({uniform(rng, 0.5, 3.0)}, std::nullopt)});
  }
}

HyperParams random_theta(int kind, std::mt19937_64& rng) {
  const bool quadratic = rng() % 2 == 1;
  ObsModel obs = quadratic ? ObsModel::quadratic_gaussian(uniform(rng, 0.05, 0.5),
                                                          uniform(rng, 0.3, 2.0), true, true)
                           : ObsModel::linear_gaussian({uniform(rng, 0.5, 2.0)},
                                                       uniform(rng, 0.3, 2.0), true, true);
  return HyperParams{random_kernel(kind, rng), MeanFunction::constant(2, {uniform(rng, -0.5, 0.5)}),
                     ProcessNoise::from_variances({uniform(rng, 0.2, 1.5)}), std::move(obs),
                     InitialStatePrior{5.0, rng() % 2 == 0}};
}

Trajectory random_walk(std::size_t rows, std::mt19937_64& rng) {
  Trajectory x(static_cast<Eigen::Index>(rows), 1);
  std::normal_distribution<double> n01;
  double v = 0.0;
  for (Eigen::Index t = 0; t < x.rows(); ++t) x(t, 0) = v = 0.7 * v + n01(rng);
  return x;
}

InputSeries random_inputs(std::size_t rows, std::mt19937_64& rng) {
  InputSeries u(static_cast<Eigen::Index>(rows), 1);
  std::normal_distribution<double> n01;
  for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, 0) = n01(rng);
  return u;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double max_fd_error(const std::function<double(const Eigen::VectorXd&)>& f,
                    const Eigen::VectorXd& p0, const Eigen::VectorXd& grad) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    Eigen::VectorXd p = p0;
    p[i] = p0[i] + kFdStep;
    const double fp = f(p);
    p[i] = p0[i] - kFdStep;
    const double fm = f(p);
    worst = std::max(worst, rel_err(grad[i], (fp - fm) / (2.0 * kFdStep)));
  }
  return worst;
}

// Joint Gaussian log-density of x_{1:T} under (m, K + qI) plus the x_0 term.
double dense_log_prior(const Trajectory& x, const InputSeries& u, const HyperParams& theta) {
  const Eigen::Index T = x.rows() - 1;
  Eigen::MatrixXd K = kernel_gram(theta.kernel, make_points(x, u, T));
  K.diagonal().array() += theta.noise.variance(0);
  const Eigen::VectorXd r = x.col(0).tail(T).array() - theta.mean.component(0);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  double value = -0.5 * (static_cast<double>(T) * std::log(2.0 * std::numbers::pi) +
                         ldlt.vectorD().array().log().sum() + r.dot(ldlt.solve(r)));
  if (theta.initial.included) value += theta.initial.log_density(std::span<const double>(&x(0, 0), 1));
  return value;
}

template <class Body>
CheckResult run_check(const std::string& name, double threshold, std::size_t cases, Body body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r{name, true, 0.0, threshold, cases, 0.0};
  for (std::size_t i = 0; i < cases; ++i) {
    double err = 0.0;
    try {
      err = body(i);
    } catch (const std::exception&) {
      err = std::numeric_limits<double>::infinity();
    }
    if (!(err <= r.worst)) r.worst = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
  }
  r.passed = r.worst <= threshold;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

std::vector<CheckResult> run_property_suite(std::uint64_t seed, std::size_t configurations) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  const std::size_t n = std::max<std::size_t>(configurations, 1);

  out.push_back(run_check("kernel_grad", kGradTol, n, [&](std::size_t i) {
    Kernel k = random_kernel(static_cast<int>(i % 4), rng);
    const std::vector<double> a{uniform(rng, -2, 2), uniform(rng, -2, 2)};
    const std::vector<double> b{uniform(rng, -2, 2), uniform(rng, -2, 2)};
    const auto lp = k.log_params();
    const auto g = kernel_grad(k, a, b);
    const Eigen::VectorXd p0 = Eigen::Map<const Eigen::VectorXd>(lp.data(), static_cast<Eigen::Index>(lp.size()));
    return max_fd_error(
        [&](const Eigen::VectorXd& p) {
          Kernel kk = k;
          kk.set_log_params(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
          return kk(a, b);
        },
        p0, Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())));
  }));

  out.push_back(run_check("trajectory_log_prior_grad", kGradTol, n, [&](std::size_t i) {
    const HyperParams theta = random_theta(static_cast<int>(i % 4), rng);
    const std::size_t T = 3 + rng() % 10;
    const Trajectory x = random_walk(T + 1, rng);
    const InputSeries u = random_inputs(T + 1, rng);
    const ValueGrad vg = trajectory_log_prior_grad(x, u, theta);
    return max_fd_error(
        [&](const Eigen::VectorXd& p) { return trajectory_log_prior(x, u, with_params(theta, p)); },
        pack(theta), vg.grad);
  }));

  out.push_back(run_check("obs_log_lik_grad", kGradTol, n, [&](std::size_t i) {
    const HyperParams theta = random_theta(static_cast<int>(i % 4), rng);
    const double x = uniform(rng, -3, 3);
    const double y = theta.obs.mean(std::span<const double>(&x, 1)) + uniform(rng, -2, 2);
    const auto p = theta.obs.learnable();
    std::vector<double> g(p.size());
    theta.obs.log_lik_grad(y, std::span<const double>(&x, 1), g);
    return max_fd_error(
        [&](const Eigen::VectorXd& v) {
          ObsModel o = theta.obs;
          o.set_learnable(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
          return o.log_lik(y, std::span<const double>(&x, 1));
        },
        Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())),
        Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())));
  }));

  out.push_back(run_check("q_grad", kGradTol, n, [&](std::size_t i) {
    const HyperParams theta = random_theta(static_cast<int>(i % 4), rng);
    const std::size_t T = 4 + rng() % 6;
    Dataset data;
    data.u = random_inputs(T + 1, rng);
    data.y = Eigen::VectorXd::Random(static_cast<Eigen::Index>(T + 1));
    WeightedTrajectorySet set(0.0);
    for (std::size_t j = 0; j < 3; ++j) set.add(random_walk(T + 1, rng), j == 0 ? 1.0 : 0.4);
    const ValueGrad vg = q_value_grad(set, data, theta);
    return max_fd_error(
        [&](const Eigen::VectorXd& p) { return q_value(set, data, with_params(theta, p)); },
        pack(theta), vg.grad);
  }));

  out.push_back(run_check("sequential_vs_dense_prior", 1e-8, n, [&](std::size_t i) {
    const HyperParams theta = random_theta(1 + static_cast<int>(i % 3), rng);
    const std::size_t T = 1 + rng() % 30;
    const Trajectory x = random_walk(T + 1, rng);
    const InputSeries u = random_inputs(T + 1, rng);
    const double dense = dense_log_prior(x, u, theta);
    return std::abs(trajectory_log_prior(x, u, theta) - dense) / std::max(1.0, std::abs(dense));
  }));

  out.push_back(run_check("incremental_vs_scratch", 1e-9, n, [&](std::size_t i) {
    const HyperParams theta = random_theta(static_cast<int>(i % 4), rng);
    const std::size_t T = 2 + rng() % 20;
    const Trajectory x = random_walk(T + 1, rng);
    const InputSeries u = random_inputs(T + 1, rng);
    GpPredictiveState inc(1, 1);
    for (Eigen::Index t = 0; t <= static_cast<Eigen::Index>(T); ++t) {
      extend_in_place(inc, std::span<const double>(&x(t, 0), 1), std::span<const double>(&u(t, 0), 1), theta);
    }
    const GpPredictiveState scratch = GpPredictiveState::from_history(x, u, theta);
    const PredictiveMoments a = predictive_step(inc, theta), b = predictive_step(scratch, theta);
    return std::max({rel_err(a.mean[0], b.mean[0]), rel_err(a.variance[0], b.variance[0]),
                     rel_err(inc.log_density(), scratch.log_density())});
  }));

  const std::size_t small = std::max<std::size_t>(n / 10, 1);
  out.push_back(run_check("blocked_vs_reference_ancestor_weights", 1e-9, small, [&](std::size_t i) {
    const HyperParams theta = random_theta(static_cast<int>(i % 4), rng);
    const std::size_t T = 6 + rng() % 6;
    Dataset data;
    data.u = random_inputs(T + 1, rng);
    data.y = Eigen::VectorXd::Random(static_cast<Eigen::Index>(T + 1));
    const Trajectory ref = random_walk(T + 1, rng);
    PgasConfig cfg;
    cfg.particles = 5;
    cfg.truncation = rng() % 2 == 0 ? 0 : 3;
    ParticleSystem sys(data, ref, theta, cfg);
    sys.initialize(rng());
    std::mt19937_64 step_rng(rng());
    double worst = 0.0;
    while (sys.time() < T) {
      const auto a = sys.ancestor_log_weights();
      const auto b = sys.ancestor_log_weights_reference();
      for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, rel_err(a[j], b[j]));
      sys.advance(rng(), step_rng);
    }
    return worst;
  }));

  out.push_back(run_check("serial_vs_parallel_sweep", 0.0, small, [&](std::size_t i) {
    const HyperParams theta = random_theta(static_cast<int>(i % 4), rng);
    const std::size_t T = 10;
    Dataset data;
    data.u = random_inputs(T + 1, rng);
    data.y = Eigen::VectorXd::Random(static_cast<Eigen::Index>(T + 1));
    const Trajectory ref = random_walk(T + 1, rng);
    PgasConfig cfg;
    cfg.particles = 8;
    const std::uint64_t s = rng();
    std::mt19937_64 r1(s), r2(s);
    cfg.execution = Execution::serial;
    const Trajectory a = pgas_sweep(data, ref, theta, cfg, r1);
    cfg.execution = Execution::parallel;
    const Trajectory b = pgas_sweep(data, ref, theta, cfg, r2);
    return (a - b).cwiseAbs().maxCoeff();
  }));
  return out;
}

}  // namespace gpssm
