#include "gpssm/identify.hpp"

#include "gpssm/bfgs.hpp"
#include "gpssm/pgas.hpp"

#include <fmt/format.h>
#include <omp.h>

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace gpssm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double column_std(const Eigen::MatrixXd& m, Eigen::Index c) {
  const Eigen::VectorXd col = m.col(c);
  const double mean = col.mean();
  const double var = (col.array() - mean).square().sum() / static_cast<double>(col.size());
  return std::sqrt(var);
}

// A usable positive scale: zero or non-finite spreads fall back to one.
double usable(double s) { return std::isfinite(s) && s > 0.0 ? s : 1.0; }

Kernel build_kernel(const KernelConfig& k, std::size_t state_dim, std::size_t input_dim,
                    const std::vector<double>& scales) {
  const std::size_t dim = state_dim + input_dim;
  std::vector<double> ls(dim);
  for (std::size_t d = 0; d < dim; ++d) ls[d] = k.lengthscale ? *k.lengthscale : scales[d];
  switch (k.family) {
    case KernelChoice::linear:
      return Kernel::linear(std::vector<double>(dim, k.linear_variance));
    case KernelChoice::se:
      return Kernel::squared_exponential(ls, k.signal_variance);
    case KernelChoice::matern: {
      double rms = 0.0;
      for (double l : ls) rms += l * l;
      return Kernel::matern(dim, std::sqrt(rms / static_cast<double>(dim)), k.signal_variance,
                            k.matern_order);
    }
    case KernelChoice::matern_se: {
      double rms = 0.0;
      for (std::size_t d = 0; d < state_dim; ++d) rms += ls[d] * ls[d];
      Kernel m = Kernel::matern(state_dim, std::sqrt(rms / static_cast<double>(state_dim)),
                                k.signal_variance, k.matern_order);
      if (input_dim == 0) return m;
      return Kernel::product(
          {m, Kernel::squared_exponential(std::vector<double>(ls.begin() + static_cast<std::ptrdiff_t>(state_dim), ls.end()),
                                          std::nullopt)});
    }
  }
  throw ConfigError("config: unsupported kernel family");
}

// Signs for the magnitudes a_t that best fit x_{t+1} = alpha x_t + beta u_t
// (least squares over the sign sequence, solved exactly by dynamic
// programming). Ties prefer the positive sign.
std::vector<double> best_signs(const std::vector<double>& mag, const InputSeries& u,
                               double alpha, double beta) {
  const std::size_t n = mag.size();
  const std::array<double, 2> sign{1.0, -1.0};
  std::array<double, 2> cost{0.0, 0.0};
  std::vector<std::array<int, 2>> back(n);
  for (std::size_t t = 1; t < n; ++t) {
    const double drive = u.cols() > 0 ? beta * u(static_cast<Eigen::Index>(t - 1), 0) : 0.0;
    std::array<double, 2> next{};
    for (int j = 0; j < 2; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 2; ++i) {
        const double e = sign[j] * mag[t] - alpha * sign[i] * mag[t - 1] - drive;
        if (cost[i] + e * e < best) {
          best = cost[i] + e * e;
          back[t][j] = i;
        }
      }
      next[j] = best;
    }
    cost = next;
  }
  std::vector<double> out(n);
  int s = cost[1] < cost[0] ? 1 : 0;
  for (std::size_t t = n; t-- > 0;) {
    out[t] = sign[s] * mag[t];
    if (t > 0) s = back[t][s];
  }
  return out;
}

}  // namespace

Trajectory state_proxy(const Dataset& data, const ObsConfig& obs) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.length());
  Trajectory x(n, 1);
  if (obs.family == ObsFamily::linear_gaussian) {
    x.col(0) = data.y / obs.coefficient;
    return x;
  }
  // y = d x^2 fixes only |x|. Alternate between choosing signs for a linear
  // autoregression with input and refitting it; the overall sign is chosen
  // so the input gain is positive, which removes the x -> -x mirror model.
  std::vector<double> mag(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    mag[static_cast<std::size_t>(t)] = std::sqrt(std::max(data.y[t], 0.0) / obs.coefficient);
  }
  const bool has_u = data.u.cols() > 0;
  double alpha = 0.5, beta = 1.0;
  std::vector<double> signed_mag;
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<double> next = best_signs(mag, data.u, alpha, beta);
    Eigen::MatrixXd design(n - 1, has_u ? 2 : 1);
    Eigen::VectorXd target(n - 1);
    for (Eigen::Index t = 0; t + 1 < n; ++t) {
      design(t, 0) = next[static_cast<std::size_t>(t)];
      if (has_u) design(t, 1) = data.u(t, 0);
      target[t] = next[static_cast<std::size_t>(t + 1)];
    }
    const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(target);
    alpha = coef[0];
    beta = has_u ? coef[1] : 0.0;
    if (beta < 0.0) {
      for (double& v : next) v = -v;
      beta = -beta;
    }
    if (!std::isfinite(alpha) || !std::isfinite(beta)) break;
    const bool stable = next == signed_mag;
    signed_mag = std::move(next);
    if (stable) break;
  }
  for (Eigen::Index t = 0; t < n; ++t) x(t, 0) = signed_mag[static_cast<std::size_t>(t)];
  return x;
}

HyperParams build_theta(const IdentifyConfig& cfg, std::size_t input_dim,
                        const std::vector<double>& scales, double proxy_variance) {
  constexpr std::size_t state_dim = 1;
  if (scales.size() != state_dim + input_dim) {
    throw InputError("build_theta: one scale per state and input dimension required");
  }
  const double fallback = 0.1 * usable(proxy_variance);
  const double q = cfg.run.q ? *cfg.run.q : fallback;
  const double r = cfg.obs.r ? *cfg.obs.r : fallback;
  HyperParams theta{
      build_kernel(cfg.kernel, state_dim, input_dim, scales),
      cfg.mean.family == MeanFamily::zero
          ? MeanFunction::zero(state_dim + input_dim, state_dim)
          : MeanFunction::constant(state_dim + input_dim, {cfg.mean.value}),
      ProcessNoise::from_variances({q}),
      cfg.obs.family == ObsFamily::linear_gaussian
          ? ObsModel::linear_gaussian({cfg.obs.coefficient}, r, cfg.obs.learn_coefficient,
                                      cfg.obs.learn_r)
          : ObsModel::quadratic_gaussian(cfg.obs.coefficient, r, cfg.obs.learn_coefficient,
                                         cfg.obs.learn_r),
      InitialStatePrior{cfg.run.initial_state_std, cfg.run.include_initial_state}};
  theta.validate();
  return theta;
}

InitialGuess initial_guess(const Dataset& data, const IdentifyConfig& cfg) {
  Trajectory proxy = state_proxy(data, cfg.obs);
  std::vector<double> scales{usable(column_std(proxy, 0))};
  for (Eigen::Index c = 0; c < data.u.cols(); ++c) scales.push_back(usable(column_std(data.u, c)));
  const double sd = column_std(proxy, 0);
  HyperParams theta = build_theta(cfg, data.input_dim(), scales, sd * sd);
  return {std::move(theta), std::move(proxy)};
}

RunArtifacts identify(const Dataset& data, const IdentifyConfig& cfg,
                      const ProgressCallback& progress) {
  cfg.validate();
  data.validate();
  if (cfg.run.threads > 0) omp_set_num_threads(static_cast<int>(cfg.run.threads));
  const auto start = Clock::now();

  InitialGuess init = initial_guess(data, cfg);
  HyperParams theta = std::move(init.theta);
  Trajectory x = std::move(init.trajectory);
  WeightedTrajectorySet set(cfg.prune_epsilon);
  std::optional<Eigen::MatrixXd> inverse_hessian;
  std::mt19937_64 rng(cfg.run.seed);
  const Execution exec = cfg.pgas.execution;

  std::vector<IterationRecord> trace;
  trace.reserve(cfg.run.iterations);

  for (std::size_t k = 1; k <= cfg.run.iterations; ++k) {
    IterationRecord rec;
    rec.k = k;
    try {
      auto t0 = Clock::now();
      x = pgas_sweep(data, x, theta, cfg.pgas, rng);
      rec.sweep_seconds = seconds_since(t0);

      rec.gamma = step_size(cfg.schedule, k);
      set.add(x, rec.gamma, k);
      rec.set_size = set.size();
      rec.dropped_mass = set.last_dropped_mass();

      t0 = Clock::now();
      const Objective objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
        try {
          const ValueGrad vg = q_value_grad(set, data, with_params(theta, v), exec);
          g = vg.grad;
          return vg.value;
        } catch (const NumericalDegeneracy&) {
        } catch (const InputError&) {
        }
        g = Eigen::VectorXd::Constant(v.size(), std::numeric_limits<double>::quiet_NaN());
        return -std::numeric_limits<double>::infinity();
      };
      const MaximizeResult res = maximize(objective, pack(theta), cfg.optimizer, inverse_hessian);
      rec.mstep_seconds = seconds_since(t0);
      if (cfg.optimizer.warm_start) inverse_hessian = res.inverse_hessian;
      theta = with_params(theta, res.theta);

      rec.theta = natural_values(theta);
      rec.q_hat = res.value;
      rec.q_before = res.initial_value;
      rec.bfgs_iterations = res.iterations;
      rec.bfgs_evaluations = res.evaluations;
      rec.converged = res.converged;
      rec.no_progress = res.no_progress;
      rec.armijo_violations = res.armijo_violations;
    } catch (const NumericalDegeneracy& e) {
      throw IdentifyAborted(fmt::format("identify: iteration {}: {}", k, e.what()), k,
                            e.jitter());
    } catch (const InputError& e) {
      // The M-step objective was not finite at theta_{k-1}.
      throw IdentifyAborted(fmt::format("identify: iteration {}: {}", k, e.what()), k, 0.0);
    }
    trace.push_back(rec);
    if (progress) progress(trace.back());
  }

  std::vector<std::string> names = natural_names(theta);
  return RunArtifacts{.config = cfg,
                      .theta = std::move(theta),
                      .names = std::move(names),
                      .trace = std::move(trace),
                      .final_set = std::move(set),
                      .final_trajectory = std::move(x),
                      .inputs = data.u,
                      .seed = cfg.run.seed,
                      .seconds = seconds_since(start)};
}

}  // namespace gpssm
