#include "gpssm/simulate.hpp"

#include "gpssm/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace gpssm {

namespace {

void check_args(std::size_t T, double noise_scale) {
  if (T < 1) throw InputError("simulate: T must be at least 1");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw InputError("simulate: noise_scale must be finite and non-negative");
  }
}

template <class Transition, class Measure, class Input>
Dataset run(std::size_t T, std::uint64_t seed, double q, double r, Transition f,
            Measure g, Input input) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(T + 1);
  Dataset data;
  data.seed = seed;
  data.u.resize(n, 1);
  data.y.resize(n);
  Trajectory x(n, 1);
  const double sq = std::sqrt(q), sr = std::sqrt(r);
  x(0, 0) = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    data.u(t, 0) = input(static_cast<std::size_t>(t));
    if (t + 1 < n) x(t + 1, 0) = f(x(t, 0), data.u(t, 0)) + sq * normal(rng);
    data.y[t] = g(x(t, 0)) + sr * normal(rng);
  }
  data.x_true = std::move(x);
  return data;
}

}  // namespace

double InputSignal::at(std::size_t t) const {
  if (kind == Kind::impulse) return t == 0 ? amplitude : 0.0;
  return amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period);
}

double linear_transition(double x, double u) {
  return LinearSystem::a * x + LinearSystem::b * u;
}

double nonlinear_transition(double x, double u) {
  using S = NonlinearSystem;
  return S::a * x + S::b * x / (1.0 + x * x) + S::c * u;
}

Dataset simulate_linear(std::size_t T, std::uint64_t seed, double noise_scale,
                        const InputSignal& input) {
  check_args(T, noise_scale);
  if (input.kind == InputSignal::Kind::periodic && !(input.period > 0.0)) {
    throw InputError("simulate: input period must be positive");
  }
  return run(
      T, seed, noise_scale * LinearSystem::q, noise_scale * LinearSystem::r,
      linear_transition, [](double x) { return LinearSystem::c * x; },
      [&](std::size_t t) { return input.at(t); });
}

Dataset simulate_nonlinear(std::size_t T, std::uint64_t seed, double noise_scale) {
  check_args(T, noise_scale);
  return run(
      T, seed, noise_scale * NonlinearSystem::q, noise_scale * NonlinearSystem::r,
      nonlinear_transition, [](double x) { return NonlinearSystem::d * x * x; },
      [](std::size_t t) { return std::cos(1.2 * static_cast<double>(t + 1)); });
}

}  // namespace gpssm
