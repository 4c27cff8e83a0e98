#include "gpssm/errors.hpp"
#include "gpssm/saem.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace gpssm;

namespace {

struct Problem {
  Dataset data;
  HyperParams theta;
  std::vector<Trajectory> trajectories;
};

Problem random_problem(int kind, std::size_t T, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Problem p{Dataset{}, testutil::random_theta(kind, 1, rng), {}};
  p.data.u = testutil::random_inputs(T + 1, 1, rng);
  p.data.y = Eigen::VectorXd::Random(static_cast<Eigen::Index>(T + 1)) * 2.0;
  for (std::size_t j = 0; j < count; ++j) p.trajectories.push_back(testutil::random_walk(T + 1, rng));
  return p;
}

double obs_sum(const Dataset& data, const Trajectory& x, const HyperParams& theta) {
  double s = 0.0;
  for (Eigen::Index t = 0; t < x.rows(); ++t) s += theta.obs.log_lik(data.y[t], std::vector<double>{x(t, 0)});
  return s;
}

}  // namespace

TEST_CASE("step sizes") {
  StepSchedule s;
  CHECK(step_size(s, 1) == 1.0);
  CHECK(step_size(s, 50) == 1.0);
  // k = 51 is (51 - 50)^-p = 1, the first post-burn-in step.
  CHECK(step_size(s, 51) == 1.0);
  CHECK(step_size(s, 52) == doctest::Approx(std::pow(2.0, -0.7)).epsilon(1e-15));
  CHECK(step_size(StepSchedule{1.0, 0}, 1) == 1.0);
  CHECK(step_size(StepSchedule{1.0, 0}, 2) == 0.5);
  CHECK_THROWS_AS(step_size(s, 0), InputError);
  CHECK_THROWS_AS(StepSchedule({0.5, 10}).validate(), InputError);
  CHECK_NOTHROW(StepSchedule({1.0, 0}).validate());
}

TEST_CASE("weighted set update arithmetic") {
  Trajectory a = Trajectory::Constant(3, 1, 1.0), b = Trajectory::Constant(3, 1, 2.0);
  WeightedTrajectorySet set;
  set.add(a, 1.0);
  set.add(b, 1.0);
  REQUIRE(set.size() == 1);
  CHECK(set.entries()[0].weight == 1.0);
  CHECK(set.entries()[0].trajectory == b);

  const auto two = update(set, a, 0.5);
  REQUIRE(two.size() == 2);
  CHECK(two.entries()[0].weight == 0.5);
  CHECK(two.entries()[1].weight == 0.5);
  CHECK_THROWS_AS(set.add(a, 0.0), InputError);
  CHECK_THROWS_AS(set.add(a, 1.5), InputError);
}

TEST_CASE("weights follow the direct recursion before pruning") {
  // gamma_k = 1/k with pruning disabled: entry j has weight
  // gamma_j prod_{l>j} (1 - gamma_l) = 1/K for all j after K updates.
  const std::size_t K = 200;
  WeightedTrajectorySet unpruned(0.0), pruned(1e-6);
  std::vector<double> direct;
  for (std::size_t k = 1; k <= K; ++k) {
    const double g = 1.0 / static_cast<double>(k);
    unpruned.add(Trajectory::Constant(2, 1, static_cast<double>(k)), g, k);
    pruned.add(Trajectory::Constant(2, 1, static_cast<double>(k)), g, k);
    for (double& w : direct) w *= 1.0 - g;
    direct.push_back(g);
  }
  REQUIRE(unpruned.size() == K);
  double total = 0.0;
  for (std::size_t j = 0; j < K; ++j) {
    CHECK(std::abs(unpruned.entries()[j].weight - direct[j]) < 1e-12);
    CHECK(unpruned.entries()[j].weight > 0.0);
    total += unpruned.entries()[j].weight;
  }
  CHECK(std::abs(total - 1.0) < 1e-10);
  // 1/200 is far above 1e-6, so pruning drops nothing here.
  CHECK(pruned.size() == K);
  CHECK(pruned.last_dropped_mass() == 0.0);

  // Schedule with burn-in: geometric decay, then pruning of old entries.
  // Oracle: the same recursion on a plain map of iteration -> weight.
  WeightedTrajectorySet set(1e-6);
  std::map<std::size_t, double> ref;
  const StepSchedule sched{0.7, 5};
  bool pruned_any = false;
  for (std::size_t k = 1; k <= 300; ++k) {
    const double g = step_size(sched, k);
    set.add(Trajectory::Constant(2, 1, 0.0), g, k);
    for (auto& kv : ref) kv.second *= 1.0 - g;
    ref[k] = g;
    double dropped = 0.0;
    for (auto it = ref.begin(); it != ref.end();) {
      if (it->first != k && it->second < 1e-6) {
        dropped += it->second;
        it = ref.erase(it);
      } else {
        ++it;
      }
    }
    if (dropped > 0.0 || g == 1.0) {
      double s = 0.0;
      for (const auto& kv : ref) s += kv.second;
      for (auto& kv : ref) kv.second /= s;
    }
    pruned_any = pruned_any || dropped > 0.0;
    REQUIRE(set.size() == ref.size());
    double s = 0.0;
    for (const auto& e : set.entries()) {
      CHECK(std::abs(e.weight - ref.at(e.iteration)) < 1e-12);
      CHECK(e.weight >= 1e-6 * 0.999);
      s += e.weight;
    }
    CHECK(std::abs(s - 1.0) < 1e-10);
  }
  CHECK(pruned_any);
}

TEST_CASE("pruning drops small weights and renormalizes") {
  WeightedTrajectorySet set(0.05);
  set.add(Trajectory::Constant(2, 1, 1.0), 1.0, 1);
  for (std::size_t k = 2; k <= 6; ++k) set.add(Trajectory::Constant(2, 1, double(k)), 0.5, k);
  // Weights before pruning: 1/32, 1/32, 1/16, 1/8, 1/4, 1/2.
  double s = 0.0;
  for (const auto& e : set.entries()) {
    CHECK(e.weight >= 0.05);
    s += e.weight;
  }
  CHECK(std::abs(s - 1.0) < 1e-14);
  CHECK(set.entries().back().iteration == 6);
}

TEST_CASE("q value special cases") {
  const Problem p = random_problem(1, 12, 3, 2);
  WeightedTrajectorySet one;
  one.add(p.trajectories[0], 1.0);
  const double cd = trajectory_log_prior(p.trajectories[0], p.data.u, p.theta) +
                    obs_sum(p.data, p.trajectories[0], p.theta);
  CHECK(q_value(one, p.data, p.theta) == doctest::Approx(cd).epsilon(1e-12));
  CHECK(complete_data_log_lik_value(p.data, p.trajectories[0], p.theta) == doctest::Approx(cd).epsilon(1e-13));

  const auto twin = update(one, p.trajectories[0], 0.5);
  CHECK(q_value(twin, p.data, p.theta) == doctest::Approx(cd).epsilon(1e-12));
  CHECK_THROWS_AS(q_value(WeightedTrajectorySet{}, p.data, p.theta), InputError);
}

TEST_CASE("q value is linear in the weights and parallel equals serial") {
  const Problem p = random_problem(3, 15, 6, 5);
  WeightedTrajectorySet set(0.0);
  const std::vector<double> gammas{1.0, 0.6, 0.3, 0.5, 0.2, 0.45};
  for (std::size_t j = 0; j < p.trajectories.size(); ++j) set.add(p.trajectories[j], gammas[j]);
  double expect = 0.0;
  for (const auto& e : set.entries()) expect += e.weight * complete_data_log_lik(p.data, e.trajectory, p.theta).value;
  const ValueGrad par = q_value_grad(set, p.data, p.theta, Execution::parallel);
  const ValueGrad ser = q_value_grad(set, p.data, p.theta, Execution::serial);
  const ValueGrad ref = q_value_grad_reference(set, p.data, p.theta);
  CHECK(std::abs(par.value - expect) <= 1e-12 * std::abs(expect));
  CHECK(par.value == ser.value);
  CHECK(par.grad == ser.grad);
  CHECK(std::abs(ref.value - par.value) <= 1e-10 * std::abs(expect));
  CHECK((ref.grad - par.grad).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + par.grad.cwiseAbs().maxCoeff()));
}

TEST_CASE("pruning changes q by at most dropped mass times the largest term") {
  const Problem p = random_problem(2, 10, 8, 9);
  WeightedTrajectorySet full(0.0), pruned(0.02);
  for (std::size_t j = 0; j < p.trajectories.size(); ++j) {
    const double g = j == 0 ? 1.0 : 0.4;
    full.add(p.trajectories[j], g);
    pruned.add(p.trajectories[j], g);
  }
  double dropped = 0.0, max_term = 0.0;
  for (const auto& e : full.entries()) {
    const double term = complete_data_log_lik_value(p.data, e.trajectory, p.theta);
    max_term = std::max(max_term, std::abs(term));
    if (e.weight < 0.02) dropped += e.weight;
  }
  REQUIRE(dropped > 0.0);
  CHECK(pruned.size() < full.size());
  const double diff = std::abs(q_value(full, p.data, p.theta) - q_value(pruned, p.data, p.theta));
  CHECK(diff <= 2.0 * dropped * max_term);
}

TEST_CASE("q gradient matches finite differences") {
  for (int kind = 0; kind < 4; ++kind) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const Problem p = random_problem(kind, 10, 5, 100 + seed);
      WeightedTrajectorySet set(0.0);
      for (std::size_t j = 0; j < 5; ++j) set.add(p.trajectories[j], j == 0 ? 1.0 : 0.35);
      const ValueGrad vg = q_value_grad(set, p.data, p.theta);
      const auto f = [&](const Eigen::VectorXd& v) { return q_value(set, p.data, with_params(p.theta, v)); };
      const Eigen::VectorXd p0 = pack(p.theta);
      for (Eigen::Index i = 0; i < p0.size(); ++i) {
        CHECK(oracle::rel_err(vg.grad[i], oracle::central_diff(f, p0, i, 1e-5)) < 1e-5);
      }
    }
  }
}
