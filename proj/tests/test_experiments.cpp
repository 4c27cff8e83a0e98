#include "gpssm/config.hpp"
#include "gpssm/errors.hpp"
#include "gpssm/identify.hpp"
#include "gpssm/io.hpp"
#include "gpssm/predict.hpp"
#include "gpssm/simulate.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace gpssm;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gpssm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

IdentifyConfig small_config(std::size_t iterations) {
  IdentifyConfig cfg;
  cfg.kernel.family = KernelChoice::se;
  cfg.pgas.particles = 6;
  cfg.schedule.burn_in = 2;
  cfg.run.iterations = iterations;
  cfg.run.seed = 5;
  return cfg;
}

RunArtifacts artifacts_for(const HyperParams& theta, const Trajectory& x, const InputSeries& u) {
  WeightedTrajectorySet set;
  set.add(x, 1.0, 1);
  return RunArtifacts{.config = IdentifyConfig{},
                      .theta = theta,
                      .names = natural_names(theta),
                      .trace = {},
                      .final_set = set,
                      .final_trajectory = x,
                      .inputs = u,
                      .seed = 0,
                      .seconds = 0.0};
}

HyperParams se_theta(double q, double sf2, double mean = 0.0) {
  return testutil::make_theta(Kernel::squared_exponential({1.0, 1.0}, sf2), q,
                              ObsModel::linear_gaussian({1.0}, 1.0), mean);
}

}  // namespace

TEST_CASE("linear simulator examples") {
  const Dataset zero = simulate_linear(5, 3, 0.0);
  CHECK(zero.length() == 6);
  CHECK((*zero.x_true)(0, 0) == 0.0);
  CHECK((*zero.x_true)(1, 0) == 0.0);
  CHECK(zero.y[0] == 0.0);
  // u_t = sin(2 pi t / 10) drives x_2 = 3 sin(pi / 5).
  CHECK((*zero.x_true)(2, 0) == doctest::Approx(3.0 * std::sin(std::numbers::pi / 5.0)).epsilon(1e-15));

  InputSignal impulse;
  impulse.kind = InputSignal::Kind::impulse;
  const Dataset imp = simulate_linear(4, 3, 0.0, impulse);
  CHECK((*imp.x_true)(1, 0) == 3.0);
  CHECK(imp.y[1] == 6.0);
  CHECK((*imp.x_true)(2, 0) == doctest::Approx(2.4).epsilon(1e-15));

  const Dataset a = simulate_linear(50, 9), b = simulate_linear(50, 9), c = simulate_linear(50, 10);
  CHECK(a.y == b.y);
  CHECK(*a.x_true == *b.x_true);
  CHECK(a.y != c.y);
  CHECK(a.seed == 9);
  CHECK_THROWS_AS(simulate_linear(0, 1), InputError);
  CHECK_THROWS_AS(simulate_linear(3, 1, -1.0), InputError);
}

TEST_CASE("nonlinear simulator examples") {
  const Dataset zero = simulate_nonlinear(3, 1, 0.0);
  CHECK((*zero.x_true)(1, 0) == doctest::Approx(2.89886).epsilon(1e-5));
  CHECK((*zero.x_true)(1, 0) == doctest::Approx(8.0 * std::cos(1.2)).epsilon(1e-15));
  CHECK(zero.y[0] == 0.0);
  CHECK(zero.u(2, 0) == std::cos(1.2 * 3.0));
  const double x1 = (*zero.x_true)(1, 0);
  CHECK(zero.y[1] == doctest::Approx(0.05 * x1 * x1).epsilon(1e-15));
  const double x2 = 0.5 * x1 + 25.0 * x1 / (1.0 + x1 * x1) + 8.0 * std::cos(2.4);
  CHECK((*zero.x_true)(2, 0) == doctest::Approx(x2).epsilon(1e-14));

  // Quadratic measurement is symmetric in the state.
  const ObsModel g = ObsModel::quadratic_gaussian(0.05, 1.0);
  for (double x : {0.3, 2.0, 17.5}) {
    CHECK(g.mean(std::vector<double>{x}) == g.mean(std::vector<double>{-x}));
  }
  CHECK(simulate_nonlinear(40, 4).y == simulate_nonlinear(40, 4).y);
}

TEST_CASE("config parsing") {
  const IdentifyConfig def = parse_config("");
  CHECK(def.pgas.particles == 15);
  CHECK(def.run.iterations == 300);
  CHECK(def.optimizer.max_iterations == 25);
  CHECK(def.schedule.burn_in == 50);
  CHECK(!def.run.q);

  const IdentifyConfig c = parse_config(
      "[kernel]\nfamily = matern_se\nmatern_order = 5/2\nlengthscale = 2.5\n"
      "[obs]\nfamily = quadratic\ncoefficient = 0.05\nr = 1.5\n"
      "[pgas]\nparticles = 7\nparallel = false\n[run]\nseed = 42\nq = auto\n");
  CHECK(c.kernel.family == KernelChoice::matern_se);
  CHECK(c.kernel.matern_order == MaternOrder::five_halves);
  CHECK(*c.kernel.lengthscale == 2.5);
  CHECK(c.obs.family == ObsFamily::quadratic_gaussian);
  CHECK(*c.obs.r == 1.5);
  CHECK(c.pgas.particles == 7);
  CHECK(c.pgas.execution == Execution::serial);
  CHECK(c.run.seed == 42);

  const IdentifyConfig round = parse_config(to_ini(c));
  CHECK(to_ini(round) == to_ini(c));

  CHECK_THROWS_AS(parse_config("[kernel]\nfamly = se\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernal]\nfamily = se\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[kernel]\nfamily = rbf\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[pgas]\nparticles = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[pgas]\nparticles = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[optimizer]\ncurvature = 1e-6\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[schedule]\nexponent = 0.4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nq = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[obs]\nlearn_r = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("state proxy") {
  Dataset lin = simulate_linear(20, 2);
  const Trajectory p = state_proxy(lin, ObsConfig{});
  for (Eigen::Index t = 0; t < p.rows(); ++t) CHECK(p(t, 0) == lin.y[t] / 2.0);

  // Noise-free x_{t+1} = 0.6 x_t + 2 u_t observed through y = 0.1 x^2: the
  // fitted signs reproduce the states exactly.
  Dataset quad;
  const Eigen::Index n = 60;
  quad.u.resize(n, 1);
  quad.y.resize(n);
  Trajectory x(n, 1);
  x(0, 0) = 1.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    quad.u(t, 0) = std::cos(0.9 * static_cast<double>(t)) + 0.3 * std::sin(2.1 * static_cast<double>(t));
    if (t + 1 < n) x(t + 1, 0) = 0.6 * x(t, 0) + 2.0 * quad.u(t, 0);
    quad.y[t] = 0.1 * x(t, 0) * x(t, 0);
  }
  ObsConfig oc;
  oc.family = ObsFamily::quadratic_gaussian;
  oc.coefficient = 0.1;
  const Trajectory q = state_proxy(quad, oc);
  CHECK((q - x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("initial parameters") {
  const Dataset lin = simulate_linear(30, 2);
  IdentifyConfig cfg;
  cfg.kernel.family = KernelChoice::se;
  const InitialGuess g = initial_guess(lin, cfg);
  const Trajectory proxy = state_proxy(lin, cfg.obs);
  const double mean = proxy.col(0).mean();
  const double var = (proxy.col(0).array() - mean).square().mean();
  const Eigen::VectorXd nat = natural_values(g.theta);
  CHECK(natural_names(g.theta) == std::vector<std::string>{"lambda_x", "lambda_u", "sf2", "q", "r"});
  CHECK(nat[0] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  CHECK(nat[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(nat[3] == doctest::Approx(0.1 * var).epsilon(1e-12));
  CHECK(nat[4] == doctest::Approx(0.1 * var).epsilon(1e-12));
  CHECK(g.trajectory == proxy);
}

TEST_CASE("identify is deterministic and records every iteration") {
  const Dataset data = simulate_linear(15, 8);
  const IdentifyConfig cfg = small_config(6);
  const RunArtifacts a = identify(data, cfg);
  const RunArtifacts b = identify(data, cfg);
  REQUIRE(a.trace.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(a.trace[k].k == k + 1);
    CHECK(a.trace[k].theta == b.trace[k].theta);
    CHECK(a.trace[k].q_hat == b.trace[k].q_hat);
    CHECK(a.trace[k].q_hat >= a.trace[k].q_before - 1e-10);
    CHECK(a.trace[k].armijo_violations == 0);
  }
  CHECK(a.final_trajectory == b.final_trajectory);
  CHECK(pack(a.theta) == pack(b.theta));
  CHECK(a.names == natural_names(a.theta));

  IdentifyConfig other = cfg;
  other.run.seed = 6;
  CHECK(identify(data, other).final_trajectory != a.final_trajectory);

  IdentifyConfig bad = cfg;
  bad.pgas.particles = 0;
  CHECK_THROWS_AS(identify(data, bad), ConfigError);
}

TEST_CASE("one iteration maximizes the single complete-data term") {
  const Dataset data = simulate_linear(20, 4);
  IdentifyConfig cfg = small_config(1);
  cfg.optimizer.max_iterations = 500;
  cfg.optimizer.gradient_tolerance = 1e-6;
  const RunArtifacts run = identify(data, cfg);
  REQUIRE(run.final_set.size() == 1);
  CHECK(run.trace[0].gamma == 1.0);
  CHECK(run.trace[0].converged);
  const Eigen::VectorXd g = complete_data_log_lik(data, run.final_trajectory, run.theta).grad;
  CHECK(g.norm() < cfg.optimizer.gradient_tolerance);
}

TEST_CASE("prediction limits") {
  std::mt19937_64 rng(3);
  const Trajectory x = testutil::random_walk(12, rng);
  const InputSeries u = testutil::random_inputs(12, 1, rng);

  SUBCASE("interpolation as q goes to zero") {
    const HyperParams theta = se_theta(1e-10, 2.0);
    const TransitionPosterior post(x, u, theta);
    for (Eigen::Index t = 0; t + 1 < x.rows(); ++t) {
      const PredictiveMoments m = post.at(std::span<const double>(&x(t, 0), 1),
                                          std::span<const double>(&u(t, 0), 1));
      CHECK(std::abs(m.mean[0] - x(t + 1, 0)) < 1e-5);
      CHECK(m.variance[0] < 1e-8);
    }
  }

  SUBCASE("prior reversion far from data") {
    const HyperParams theta = se_theta(0.3, 2.0, 0.7);
    Dataset test;
    test.u = InputSeries::Constant(3, 1, 50.0);
    test.y = Eigen::VectorXd::Zero(3);
    test.x_true = Trajectory::Constant(3, 1, 80.0);
    const auto rec = predict_onestep(artifacts_for(theta, x, u), theta, test);
    REQUIRE(rec.size() == 2);
    CHECK(rec[0].mean == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(rec[0].std == doctest::Approx(std::sqrt(2.0 + 0.3)).epsilon(1e-12));
    CHECK(*rec[0].truth == 80.0);
  }

  SUBCASE("std at least sqrt(q) with process noise") {
    const HyperParams theta = se_theta(0.4, 1.5);
    Dataset test = simulate_linear(30, 3);
    const auto rec = predict_onestep(artifacts_for(theta, x, u), theta, test);
    for (const auto& r : rec) CHECK(r.std >= std::sqrt(0.4));
    PredictOptions step;
    step.mode = PredictionMode::step;
    step.true_transition = linear_transition;
    const auto srec = predict_onestep(artifacts_for(theta, x, u), theta, test, step);
    for (std::size_t i = 0; i < srec.size(); ++i) {
      CHECK(srec[i].mean == doctest::Approx(rec[i].mean - rec[i].x_star).epsilon(1e-12));
      CHECK(srec[i].std * srec[i].std == doctest::Approx(rec[i].std * rec[i].std - 0.4).epsilon(1e-9));
      CHECK(*srec[i].truth == linear_transition(srec[i].x_star, srec[i].u_star) - srec[i].x_star);
    }
  }

  SUBCASE("surface limits") {
    const HyperParams theta = se_theta(0.2, 3.0, -0.4);
    const auto grid = make_grid(-2, 2, 5, -1, 1, 3);
    CHECK(grid.size() == 15);
    const auto prior = predict_surface(artifacts_for(theta, x.topRows(1), u), theta, grid);
    for (const auto& r : prior) {
      CHECK(r.mean == -0.4);
      CHECK(r.std == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    }
    const std::vector<std::array<double, 2>> node{{x(4, 0), u(4, 0)}};
    const auto post = predict_surface(artifacts_for(theta, x, u), theta, node);
    CHECK(post[0].std < std::sqrt(3.0));
    CHECK_THROWS_AS(predict_surface(artifacts_for(theta, x, u), theta, {}), InputError);
  }

  SUBCASE("mixture of identical trajectories equals one") {
    const HyperParams theta = se_theta(0.3, 1.0);
    RunArtifacts a = artifacts_for(theta, x, u);
    a.final_set.add(x, 0.5, 2);
    a.final_set.add(x, 0.5, 3);
    const auto grid = make_grid(-1, 1, 3, -1, 1, 3);
    PredictOptions top;
    top.average_top = 3;
    const auto one = predict_surface(a, theta, grid);
    const auto mix = predict_surface(a, theta, grid, top);
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(mix[i].mean == doctest::Approx(one[i].mean).epsilon(1e-12));
      CHECK(mix[i].std == doctest::Approx(one[i].std).epsilon(1e-6));
    }
  }
}

TEST_CASE("mixture moments") {
  std::mt19937_64 rng(9);
  const HyperParams theta = se_theta(0.3, 1.0);
  const InputSeries u = testutil::random_inputs(10, 1, rng);
  const Trajectory x1 = testutil::random_walk(10, rng), x2 = testutil::random_walk(10, rng);
  const TransitionMixture mix({TransitionPosterior(x1, u, theta), TransitionPosterior(x2, u, theta)},
                              {1.0, 3.0});
  const double xs = 0.2, us = -0.3;
  const auto a = TransitionPosterior(x1, u, theta).at(std::span(&xs, 1), std::span(&us, 1));
  const auto b = TransitionPosterior(x2, u, theta).at(std::span(&xs, 1), std::span(&us, 1));
  const auto m = mix.at(std::span(&xs, 1), std::span(&us, 1));
  const double mean = 0.25 * a.mean[0] + 0.75 * b.mean[0];
  const double second = 0.25 * (a.variance[0] + a.mean[0] * a.mean[0]) +
                        0.75 * (b.variance[0] + b.mean[0] * b.mean[0]);
  CHECK(m.mean[0] == doctest::Approx(mean).epsilon(1e-14));
  CHECK(m.variance[0] == doctest::Approx(second - mean * mean).epsilon(1e-12));
}

TEST_CASE("coverage counts truths inside the band") {
  std::vector<PredictionRecord> r{{0, 0, 0.0, 1.0, 1.5}, {0, 0, 0.0, 1.0, 2.5}, {0, 0, 0.0, 1.0, std::nullopt}};
  CHECK(coverage(r, 2.0) == 0.5);
}

TEST_CASE("dataset csv round trip") {
  const auto dir = scratch_dir("csv");
  const Dataset d = simulate_nonlinear(25, 3);
  write_dataset_csv(dir / "d.csv", d);
  const Dataset back = read_dataset_csv(dir / "d.csv");
  CHECK(back.y == d.y);
  CHECK(back.u == d.u);
  CHECK(*back.x_true == *d.x_true);

  Dataset no_truth = d;
  no_truth.x_true.reset();
  write_dataset_csv(dir / "n.csv", no_truth);
  CHECK(!read_dataset_csv(dir / "n.csv").x_true);

  std::ofstream(dir / "bad.csv") << "t,y,u\n0,1,2\n";
  CHECK_THROWS_AS(read_dataset_csv(dir / "bad.csv"), InputError);
  std::ofstream(dir / "gap.csv") << "t,u,y\n0,1,2\n2,1,2\n";
  CHECK_THROWS_AS(read_dataset_csv(dir / "gap.csv"), InputError);
  std::ofstream(dir / "nan.csv") << "t,u,y\n0,1,abc\n";
  CHECK_THROWS_AS(read_dataset_csv(dir / "nan.csv"), InputError);
}

TEST_CASE("artifacts round trip") {
  const auto dir = scratch_dir("artifacts");
  const Dataset data = simulate_nonlinear(12, 2);
  IdentifyConfig cfg = small_config(4);
  cfg.kernel.family = KernelChoice::matern_se;
  cfg.obs.family = ObsFamily::quadratic_gaussian;
  cfg.obs.coefficient = 0.05;
  cfg.obs.learn_r = false;
  const RunArtifacts run = identify(data, cfg);
  save_artifacts(dir, run);
  const RunArtifacts back = load_artifacts(dir);

  CHECK(pack(back.theta) == pack(run.theta));
  CHECK(back.theta.obs.noise_variance() == run.theta.obs.noise_variance());
  CHECK(back.final_trajectory == run.final_trajectory);
  CHECK(back.inputs == run.inputs);
  REQUIRE(back.final_set.size() == run.final_set.size());
  for (std::size_t i = 0; i < run.final_set.size(); ++i) {
    CHECK(back.final_set.entries()[i].weight == run.final_set.entries()[i].weight);
    CHECK(back.final_set.entries()[i].trajectory == run.final_set.entries()[i].trajectory);
  }
  REQUIRE(back.trace.size() == run.trace.size());
  for (std::size_t k = 0; k < run.trace.size(); ++k) {
    CHECK(back.trace[k].theta == run.trace[k].theta);
    CHECK(back.trace[k].q_hat == run.trace[k].q_hat);
    CHECK(back.trace[k].q_before == run.trace[k].q_before);
  }

  // Trace header lists every parameter in declared order.
  std::ifstream trace(dir / "trace.csv");
  std::string header;
  std::getline(trace, header);
  CHECK(header == "k,lambda_x,sf2,lambda_u,q,q_hat");

  const Dataset test = simulate_nonlinear(12, 3);
  const auto p1 = predict_onestep(run, run.theta, test);
  const auto p2 = predict_onestep(back, back.theta, test);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].mean == p2[i].mean);
    CHECK(p1[i].std == p2[i].std);
  }
  write_predictions_csv(dir / "p.csv", p1);
  std::ifstream pin(dir / "p.csv");
  std::getline(pin, header);
  CHECK(header == "x_star,u_star,mean,std,truth");
  std::size_t rows = 0;
  for (std::string line; std::getline(pin, line);) ++rows;
  CHECK(rows == p1.size());
}
