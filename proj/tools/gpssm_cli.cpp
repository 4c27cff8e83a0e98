#include "gpssm/config.hpp"
#include "gpssm/diagnostics.hpp"
#include "gpssm/errors.hpp"
#include "gpssm/identify.hpp"
#include "gpssm/io.hpp"
#include "gpssm/predict.hpp"
#include "gpssm/simulate.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <string>

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kDegeneracy = 3, kPropertyFailure = 4 };

struct SimulateArgs {
  std::string system = "linear";
  std::size_t T = 120;
  std::uint64_t seed = 1;
  double noise_scale = 1.0;
  std::string input = "periodic";
  double amplitude = 1.0;
  double period = 10.0;
  std::string output;
};

struct IdentifyArgs {
  std::string data, config, out;
  bool quiet = false;
};

struct PredictArgs {
  std::string artifacts, test, output, mode = "state", system = "none";
  std::optional<std::size_t> average_top;
  std::vector<double> grid{-20, 20, 41, -1, 1, 21};
};

struct CheckArgs {
  std::uint64_t seed = 7;
  std::size_t configurations = 100;
};

int run_simulate(const SimulateArgs& a) {
  gpssm::Dataset data;
  if (a.system == "linear") {
    gpssm::InputSignal input;
    input.kind = a.input == "impulse" ? gpssm::InputSignal::Kind::impulse
                                      : gpssm::InputSignal::Kind::periodic;
    input.amplitude = a.amplitude;
    input.period = a.period;
    data = gpssm::simulate_linear(a.T, a.seed, a.noise_scale, input);
  } else {
    data = gpssm::simulate_nonlinear(a.T, a.seed, a.noise_scale);
  }
  gpssm::write_dataset_csv(a.output, data);
  fmt::print("wrote {} samples ({} system, seed {}) to {}\n", data.length(), a.system, a.seed,
             a.output);
  return kOk;
}

int run_identify(const IdentifyArgs& a) {
  const gpssm::IdentifyConfig cfg = gpssm::load_config(a.config);
  const gpssm::Dataset data = gpssm::read_dataset_csv(a.data);
  const auto progress = [&](const gpssm::IterationRecord& r) {
    if (a.quiet) return;
    fmt::print("k={:4d} gamma={:.4f} set={:4d} q_hat={:.6g} bfgs={:2d} sweep={:.3f}s mstep={:.3f}s\n",
               r.k, r.gamma, r.set_size, r.q_hat, r.bfgs_iterations, r.sweep_seconds,
               r.mstep_seconds);
    std::fflush(stdout);
  };
  const gpssm::RunArtifacts run = gpssm::identify(data, cfg, progress);
  gpssm::save_artifacts(a.out, run);
  fmt::print("identified in {:.1f}s; artifacts in {}\n", run.seconds, a.out);
  const Eigen::VectorXd v = gpssm::natural_values(run.theta);
  for (std::size_t i = 0; i < run.names.size(); ++i) {
    fmt::print("  {} = {:.6g}\n", run.names[i], v[static_cast<Eigen::Index>(i)]);
  }
  return kOk;
}

int run_predict(const PredictArgs& a) {
  const gpssm::RunArtifacts run = gpssm::load_artifacts(a.artifacts);
  gpssm::PredictOptions opts;
  opts.average_top = a.average_top.value_or(run.config.run.average_top);
  if (a.system == "linear") opts.true_transition = gpssm::linear_transition;
  if (a.system == "nonlinear") opts.true_transition = gpssm::nonlinear_transition;

  std::vector<gpssm::PredictionRecord> records;
  if (a.mode == "surface") {
    if (a.grid.size() != 6) throw gpssm::ConfigError("--grid needs x_lo,x_hi,nx,u_lo,u_hi,nu");
    const auto count = [](double v) {
      if (!(v >= 1.0) || v != std::floor(v)) throw gpssm::ConfigError("--grid counts must be positive integers");
      return static_cast<std::size_t>(v);
    };
    records = gpssm::predict_surface(
        run, run.theta,
        gpssm::make_grid(a.grid[0], a.grid[1], count(a.grid[2]), a.grid[3], a.grid[4], count(a.grid[5])),
        opts);
  } else {
    if (a.test.empty()) throw gpssm::ConfigError("--test is required for state and step modes");
    opts.mode = a.mode == "step" ? gpssm::PredictionMode::step : gpssm::PredictionMode::state;
    records = gpssm::predict_onestep(run, run.theta, gpssm::read_dataset_csv(a.test), opts);
    if (opts.mode == gpssm::PredictionMode::state || opts.true_transition) {
      fmt::print("two-std coverage {:.3f} over {} points\n", gpssm::coverage(records, 2.0),
                 records.size());
    }
  }
  gpssm::write_predictions_csv(a.output, records);
  fmt::print("wrote {} predictions to {}\n", records.size(), a.output);
  return kOk;
}

int run_check(const CheckArgs& a) {
  bool ok = true;
  for (const auto& r : gpssm::run_property_suite(a.seed, a.configurations)) {
    fmt::print("{} {:<40} worst={:.3e} bound={:.1e} cases={} ({:.2f}s)\n",
               r.passed ? "PASS" : "FAIL", r.name, r.worst, r.threshold, r.cases, r.seconds);
    ok = ok && r.passed;
  }
  return ok ? kOk : kPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process state-space identification"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate a benchmark system to a dataset CSV");
  s->add_option("--system", sim.system, "linear or nonlinear")
      ->check(CLI::IsMember({"linear", "nonlinear"}))
      ->capture_default_str();
  s->add_option("-T,--horizon", sim.T, "Final time index T (T + 1 samples)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  s->add_option("--noise-scale", sim.noise_scale, "Multiplier on both noise variances")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  s->add_option("--input", sim.input, "Linear system input: periodic or impulse")
      ->check(CLI::IsMember({"periodic", "impulse"}))
      ->capture_default_str();
  s->add_option("--amplitude", sim.amplitude, "Input amplitude")->capture_default_str();
  s->add_option("--period", sim.period, "Period of the sine input")->capture_default_str();
  s->add_option("-o,--output", sim.output, "Output CSV")->required();

  IdentifyArgs id;
  auto* i = app.add_subcommand("identify", "Run PSAEM on a dataset");
  i->add_option("--data", id.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  i->add_option("--config", id.config, "INI config")->required()->check(CLI::ExistingFile);
  i->add_option("--out", id.out, "Artifacts directory")->required();
  i->add_flag("-q,--quiet", id.quiet, "No per-iteration progress");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Predict with an identified model");
  p->add_option("--artifacts", pr.artifacts, "Artifacts directory")->required()->check(CLI::ExistingDirectory);
  p->add_option("--test", pr.test, "Test dataset CSV with x_true")->check(CLI::ExistingFile);
  p->add_option("--mode", pr.mode, "state (noisy next state), step (f - x) or surface")
      ->check(CLI::IsMember({"state", "step", "surface"}))
      ->capture_default_str();
  p->add_option("--system", pr.system, "Known true system for the truth column")
      ->check(CLI::IsMember({"none", "linear", "nonlinear"}))
      ->capture_default_str();
  p->add_option("--average-top", pr.average_top, "Average the M highest-weighted trajectories");
  p->add_option("--grid", pr.grid, "Surface lattice x_lo,x_hi,nx,u_lo,u_hi,nu")
      ->delimiter(',')
      ->expected(6)
      ->capture_default_str();
  p->add_option("-o,--output", pr.output, "Output CSV")->required();

  CheckArgs ck;
  auto* c = app.add_subcommand("check", "Run the gradient and consistency property suite");
  c->add_option("--seed", ck.seed, "Random seed")->capture_default_str();
  c->add_option("--configurations", ck.configurations, "Random cases per check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*s) return run_simulate(sim);
    if (*i) return run_identify(id);
    if (*p) return run_predict(pr);
    if (*c) return run_check(ck);
  } catch (const gpssm::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const gpssm::NumericalDegeneracy& e) {
    fmt::print(stderr, "numerical degeneracy: {}\n", e.what());
    return kDegeneracy;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kOther;
  }
  return kOther;
}
