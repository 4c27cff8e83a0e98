#ifndef GPSSM_IDENTIFY_HPP_
#define GPSSM_IDENTIFY_HPP_

#include "gpssm/config.hpp"
#include "gpssm/errors.hpp"
#include "gpssm/hyperparams.hpp"
#include "gpssm/saem.hpp"
#include "gpssm/types.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gpssm {

// One PSAEM iteration: theta_k on its natural scale plus M-step diagnostics.
struct IterationRecord {
  std::size_t k = 0;
  Eigen::VectorXd theta;
  // Q_k(theta_k) and Q_k(theta_{k-1}).
  double q_hat = 0.0;
  double q_before = 0.0;
  double gamma = 0.0;
  std::size_t set_size = 0;
  double dropped_mass = 0.0;
  std::size_t bfgs_iterations = 0;
  std::size_t bfgs_evaluations = 0;
  bool converged = false;
  bool no_progress = false;
  std::size_t armijo_violations = 0;
  double sweep_seconds = 0.0;
  double mstep_seconds = 0.0;
};

struct RunArtifacts {
  IdentifyConfig config;
  HyperParams theta;
  // Natural-scale parameter names in trace column order.
  std::vector<std::string> names;
  std::vector<IterationRecord> trace;
  WeightedTrajectorySet final_set;
  Trajectory final_trajectory;
  // Training inputs the trajectories are aligned with.
  InputSeries inputs;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

// Raised when a lower layer degenerates during iteration `iteration()`.
class IdentifyAborted : public NumericalDegeneracy {
 public:
  IdentifyAborted(const std::string& what, std::size_t iteration, double jitter)
      : NumericalDegeneracy(what, jitter), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

// Crude scalar state estimate from the observations: y / C for the linear
// model; for the quadratic one the magnitudes sqrt(max(y, 0) / d) with signs
// fitted to a linear autoregression whose input gain is made positive.
Trajectory state_proxy(const Dataset& data, const ObsConfig& obs);

// Parameters built from the config with the given per-dimension scales
// (state block first, then inputs) and proxy variance.
HyperParams build_theta(const IdentifyConfig& cfg, std::size_t input_dim,
                        const std::vector<double>& scales, double proxy_variance);

struct InitialGuess {
  HyperParams theta;
  Trajectory trajectory;
};

// theta_0 and x[0]: unit signal variance, length-scales from the standard
// deviations of the proxy and the inputs, q and r at 10% of the proxy
// variance (unless the config fixes them), trajectory equal to the proxy.
InitialGuess initial_guess(const Dataset& data, const IdentifyConfig& cfg);

using ProgressCallback = std::function<void(const IterationRecord&)>;

/// PSAEM: for k = 1..K draw x[k] with one PGAS sweep around x[k-1], fold it
/// into the weighted trajectory set with step gamma_k, and maximize Q_k with
/// BFGS warm-started at theta_{k-1}. Deterministic for a given run seed.
RunArtifacts identify(const Dataset& data, const IdentifyConfig& cfg,
                      const ProgressCallback& progress = {});

}  // namespace gpssm

#endif  // GPSSM_IDENTIFY_HPP_
