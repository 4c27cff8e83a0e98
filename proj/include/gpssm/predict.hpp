#ifndef GPSSM_PREDICT_HPP_
#define GPSSM_PREDICT_HPP_

#include "gpssm/gp_prior.hpp"
#include "gpssm/hyperparams.hpp"
#include "gpssm/identify.hpp"
#include "gpssm/types.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace gpssm {

/// GP posterior of the transition function conditioned on one trajectory:
/// inputs z_t = (x_t, u_t) with targets x_{t+1} for t = 0..T-1 and noise
/// covariance q. A single-row trajectory gives the prior.
class TransitionPosterior {
 public:
  TransitionPosterior(const Trajectory& x, const InputSeries& u, const HyperParams& theta);
  std::size_t num_points() const { return static_cast<std::size_t>(points_.rows()); }
  // Mean and noise-free variance of f(x, u) per state dimension.
  PredictiveMoments at(std::span<const double> x, std::span<const double> u) const;

 private:
  HyperParams theta_;
  PointMatrix points_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;
  std::vector<Eigen::VectorXd> alpha_;
};

/// Equal-or-weighted mixture of transition posteriors. Moments are those of
/// the mixture: mean sum w_i m_i, variance sum w_i (v_i + m_i^2) - mean^2.
class TransitionMixture {
 public:
  TransitionMixture(std::vector<TransitionPosterior> parts, std::vector<double> weights);
  // Conditions on the final trajectory when average_top is 0, otherwise on
  // the average_top highest-weighted entries of the final set.
  static TransitionMixture from_artifacts(const RunArtifacts& artifacts, const HyperParams& theta,
                                          std::size_t average_top);
  PredictiveMoments at(std::span<const double> x, std::span<const double> u) const;
  std::size_t size() const { return parts_.size(); }

 private:
  std::vector<TransitionPosterior> parts_;
  std::vector<double> weights_;
};

// `state`: predictive of x_{t+1} with std including process noise; truth is
// the next test state. `step`: predictive of f(x_t, u_t) - x_t with the
// noise-free std; truth needs the true transition function.
enum class PredictionMode { state, step };

struct PredictOptions {
  PredictionMode mode = PredictionMode::state;
  std::size_t average_top = 0;
  std::function<double(double x, double u)> true_transition;
};

struct PredictionRecord {
  double x_star = 0.0;
  double u_star = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::optional<double> truth;
};

// One-step predictions at the true test states x*_t, u*_t for t = 0..T-1.
// Requires a scalar state and a test set with ground-truth states.
std::vector<PredictionRecord> predict_onestep(const RunArtifacts& artifacts,
                                              const HyperParams& theta, const Dataset& test,
                                              const PredictOptions& options = {});

// Posterior mean and noise-free std of f at every (x*, u*) node.
std::vector<PredictionRecord> predict_surface(const RunArtifacts& artifacts,
                                              const HyperParams& theta,
                                              const std::vector<std::array<double, 2>>& grid,
                                              const PredictOptions& options = {});

// Row-major lattice: u varies fastest.
std::vector<std::array<double, 2>> make_grid(double x_lo, double x_hi, std::size_t nx,
                                             double u_lo, double u_hi, std::size_t nu);

// Fraction of records with a truth inside mean +- width * std.
double coverage(const std::vector<PredictionRecord>& records, double width);

}  // namespace gpssm

#endif  // GPSSM_PREDICT_HPP_
