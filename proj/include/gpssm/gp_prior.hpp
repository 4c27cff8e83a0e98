#ifndef GPSSM_GP_PRIOR_HPP_
#define GPSSM_GP_PRIOR_HPP_

#include "gpssm/hyperparams.hpp"
#include "gpssm/types.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace gpssm {

// Moments of p(x_t | x_{0:t-1}); state dimensions are independent GPs.
struct PredictiveMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// A one-step prediction together with the solved cross-covariance
// L_d^{-1} k(x_{0:t-2}, x_{t-1}) for every state dimension, which is exactly
// the new factor row needed to extend the state by x_t.
struct Prediction {
  PredictiveMoments moments;
  std::vector<std::vector<double>> solved;
  double jitter = 0.0;
};

/// Incrementally factorized GP conditioning set for one trajectory prefix.
///
/// Holds the kernel inputs z_s = (x_s, u_s) for s = 0..t-1. The first t-1
/// inputs are conditioning rows whose targets are x_1..x_{t-1}; the newest
/// input z_{t-1} is the query point for the next prediction. For every state
/// dimension d it keeps the packed lower Cholesky factor L_d of
/// K(z_{0:t-2}) + q_d I and the half-solved residual L_d^{-1}(x_{1:t-1} - m).
///
/// Appending a point costs O(t^2) per state dimension.
class GpPredictiveState {
 public:
  GpPredictiveState(std::size_t state_dim, std::size_t input_dim);

  // Scratch construction of the state for x_{0:n-1} with a dense batch
  // Cholesky; used to cross-check the incremental path.
  static GpPredictiveState from_history(const Trajectory& x,
                                        const InputSeries& u,
                                        const HyperParams& theta);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t point_dim() const { return state_dim_ + input_dim_; }
  std::size_t num_points() const { return num_points_; }
  std::size_t factor_dim() const { return num_points_ == 0 ? 0 : num_points_ - 1; }
  bool empty() const { return num_points_ == 0; }

  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * point_dim(), point_dim()};
  }
  // Row i of L_d (i + 1 entries).
  std::span<const double> factor_row(std::size_t d, std::size_t i) const {
    return {chol_[d].data() + i * (i + 1) / 2, i + 1};
  }
  std::span<const double> solved_residual(std::size_t d) const { return resid_[d]; }

  // Sum of log p(x_s | x_{0:s-1}) over the conditioning rows appended so far
  // (the initial-state term is not included).
  double log_density() const { return log_density_; }
  double max_jitter() const { return max_jitter_; }

  // The stored states x_{0:t-1}.
  Trajectory states() const;

  // Append (x, u). `pred` must come from predict(*this, theta) unless the
  // state is empty, in which case it is ignored.
  void append(const Prediction& pred, std::span<const double> x,
              std::span<const double> u);

 private:
  std::size_t state_dim_;
  std::size_t input_dim_;
  std::size_t num_points_ = 0;
  std::vector<double> points_;
  std::vector<std::vector<double>> chol_;
  std::vector<std::vector<double>> resid_;
  double log_density_ = 0.0;
  double max_jitter_ = 0.0;
};

Prediction predict(const GpPredictiveState& state, const HyperParams& theta);
PredictiveMoments predictive_step(const GpPredictiveState& state,
                                  const HyperParams& theta);

// Returns a new state with (x, u) appended.
GpPredictiveState extend(GpPredictiveState state, std::span<const double> x,
                         std::span<const double> u, const HyperParams& theta);
void extend_in_place(GpPredictiveState& state, std::span<const double> x,
                     std::span<const double> u, const HyperParams& theta);

// log p(x_{0:T} | theta) evaluated as the sequential product of one-step
// predictive densities (plus log p(x_0) when theta.initial.included).
double trajectory_log_prior(const Trajectory& x, const InputSeries& u,
                            const HyperParams& theta);

// sum_{s=t}^{T} log p(x'_s | x_{0:t-1}, x'_{t:s-1}) for history x_{0:t-1}
// and future x'_{t:T}; u must cover times 0..T.
double conditional_future_log_density(const Trajectory& history,
                                      const Trajectory& future,
                                      const InputSeries& u,
                                      const HyperParams& theta);

struct ValueGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

// Dense (batch Cholesky) evaluation of the trajectory log-prior and its
// gradient with respect to the packed parameter vector of theta. The entries
// belonging to the observation model are zero.
ValueGrad trajectory_log_prior_grad(const Trajectory& x, const InputSeries& u,
                                    const HyperParams& theta);

// Kernel inputs (x_s, u_s) for s = 0..rows-1.
PointMatrix make_points(const Trajectory& x, const InputSeries& u,
                        Eigen::Index rows);

// Cholesky with the jitter escalation policy: 1e-9 * mean diagonal, times 10
// per retry, up to 1e-3 * mean diagonal. Returns the jitter used.
double robust_cholesky(Eigen::MatrixXd& matrix, Eigen::LLT<Eigen::MatrixXd>& llt);

}  // namespace gpssm

#endif  // GPSSM_GP_PRIOR_HPP_
