#ifndef GPSSM_SAEM_HPP_
#define GPSSM_SAEM_HPP_

#include "gpssm/gp_prior.hpp"
#include "gpssm/hyperparams.hpp"
#include "gpssm/types.hpp"

#include <vector>

namespace gpssm {

// gamma_k = 1 for k <= burn_in, then (k - burn_in)^(-exponent).
struct StepSchedule {
  double exponent = 0.7;
  std::size_t burn_in = 50;

  void validate() const;
};

double step_size(const StepSchedule& schedule, std::size_t k);

struct WeightedEntry {
  Trajectory trajectory;
  double weight = 0.0;
  std::size_t iteration = 0;
};

/// The stochastic-approximation surrogate
///   Q_k(theta) = (1 - gamma_k) Q_{k-1}(theta) + gamma_k log p(y, x[k] | theta)
/// unrolled into an explicit convex combination of complete-data
/// log-likelihood terms. Entries whose weight falls below the pruning
/// threshold are dropped and the rest renormalized.
class WeightedTrajectorySet {
 public:
  explicit WeightedTrajectorySet(double prune_epsilon = 1e-6);

  void add(Trajectory trajectory, double gamma, std::size_t iteration = 0);
  // Rebuilds a saved set. Weights must be positive and sum to one.
  static WeightedTrajectorySet restore(double prune_epsilon, std::vector<WeightedEntry> entries);

  const std::vector<WeightedEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double prune_epsilon() const { return epsilon_; }
  // Total weight removed by pruning in the most recent add().
  double last_dropped_mass() const { return dropped_; }

 private:
  std::vector<WeightedEntry> entries_;
  double epsilon_;
  double dropped_ = 0.0;
};

WeightedTrajectorySet update(WeightedTrajectorySet set, Trajectory trajectory,
                             double gamma, std::size_t iteration = 0);

// log p(y_{0:T}, x_{0:T} | theta) and its gradient over pack(theta).
ValueGrad complete_data_log_lik(const Dataset& data, const Trajectory& x,
                                const HyperParams& theta);

// Value-only complete-data log-likelihood via the sequential prior.
double complete_data_log_lik_value(const Dataset& data, const Trajectory& x,
                                   const HyperParams& theta);

// Q_k(theta) and its gradient; entries evaluated in parallel and summed in
// entry order.
ValueGrad q_value_grad(const WeightedTrajectorySet& set, const Dataset& data,
                       const HyperParams& theta,
                       Execution execution = Execution::parallel);
double q_value(const WeightedTrajectorySet& set, const Dataset& data,
               const HyperParams& theta, Execution execution = Execution::parallel);
Eigen::VectorXd q_grad(const WeightedTrajectorySet& set, const Dataset& data,
                       const HyperParams& theta,
                       Execution execution = Execution::parallel);

// Serial reference: values from the sequential prior, gradients per entry.
ValueGrad q_value_grad_reference(const WeightedTrajectorySet& set,
                                 const Dataset& data, const HyperParams& theta);

}  // namespace gpssm

#endif  // GPSSM_SAEM_HPP_
