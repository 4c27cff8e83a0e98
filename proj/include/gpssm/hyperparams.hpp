#ifndef GPSSM_HYPERPARAMS_HPP_
#define GPSSM_HYPERPARAMS_HPP_

#include "gpssm/kernels.hpp"
#include "gpssm/observation.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace gpssm {

// Diagonal process-noise covariance, one log-variance per state dimension.
class ProcessNoise {
 public:
  static ProcessNoise from_variances(std::vector<double> variances);

  std::size_t state_dim() const { return log_q_.size(); }
  double variance(std::size_t d) const { return q_[d]; }
  double min_variance() const;
  const std::vector<double>& log_variances() const { return log_q_; }
  void set_log_variances(std::span<const double> values);

 private:
  std::vector<double> log_q_;
  std::vector<double> q_;
};

// Fixed prior p(x_0) = N(0, std^2 I). It has no learnable parameters; when
// `included` is false its term is left out of trajectory log-priors.
struct InitialStatePrior {
  double std = 5.0;
  bool included = true;

  double log_density(std::span<const double> x0) const;
};

/// Full parameter bundle: transition GP (kernel, mean, process noise),
/// measurement model and the fixed initial-state prior.
struct HyperParams {
  Kernel kernel;
  MeanFunction mean;
  ProcessNoise noise;
  ObsModel obs;
  InitialStatePrior initial;

  std::size_t state_dim() const { return noise.state_dim(); }
  std::size_t input_dim() const { return kernel.input_dim() - state_dim(); }
  // Throws InputError when the pieces disagree on dimensions.
  void validate() const;
};

// Positions of each group inside the packed free-parameter vector:
// [kernel log-hyperparameters | log q per state dim | learnable obs params].
struct ParamLayout {
  std::size_t kernel_begin = 0, kernel_count = 0;
  std::size_t noise_begin = 0, noise_count = 0;
  std::size_t obs_begin = 0, obs_count = 0;

  std::size_t size() const { return obs_begin + obs_count; }
};

ParamLayout param_layout(const HyperParams& theta);
Eigen::VectorXd pack(const HyperParams& theta);
void unpack(HyperParams& theta, const Eigen::VectorXd& values);
HyperParams with_params(HyperParams theta, const Eigen::VectorXd& values);

// Names of the packed (unconstrained) parameters, e.g. "log_lambda_x".
std::vector<std::string> packed_names(const HyperParams& theta);
// The same parameters on their natural scale, e.g. "lambda_x", "q", "r".
std::vector<std::string> natural_names(const HyperParams& theta);
Eigen::VectorXd natural_values(const HyperParams& theta);

// "x" / "u" for scalar blocks, "x1", "x2", ... otherwise.
std::vector<std::string> input_dim_names(std::size_t state_dim,
                                         std::size_t input_dim);

}  // namespace gpssm

#endif  // GPSSM_HYPERPARAMS_HPP_
