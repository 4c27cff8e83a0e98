#ifndef GPSSM_BFGS_HPP_
#define GPSSM_BFGS_HPP_

#include <Eigen/Dense>

#include <functional>
#include <optional>

namespace gpssm {

struct OptimizerConfig {
  std::size_t max_iterations = 25;
  double gradient_tolerance = 1e-5;
  // Strong Wolfe constants, 0 < c1 < c2 < 1.
  double sufficient_decrease = 1e-4;
  double curvature = 0.9;
  std::size_t max_line_search = 30;
  // Carry the inverse-Hessian approximation from one M-step to the next.
  bool warm_start = true;

  void validate() const;
};

// Returns the objective value at theta and writes its gradient. Non-finite
// values are allowed away from the starting point and make the line search
// shrink its step.
using Objective = std::function<double(const Eigen::VectorXd& theta,
                                       Eigen::VectorXd& grad)>;

struct MaximizeResult {
  Eigen::VectorXd theta;
  double value = 0.0;
  Eigen::VectorXd gradient;
  double initial_value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  // No finite improving step was found from theta_init.
  bool no_progress = false;
  std::size_t skipped_updates = 0;
  // Accepted steps that failed the sufficient-decrease test; always zero
  // unless the line search is broken.
  std::size_t armijo_violations = 0;
  // Final inverse-Hessian approximation (for the maximization problem's
  // negated objective, so it is positive definite).
  Eigen::MatrixXd inverse_hessian;
};

/// BFGS ascent with a strong-Wolfe line search (bracketing plus safeguarded
/// cubic interpolation). `inverse_hessian`, when given, seeds the
/// approximation; otherwise the first step is scaled to unit length.
MaximizeResult maximize(const Objective& objective, const Eigen::VectorXd& theta_init,
                        const OptimizerConfig& cfg,
                        const std::optional<Eigen::MatrixXd>& inverse_hessian = {});

// Largest per-coordinate discrepancy between the analytic gradient and
// central differences with step h * max(1, |theta_i|), measured as
// |g - fd| / max(1, |g|, |fd|).
double finite_diff_check(const Objective& objective, const Eigen::VectorXd& theta,
                         double step);

}  // namespace gpssm

#endif  // GPSSM_BFGS_HPP_
