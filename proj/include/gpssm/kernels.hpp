#ifndef GPSSM_KERNELS_HPP_
#define GPSSM_KERNELS_HPP_

#include "gpssm/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gpssm {

enum class KernelFamily { linear, squared_exponential, matern, product };

// Matern smoothness nu = order / 2.
enum class MaternOrder { one_half = 1, three_halves = 3, five_halves = 5 };

/// Covariance function over the joint state-input space.
///
/// Hyperparameters are stored as natural logarithms, so every value exposed by
/// log_params() is unconstrained and gradients are taken with respect to them.
///
///   linear:   k(a,b) = sum_d l_d a_d b_d
///   se:       k(a,b) = sf2 exp(-0.5 sum_d (a_d - b_d)^2 / lambda_d^2)
///   matern:   k(a,b) = sf2 g_nu(|a - b| / lambda), isotropic over its block
///   product:  k(a,b) = prod_c k_c(a_c, b_c) over consecutive dimension blocks
///
/// SE and Matern leaves may omit the signal variance (fixed at one) so that a
/// product carries a single multiplicative scale.
class Kernel {
 public:
  static Kernel linear(std::vector<double> variances);
  static Kernel squared_exponential(std::vector<double> lengthscales,
                                    std::optional<double> signal_variance = 1.0);
  static Kernel matern(std::size_t dim, double lengthscale,
                       std::optional<double> signal_variance = 1.0,
                       MaternOrder order = MaternOrder::three_halves);
  static Kernel product(std::vector<Kernel> blocks);

  KernelFamily family() const { return family_; }
  MaternOrder matern_order() const { return order_; }
  bool has_signal_variance() const { return has_signal_variance_; }
  std::size_t input_dim() const { return dim_; }
  std::size_t num_params() const;
  const std::vector<Kernel>& blocks() const { return blocks_; }

  std::vector<double> log_params() const;
  void set_log_params(std::span<const double> values);
  // One name per log-hyperparameter, built from the names of the input
  // dimensions (e.g. {"x", "u"} gives "lambda_x", "lambda_u", "sf2").
  std::vector<std::string> param_names(
      std::span<const std::string> dim_names) const;

  double operator()(std::span<const double> a, std::span<const double> b) const;
  // Returns k(a,b) and writes dk/d(log-hyperparameter) into grad.
  double eval_grad(std::span<const double> a, std::span<const double> b,
                   std::span<double> grad) const;

 private:
  Kernel() = default;

  void check_dims(std::size_t a, std::size_t b) const;
  double eval_unchecked(const double* a, const double* b) const;
  double eval_grad_unchecked(const double* a, const double* b,
                             double* grad) const;

  KernelFamily family_ = KernelFamily::linear;
  MaternOrder order_ = MaternOrder::three_halves;
  bool has_signal_variance_ = false;
  std::size_t dim_ = 0;
  std::vector<double> log_params_;
  // Cached exp(-2 log lambda) / exp(log l) / exp(log sf2) for fast evaluation.
  std::vector<double> scale_;
  double signal_variance_ = 1.0;
  std::vector<Kernel> blocks_;
};

std::vector<double> kernel_grad(const Kernel& kernel, std::span<const double> a,
                                std::span<const double> b);

// Gram matrix of the rows of points.
Eigen::MatrixXd kernel_gram(const Kernel& kernel, const PointMatrix& points);

enum class MeanFamily { zero, constant };

// Prior mean of the transition function; one value per state dimension.
class MeanFunction {
 public:
  static MeanFunction zero(std::size_t input_dim, std::size_t output_dim);
  static MeanFunction constant(std::size_t input_dim,
                               std::vector<double> values);

  MeanFamily family() const { return family_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

  Eigen::VectorXd operator()(std::span<const double> a) const;
  // Mean of output dimension d; neither family depends on the point.
  double component(std::size_t d) const { return values_[d]; }

 private:
  MeanFamily family_ = MeanFamily::zero;
  std::size_t input_dim_ = 0;
  std::vector<double> values_;
};

}  // namespace gpssm

#endif  // GPSSM_KERNELS_HPP_
