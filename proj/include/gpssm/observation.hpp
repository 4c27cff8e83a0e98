#ifndef GPSSM_OBSERVATION_HPP_
#define GPSSM_OBSERVATION_HPP_

#include <random>
#include <span>
#include <string>
#include <vector>

namespace gpssm {

enum class ObsFamily { linear_gaussian, quadratic_gaussian };

/// Scalar measurement model y_t = g(x_t) + e_t, e_t ~ N(0, r).
///
///   linear_gaussian:    g(x) = sum_d C_d x_d
///   quadratic_gaussian: g(x) = d * sum_d x_d^2
///
/// The learnable parameters, in order, are the coefficients (only when
/// learn_coefficients is set; kept on their natural scale) followed by log r
/// (when learn_r is set).
class ObsModel {
 public:
  static ObsModel linear_gaussian(std::vector<double> c, double r,
                                  bool learn_c = false, bool learn_r = true);
  static ObsModel quadratic_gaussian(double d, double r, bool learn_d = false,
                                     bool learn_r = true);

  ObsFamily family() const { return family_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  double noise_variance() const { return r_; }
  double log_noise_variance() const { return log_r_; }
  bool learn_coefficients() const { return learn_coefficients_; }
  bool learn_noise() const { return learn_r_; }

  double mean(std::span<const double> x) const;
  double log_lik(double y, std::span<const double> x) const;
  // Gradient over the learnable parameters (see class comment for order).
  void log_lik_grad(double y, std::span<const double> x,
                    std::span<double> grad) const;
  double sample(std::span<const double> x, std::mt19937_64& rng) const;

  std::size_t num_learnable() const;
  std::vector<double> learnable() const;
  void set_learnable(std::span<const double> values);
  std::vector<std::string> learnable_names() const;

 private:
  void check_state(std::size_t n) const;
  void set_log_r(double log_r);

  ObsFamily family_ = ObsFamily::linear_gaussian;
  std::vector<double> coefficients_;
  double log_r_ = 0.0;
  double r_ = 1.0;
  bool learn_coefficients_ = false;
  bool learn_r_ = true;
};

}  // namespace gpssm

#endif  // GPSSM_OBSERVATION_HPP_
