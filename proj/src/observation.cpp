#include "gpssm/observation.hpp"

#include "gpssm/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace gpssm {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double checked_log_variance(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw InputError("measurement noise variance must be positive and finite");
  }
  return std::log(r);
}

}  // namespace

ObsModel ObsModel::linear_gaussian(std::vector<double> c, double r, bool learn_c,
                                   bool learn_r) {
  if (c.empty()) throw InputError("linear observation needs a coefficient per state");
  ObsModel m;
  m.family_ = ObsFamily::linear_gaussian;
  m.coefficients_ = std::move(c);
  m.learn_coefficients_ = learn_c;
  m.learn_r_ = learn_r;
  m.set_log_r(checked_log_variance(r));
  return m;
}

ObsModel ObsModel::quadratic_gaussian(double d, double r, bool learn_d,
                                      bool learn_r) {
  ObsModel m;
  m.family_ = ObsFamily::quadratic_gaussian;
  m.coefficients_ = {d};
  m.learn_coefficients_ = learn_d;
  m.learn_r_ = learn_r;
  m.set_log_r(checked_log_variance(r));
  return m;
}

void ObsModel::set_log_r(double log_r) {
  log_r_ = log_r;
  r_ = std::exp(log_r);
}

void ObsModel::check_state(std::size_t n) const {
  if (family_ == ObsFamily::linear_gaussian && n != coefficients_.size()) {
    throw InputError(fmt::format("observation expects a {}-dimensional state, got {}",
                                 coefficients_.size(), n));
  }
  if (n == 0) throw InputError("observation model needs a non-empty state");
}

double ObsModel::mean(std::span<const double> x) const {
  check_state(x.size());
  double g = 0.0;
  if (family_ == ObsFamily::linear_gaussian) {
    for (std::size_t d = 0; d < x.size(); ++d) g += coefficients_[d] * x[d];
  } else {
    for (double v : x) g += v * v;
    g *= coefficients_[0];
  }
  return g;
}

double ObsModel::log_lik(double y, std::span<const double> x) const {
  const double res = y - mean(x);
  return -0.5 * (kLog2Pi + log_r_ + res * res / r_);
}

void ObsModel::log_lik_grad(double y, std::span<const double> x,
                            std::span<double> grad) const {
  if (grad.size() != num_learnable()) {
    throw InputError("observation gradient buffer has the wrong size");
  }
  const double res = y - mean(x);
  std::size_t i = 0;
  if (learn_coefficients_) {
    if (family_ == ObsFamily::linear_gaussian) {
      for (double xd : x) grad[i++] = res * xd / r_;
    } else {
      double s = 0.0;
      for (double v : x) s += v * v;
      grad[i++] = res * s / r_;
    }
  }
  if (learn_r_) grad[i] = -0.5 + 0.5 * res * res / r_;
}

double ObsModel::sample(std::span<const double> x, std::mt19937_64& rng) const {
  std::normal_distribution<double> noise(0.0, std::sqrt(r_));
  return mean(x) + noise(rng);
}

std::size_t ObsModel::num_learnable() const {
  return (learn_coefficients_ ? coefficients_.size() : 0) + (learn_r_ ? 1 : 0);
}

std::vector<double> ObsModel::learnable() const {
  std::vector<double> out;
  if (learn_coefficients_) out = coefficients_;
  if (learn_r_) out.push_back(log_r_);
  return out;
}

void ObsModel::set_learnable(std::span<const double> values) {
  if (values.size() != num_learnable()) {
    throw InputError("observation parameter vector has the wrong size");
  }
  std::size_t i = 0;
  if (learn_coefficients_) {
    for (auto& c : coefficients_) c = values[i++];
  }
  if (learn_r_) set_log_r(values[i]);
}

std::vector<std::string> ObsModel::learnable_names() const {
  std::vector<std::string> out;
  if (learn_coefficients_) {
    if (family_ == ObsFamily::quadratic_gaussian) {
      out.emplace_back("d");
    } else if (coefficients_.size() == 1) {
      out.emplace_back("C");
    } else {
      for (std::size_t d = 0; d < coefficients_.size(); ++d) {
        out.push_back(fmt::format("C{}", d + 1));
      }
    }
  }
  if (learn_r_) out.emplace_back("log_r");
  return out;
}

}  // namespace gpssm
