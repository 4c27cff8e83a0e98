#include "gpssm/hyperparams.hpp"

#include "gpssm/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace gpssm {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

ProcessNoise ProcessNoise::from_variances(std::vector<double> variances) {
  if (variances.empty()) throw InputError("process noise needs a state dimension");
  std::vector<double> logs;
  for (double q : variances) {
    if (!(q > 0.0) || !std::isfinite(q)) {
      throw InputError("process noise variance must be positive and finite");
    }
    logs.push_back(std::log(q));
  }
  ProcessNoise n;
  n.set_log_variances(logs);
  return n;
}

double ProcessNoise::min_variance() const {
  return *std::min_element(q_.begin(), q_.end());
}

void ProcessNoise::set_log_variances(std::span<const double> values) {
  if (!log_q_.empty() && values.size() != log_q_.size()) {
    throw InputError("process noise parameter vector has the wrong size");
  }
  log_q_.assign(values.begin(), values.end());
  q_.resize(log_q_.size());
  for (std::size_t d = 0; d < q_.size(); ++d) q_[d] = std::exp(log_q_[d]);
}

double InitialStatePrior::log_density(std::span<const double> x0) const {
  const double var = std * std;
  double s = 0.0;
  for (double v : x0) s += -0.5 * (kLog2Pi + std::log(var) + v * v / var);
  return s;
}

void HyperParams::validate() const {
  const std::size_t nx = noise.state_dim();
  if (kernel.input_dim() < nx) {
    throw InputError("kernel input dimension is smaller than the state dimension");
  }
  if (mean.output_dim() != nx || mean.input_dim() != kernel.input_dim()) {
    throw InputError("mean function dimensions disagree with the kernel / noise");
  }
  if (obs.family() == ObsFamily::linear_gaussian && obs.coefficients().size() != nx) {
    throw InputError("observation coefficients disagree with the state dimension");
  }
  if (!(initial.std > 0.0)) throw InputError("initial-state std must be positive");
}

ParamLayout param_layout(const HyperParams& theta) {
  ParamLayout l;
  l.kernel_begin = 0;
  l.kernel_count = theta.kernel.num_params();
  l.noise_begin = l.kernel_count;
  l.noise_count = theta.noise.state_dim();
  l.obs_begin = l.noise_begin + l.noise_count;
  l.obs_count = theta.obs.num_learnable();
  return l;
}

Eigen::VectorXd pack(const HyperParams& theta) {
  const ParamLayout l = param_layout(theta);
  Eigen::VectorXd v(static_cast<Eigen::Index>(l.size()));
  const auto k = theta.kernel.log_params();
  for (std::size_t i = 0; i < k.size(); ++i) v[static_cast<Eigen::Index>(l.kernel_begin + i)] = k[i];
  const auto& q = theta.noise.log_variances();
  for (std::size_t i = 0; i < q.size(); ++i) v[static_cast<Eigen::Index>(l.noise_begin + i)] = q[i];
  const auto o = theta.obs.learnable();
  for (std::size_t i = 0; i < o.size(); ++i) v[static_cast<Eigen::Index>(l.obs_begin + i)] = o[i];
  return v;
}

void unpack(HyperParams& theta, const Eigen::VectorXd& values) {
  const ParamLayout l = param_layout(theta);
  if (static_cast<std::size_t>(values.size()) != l.size()) {
    throw InputError(fmt::format("expected {} parameters, got {}", l.size(), values.size()));
  }
  std::span<const double> all(values.data(), l.size());
  theta.kernel.set_log_params(all.subspan(l.kernel_begin, l.kernel_count));
  theta.noise.set_log_variances(all.subspan(l.noise_begin, l.noise_count));
  theta.obs.set_learnable(all.subspan(l.obs_begin, l.obs_count));
}

HyperParams with_params(HyperParams theta, const Eigen::VectorXd& values) {
  unpack(theta, values);
  return theta;
}

std::vector<std::string> input_dim_names(std::size_t state_dim,
                                         std::size_t input_dim) {
  std::vector<std::string> names;
  for (std::size_t d = 0; d < state_dim; ++d) {
    names.push_back(state_dim == 1 ? "x" : fmt::format("x{}", d + 1));
  }
  for (std::size_t d = 0; d < input_dim; ++d) {
    names.push_back(input_dim == 1 ? "u" : fmt::format("u{}", d + 1));
  }
  return names;
}

std::vector<std::string> natural_names(const HyperParams& theta) {
  const auto dims = input_dim_names(theta.state_dim(), theta.input_dim());
  std::vector<std::string> names = theta.kernel.param_names(dims);
  for (std::size_t d = 0; d < theta.state_dim(); ++d) {
    names.push_back(theta.state_dim() == 1 ? "q" : fmt::format("q{}", d + 1));
  }
  for (auto n : theta.obs.learnable_names()) {
    names.push_back(n == "log_r" ? "r" : n);
  }
  return names;
}

std::vector<std::string> packed_names(const HyperParams& theta) {
  std::vector<std::string> names = natural_names(theta);
  const ParamLayout l = param_layout(theta);
  const std::size_t coeffs = theta.obs.learn_coefficients()
                                 ? theta.obs.num_learnable() - (theta.obs.learn_noise() ? 1 : 0)
                                 : 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool linear_scale = i >= l.obs_begin && i < l.obs_begin + coeffs;
    if (!linear_scale) names[i] = "log_" + names[i];
  }
  return names;
}

Eigen::VectorXd natural_values(const HyperParams& theta) {
  Eigen::VectorXd v = pack(theta);
  const ParamLayout l = param_layout(theta);
  const std::size_t coeffs = theta.obs.learn_coefficients()
                                 ? theta.obs.num_learnable() - (theta.obs.learn_noise() ? 1 : 0)
                                 : 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const bool linear_scale = u >= l.obs_begin && u < l.obs_begin + coeffs;
    if (!linear_scale) v[i] = std::exp(v[i]);
  }
  return v;
}

}  // namespace gpssm
