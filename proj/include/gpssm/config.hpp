#ifndef GPSSM_CONFIG_HPP_
#define GPSSM_CONFIG_HPP_

#include "gpssm/bfgs.hpp"
#include "gpssm/kernels.hpp"
#include "gpssm/observation.hpp"
#include "gpssm/pgas.hpp"
#include "gpssm/saem.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace gpssm {

enum class KernelChoice { linear, se, matern, matern_se };

struct KernelConfig {
  KernelChoice family = KernelChoice::se;
  MaternOrder matern_order = MaternOrder::three_halves;
  // Initial length-scale for every dimension; unset means the per-dimension
  // standard deviation of the state proxy and of the inputs.
  std::optional<double> lengthscale;
  double signal_variance = 1.0;
  // Initial l_d of the linear kernel.
  double linear_variance = 1.0;
};

struct MeanConfig {
  MeanFamily family = MeanFamily::zero;
  double value = 0.0;
};

struct ObsConfig {
  ObsFamily family = ObsFamily::linear_gaussian;
  // C of the linear model or d of the quadratic model.
  double coefficient = 2.0;
  bool learn_coefficient = false;
  bool learn_r = true;
  // Initial r; unset means 10% of the state-proxy variance.
  std::optional<double> r;
};

struct RunConfig {
  std::size_t iterations = 300;
  std::uint64_t seed = 1;
  // Initial process-noise variance; unset means 10% of the proxy variance.
  std::optional<double> q;
  double initial_state_std = 5.0;
  bool include_initial_state = true;
  // Predictions average the M highest-weighted entries of the final set;
  // 0 conditions on the final sampled trajectory only.
  std::size_t average_top = 0;
  // OpenMP threads; 0 keeps the runtime default.
  std::size_t threads = 0;
};

struct IdentifyConfig {
  KernelConfig kernel;
  MeanConfig mean;
  ObsConfig obs;
  StepSchedule schedule;
  double prune_epsilon = 1e-6;
  PgasConfig pgas;
  OptimizerConfig optimizer;
  RunConfig run;
  // Throws ConfigError naming the offending key.
  void validate() const;
};

// INI text with sections [kernel], [mean], [obs], [schedule], [pgas],
// [optimizer], [run]. Missing keys keep their defaults; unknown sections or
// keys and malformed values raise ConfigError.
IdentifyConfig parse_config(const std::string& text);
IdentifyConfig load_config(const std::filesystem::path& path);
// Round-trips through parse_config.
std::string to_ini(const IdentifyConfig& cfg);

}  // namespace gpssm

#endif  // GPSSM_CONFIG_HPP_
