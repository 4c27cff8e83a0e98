#ifndef GPSSM_DIAGNOSTICS_HPP_
#define GPSSM_DIAGNOSTICS_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gpssm {

struct CheckResult {
  std::string name;
  bool passed = false;
  // Largest observed error and the bound it is compared against.
  double worst = 0.0;
  double threshold = 0.0;
  std::size_t cases = 0;
  double seconds = 0.0;
};

/// Runtime self-checks over randomly drawn models: analytic gradients against
/// central differences (kernel, trajectory prior, observation model, Q),
/// sequential against dense trajectory priors, incremental against scratch
/// GP factorizations, blocked against reference ancestor weights and serial
/// against parallel PGAS sweeps. `configurations` random cases per check.
std::vector<CheckResult> run_property_suite(std::uint64_t seed, std::size_t configurations = 100);

}  // namespace gpssm

#endif  // GPSSM_DIAGNOSTICS_HPP_
