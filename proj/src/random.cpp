#include "gpssm/random.hpp"

#include "gpssm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gpssm {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double standard_normal(std::mt19937_64& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

std::size_t sample_categorical(std::span<const double> weights, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InputError("categorical weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InputError("categorical weights sum to zero");
  }
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  // Rounding: return the last index with positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

std::size_t sample_log_categorical(std::span<const double> log_weights,
                                   std::mt19937_64& rng) {
  if (log_weights.empty()) throw InputError("no categories to sample from");
  double top = -std::numeric_limits<double>::infinity();
  for (double l : log_weights) {
    if (std::isnan(l)) throw InputError("NaN log-weight");
    top = std::max(top, l);
  }
  if (!std::isfinite(top)) throw InputError("all log-weights are -inf");
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - top);
  return sample_categorical(w, rng);
}

}  // namespace gpssm
