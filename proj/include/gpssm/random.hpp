#ifndef GPSSM_RANDOM_HPP_
#define GPSSM_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <span>

namespace gpssm {

// Independent generator for (seed, a, b), e.g. (sweep seed, time, slot).
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

double uniform01(std::mt19937_64& rng);
double standard_normal(std::mt19937_64& rng);

// Index drawn with probability proportional to exp(log_weights[i]).
// Throws InputError when every entry is -inf or any is NaN.
std::size_t sample_log_categorical(std::span<const double> log_weights,
                                   std::mt19937_64& rng);

// Index drawn with probability proportional to weights[i] >= 0.
std::size_t sample_categorical(std::span<const double> weights, std::mt19937_64& rng);

}  // namespace gpssm

#endif  // GPSSM_RANDOM_HPP_
