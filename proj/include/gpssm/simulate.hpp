#ifndef GPSSM_SIMULATE_HPP_
#define GPSSM_SIMULATE_HPP_

#include "gpssm/types.hpp"

#include <cstddef>
#include <cstdint>

namespace gpssm {

// Input waveform for the linear benchmark. `periodic` is
// u_t = amplitude * sin(2 pi t / period); `impulse` is u_0 = amplitude and
// zero afterwards.
struct InputSignal {
  enum class Kind { periodic, impulse };
  Kind kind = Kind::periodic;
  double amplitude = 1.0;
  double period = 10.0;
  double at(std::size_t t) const;
};

// x_{t+1} = 0.8 x_t + 3 u_t + v_t, y_t = 2 x_t + e_t with v, e ~ N(0, 1.5)
// scaled by noise_scale; x_0 = 0. Returns T + 1 samples.
Dataset simulate_linear(std::size_t T, std::uint64_t seed, double noise_scale = 1.0,
                        const InputSignal& input = {});

// x_{t+1} = 0.5 x + 25 x / (1 + x^2) + 8 u_t + v_t, y_t = 0.05 x_t^2 + e_t,
// v ~ N(0, 10), e ~ N(0, 1) scaled by noise_scale, u_t = cos(1.2 (t + 1)),
// x_0 = 0. Returns T + 1 samples.
Dataset simulate_nonlinear(std::size_t T, std::uint64_t seed, double noise_scale = 1.0);

// Noise-free transition functions of the two systems.
double linear_transition(double x, double u);
double nonlinear_transition(double x, double u);

// Known constants of the simulated systems.
struct LinearSystem {
  static constexpr double a = 0.8, b = 3.0, c = 2.0, q = 1.5, r = 1.5;
};
struct NonlinearSystem {
  static constexpr double a = 0.5, b = 25.0, c = 8.0, d = 0.05, q = 10.0, r = 1.0;
};

}  // namespace gpssm

#endif  // GPSSM_SIMULATE_HPP_
