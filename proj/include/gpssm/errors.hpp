#ifndef GPSSM_ERRORS_HPP_
#define GPSSM_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpssm {

// Violated precondition: wrong dimensions, non-finite values, bad weights.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A covariance factorization failed even after jitter escalation.
class NumericalDegeneracy : public std::runtime_error {
 public:
  NumericalDegeneracy(const std::string& what, double jitter)
      : std::runtime_error(what), jitter_(jitter) {}

  double jitter() const { return jitter_; }

 private:
  double jitter_;
};

// Every particle weight underflowed at some time index.
class ParticleDegeneracy : public NumericalDegeneracy {
 public:
  ParticleDegeneracy(const std::string& what, std::size_t time)
      : NumericalDegeneracy(what, 0.0), time_(time) {}

  std::size_t time() const { return time_; }

 private:
  std::size_t time_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpssm

#endif  // GPSSM_ERRORS_HPP_
