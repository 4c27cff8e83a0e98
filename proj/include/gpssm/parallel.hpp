#ifndef GPSSM_PARALLEL_HPP_
#define GPSSM_PARALLEL_HPP_

#include "gpssm/types.hpp"

#include <cstddef>
#include <exception>
#include <vector>

namespace gpssm {

// Runs fn(i) for i in [0, n), with OpenMP when exec is parallel. Exceptions
// are captured per index and the one with the lowest index is rethrown, so
// failures are reported identically in serial and parallel runs.
template <class Fn>
void parallel_for(std::size_t n, Execution exec, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel && n > 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace gpssm

#endif  // GPSSM_PARALLEL_HPP_
