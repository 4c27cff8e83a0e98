#include "gpssm/errors.hpp"
#include "gpssm/types.hpp"

#include <fmt/format.h>

namespace gpssm {

void Dataset::validate() const {
  if (y.size() < 2) throw InputError("dataset needs at least two time points");
  if (u.cols() > 0 && u.rows() != y.size()) {
    throw InputError(fmt::format("inputs have {} rows but observations have {}",
                                 u.rows(), y.size()));
  }
  if (x_true && x_true->rows() != y.size()) {
    throw InputError(fmt::format("true states have {} rows but observations have {}",
                                 x_true->rows(), y.size()));
  }
  if (!y.allFinite() || !u.allFinite()) throw InputError("dataset contains non-finite values");
}

}  // namespace gpssm
