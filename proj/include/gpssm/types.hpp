#ifndef GPSSM_TYPES_HPP_
#define GPSSM_TYPES_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>

namespace gpssm {

// Row t holds x_t; columns are state dimensions.
using Trajectory = Eigen::MatrixXd;
// Row t holds u_t; may have zero columns.
using InputSeries = Eigen::MatrixXd;
// Row-major point sets; each row is one kernel input (x_t followed by u_t).
using PointMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Execution { serial, parallel };

// Time-aligned observed record; x_true is present only for simulated data.
struct Dataset {
  InputSeries u;
  Eigen::VectorXd y;
  std::optional<Trajectory> x_true;
  std::uint64_t seed = 0;

  std::size_t length() const { return static_cast<std::size_t>(y.size()); }
  std::size_t horizon() const { return length() == 0 ? 0 : length() - 1; }
  std::size_t input_dim() const { return static_cast<std::size_t>(u.cols()); }
  // Throws InputError when the sequences are not aligned.
  void validate() const;
};

inline std::span<const double> row_span(const PointMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace gpssm

#endif  // GPSSM_TYPES_HPP_
