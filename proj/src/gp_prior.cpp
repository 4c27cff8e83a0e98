#include "gpssm/gp_prior.hpp"

#include "gpssm/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gpssm {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kJitterStart = 1e-9;
constexpr double kJitterMax = 1e-3;

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InputError(fmt::format("non-finite {}", what));
  }
}

void check_inputs(const Trajectory& x, const InputSeries& u, const HyperParams& theta) {
  if (static_cast<std::size_t>(x.cols()) != theta.state_dim()) {
    throw InputError(fmt::format("trajectory has {} state columns, model expects {}",
                                 x.cols(), theta.state_dim()));
  }
  if (static_cast<std::size_t>(u.cols()) != theta.input_dim()) {
    throw InputError(fmt::format("inputs have {} columns, model expects {}", u.cols(),
                                 theta.input_dim()));
  }
  if (u.cols() > 0 && u.rows() < x.rows()) {
    throw InputError("inputs are shorter than the trajectory");
  }
}

std::span<const double> input_row(const InputSeries& u, Eigen::Index t,
                                  std::vector<double>& buf) {
  buf.resize(static_cast<std::size_t>(u.cols()));
  for (Eigen::Index j = 0; j < u.cols(); ++j) buf[static_cast<std::size_t>(j)] = u(t, j);
  return buf;
}

std::span<const double> state_row(const Trajectory& x, Eigen::Index t,
                                  std::vector<double>& buf) {
  buf.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) buf[static_cast<std::size_t>(j)] = x(t, j);
  return buf;
}

}  // namespace

GpPredictiveState::GpPredictiveState(std::size_t state_dim, std::size_t input_dim)
    : state_dim_(state_dim),
      input_dim_(input_dim),
      chol_(state_dim),
      resid_(state_dim) {
  if (state_dim == 0) throw InputError("predictive state needs a state dimension");
}

Trajectory GpPredictiveState::states() const {
  Trajectory x(static_cast<Eigen::Index>(num_points_), static_cast<Eigen::Index>(state_dim_));
  for (std::size_t i = 0; i < num_points_; ++i) {
    for (std::size_t d = 0; d < state_dim_; ++d) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = points_[i * point_dim() + d];
    }
  }
  return x;
}

void GpPredictiveState::append(const Prediction& pred, std::span<const double> x,
                               std::span<const double> u) {
  if (x.size() != state_dim_ || u.size() != input_dim_) {
    throw InputError("appended point has the wrong dimension");
  }
  require_finite(x, "state in conditioning set");
  require_finite(u, "input in conditioning set");
  if (num_points_ > 0) {
    if (pred.solved.size() != state_dim_ ||
        pred.solved.front().size() != factor_dim()) {
      throw InputError("prediction does not match this predictive state");
    }
    const std::size_t n = factor_dim();
    for (std::size_t d = 0; d < state_dim_; ++d) {
      const double var = pred.moments.variance[static_cast<Eigen::Index>(d)];
      const double sd = std::sqrt(var);
      auto& L = chol_[d];
      L.reserve((n + 1) * (n + 2) / 2);
      L.insert(L.end(), pred.solved[d].begin(), pred.solved[d].end());
      L.push_back(sd);
      const double beta = (x[d] - pred.moments.mean[static_cast<Eigen::Index>(d)]) / sd;
      resid_[d].push_back(beta);
      log_density_ += -0.5 * (kLog2Pi + beta * beta) - std::log(sd);
    }
    max_jitter_ = std::max(max_jitter_, pred.jitter);
  }
  points_.insert(points_.end(), x.begin(), x.end());
  points_.insert(points_.end(), u.begin(), u.end());
  ++num_points_;
}

Prediction predict(const GpPredictiveState& state, const HyperParams& theta) {
  if (state.empty()) throw InputError("predictive_step needs at least one point");
  if (state.point_dim() != theta.kernel.input_dim() || state.state_dim() != theta.state_dim()) {
    throw InputError("predictive state and hyperparameters disagree on dimensions");
  }
  const std::size_t nx = state.state_dim();
  const std::size_t n = state.factor_dim();
  const auto query = state.point(state.num_points() - 1);

  std::vector<double> cross(n);
  for (std::size_t i = 0; i < n; ++i) cross[i] = theta.kernel(state.point(i), query);
  const double prior_var = theta.kernel(query, query);

  Prediction out;
  out.moments.mean.resize(static_cast<Eigen::Index>(nx));
  out.moments.variance.resize(static_cast<Eigen::Index>(nx));
  out.solved.assign(nx, std::vector<double>(n));
  for (std::size_t d = 0; d < nx; ++d) {
    auto& v = out.solved[d];
    // Forward substitution against the packed factor.
    double vv = 0.0;
    double mean = theta.mean.component(d);
    const auto resid = state.solved_residual(d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = state.factor_row(d, i);
      double s = cross[i];
      for (std::size_t j = 0; j < i; ++j) s -= row[j] * v[j];
      v[i] = s / row[i];
      vv += v[i] * v[i];
      mean += v[i] * resid[i];
    }
    const double diag = prior_var + theta.noise.variance(d);
    double var = diag - vv;
    if (!(var > 0.0) || !std::isfinite(var)) {
      double jitter = kJitterStart * diag;
      while (jitter <= kJitterMax * diag * (1.0 + 1e-12) && !(var + jitter > 0.0)) {
        jitter *= 10.0;
      }
      if (!(var + jitter > 0.0) || !std::isfinite(var)) {
        throw NumericalDegeneracy(
            fmt::format("predictive variance not positive ({}) after jitter", var),
            jitter);
      }
      var += jitter;
      out.jitter = std::max(out.jitter, jitter);
    }
    if (!std::isfinite(mean)) {
      throw NumericalDegeneracy("non-finite predictive mean", out.jitter);
    }
    out.moments.mean[static_cast<Eigen::Index>(d)] = mean;
    out.moments.variance[static_cast<Eigen::Index>(d)] = var;
  }
  return out;
}

PredictiveMoments predictive_step(const GpPredictiveState& state,
                                  const HyperParams& theta) {
  return predict(state, theta).moments;
}

void extend_in_place(GpPredictiveState& state, std::span<const double> x,
                     std::span<const double> u, const HyperParams& theta) {
  if (state.empty()) {
    state.append(Prediction{}, x, u);
    return;
  }
  state.append(predict(state, theta), x, u);
}

GpPredictiveState extend(GpPredictiveState state, std::span<const double> x,
                         std::span<const double> u, const HyperParams& theta) {
  extend_in_place(state, x, u, theta);
  return state;
}

double robust_cholesky(Eigen::MatrixXd& matrix, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(matrix);
  if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) return 0.0;
  const double mean_diag = matrix.diagonal().mean();
  double jitter = kJitterStart * mean_diag;
  double applied = 0.0;
  while (jitter <= kJitterMax * mean_diag * (1.0 + 1e-12)) {
    matrix.diagonal().array() += jitter - applied;
    applied = jitter;
    llt.compute(matrix);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) {
      return jitter;
    }
    jitter *= 10.0;
  }
  throw NumericalDegeneracy(
      fmt::format("Cholesky factorization failed with jitter up to {}", applied), applied);
}

PointMatrix make_points(const Trajectory& x, const InputSeries& u, Eigen::Index rows) {
  PointMatrix p(rows, x.cols() + u.cols());
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) p(t, j) = x(t, j);
    for (Eigen::Index j = 0; j < u.cols(); ++j) p(t, x.cols() + j) = u(t, j);
  }
  return p;
}

GpPredictiveState GpPredictiveState::from_history(const Trajectory& x,
                                                  const InputSeries& u,
                                                  const HyperParams& theta) {
  check_inputs(x, u, theta);
  GpPredictiveState state(theta.state_dim(), theta.input_dim());
  const Eigen::Index rows = x.rows();
  if (rows == 0) return state;
  const PointMatrix points = make_points(x, u, rows);
  require_finite({points.data(), static_cast<std::size_t>(points.size())},
                 "value in conditioning set");
  state.points_.assign(points.data(), points.data() + points.size());
  state.num_points_ = static_cast<std::size_t>(rows);
  const Eigen::Index n = rows - 1;
  if (n == 0) return state;

  const Eigen::MatrixXd gram = kernel_gram(theta.kernel, points.topRows(n));
  for (std::size_t d = 0; d < theta.state_dim(); ++d) {
    Eigen::MatrixXd k = gram;
    k.diagonal().array() += theta.noise.variance(d);
    Eigen::LLT<Eigen::MatrixXd> llt;
    state.max_jitter_ = std::max(state.max_jitter_, robust_cholesky(k, llt));
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::VectorXd r = x.col(static_cast<Eigen::Index>(d)).segment(1, n).array() -
                        theta.mean.component(d);
    llt.matrixL().solveInPlace(r);
    auto& packed = state.chol_[d];
    packed.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) packed.push_back(L(i, j));
    }
    state.resid_[d].assign(r.data(), r.data() + n);
    state.log_density_ += -0.5 * (static_cast<double>(n) * kLog2Pi + r.squaredNorm()) -
                          L.diagonal().array().log().sum();
  }
  return state;
}

double trajectory_log_prior(const Trajectory& x, const InputSeries& u,
                            const HyperParams& theta) {
  check_inputs(x, u, theta);
  if (x.rows() == 0) throw InputError("trajectory_log_prior: empty trajectory");
  GpPredictiveState state(theta.state_dim(), theta.input_dim());
  std::vector<double> xb, ub;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    extend_in_place(state, state_row(x, t, xb), input_row(u, t, ub), theta);
  }
  double value = state.log_density();
  if (theta.initial.included) value += theta.initial.log_density(state_row(x, 0, xb));
  return value;
}

double conditional_future_log_density(const Trajectory& history,
                                      const Trajectory& future,
                                      const InputSeries& u,
                                      const HyperParams& theta) {
  if (history.rows() == 0) throw InputError("conditional future density needs a history");
  check_inputs(history, u, theta);
  if (future.rows() == 0) return 0.0;
  if (future.cols() != history.cols()) throw InputError("future has the wrong state dimension");
  const Eigen::Index t0 = history.rows();
  if (u.cols() > 0 && u.rows() < t0 + future.rows()) {
    throw InputError("inputs do not cover the future");
  }
  GpPredictiveState state(theta.state_dim(), theta.input_dim());
  std::vector<double> xb, ub;
  for (Eigen::Index t = 0; t < t0; ++t) {
    extend_in_place(state, state_row(history, t, xb), input_row(u, t, ub), theta);
  }
  const double before = state.log_density();
  for (Eigen::Index s = 0; s < future.rows(); ++s) {
    extend_in_place(state, state_row(future, s, xb), input_row(u, t0 + s, ub), theta);
  }
  return state.log_density() - before;
}

ValueGrad trajectory_log_prior_grad(const Trajectory& x, const InputSeries& u,
                                    const HyperParams& theta) {
  check_inputs(x, u, theta);
  if (x.rows() == 0) throw InputError("trajectory_log_prior_grad: empty trajectory");
  const ParamLayout layout = param_layout(theta);
  ValueGrad out;
  out.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
  std::vector<double> xb;
  if (theta.initial.included) out.value += theta.initial.log_density(state_row(x, 0, xb));
  const Eigen::Index n = x.rows() - 1;
  if (n == 0) return out;

  const PointMatrix points = make_points(x, u, n);
  require_finite({points.data(), static_cast<std::size_t>(points.size())},
                 "value in conditioning set");
  const std::size_t np = theta.kernel.num_params();
  Eigen::MatrixXd gram(n, n);
  std::vector<Eigen::MatrixXd> dgram(np, Eigen::MatrixXd(n, n));
  std::vector<double> g(np);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double k =
          theta.kernel.eval_grad(row_span(points, i), row_span(points, j), g);
      gram(i, j) = k;
      gram(j, i) = k;
      for (std::size_t p = 0; p < np; ++p) dgram[p](i, j) = g[p];
    }
  }

  // d/dtheta log N(z; m, K~) = 0.5 tr((alpha alpha^T - K~^{-1}) dK~/dtheta).
  Eigen::MatrixXd weight_sum = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t d = 0; d < theta.state_dim(); ++d) {
    Eigen::MatrixXd k = gram;
    k.diagonal().array() += theta.noise.variance(d);
    Eigen::LLT<Eigen::MatrixXd> llt;
    robust_cholesky(k, llt);
    const Eigen::VectorXd r =
        x.col(static_cast<Eigen::Index>(d)).segment(1, n).array() - theta.mean.component(d);
    const Eigen::VectorXd alpha = llt.solve(r);
    out.value += -0.5 * (r.dot(alpha) + static_cast<double>(n) * kLog2Pi) -
                 llt.matrixLLT().diagonal().array().log().sum();
    // K~^{-1} = L^{-T} L^{-1}; only the lower triangle is formed.
    Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(n, n);
    llt.matrixL().solveInPlace(linv);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    w.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose(), -1.0);
    w.selfadjointView<Eigen::Lower>().rankUpdate(alpha, 1.0);
    out.grad[static_cast<Eigen::Index>(layout.noise_begin + d)] =
        0.5 * theta.noise.variance(d) * w.trace();
    weight_sum.triangularView<Eigen::Lower>() += w;
  }
  // Symmetric contraction from the lower triangle: off-diagonal terms twice.
  weight_sum.triangularView<Eigen::StrictlyLower>() *= 2.0;
  for (std::size_t p = 0; p < np; ++p) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      acc += weight_sum.col(j).tail(n - j).dot(dgram[p].col(j).tail(n - j));
    }
    out.grad[static_cast<Eigen::Index>(layout.kernel_begin + p)] = 0.5 * acc;
  }
  return out;
}

}  // namespace gpssm
