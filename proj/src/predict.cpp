#include "gpssm/predict.hpp"

#include "gpssm/errors.hpp"
#include "gpssm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gpssm {

TransitionPosterior::TransitionPosterior(const Trajectory& x, const InputSeries& u,
                                         const HyperParams& theta)
    : theta_(theta) {
  theta.validate();
  if (x.rows() < 1 || static_cast<std::size_t>(x.cols()) != theta.state_dim()) {
    throw InputError("TransitionPosterior: trajectory shape does not match the model");
  }
  if (u.rows() < x.rows() || static_cast<std::size_t>(u.cols()) != theta.input_dim()) {
    throw InputError("TransitionPosterior: inputs do not cover the trajectory");
  }
  const Eigen::Index n = x.rows() - 1;
  points_ = make_points(x, u, n);
  if (n == 0) return;
  const Eigen::MatrixXd gram = kernel_gram(theta.kernel, points_);
  for (std::size_t d = 0; d < theta.state_dim(); ++d) {
    Eigen::MatrixXd k = gram;
    k.diagonal().array() += theta.noise.variance(d);
    Eigen::LLT<Eigen::MatrixXd> llt;
    robust_cholesky(k, llt);
    Eigen::VectorXd r = x.col(static_cast<Eigen::Index>(d)).segment(1, n).array() -
                        theta.mean.component(d);
    alpha_.push_back(llt.solve(r));
    llt_.push_back(std::move(llt));
  }
}

PredictiveMoments TransitionPosterior::at(std::span<const double> x,
                                          std::span<const double> u) const {
  if (x.size() != theta_.state_dim() || u.size() != theta_.input_dim()) {
    throw InputError("TransitionPosterior: query dimension mismatch");
  }
  std::vector<double> z(x.begin(), x.end());
  z.insert(z.end(), u.begin(), u.end());
  const std::size_t sd = theta_.state_dim();
  PredictiveMoments m{Eigen::VectorXd(static_cast<Eigen::Index>(sd)),
                      Eigen::VectorXd(static_cast<Eigen::Index>(sd))};
  const double prior_var = theta_.kernel(z, z);
  const Eigen::Index n = points_.rows();
  Eigen::VectorXd cross(n);
  for (Eigen::Index i = 0; i < n; ++i) cross[i] = theta_.kernel(row_span(points_, i), z);
  for (std::size_t d = 0; d < sd; ++d) {
    const auto di = static_cast<Eigen::Index>(d);
    m.mean[di] = theta_.mean.component(d);
    m.variance[di] = prior_var;
    if (n == 0) continue;
    m.mean[di] += cross.dot(alpha_[d]);
    Eigen::VectorXd v = cross;
    llt_[d].matrixL().solveInPlace(v);
    m.variance[di] = std::max(prior_var - v.squaredNorm(), 0.0);
  }
  return m;
}

TransitionMixture::TransitionMixture(std::vector<TransitionPosterior> parts,
                                     std::vector<double> weights)
    : parts_(std::move(parts)), weights_(std::move(weights)) {
  if (parts_.empty() || parts_.size() != weights_.size()) {
    throw InputError("TransitionMixture: need one weight per component");
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (!(total > 0.0) || std::any_of(weights_.begin(), weights_.end(),
                                    [](double w) { return !(w >= 0.0); })) {
    throw InputError("TransitionMixture: weights must be non-negative with positive sum");
  }
  for (double& w : weights_) w /= total;
}

TransitionMixture TransitionMixture::from_artifacts(const RunArtifacts& artifacts,
                                                    const HyperParams& theta,
                                                    std::size_t average_top) {
  if (average_top == 0 || artifacts.final_set.empty()) {
    if (artifacts.final_trajectory.rows() == 0) {
      throw InputError("predict: artifacts hold no final trajectory");
    }
    return TransitionMixture({TransitionPosterior(artifacts.final_trajectory, artifacts.inputs, theta)},
                             {1.0});
  }
  const auto& entries = artifacts.final_set.entries();
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].weight != entries[b].weight) return entries[a].weight > entries[b].weight;
    return entries[a].iteration > entries[b].iteration;
  });
  order.resize(std::min(order.size(), average_top));
  std::vector<TransitionPosterior> parts;
  std::vector<double> weights;
  for (std::size_t i : order) {
    parts.emplace_back(entries[i].trajectory, artifacts.inputs, theta);
    weights.push_back(entries[i].weight);
  }
  return TransitionMixture(std::move(parts), std::move(weights));
}

PredictiveMoments TransitionMixture::at(std::span<const double> x,
                                        std::span<const double> u) const {
  PredictiveMoments out;
  Eigen::VectorXd second;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    const PredictiveMoments m = parts_[i].at(x, u);
    if (i == 0) {
      out.mean = Eigen::VectorXd::Zero(m.mean.size());
      second = Eigen::VectorXd::Zero(m.mean.size());
    }
    out.mean += weights_[i] * m.mean;
    second += weights_[i] * (m.variance.array() + m.mean.array().square()).matrix();
  }
  if (parts_.size() == 1) {
    out.variance = parts_[0].at(x, u).variance;
  } else {
    out.variance = (second.array() - out.mean.array().square()).max(0.0).matrix();
  }
  return out;
}

namespace {

void require_scalar(const HyperParams& theta) {
  if (theta.state_dim() != 1 || theta.input_dim() > 1) {
    throw InputError("predict: only scalar states with at most one input are supported");
  }
}

}  // namespace

std::vector<PredictionRecord> predict_onestep(const RunArtifacts& artifacts,
                                              const HyperParams& theta, const Dataset& test,
                                              const PredictOptions& options) {
  require_scalar(theta);
  test.validate();
  if (!test.x_true) throw InputError("predict: the test set has no ground-truth states");
  if (test.input_dim() != theta.input_dim()) {
    throw InputError("predict: test inputs do not match the model");
  }
  const TransitionMixture mix = TransitionMixture::from_artifacts(artifacts, theta, options.average_top);
  const Trajectory& xs = *test.x_true;
  const double q = theta.noise.variance(0);
  std::vector<PredictionRecord> out;
  for (Eigen::Index t = 0; t + 1 < xs.rows(); ++t) {
    const double x = xs(t, 0);
    const double u = test.u.cols() > 0 ? test.u(t, 0) : 0.0;
    const std::span<const double> us(test.u.cols() > 0 ? &test.u(t, 0) : nullptr,
                                     test.input_dim());
    const PredictiveMoments m = mix.at(std::span<const double>(&x, 1), us);
    PredictionRecord rec{x, u, m.mean[0], 0.0, std::nullopt};
    if (options.mode == PredictionMode::state) {
      rec.std = std::sqrt(m.variance[0] + q);
      rec.truth = xs(t + 1, 0);
    } else {
      rec.mean -= x;
      rec.std = std::sqrt(m.variance[0]);
      if (options.true_transition) rec.truth = options.true_transition(x, u) - x;
    }
    out.push_back(rec);
  }
  return out;
}

std::vector<PredictionRecord> predict_surface(const RunArtifacts& artifacts,
                                              const HyperParams& theta,
                                              const std::vector<std::array<double, 2>>& grid,
                                              const PredictOptions& options) {
  require_scalar(theta);
  if (grid.empty()) throw InputError("predict_surface: empty grid");
  const TransitionMixture mix = TransitionMixture::from_artifacts(artifacts, theta, options.average_top);
  std::vector<PredictionRecord> out;
  out.reserve(grid.size());
  for (const auto& node : grid) {
    const PredictiveMoments m = mix.at(std::span<const double>(&node[0], 1),
                                       std::span<const double>(&node[1], theta.input_dim()));
    PredictionRecord rec{node[0], node[1], m.mean[0], std::sqrt(m.variance[0]), std::nullopt};
    if (options.true_transition) rec.truth = options.true_transition(node[0], node[1]);
    out.push_back(rec);
  }
  return out;
}

std::vector<std::array<double, 2>> make_grid(double x_lo, double x_hi, std::size_t nx,
                                             double u_lo, double u_hi, std::size_t nu) {
  if (nx == 0 || nu == 0) throw InputError("make_grid: empty lattice");
  auto node = [](double lo, double hi, std::size_t i, std::size_t n) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  std::vector<std::array<double, 2>> grid;
  grid.reserve(nx * nu);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < nu; ++j) grid.push_back({node(x_lo, x_hi, i, nx), node(u_lo, u_hi, j, nu)});
  }
  return grid;
}

double coverage(const std::vector<PredictionRecord>& records, double width) {
  std::size_t total = 0, inside = 0;
  for (const auto& r : records) {
    if (!r.truth) continue;
    ++total;
    if (std::abs(*r.truth - r.mean) <= width * r.std) ++inside;
  }
  return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

}  // namespace gpssm
