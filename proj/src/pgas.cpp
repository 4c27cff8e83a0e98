#include "gpssm/pgas.hpp"

#include "gpssm/errors.hpp"
#include "gpssm/parallel.hpp"
#include "gpssm/random.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace gpssm {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

}  // namespace

void PgasConfig::validate() const {
  if (particles < 1) throw InputError("PGAS needs at least one particle");
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights,
                                             std::size_t count, double u) {
  if (weights.empty()) throw InputError("systematic_resample: empty weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InputError("systematic_resample: negative or NaN weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InputError(fmt::format("systematic_resample: weights sum to {}, not 1", total));
  }
  if (!(u >= 0.0 && u < 1.0)) throw InputError("systematic_resample: offset outside [0,1)");
  std::vector<std::size_t> out(count);
  const std::size_t last = weights.size() - 1;
  std::size_t i = 0;
  double cumulative = weights[0];
  for (std::size_t k = 0; k < count; ++k) {
    const double position = (static_cast<double>(k) + u) / static_cast<double>(count);
    while (position >= cumulative && i < last) cumulative += weights[++i];
    out[k] = i;
  }
  return out;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights,
                                             std::mt19937_64& rng) {
  return systematic_resample(weights, weights.size(), uniform01(rng));
}

ParticleSystem::ParticleSystem(const Dataset& data, const Trajectory& reference,
                               const HyperParams& theta, const PgasConfig& cfg)
    : data_(&data), reference_(&reference), theta_(&theta), cfg_(cfg) {
  cfg.validate();
  data.validate();
  theta.validate();
  if (static_cast<std::size_t>(reference.rows()) != data.length() ||
      static_cast<std::size_t>(reference.cols()) != theta.state_dim()) {
    throw InputError(fmt::format("reference trajectory is {}x{}, expected {}x{}",
                                 reference.rows(), reference.cols(), data.length(),
                                 theta.state_dim()));
  }
  if (data.input_dim() != theta.input_dim()) {
    throw InputError("dataset inputs disagree with the kernel input dimension");
  }
  horizon_ = data.horizon();
  ref_points_ = make_points(reference, data.u, reference.rows());
  if (horizon_ > 0) {
    ref_gram_ = kernel_gram(theta.kernel, ref_points_.topRows(static_cast<Eigen::Index>(horizon_)));
  }
  const std::size_t n = cfg.particles;
  states_.assign(n, GpPredictiveState(theta.state_dim(), theta.input_dim()));
  lineage_.assign(n, {});
  log_weights_.assign(n, 0.0);
  weights_.assign(n, 1.0 / static_cast<double>(n));
  cross_.assign(n * (horizon_ + 1), {});
}

std::span<const double> ParticleSystem::input_at(std::size_t t) const {
  const std::size_t nx = theta_->state_dim();
  return {ref_points_.data() + t * ref_points_.cols() + nx, theta_->input_dim()};
}

ParticleSystem ParticleSystem::from_histories(const Dataset& data,
                                              const Trajectory& reference,
                                              const HyperParams& theta,
                                              const PgasConfig& cfg,
                                              const std::vector<Trajectory>& histories,
                                              std::span<const double> log_weights) {
  ParticleSystem sys(data, reference, theta, cfg);
  if (histories.size() != sys.size() || log_weights.size() != sys.size()) {
    throw InputError("from_histories: one history and weight per particle required");
  }
  const Eigen::Index rows = histories.front().rows();
  if (rows == 0 || static_cast<std::size_t>(rows) > data.length()) {
    throw InputError("from_histories: bad history length");
  }
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (histories[i].rows() != rows) throw InputError("from_histories: ragged histories");
    sys.states_[i] = GpPredictiveState::from_history(histories[i], data.u, theta);
    sys.lineage_[i].assign(static_cast<std::size_t>(rows), static_cast<std::uint32_t>(i));
  }
  sys.time_ = static_cast<std::size_t>(rows - 1);
  sys.log_weights_.assign(log_weights.begin(), log_weights.end());
  sys.normalize_weights();
  for (std::size_t s = 0; s <= sys.time_; ++s) sys.fill_cross_cache(s);
  return sys;
}

void ParticleSystem::normalize_weights() {
  double top = -std::numeric_limits<double>::infinity();
  for (double l : log_weights_) {
    if (!std::isnan(l)) top = std::max(top, l);
  }
  if (!std::isfinite(top)) {
    throw ParticleDegeneracy(fmt::format("all particle weights vanished at t={}", time_),
                             time_);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < log_weights_.size(); ++i) {
    const double l = log_weights_[i];
    weights_[i] = std::isnan(l) ? 0.0 : std::exp(l - top);
    total += weights_[i];
  }
  const double log_total = std::log(total) + top;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= total;
    log_weights_[i] = std::isnan(log_weights_[i])
                          ? -std::numeric_limits<double>::infinity()
                          : log_weights_[i] - log_total;
  }
}

void ParticleSystem::fill_cross_cache(std::size_t s) {
  if (s + 1 >= horizon_) return;
  const std::size_t n = size();
  parallel_for(n, cfg_.execution, [&](std::size_t j) {
    auto& row = cross_[s * n + j];
    row.assign(horizon_, 0.0);
    const auto z = states_[j].point(s);
    for (std::size_t r = s + 1; r < horizon_; ++r) {
      row[r] = theta_->kernel(z, row_span(ref_points_, static_cast<Eigen::Index>(r)));
    }
  });
}

void ParticleSystem::initialize(std::uint64_t sweep_seed) {
  const std::size_t n = size();
  const std::size_t nx = theta_->state_dim();
  const std::size_t ref = reference_slot();
  time_ = 0;
  ancestors_.clear();
  parallel_for(n, cfg_.execution, [&](std::size_t j) {
    std::vector<double> x(nx);
    if (j == ref) {
      for (std::size_t d = 0; d < nx; ++d) x[d] = (*reference_)(0, static_cast<Eigen::Index>(d));
    } else {
      auto rng = stream_rng(sweep_seed, 0, j);
      for (std::size_t d = 0; d < nx; ++d) x[d] = theta_->initial.std * standard_normal(rng);
    }
    states_[j] = GpPredictiveState(nx, theta_->input_dim());
    states_[j].append(Prediction{}, x, input_at(0));
    lineage_[j].assign(1, static_cast<std::uint32_t>(j));
    log_weights_[j] = theta_->obs.log_lik(data_->y[0], x);
  });
  normalize_weights();
  fill_cross_cache(0);
}

void ParticleSystem::advance(std::uint64_t sweep_seed, std::mt19937_64& rng) {
  if (time_ >= horizon_) throw InputError("particle system already reached the horizon");
  const std::size_t t = time_ + 1;
  const std::size_t n = size();
  const std::size_t nx = theta_->state_dim();
  const std::size_t ref = reference_slot();

  std::vector<std::size_t> ancestors(n, 0);
  if (n > 1) {
    const auto offspring = systematic_resample(weights_, n - 1, uniform01(rng));
    std::copy(offspring.begin(), offspring.end(), ancestors.begin());
    ancestors[ref] = ancestor_sample(*this, rng);
  }

  // Copy (or move, on the last use) each ancestor's history into its child.
  std::vector<std::size_t> uses(n, 0);
  for (std::size_t a : ancestors) ++uses[a];
  std::vector<GpPredictiveState> states;
  std::vector<std::vector<std::uint32_t>> lineage;
  states.reserve(n);
  lineage.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t a = ancestors[j];
    if (--uses[a] == 0) {
      states.push_back(std::move(states_[a]));
      lineage.push_back(std::move(lineage_[a]));
    } else {
      states.push_back(states_[a]);
      lineage.push_back(lineage_[a]);
    }
  }
  states_ = std::move(states);
  lineage_ = std::move(lineage);

  const auto u = input_at(t);
  const double y = data_->y[static_cast<Eigen::Index>(t)];
  parallel_for(n, cfg_.execution, [&](std::size_t j) {
    const Prediction pred = predict(states_[j], *theta_);
    std::vector<double> x(nx);
    if (j == ref) {
      for (std::size_t d = 0; d < nx; ++d) x[d] = (*reference_)(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d));
    } else {
      auto stream = stream_rng(sweep_seed, t, j);
      for (std::size_t d = 0; d < nx; ++d) {
        const auto di = static_cast<Eigen::Index>(d);
        x[d] = pred.moments.mean[di] +
               std::sqrt(pred.moments.variance[di]) * standard_normal(stream);
      }
    }
    states_[j].append(pred, x, u);
    lineage_[j].push_back(static_cast<std::uint32_t>(j));
    log_weights_[j] = theta_->obs.log_lik(y, x);
  });

  time_ = t;
  ancestors_.push_back(std::move(ancestors));
  normalize_weights();
  fill_cross_cache(t);
}

double ParticleSystem::future_log_density(std::size_t slot, std::size_t t,
                                          std::size_t end) const {
  const GpPredictiveState& state = states_[slot];
  const HyperParams& theta = *theta_;
  const Trajectory& ref = *reference_;
  const Prediction pred = predict(state, theta);
  const auto n = static_cast<Eigen::Index>(t);
  const auto f = static_cast<Eigen::Index>(end - t);
  const std::size_t nodes = size();

  Eigen::MatrixXd cross;
  if (f > 0) {
    cross.resize(n, f);
    const auto& lin = lineage_[slot];
    for (Eigen::Index s = 0; s < n; ++s) {
      const auto& row = cross_[static_cast<std::size_t>(s) * nodes + lin[static_cast<std::size_t>(s)]];
      for (Eigen::Index c = 0; c < f; ++c) cross(s, c) = row[t + static_cast<std::size_t>(c)];
    }
  }

  double total = 0.0;
  for (std::size_t d = 0; d < theta.state_dim(); ++d) {
    const auto di = static_cast<Eigen::Index>(d);
    const double sd = std::sqrt(pred.moments.variance[di]);
    const double beta = (ref(n, di) - pred.moments.mean[di]) / sd;
    total += -0.5 * (kLog2Pi + beta * beta) - std::log(sd);
    if (f == 0) continue;

    // Factor of K~ over the particle history with x'_t appended, then the
    // Gaussian conditional of the reference future given that history.
    Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const auto row = state.factor_row(d, static_cast<std::size_t>(i));
      for (Eigen::Index j = 0; j <= i; ++j) chol(i, j) = row[static_cast<std::size_t>(j)];
    }
    for (Eigen::Index j = 0; j + 1 < n; ++j) chol(n - 1, j) = pred.solved[d][static_cast<std::size_t>(j)];
    chol(n - 1, n - 1) = sd;
    Eigen::VectorXd resid(n);
    const auto solved = state.solved_residual(d);
    for (Eigen::Index j = 0; j + 1 < n; ++j) resid[j] = solved[static_cast<std::size_t>(j)];
    resid[n - 1] = beta;

    Eigen::MatrixXd w = cross;
    chol.triangularView<Eigen::Lower>().solveInPlace(w);
    Eigen::MatrixXd cov = ref_gram_.block(n, n, f, f);
    cov.diagonal().array() += theta.noise.variance(d);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), -1.0);
    Eigen::VectorXd r = ref.col(di).segment(n + 1, f).array() - theta.mean.component(d);
    r.noalias() -= w.transpose() * resid;
    Eigen::LLT<Eigen::MatrixXd> llt;
    robust_cholesky(cov, llt);
    llt.matrixL().solveInPlace(r);
    total += -0.5 * (static_cast<double>(f) * kLog2Pi + r.squaredNorm()) -
             llt.matrixLLT().diagonal().array().log().sum();
  }
  return total;
}

std::vector<double> ParticleSystem::ancestor_log_weights() const {
  const std::size_t t = time_ + 1;
  if (t > horizon_) throw InputError("no future left to sample ancestors for");
  const std::size_t end =
      cfg_.truncation == 0 ? horizon_ : std::min(horizon_, t + cfg_.truncation - 1);
  std::vector<double> out(size());
  parallel_for(size(), cfg_.execution, [&](std::size_t i) {
    out[i] = log_weights_[i] + future_log_density(i, t, end);
  });
  return out;
}

std::vector<double> ParticleSystem::ancestor_log_weights_reference() const {
  const std::size_t t = time_ + 1;
  if (t > horizon_) throw InputError("no future left to sample ancestors for");
  const std::size_t end =
      cfg_.truncation == 0 ? horizon_ : std::min(horizon_, t + cfg_.truncation - 1);
  const Trajectory future = reference_->middleRows(
      static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(end - t + 1));
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out[i] = log_weights_[i] +
             conditional_future_log_density(trajectory(i), future, data_->u, *theta_);
  }
  return out;
}

std::size_t ancestor_sample(const ParticleSystem& system, std::mt19937_64& rng) {
  if (system.size() == 1) return 0;
  const auto lw = system.ancestor_log_weights();
  bool any = false;
  for (double l : lw) any = any || (l > -std::numeric_limits<double>::infinity());
  if (!any) {
    throw ParticleDegeneracy(
        fmt::format("all ancestor weights vanished at t={}", system.time() + 1),
        system.time() + 1);
  }
  return sample_log_categorical(lw, rng);
}

Trajectory pgas_sweep(const Dataset& data, const Trajectory& reference,
                      const HyperParams& theta, const PgasConfig& cfg,
                      std::mt19937_64& rng) {
  const std::uint64_t seed = rng();
  ParticleSystem system(data, reference, theta, cfg);
  system.initialize(seed);
  for (std::size_t t = 1; t <= data.horizon(); ++t) system.advance(seed, rng);
  const std::size_t pick = sample_categorical(system.weights(), rng);
  return system.trajectory(pick);
}

}  // namespace gpssm
