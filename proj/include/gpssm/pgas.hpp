#ifndef GPSSM_PGAS_HPP_
#define GPSSM_PGAS_HPP_

#include "gpssm/gp_prior.hpp"
#include "gpssm/hyperparams.hpp"
#include "gpssm/types.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gpssm {

enum class Resampling { systematic };

struct PgasConfig {
  std::size_t particles = 15;
  // Ancestor-weight horizon L; 0 means exact (the whole reference future).
  std::size_t truncation = 0;
  Resampling resampling = Resampling::systematic;
  Execution execution = Execution::parallel;

  void validate() const;
};

// `count` offspring indices from normalized weights using the single uniform
// offset u in [0, 1). Throws InputError when the weights are not normalized.
std::vector<std::size_t> systematic_resample(std::span<const double> weights,
                                             std::size_t count, double u);
std::vector<std::size_t> systematic_resample(std::span<const double> weights,
                                             std::mt19937_64& rng);

/// Conditional SMC particle system for one PGAS sweep.
///
/// Slots 0..N-2 are free particles; the last slot is pinned to the reference
/// trajectory. Each slot owns an incrementally factorized GP predictive state
/// of its full history, because the marginalized transition prior is not
/// Markovian. The system keeps pointers to data, reference and theta; they
/// must outlive it.
class ParticleSystem {
 public:
  ParticleSystem(const Dataset& data, const Trajectory& reference,
                 const HyperParams& theta, const PgasConfig& cfg);

  // System at time histories[i].rows() - 1 with the given particle histories
  // (the last one must be the reference prefix) and log-weights.
  static ParticleSystem from_histories(const Dataset& data, const Trajectory& reference,
                                       const HyperParams& theta, const PgasConfig& cfg,
                                       const std::vector<Trajectory>& histories,
                                       std::span<const double> log_weights);

  std::size_t size() const { return states_.size(); }
  std::size_t reference_slot() const { return states_.size() - 1; }
  // Particles currently hold x_{0:time()}.
  std::size_t time() const { return time_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  const GpPredictiveState& state(std::size_t i) const { return states_[i]; }
  Trajectory trajectory(std::size_t i) const { return states_[i].states(); }
  // ancestors()[t][i] is the slot at t-1 that slot i at time t descends from.
  const std::vector<std::vector<std::size_t>>& ancestors() const { return ancestors_; }

  // Time 0: free slots drawn from the initial-state prior, reference slot
  // set to x'_0, weights from the first observation.
  void initialize(std::uint64_t sweep_seed);
  // One conditional SMC step t-1 -> t.
  void advance(std::uint64_t sweep_seed, std::mt19937_64& rng);

  // log w_{t-1}^i + log p(x'_{t:t+L-1} | x^i_{0:t-1}) for t = time() + 1,
  // for every slot i. Blocked dense algebra, parallel over slots.
  std::vector<double> ancestor_log_weights() const;
  // Same quantity via chained conditional_future_log_density on rebuilt
  // histories; serial reference implementation.
  std::vector<double> ancestor_log_weights_reference() const;

 private:
  void normalize_weights();
  void fill_cross_cache(std::size_t time);
  double future_log_density(std::size_t slot, std::size_t t, std::size_t end) const;
  std::span<const double> input_at(std::size_t t) const;

  const Dataset* data_;
  const Trajectory* reference_;
  const HyperParams* theta_;
  PgasConfig cfg_;
  std::size_t horizon_;
  std::size_t time_ = 0;

  std::vector<GpPredictiveState> states_;
  // lineage_[i][s] is the slot (at time s) on the path of particle i.
  std::vector<std::vector<std::uint32_t>> lineage_;
  std::vector<double> log_weights_;
  std::vector<double> weights_;
  std::vector<std::vector<std::size_t>> ancestors_;

  // Reference kernel inputs z'_r (rows 0..T) and their Gram matrix.
  PointMatrix ref_points_;
  Eigen::MatrixXd ref_gram_;
  // cross_[s * N + j][r] = k(z^j_s, z'_r) for r > s.
  std::vector<std::vector<double>> cross_;
};

// Draws the reference slot's ancestor for time system.time() + 1.
std::size_t ancestor_sample(const ParticleSystem& system, std::mt19937_64& rng);

/// One PGAS Markov-kernel step: x* ~ P_N(. | reference). Consumes exactly one
/// draw from rng for the sweep seed plus the resampling / ancestor / final
/// selection draws, so results are identical for serial and parallel runs.
Trajectory pgas_sweep(const Dataset& data, const Trajectory& reference,
                      const HyperParams& theta, const PgasConfig& cfg,
                      std::mt19937_64& rng);

}  // namespace gpssm

#endif  // GPSSM_PGAS_HPP_
