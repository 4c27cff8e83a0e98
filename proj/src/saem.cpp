#include "gpssm/saem.hpp"

#include "gpssm/errors.hpp"
#include "gpssm/parallel.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gpssm {

void StepSchedule::validate() const {
  if (!(exponent > 0.5 && exponent <= 1.0)) {
    throw InputError(fmt::format("step-size exponent {} outside (0.5, 1]", exponent));
  }
}

double step_size(const StepSchedule& schedule, std::size_t k) {
  if (k == 0) throw InputError("step_size: iterations start at 1");
  if (k <= schedule.burn_in) return 1.0;
  return std::pow(static_cast<double>(k - schedule.burn_in), -schedule.exponent);
}

WeightedTrajectorySet::WeightedTrajectorySet(double prune_epsilon)
    : epsilon_(prune_epsilon) {
  if (!(prune_epsilon >= 0.0 && prune_epsilon < 1.0)) {
    throw InputError("pruning threshold must lie in [0, 1)");
  }
}

void WeightedTrajectorySet::add(Trajectory trajectory, double gamma,
                                std::size_t iteration) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw InputError(fmt::format("step size {} outside (0, 1]", gamma));
  }
  for (auto& e : entries_) e.weight *= 1.0 - gamma;
  entries_.push_back({std::move(trajectory), gamma, iteration});

  dropped_ = 0.0;
  std::vector<WeightedEntry> kept;
  kept.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const bool newest = i + 1 == entries_.size();
    if (entries_[i].weight < epsilon_ && !newest) {
      dropped_ += entries_[i].weight;
    } else if (entries_[i].weight > 0.0 || newest) {
      kept.push_back(std::move(entries_[i]));
    }
  }
  entries_ = std::move(kept);
  if (dropped_ > 0.0 || gamma == 1.0) {
    double total = 0.0;
    for (const auto& e : entries_) total += e.weight;
    for (auto& e : entries_) e.weight /= total;
  }
}

WeightedTrajectorySet WeightedTrajectorySet::restore(double prune_epsilon,
                                                     std::vector<WeightedEntry> entries) {
  WeightedTrajectorySet set(prune_epsilon);
  double total = 0.0;
  for (const auto& e : entries) {
    if (!(e.weight > 0.0 && e.weight <= 1.0)) {
      throw InputError(fmt::format("restored weight {} outside (0, 1]", e.weight));
    }
    total += e.weight;
  }
  if (!entries.empty() && std::abs(total - 1.0) > 1e-9) {
    throw InputError(fmt::format("restored weights sum to {}", total));
  }
  set.entries_ = std::move(entries);
  return set;
}

WeightedTrajectorySet update(WeightedTrajectorySet set, Trajectory trajectory,
                             double gamma, std::size_t iteration) {
  set.add(std::move(trajectory), gamma, iteration);
  return set;
}

namespace {

double observation_terms(const Dataset& data, const Trajectory& x,
                         const HyperParams& theta, Eigen::VectorXd* grad) {
  const ParamLayout layout = param_layout(theta);
  const std::size_t nx = theta.state_dim();
  std::vector<double> row(nx);
  std::vector<double> g(layout.obs_count);
  double value = 0.0;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    for (std::size_t d = 0; d < nx; ++d) row[d] = x(t, static_cast<Eigen::Index>(d));
    value += theta.obs.log_lik(data.y[t], row);
    if (grad && layout.obs_count > 0) {
      theta.obs.log_lik_grad(data.y[t], row, g);
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*grad)[static_cast<Eigen::Index>(layout.obs_begin + i)] += g[i];
      }
    }
  }
  return value;
}

void check_alignment(const Dataset& data, const Trajectory& x) {
  if (static_cast<std::size_t>(x.rows()) != data.length()) {
    throw InputError(fmt::format("trajectory has {} rows, data has {}", x.rows(),
                                 data.length()));
  }
}

}  // namespace

ValueGrad complete_data_log_lik(const Dataset& data, const Trajectory& x,
                                const HyperParams& theta) {
  check_alignment(data, x);
  ValueGrad out = trajectory_log_prior_grad(x, data.u, theta);
  out.value += observation_terms(data, x, theta, &out.grad);
  return out;
}

double complete_data_log_lik_value(const Dataset& data, const Trajectory& x,
                                   const HyperParams& theta) {
  check_alignment(data, x);
  return trajectory_log_prior(x, data.u, theta) +
         observation_terms(data, x, theta, nullptr);
}

ValueGrad q_value_grad(const WeightedTrajectorySet& set, const Dataset& data,
                       const HyperParams& theta, Execution execution) {
  if (set.empty()) throw InputError("q_value on an empty trajectory set");
  const auto& entries = set.entries();
  std::vector<ValueGrad> terms(entries.size());
  parallel_for(entries.size(), execution, [&](std::size_t j) {
    terms[j] = complete_data_log_lik(data, entries[j].trajectory, theta);
  });
  ValueGrad out;
  out.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_layout(theta).size()));
  for (std::size_t j = 0; j < entries.size(); ++j) {
    out.value += entries[j].weight * terms[j].value;
    out.grad += entries[j].weight * terms[j].grad;
  }
  return out;
}

double q_value(const WeightedTrajectorySet& set, const Dataset& data,
               const HyperParams& theta, Execution execution) {
  return q_value_grad(set, data, theta, execution).value;
}

Eigen::VectorXd q_grad(const WeightedTrajectorySet& set, const Dataset& data,
                       const HyperParams& theta, Execution execution) {
  return q_value_grad(set, data, theta, execution).grad;
}

ValueGrad q_value_grad_reference(const WeightedTrajectorySet& set,
                                 const Dataset& data, const HyperParams& theta) {
  if (set.empty()) throw InputError("q_value on an empty trajectory set");
  ValueGrad out;
  out.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_layout(theta).size()));
  for (const auto& e : set.entries()) {
    out.value += e.weight * complete_data_log_lik_value(data, e.trajectory, theta);
    out.grad += e.weight * complete_data_log_lik(data, e.trajectory, theta).grad;
  }
  return out;
}

}  // namespace gpssm
