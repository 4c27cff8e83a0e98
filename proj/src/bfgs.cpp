#include "gpssm/bfgs.hpp"

#include "gpssm/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpssm {

void OptimizerConfig::validate() const {
  if (max_iterations == 0) throw InputError("optimizer needs at least one iteration");
  if (!(gradient_tolerance > 0.0)) throw InputError("gradient tolerance must be positive");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < curvature && curvature < 1.0)) {
    throw InputError(fmt::format("line-search constants must satisfy 0 < c1 < c2 < 1, got {} and {}",
                                 sufficient_decrease, curvature));
  }
  if (max_line_search < 2) throw InputError("line search needs at least two trials");
}

namespace {

// Minimization view of the objective along a search direction.
struct LinePoint {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;  // gradient of the minimized function
  bool finite() const { return std::isfinite(phi) && std::isfinite(dphi); }
};

class LineProblem {
 public:
  LineProblem(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& dir,
              std::size_t& evaluations)
      : f_(f), x0_(x0), dir_(dir), evaluations_(evaluations) {}

  LinePoint at(double alpha) const {
    LinePoint p;
    p.alpha = alpha;
    p.x = x0_ + alpha * dir_;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x0_.size());
    const double v = f_(p.x, g);
    ++evaluations_;
    p.phi = -v;
    p.grad = -g;
    p.dphi = p.grad.allFinite() ? p.grad.dot(dir_) : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(p.phi)) p.phi = std::numeric_limits<double>::infinity();
    return p;
  }

 private:
  const Objective& f_;
  const Eigen::VectorXd& x0_;
  const Eigen::VectorXd& dir_;
  std::size_t& evaluations_;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), kept inside the
// interior of [a, b]; falls back to bisection.
double cubic_step(const LinePoint& a, const LinePoint& b) {
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  const double mid = 0.5 * (lo + hi);
  if (!a.finite() || !b.finite()) return mid;
  const double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  if (!(disc >= 0.0)) return mid;
  const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
  const double denom = b.dphi - a.dphi + 2.0 * d2;
  if (denom == 0.0) return mid;
  const double t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) return mid;
  return t;
}

struct SearchOutcome {
  LinePoint point;
  bool accepted = false;
};

SearchOutcome zoom(const LineProblem& line, const LinePoint& start, LinePoint lo,
                   LinePoint hi, const OptimizerConfig& cfg, std::size_t budget) {
  const double c1 = cfg.sufficient_decrease;
  const double c2 = cfg.curvature;
  for (std::size_t j = 0; j < budget; ++j) {
    const double alpha = cubic_step(lo, hi);
    if (alpha == lo.alpha || alpha == hi.alpha) break;
    LinePoint p = line.at(alpha);
    if (!p.finite() || p.phi > start.phi + c1 * alpha * start.dphi || p.phi >= lo.phi) {
      hi = std::move(p);
      continue;
    }
    if (std::abs(p.dphi) <= -c2 * start.dphi) return {std::move(p), true};
    if (p.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
    lo = std::move(p);
  }
  // Budget exhausted: lo still satisfies sufficient decrease if it moved.
  if (lo.alpha > 0.0) return {std::move(lo), true};
  return {std::move(lo), false};
}

SearchOutcome wolfe_search(const LineProblem& line, const LinePoint& start, double alpha0,
                           const OptimizerConfig& cfg) {
  const double c1 = cfg.sufficient_decrease;
  const double c2 = cfg.curvature;
  LinePoint prev = start;
  double alpha = alpha0;
  for (std::size_t i = 0; i < cfg.max_line_search; ++i) {
    LinePoint p = line.at(alpha);
    const std::size_t budget = cfg.max_line_search - i;
    if (!p.finite() || p.phi > start.phi + c1 * alpha * start.dphi ||
        (i > 0 && p.phi >= prev.phi)) {
      return zoom(line, start, prev, std::move(p), cfg, budget);
    }
    if (std::abs(p.dphi) <= -c2 * start.dphi) return {std::move(p), true};
    if (p.dphi >= 0.0) return zoom(line, start, std::move(p), prev, cfg, budget);
    prev = std::move(p);
    alpha *= 2.0;
  }
  if (prev.alpha > 0.0) return {std::move(prev), true};
  return {std::move(prev), false};
}

}  // namespace

MaximizeResult maximize(const Objective& objective, const Eigen::VectorXd& theta_init,
                        const OptimizerConfig& cfg,
                        const std::optional<Eigen::MatrixXd>& inverse_hessian) {
  cfg.validate();
  const Eigen::Index n = theta_init.size();
  MaximizeResult res;
  res.theta = theta_init;
  res.gradient = Eigen::VectorXd::Zero(n);
  res.value = objective(theta_init, res.gradient);
  res.evaluations = 1;
  res.initial_value = res.value;
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    throw InputError("objective is not finite at the starting point");
  }

  bool scaled = false;
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  if (inverse_hessian && inverse_hessian->rows() == n && inverse_hessian->cols() == n) {
    h = *inverse_hessian;
    scaled = true;
  }

  Eigen::VectorXd g = -res.gradient;  // gradient of the minimized function
  double f = -res.value;
  bool moved = false;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    if (g.norm() < cfg.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -h * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      h.setIdentity();
      scaled = false;
      dir = -g;
      slope = g.dot(dir);
    }
    const double alpha0 = scaled ? 1.0 : std::min(1.0, 1.0 / dir.norm());

    LinePoint start;
    start.phi = f;
    start.dphi = slope;
    start.grad = g;
    start.x = res.theta;
    const LineProblem line(objective, res.theta, dir, res.evaluations);
    SearchOutcome out = wolfe_search(line, start, alpha0, cfg);
    if (!out.accepted || !(out.point.phi < f)) break;
    if (!(out.point.phi <= f + cfg.sufficient_decrease * out.point.alpha * slope)) {
      ++res.armijo_violations;
    }

    const Eigen::VectorXd s = out.point.x - res.theta;
    const Eigen::VectorXd y = out.point.grad - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm() && sy > 0.0) {
      if (!scaled) {
        h = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      const double yhy = y.dot(hy);
      h += (rho * rho * yhy + rho) * (s * s.transpose()) -
           rho * (hy * s.transpose() + s * hy.transpose());
    } else {
      ++res.skipped_updates;
    }

    res.theta = out.point.x;
    f = out.point.phi;
    g = out.point.grad;
    moved = true;
    res.iterations = it + 1;
  }
  if (!res.converged && g.norm() < cfg.gradient_tolerance) res.converged = true;
  res.value = -f;
  res.gradient = -g;
  res.no_progress = !moved && !res.converged;
  res.inverse_hessian = h;
  return res;
}

double finite_diff_check(const Objective& objective, const Eigen::VectorXd& theta,
                         double step) {
  const Eigen::Index n = theta.size();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
  objective(theta, grad);
  Eigen::VectorXd scratch(n);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = step * std::max(1.0, std::abs(theta[i]));
    Eigen::VectorXd plus = theta, minus = theta;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (objective(plus, scratch) - objective(minus, scratch)) / (plus[i] - minus[i]);
    const double err = std::abs(grad[i] - fd) /
                       std::max({1.0, std::abs(grad[i]), std::abs(fd)});
    if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace gpssm
