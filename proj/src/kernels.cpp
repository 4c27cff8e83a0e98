#include "gpssm/kernels.hpp"

#include "gpssm/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>

namespace gpssm {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.23606797749979;

void require_positive(const std::vector<double>& values, const char* what) {
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InputError(fmt::format("{} must be positive and finite", what));
    }
  }
}

std::string join_names(std::span<const std::string> names) {
  std::string out;
  for (const auto& n : names) out += n;
  return out;
}

}  // namespace

Kernel Kernel::linear(std::vector<double> variances) {
  if (variances.empty()) throw InputError("linear kernel needs at least one dimension");
  require_positive(variances, "linear kernel variance");
  Kernel k;
  k.family_ = KernelFamily::linear;
  k.dim_ = variances.size();
  for (double v : variances) k.log_params_.push_back(std::log(v));
  k.set_log_params(k.log_params_);
  return k;
}

Kernel Kernel::squared_exponential(std::vector<double> lengthscales,
                                   std::optional<double> signal_variance) {
  if (lengthscales.empty()) throw InputError("SE kernel needs at least one dimension");
  require_positive(lengthscales, "SE length-scale");
  Kernel k;
  k.family_ = KernelFamily::squared_exponential;
  k.dim_ = lengthscales.size();
  for (double l : lengthscales) k.log_params_.push_back(std::log(l));
  if (signal_variance) {
    require_positive({*signal_variance}, "signal variance");
    k.has_signal_variance_ = true;
    k.log_params_.push_back(std::log(*signal_variance));
  }
  k.set_log_params(k.log_params_);
  return k;
}

Kernel Kernel::matern(std::size_t dim, double lengthscale,
                      std::optional<double> signal_variance, MaternOrder order) {
  if (dim == 0) throw InputError("Matern kernel needs at least one dimension");
  require_positive({lengthscale}, "Matern length-scale");
  Kernel k;
  k.family_ = KernelFamily::matern;
  k.order_ = order;
  k.dim_ = dim;
  k.log_params_.push_back(std::log(lengthscale));
  if (signal_variance) {
    require_positive({*signal_variance}, "signal variance");
    k.has_signal_variance_ = true;
    k.log_params_.push_back(std::log(*signal_variance));
  }
  k.set_log_params(k.log_params_);
  return k;
}

Kernel Kernel::product(std::vector<Kernel> blocks) {
  if (blocks.empty()) throw InputError("product kernel needs at least one block");
  Kernel k;
  k.family_ = KernelFamily::product;
  for (const auto& b : blocks) {
    if (b.family_ == KernelFamily::product) {
      throw InputError("nested product kernels are not supported");
    }
    k.dim_ += b.dim_;
  }
  k.blocks_ = std::move(blocks);
  return k;
}

std::size_t Kernel::num_params() const {
  if (family_ != KernelFamily::product) return log_params_.size();
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.num_params();
  return n;
}

std::vector<double> Kernel::log_params() const {
  if (family_ != KernelFamily::product) return log_params_;
  std::vector<double> out;
  for (const auto& b : blocks_) {
    auto p = b.log_params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void Kernel::set_log_params(std::span<const double> values) {
  if (values.size() != num_params()) {
    throw InputError(fmt::format("kernel expects {} parameters, got {}",
                                 num_params(), values.size()));
  }
  if (family_ == KernelFamily::product) {
    std::size_t offset = 0;
    for (auto& b : blocks_) {
      b.set_log_params(values.subspan(offset, b.num_params()));
      offset += b.num_params();
    }
    return;
  }
  log_params_.assign(values.begin(), values.end());
  scale_.assign(dim_, 0.0);
  signal_variance_ = 1.0;
  switch (family_) {
    case KernelFamily::linear:
      for (std::size_t d = 0; d < dim_; ++d) scale_[d] = std::exp(values[d]);
      break;
    case KernelFamily::squared_exponential:
      for (std::size_t d = 0; d < dim_; ++d) scale_[d] = std::exp(-2.0 * values[d]);
      if (has_signal_variance_) signal_variance_ = std::exp(values[dim_]);
      break;
    case KernelFamily::matern:
      scale_.assign(1, std::exp(-values[0]));
      if (has_signal_variance_) signal_variance_ = std::exp(values[1]);
      break;
    case KernelFamily::product:
      break;
  }
}

std::vector<std::string> Kernel::param_names(
    std::span<const std::string> dim_names) const {
  if (dim_names.size() != dim_) {
    throw InputError("param_names: one name per input dimension required");
  }
  std::vector<std::string> out;
  switch (family_) {
    case KernelFamily::linear:
      for (const auto& n : dim_names) out.push_back("l_" + n);
      break;
    case KernelFamily::squared_exponential:
      for (const auto& n : dim_names) out.push_back("lambda_" + n);
      if (has_signal_variance_) out.emplace_back("sf2");
      break;
    case KernelFamily::matern:
      out.push_back("lambda_" + join_names(dim_names));
      if (has_signal_variance_) out.emplace_back("sf2");
      break;
    case KernelFamily::product: {
      std::size_t offset = 0;
      for (const auto& b : blocks_) {
        auto sub = b.param_names(dim_names.subspan(offset, b.dim_));
        out.insert(out.end(), sub.begin(), sub.end());
        offset += b.dim_;
      }
      break;
    }
  }
  return out;
}

void Kernel::check_dims(std::size_t a, std::size_t b) const {
  if (a != dim_ || b != dim_) {
    throw InputError(fmt::format(
        "kernel input dimension mismatch: expected {}, got {} and {}", dim_, a, b));
  }
}

double Kernel::operator()(std::span<const double> a,
                          std::span<const double> b) const {
  check_dims(a.size(), b.size());
  return eval_unchecked(a.data(), b.data());
}

double Kernel::eval_grad(std::span<const double> a, std::span<const double> b,
                         std::span<double> grad) const {
  check_dims(a.size(), b.size());
  if (grad.size() != num_params()) {
    throw InputError("kernel gradient buffer has the wrong size");
  }
  return eval_grad_unchecked(a.data(), b.data(), grad.data());
}

double Kernel::eval_unchecked(const double* a, const double* b) const {
  switch (family_) {
    case KernelFamily::linear: {
      double s = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) s += scale_[d] * (a[d] * b[d]);
      return s;
    }
    case KernelFamily::squared_exponential: {
      double r2 = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = a[d] - b[d];
        r2 += diff * diff * scale_[d];
      }
      return signal_variance_ * std::exp(-0.5 * r2);
    }
    case KernelFamily::matern: {
      double dist2 = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = a[d] - b[d];
        dist2 += diff * diff;
      }
      const double r = std::sqrt(dist2) * scale_[0];
      switch (order_) {
        case MaternOrder::one_half:
          return signal_variance_ * std::exp(-r);
        case MaternOrder::three_halves:
          return signal_variance_ * (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
        case MaternOrder::five_halves:
          return signal_variance_ * (1.0 + kSqrt5 * r + 5.0 * r * r / 3.0) *
                 std::exp(-kSqrt5 * r);
      }
      return 0.0;
    }
    case KernelFamily::product: {
      double k = 1.0;
      std::size_t offset = 0;
      for (const auto& blk : blocks_) {
        k *= blk.eval_unchecked(a + offset, b + offset);
        offset += blk.dim_;
      }
      return k;
    }
  }
  return 0.0;
}

double Kernel::eval_grad_unchecked(const double* a, const double* b,
                                   double* grad) const {
  switch (family_) {
    case KernelFamily::linear: {
      double s = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        grad[d] = scale_[d] * (a[d] * b[d]);
        s += grad[d];
      }
      return s;
    }
    case KernelFamily::squared_exponential: {
      double r2 = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = a[d] - b[d];
        grad[d] = diff * diff * scale_[d];
        r2 += grad[d];
      }
      const double k = signal_variance_ * std::exp(-0.5 * r2);
      for (std::size_t d = 0; d < dim_; ++d) grad[d] *= k;
      if (has_signal_variance_) grad[dim_] = k;
      return k;
    }
    case KernelFamily::matern: {
      double dist2 = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = a[d] - b[d];
        dist2 += diff * diff;
      }
      const double r = std::sqrt(dist2) * scale_[0];
      double k = 0.0;
      switch (order_) {
        case MaternOrder::one_half: {
          const double e = std::exp(-r);
          k = signal_variance_ * e;
          grad[0] = signal_variance_ * r * e;
          break;
        }
        case MaternOrder::three_halves: {
          const double e = std::exp(-kSqrt3 * r);
          k = signal_variance_ * (1.0 + kSqrt3 * r) * e;
          grad[0] = signal_variance_ * 3.0 * r * r * e;
          break;
        }
        case MaternOrder::five_halves: {
          const double e = std::exp(-kSqrt5 * r);
          k = signal_variance_ * (1.0 + kSqrt5 * r + 5.0 * r * r / 3.0) * e;
          grad[0] = signal_variance_ * (5.0 / 3.0) * r * r * (1.0 + kSqrt5 * r) * e;
          break;
        }
      }
      if (has_signal_variance_) grad[1] = k;
      return k;
    }
    case KernelFamily::product: {
      // Block values first, then scale each block's gradient by the product of
      // the other blocks (no division, so zero-valued blocks are safe).
      const std::size_t nb = blocks_.size();
      double values[8];
      std::vector<double> heap_values;
      double* v = values;
      if (nb > 8) {
        heap_values.resize(nb);
        v = heap_values.data();
      }
      std::size_t dim_offset = 0;
      std::size_t par_offset = 0;
      for (std::size_t i = 0; i < nb; ++i) {
        v[i] = blocks_[i].eval_grad_unchecked(a + dim_offset, b + dim_offset,
                                              grad + par_offset);
        dim_offset += blocks_[i].dim_;
        par_offset += blocks_[i].num_params();
      }
      double total = 1.0;
      for (std::size_t i = 0; i < nb; ++i) total *= v[i];
      par_offset = 0;
      for (std::size_t i = 0; i < nb; ++i) {
        double others = 1.0;
        for (std::size_t j = 0; j < nb; ++j) {
          if (j != i) others *= v[j];
        }
        const std::size_t np = blocks_[i].num_params();
        for (std::size_t p = 0; p < np; ++p) grad[par_offset + p] *= others;
        par_offset += np;
      }
      return total;
    }
  }
  return 0.0;
}

std::vector<double> kernel_grad(const Kernel& kernel, std::span<const double> a,
                                std::span<const double> b) {
  std::vector<double> grad(kernel.num_params());
  kernel.eval_grad(a, b, grad);
  return grad;
}

Eigen::MatrixXd kernel_gram(const Kernel& kernel, const PointMatrix& points) {
  if (points.rows() == 0) throw InputError("kernel_gram: empty point set");
  if (static_cast<std::size_t>(points.cols()) != kernel.input_dim()) {
    throw InputError("kernel_gram: point dimension mismatch");
  }
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double k = kernel(row_span(points, i), row_span(points, j));
      gram(i, j) = k;
      gram(j, i) = k;
    }
  }
  return gram;
}

MeanFunction MeanFunction::zero(std::size_t input_dim, std::size_t output_dim) {
  if (output_dim == 0) throw InputError("mean function needs an output dimension");
  MeanFunction m;
  m.family_ = MeanFamily::zero;
  m.input_dim_ = input_dim;
  m.values_.assign(output_dim, 0.0);
  return m;
}

MeanFunction MeanFunction::constant(std::size_t input_dim,
                                    std::vector<double> values) {
  if (values.empty()) throw InputError("mean function needs an output dimension");
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("constant mean must be finite");
  }
  MeanFunction m;
  m.family_ = MeanFamily::constant;
  m.input_dim_ = input_dim;
  m.values_ = std::move(values);
  return m;
}

Eigen::VectorXd MeanFunction::operator()(std::span<const double> a) const {
  if (a.size() != input_dim_) {
    throw InputError(fmt::format("mean input dimension mismatch: expected {}, got {}",
                                 input_dim_, a.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(values_.data(),
                                           static_cast<Eigen::Index>(values_.size()));
}

}  // namespace gpssm
