#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emoclim/error.hpp"
#include "emoclim/rng.hpp"
#include "emoclim/tensor.hpp"

namespace emoclim {

enum class Mode { Train, Eval };

// Mutable view of one trainable tensor and its gradient, consumed by the
// optimizer and the gradient checker.
template <typename T>
struct ParamRef {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
  bool decay = false;
};

template <typename T>
class Linear {
 public:
  Linear() = default;

  Linear(std::size_t in_dim, std::size_t out_dim)
      : weight(out_dim, in_dim), bias(out_dim, T{0}), grad_weight(out_dim, in_dim),
        grad_bias(out_dim, T{0}) {}

  // Fan-in uniform init: weights ~ U(-1/sqrt(in), 1/sqrt(in)), zero bias.
  Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng) : Linear(in_dim, out_dim) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& w : weight.values()) w = static_cast<T>(dist(rng));
  }

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }

  Tensor2<T> forward(const Tensor2<T>& input) const {
    if (input.cols() != in_dim()) {
      throw ConfigError("linear layer expects " + std::to_string(in_dim()) +
                        " input features, got " + std::to_string(input.cols()));
    }
    Tensor2<T> out = matmul_nt(input, weight);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto r = out.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
    }
    return out;
  }

  // Accumulates grad_weight += grad_out^T input and grad_bias += colsum(grad_out);
  // returns grad_out * weight.
  Tensor2<T> backward(const Tensor2<T>& input, const Tensor2<T>& grad_out) {
    if (input.cols() != in_dim() || grad_out.cols() != out_dim() || grad_out.rows() != input.rows()) {
      throw ConfigError("linear backward shape mismatch: input " + shape_string(input) +
                        ", grad " + shape_string(grad_out) + ", weight " + shape_string(weight));
    }
    accumulate_matmul_tn(grad_out, input, grad_weight);
    for (std::size_t i = 0; i < grad_out.rows(); ++i) {
      const auto g = grad_out.row(i);
      for (std::size_t j = 0; j < g.size(); ++j) grad_bias[j] += g[j];
    }
    return matmul(grad_out, weight);
  }

  void zero_grad() {
    grad_weight.fill(T{0});
    std::fill(grad_bias.begin(), grad_bias.end(), T{0});
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".weight", weight.values(), grad_weight.values(), true});
    out.push_back({prefix + ".bias", bias, grad_bias, false});
  }

  template <typename U>
  Linear<U> cast() const {
    Linear<U> out(in_dim(), out_dim());
    out.weight = weight.template cast<U>();
    out.bias.assign(bias.begin(), bias.end());
    return out;
  }

  Tensor2<T> weight;
  std::vector<T> bias;
  Tensor2<T> grad_weight;
  std::vector<T> grad_bias;
};

template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;

  explicit BatchNorm(std::size_t dim, double momentum = 0.1, double eps = 1e-5)
      : gamma(dim, T{1}), beta(dim, T{0}), running_mean(dim, T{0}), running_var(dim, T{1}),
        grad_gamma(dim, T{0}), grad_beta(dim, T{0}), momentum(momentum), eps(eps) {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("batchnorm momentum must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("batchnorm eps must be positive");
  }

  std::size_t dim() const noexcept { return gamma.size(); }

  // Eval-mode transform; touches no cached state so shared heads can be
  // used concurrently.
  Tensor2<T> infer(const Tensor2<T>& input) const {
    check_width(input);
    Tensor2<T> out(input.rows(), input.cols());
    for (std::size_t j = 0; j < dim(); ++j) {
      const T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[j]) + eps));
      for (std::size_t i = 0; i < input.rows(); ++i) {
        out(i, j) = gamma[j] * (input(i, j) - running_mean[j]) * inv_std + beta[j];
      }
    }
    return out;
  }

  Tensor2<T> forward(const Tensor2<T>& input, Mode mode) {
    check_width(input);
    const std::size_t n = input.rows();
    cached_mode_ = mode;
    inv_std_.assign(dim(), T{0});
    xhat_ = Tensor2<T>(n, dim());
    if (mode == Mode::Eval) {
      for (std::size_t j = 0; j < dim(); ++j) {
        inv_std_[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[j]) + eps));
        for (std::size_t i = 0; i < n; ++i) xhat_(i, j) = (input(i, j) - running_mean[j]) * inv_std_[j];
      }
    } else {
      if (n < 2) throw BatchTooSmallError("batchnorm in train mode needs at least 2 rows, got " + std::to_string(n));
      for (std::size_t j = 0; j < dim(); ++j) {
        T mean{0};
        for (std::size_t i = 0; i < n; ++i) mean += input(i, j);
        mean /= static_cast<T>(n);
        T var{0};
        for (std::size_t i = 0; i < n; ++i) {
          const T d = input(i, j) - mean;
          var += d * d;
        }
        const T unbiased = var / static_cast<T>(n - 1);
        var /= static_cast<T>(n);
        inv_std_[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps));
        for (std::size_t i = 0; i < n; ++i) xhat_(i, j) = (input(i, j) - mean) * inv_std_[j];
        // Running variance tracks the unbiased estimate.
        const T m = static_cast<T>(momentum);
        running_mean[j] = (T{1} - m) * running_mean[j] + m * mean;
        running_var[j] = (T{1} - m) * running_var[j] + m * unbiased;
      }
    }
    Tensor2<T> out(n, dim());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dim(); ++j) out(i, j) = gamma[j] * xhat_(i, j) + beta[j];
    }
    has_cache_ = true;
    return out;
  }

  Tensor2<T> backward(const Tensor2<T>& grad_out) {
    if (!has_cache_) throw StateError("batchnorm backward called before forward");
    if (grad_out.rows() != xhat_.rows() || grad_out.cols() != dim()) {
      throw ConfigError("batchnorm backward shape mismatch: " + shape_string(grad_out));
    }
    const std::size_t n = grad_out.rows();
    Tensor2<T> grad_in(n, dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      T sum_g{0};
      T sum_g_xhat{0};
      for (std::size_t i = 0; i < n; ++i) {
        sum_g += grad_out(i, j);
        sum_g_xhat += grad_out(i, j) * xhat_(i, j);
      }
      grad_beta[j] += sum_g;
      grad_gamma[j] += sum_g_xhat;
      if (cached_mode_ == Mode::Eval) {
        for (std::size_t i = 0; i < n; ++i) grad_in(i, j) = grad_out(i, j) * gamma[j] * inv_std_[j];
      } else {
        const T scale = gamma[j] * inv_std_[j] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
          grad_in(i, j) = scale * (static_cast<T>(n) * grad_out(i, j) - sum_g - xhat_(i, j) * sum_g_xhat);
        }
      }
    }
    return grad_in;
  }

  void zero_grad() {
    std::fill(grad_gamma.begin(), grad_gamma.end(), T{0});
    std::fill(grad_beta.begin(), grad_beta.end(), T{0});
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".gamma", gamma, grad_gamma, false});
    out.push_back({prefix + ".beta", beta, grad_beta, false});
  }

  template <typename U>
  BatchNorm<U> cast() const {
    BatchNorm<U> out(dim(), momentum, eps);
    out.gamma.assign(gamma.begin(), gamma.end());
    out.beta.assign(beta.begin(), beta.end());
    out.running_mean.assign(running_mean.begin(), running_mean.end());
    out.running_var.assign(running_var.begin(), running_var.end());
    return out;
  }

  std::vector<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  std::vector<T> grad_gamma, grad_beta;
  double momentum = 0.1;
  double eps = 1e-5;

 private:
  void check_width(const Tensor2<T>& input) const {
    if (input.cols() != dim()) {
      throw ConfigError("batchnorm expects width " + std::to_string(dim()) + ", got " +
                        std::to_string(input.cols()));
    }
  }

  bool has_cache_ = false;
  Mode cached_mode_ = Mode::Train;
  Tensor2<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
Tensor2<T> relu_forward(const Tensor2<T>& input) {
  Tensor2<T> out = input;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor2<T> relu_backward(const Tensor2<T>& input, const Tensor2<T>& grad_out) {
  if (input.rows() != grad_out.rows() || input.cols() != grad_out.cols()) {
    throw ConfigError("relu backward shape mismatch");
  }
  Tensor2<T> grad_in = grad_out;
  const auto x = input.values();
  auto g = grad_in.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x[i] > T{0})) g[i] = T{0};
  }
  return grad_in;
}

// Inverted dropout: kept activations are scaled by 1/(1-rate) in train mode.
template <typename T>
class Dropout {
 public:
  Dropout() = default;

  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  }

  double rate() const noexcept { return rate_; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

  Tensor2<T> forward(const Tensor2<T>& input, Mode mode) {
    cached_mode_ = mode;
    if (mode == Mode::Eval || rate_ == 0.0) {
      mask_.clear();
      return input;
    }
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    mask_.resize(input.size());
    Tensor2<T> out = input;
    auto values = out.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      mask_[i] = uniform(rng_) < rate_ ? T{0} : keep_scale;
      values[i] *= mask_[i];
    }
    return out;
  }

  Tensor2<T> backward(const Tensor2<T>& grad_out) const {
    if (mask_.empty()) return grad_out;
    if (mask_.size() != grad_out.size()) throw StateError("dropout backward does not match last forward");
    Tensor2<T> grad_in = grad_out;
    auto values = grad_in.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] *= mask_[i];
    return grad_in;
  }

 private:
  double rate_ = 0.0;
  Rng rng_;
  Mode cached_mode_ = Mode::Eval;
  std::vector<T> mask_;
};

inline constexpr double kNormFloor = 1e-12;

template <typename T>
Tensor2<T> l2_normalize_forward(const Tensor2<T>& input, double norm_floor = kNormFloor) {
  Tensor2<T> out(input.rows(), input.cols());
  for (std::size_t i = 0; i < input.rows(); ++i) {
    const auto x = input.row(i);
    const double norm = std::sqrt(dot<T>(x, x));
    if (!(norm > norm_floor)) {
      throw DegenerateInputError("cannot L2-normalize row " + std::to_string(i) + " with norm " +
                                 std::to_string(norm));
    }
    auto o = out.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) o[j] = static_cast<T>(x[j] / norm);
  }
  return out;
}

// Row-wise Jacobian (I - z z^T) / ||x|| applied to grad_out.
template <typename T>
Tensor2<T> l2_normalize_backward(const Tensor2<T>& input, const Tensor2<T>& grad_out,
                                 double norm_floor = kNormFloor) {
  if (input.rows() != grad_out.rows() || input.cols() != grad_out.cols()) {
    throw ConfigError("l2 normalize backward shape mismatch");
  }
  Tensor2<T> grad_in(input.rows(), input.cols());
  for (std::size_t i = 0; i < input.rows(); ++i) {
    const auto x = input.row(i);
    const auto g = grad_out.row(i);
    const double norm = std::sqrt(dot<T>(x, x));
    if (!(norm > norm_floor)) {
      throw DegenerateInputError("L2-normalize backward on row " + std::to_string(i) + " with norm " +
                                 std::to_string(norm));
    }
    const double zg = dot<T>(x, g) / norm;
    auto out = grad_in.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) {
      out[j] = static_cast<T>((g[j] - (x[j] / norm) * zg) / norm);
    }
  }
  return grad_in;
}

}  // namespace emoclim
