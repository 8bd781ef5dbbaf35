#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emoclim/error.hpp"
#include "emoclim/layers.hpp"

namespace emoclim {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay. Moments are allocated lazily on the
// first step from the parameter list, whose order must stay fixed.
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamWConfig config) : config_(config) {
    if (!(config.lr >= 0.0) || !(config.weight_decay >= 0.0) || !(config.eps > 0.0) ||
        !(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
      throw ConfigError("invalid AdamW hyperparameters");
    }
  }

  const AdamWConfig& config() const noexcept { return config_; }
  std::uint64_t step_count() const noexcept { return step_count_; }

  void step(std::span<const ParamRef<T>> params) {
    if (first_moment_.empty()) init_state(params);
    if (params.size() != first_moment_.size()) {
      throw ConfigError("AdamW parameter count changed between steps");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto& param = params[p];
      if (param.value.size() != first_moment_[p].size() || param.grad.size() != param.value.size()) {
        throw ConfigError("AdamW state shape mismatch for " + param.name);
      }
      for (std::size_t i = 0; i < param.grad.size(); ++i) {
        if (!std::isfinite(param.grad[i])) {
          throw NonFiniteError("non-finite gradient in " + param.name + "[" + std::to_string(i) +
                               "] at optimizer step " + std::to_string(step_count_ + 1));
        }
      }
    }

    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double correction1 = 1.0 - std::pow(config_.beta1, t);
    const double correction2 = 1.0 - std::pow(config_.beta2, t);
    const T lr = static_cast<T>(config_.lr);
    const T decay = static_cast<T>(config_.lr * config_.weight_decay);
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);

    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto& param = params[p];
      auto& m = first_moment_[p];
      auto& v = second_moment_[p];
      for (std::size_t i = 0; i < param.value.size(); ++i) {
        const T g = param.grad[i];
        if (param.decay) param.value[i] -= decay * param.value[i];
        m[i] = b1 * m[i] + (T{1} - b1) * g;
        v[i] = b2 * v[i] + (T{1} - b2) * g * g;
        const double m_hat = static_cast<double>(m[i]) / correction1;
        const double v_hat = static_cast<double>(v[i]) / correction2;
        param.value[i] -= lr * static_cast<T>(m_hat / (std::sqrt(v_hat) + config_.eps));
      }
    }
  }

  // Moment buffers in parameter order; exposed for checkpointing.
  std::vector<std::vector<T>>& first_moment() noexcept { return first_moment_; }
  std::vector<std::vector<T>>& second_moment() noexcept { return second_moment_; }
  const std::vector<std::vector<T>>& first_moment() const noexcept { return first_moment_; }
  const std::vector<std::vector<T>>& second_moment() const noexcept { return second_moment_; }
  void set_step_count(std::uint64_t n) noexcept { step_count_ = n; }

  void init_state(std::span<const ParamRef<T>> params) {
    first_moment_.clear();
    second_moment_.clear();
    for (const auto& param : params) {
      first_moment_.emplace_back(param.value.size(), T{0});
      second_moment_.emplace_back(param.value.size(), T{0});
    }
  }

 private:
  AdamWConfig config_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<T>> first_moment_;
  std::vector<std::vector<T>> second_moment_;
};

}  // namespace emoclim
