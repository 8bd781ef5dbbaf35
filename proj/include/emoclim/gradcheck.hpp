#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emoclim/layers.hpp"
#include "emoclim/rng.hpp"

namespace emoclim {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[<index>]"
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// Compares the analytic gradients already stored in `params` against
// central differences of `loss`. At most `max_samples_per_param` entries
// per tensor are probed (all of them when the tensor is smaller).
// `loss` must be deterministic and must not touch the grad buffers.
inline GradCheckResult grad_check(const std::function<double()>& loss,
                                  std::span<const ParamRef<double>> params, Rng& rng,
                                  std::size_t max_samples_per_param = 64, double eps = 1e-5) {
  GradCheckResult result;
  for (const auto& param : params) {
    std::vector<std::size_t> indices(param.value.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (indices.size() > max_samples_per_param) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(max_samples_per_param);
    }
    for (std::size_t idx : indices) {
      const double saved = param.value[idx];
      param.value[idx] = saved + eps;
      const double plus = loss();
      param.value[idx] = saved - eps;
      const double minus = loss();
      param.value[idx] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = relative_error(param.grad[idx], numeric);
      ++result.checked;
      if (result.worst.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = param.name + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return result;
}

}  // namespace emoclim
