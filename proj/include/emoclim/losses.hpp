#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emoclim/error.hpp"
#include "emoclim/log.hpp"
#include "emoclim/tensor.hpp"

namespace emoclim {

struct LossConfig {
  double temperature = 0.07;
  // Im->Au, Au->Im, Im->Im, Au->Au.
  std::array<double, 4> lambdas{0.25, 0.25, 0.25, 0.25};

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    bool any = false;
    for (double l : lambdas) {
      if (!(l >= 0.0)) throw ConfigError("loss weights must be nonnegative");
      any = any || l > 0.0;
    }
    if (!any) throw ConfigError("at least one loss weight must be positive");
  }
};

inline constexpr std::array<const char*, 4> kComponentNames{"image_to_audio", "audio_to_image", "image_to_image",
                                                            "audio_to_audio"};

template <typename T>
struct SupConResult {
  double loss = 0.0;
  Tensor2<T> grad_anchors;
  Tensor2<T> grad_candidates;  // equals grad_anchors for intra-modal losses
  std::size_t contributing_anchors = 0;
};

namespace detail {

// Shared core of both SupCon variants. With `intra` set the anchors and the
// candidates are the same matrix and self-pairs are removed from both the
// positive set and the softmax denominator.
template <typename T, typename Label>
SupConResult<T> supcon_impl(const Tensor2<T>& anchors, std::span<const Label> anchor_labels,
                            const Tensor2<T>& candidates, std::span<const Label> candidate_labels,
                            double temperature, bool intra) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  const std::size_t n = anchors.rows();
  const std::size_t m = candidates.rows();
  if (anchor_labels.size() != n || candidate_labels.size() != m) {
    throw ConfigError("label count does not match embedding rows");
  }
  if (anchors.cols() != candidates.cols()) throw ConfigError("embedding dimensions differ between modalities");
  if (n != m) throw ConfigError("both sides of a SupCon batch must have the same number of items");

  const double inv_tau = 1.0 / temperature;
  // d loss / d logit_ik, before the 1/|contributing| scale.
  std::vector<double> coeff(n * m, 0.0);
  std::vector<double> logits(m);
  double total = 0.0;
  std::size_t contributing = 0;

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t k = 0; k < m; ++k) {
      if (intra && k == i) continue;
      if (candidate_labels[k] == anchor_labels[i]) ++positives;
    }
    if (positives == 0) continue;
    ++contributing;

    double max_logit = -INFINITY;
    for (std::size_t k = 0; k < m; ++k) {
      if (intra && k == i) continue;
      logits[k] = dot<T>(anchors.row(i), candidates.row(k)) * inv_tau;
      max_logit = std::max(max_logit, logits[k]);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (intra && k == i) continue;
      denom += std::exp(logits[k] - max_logit);
    }
    const double log_denom = max_logit + std::log(denom);
    const double inv_pos = 1.0 / static_cast<double>(positives);

    double anchor_loss = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (intra && k == i) continue;
      const bool positive = candidate_labels[k] == anchor_labels[i];
      if (positive) anchor_loss -= (logits[k] - log_denom) * inv_pos;
      coeff[i * m + k] = std::exp(logits[k] - log_denom) - (positive ? inv_pos : 0.0);
    }
    total += anchor_loss;
  }

  if (contributing == 0) {
    throw EmptyPositivesError("no anchor in the batch has a positive partner");
  }

  SupConResult<T> result;
  result.loss = total / static_cast<double>(contributing);
  result.contributing_anchors = contributing;
  const double scale = inv_tau / static_cast<double>(contributing);
  const std::size_t d = anchors.cols();
  std::vector<double> ga(n * d, 0.0);
  std::vector<double> gc(m * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = anchors.row(i);
    for (std::size_t k = 0; k < m; ++k) {
      const double c = coeff[i * m + k] * scale;
      if (c == 0.0) continue;
      const auto zk = candidates.row(k);
      for (std::size_t j = 0; j < d; ++j) {
        ga[i * d + j] += c * static_cast<double>(zk[j]);
        gc[k * d + j] += c * static_cast<double>(zi[j]);
      }
    }
  }
  if (intra) {
    for (std::size_t idx = 0; idx < ga.size(); ++idx) ga[idx] += gc[idx];
    result.grad_anchors = Tensor2<T>(n, d, std::vector<T>(ga.begin(), ga.end()));
    result.grad_candidates = result.grad_anchors;
  } else {
    result.grad_anchors = Tensor2<T>(n, d, std::vector<T>(ga.begin(), ga.end()));
    result.grad_candidates = Tensor2<T>(m, d, std::vector<T>(gc.begin(), gc.end()));
  }
  return result;
}

}  // namespace detail

// Cross-modal SupCon: anchors from one modality, positives are every
// candidate of the other modality sharing the anchor's label. Anchors
// without positives are skipped and excluded from the normalizer.
template <typename T, typename Label>
SupConResult<T> supcon_cross(const Tensor2<T>& anchors, std::span<const Label> anchor_labels,
                             const Tensor2<T>& candidates, std::span<const Label> candidate_labels,
                             double temperature) {
  return detail::supcon_impl(anchors, anchor_labels, candidates, candidate_labels, temperature, false);
}

// Intra-modal SupCon with self-pairs excluded.
template <typename T, typename Label>
SupConResult<T> supcon_intra(const Tensor2<T>& embeddings, std::span<const Label> labels, double temperature) {
  return detail::supcon_impl(embeddings, labels, embeddings, labels, temperature, true);
}

template <typename T>
struct TotalLoss {
  double total = 0.0;
  std::array<double, 4> components{};
  std::array<bool, 4> active{};  // false when a component had no contributing anchors
  Tensor2<T> grad_image;
  Tensor2<T> grad_audio;
};

// Weighted sum of the two cross-modal and two intra-modal components.
template <typename T, typename Label>
TotalLoss<T> total_loss(const Tensor2<T>& image, std::span<const Label> image_labels, const Tensor2<T>& audio,
                        std::span<const Label> audio_labels, const LossConfig& config) {
  config.validate();
  TotalLoss<T> out;
  out.grad_image = Tensor2<T>(image.rows(), image.cols());
  out.grad_audio = Tensor2<T>(audio.rows(), audio.cols());

  auto add = [](Tensor2<T>& dst, const Tensor2<T>& src, double w) {
    auto d = dst.values();
    const auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += static_cast<T>(w) * s[i];
  };

  bool any_weighted = false;
  for (std::size_t c = 0; c < 4; ++c) {
    const double weight = config.lambdas[c];
    if (weight == 0.0) continue;
    SupConResult<T> r;
    try {
      switch (c) {
        case 0: r = supcon_cross(image, image_labels, audio, audio_labels, config.temperature); break;
        case 1: r = supcon_cross(audio, audio_labels, image, image_labels, config.temperature); break;
        case 2: r = supcon_intra(image, image_labels, config.temperature); break;
        default: r = supcon_intra(audio, audio_labels, config.temperature); break;
      }
    } catch (const EmptyPositivesError&) {
      logger().warn("loss component {} has no positive pairs in this batch; contributing 0", kComponentNames[c]);
      continue;
    }
    any_weighted = true;
    out.active[c] = true;
    out.components[c] = r.loss;
    out.total += weight * r.loss;
    switch (c) {
      case 0:
        add(out.grad_image, r.grad_anchors, weight);
        add(out.grad_audio, r.grad_candidates, weight);
        break;
      case 1:
        add(out.grad_audio, r.grad_anchors, weight);
        add(out.grad_image, r.grad_candidates, weight);
        break;
      case 2: add(out.grad_image, r.grad_anchors, weight); break;
      default: add(out.grad_audio, r.grad_anchors, weight); break;
    }
  }
  if (!any_weighted) throw EmptyPositivesError("every weighted loss component lacks positive pairs");
  return out;
}

template <typename T, typename Label>
SupConResult<T> supcon_cross(const Tensor2<T>& anchors, const std::vector<Label>& anchor_labels,
                             const Tensor2<T>& candidates, const std::vector<Label>& candidate_labels,
                             double temperature) {
  return supcon_cross(anchors, std::span<const Label>(anchor_labels), candidates,
                      std::span<const Label>(candidate_labels), temperature);
}

template <typename T, typename Label>
SupConResult<T> supcon_intra(const Tensor2<T>& embeddings, const std::vector<Label>& labels, double temperature) {
  return supcon_intra(embeddings, std::span<const Label>(labels), temperature);
}

template <typename T, typename Label>
TotalLoss<T> total_loss(const Tensor2<T>& image, const std::vector<Label>& image_labels, const Tensor2<T>& audio,
                        const std::vector<Label>& audio_labels, const LossConfig& config) {
  return total_loss(image, std::span<const Label>(image_labels), audio, std::span<const Label>(audio_labels),
                    config);
}

}  // namespace emoclim
