#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "emoclim/adamw.hpp"
#include "emoclim/layers.hpp"
#include "emoclim/log.hpp"
#include "emoclim/metrics.hpp"
#include "emoclim/rng.hpp"
#include "emoclim/sampler.hpp"

namespace emoclim {

struct ProbeConfig {
  std::size_t hidden_dim = 512;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  std::uint64_t seed = 0;
};

// Multi-label tagging head: linear -> batchnorm -> relu -> linear, raw logits out.
template <typename T>
class TagProbe {
 public:
  TagProbe() = default;

  TagProbe(std::size_t in_dim, std::size_t hidden_dim, std::size_t tags, const ProbeConfig& config) {
    auto init = derive_rng(config.seed, "probe.init");
    layer1 = Linear<T>(in_dim, hidden_dim, init);
    bn = BatchNorm<T>(hidden_dim, config.bn_momentum, config.bn_eps);
    layer2 = Linear<T>(hidden_dim, tags, init);
  }

  std::size_t num_tags() const noexcept { return layer2.out_dim(); }

  Tensor2<T> forward(const Tensor2<T>& x, Mode mode) {
    input_ = x;
    pre_bn_ = layer1.forward(x);
    pre_relu_ = bn.forward(pre_bn_, mode);
    hidden_ = relu_forward(pre_relu_);
    has_cache_ = true;
    return layer2.forward(hidden_);
  }

  Tensor2<T> infer(const Tensor2<T>& x) const { return layer2.forward(relu_forward(bn.infer(layer1.forward(x)))); }

  Tensor2<T> backward(const Tensor2<T>& grad_logits) {
    if (!has_cache_) throw StateError("probe backward called before forward");
    auto g = layer2.backward(hidden_, grad_logits);
    g = relu_backward(pre_relu_, g);
    g = bn.backward(g);
    return layer1.backward(input_, g);
  }

  void zero_grad() {
    layer1.zero_grad();
    bn.zero_grad();
    layer2.zero_grad();
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    layer1.collect(prefix + ".layer1", out);
    bn.collect(prefix + ".bn", out);
    layer2.collect(prefix + ".layer2", out);
  }

  template <typename U>
  TagProbe<U> cast() const {
    TagProbe<U> out;
    out.layer1 = layer1.template cast<U>();
    out.bn = bn.template cast<U>();
    out.layer2 = layer2.template cast<U>();
    return out;
  }

  Linear<T> layer1;
  BatchNorm<T> bn;
  Linear<T> layer2;

 private:
  bool has_cache_ = false;
  Tensor2<T> input_, pre_bn_, pre_relu_, hidden_;
};

template <typename T>
struct BceResult {
  double loss = 0.0;
  Tensor2<T> grad;
};

// Mean elementwise binary cross-entropy on logits, in the overflow-safe
// form max(x,0) - x*t + log(1 + exp(-|x|)).
template <typename T>
BceResult<T> bce_with_logits(const Tensor2<T>& logits, const Tensor2<T>& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ConfigError("BCE shape mismatch: " + shape_string(logits) + " vs " + shape_string(targets));
  }
  if (logits.empty()) throw ConfigError("BCE on an empty batch");
  BceResult<T> out;
  out.grad = Tensor2<T>(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(logits.size());
  const auto x = logits.values();
  const auto t = targets.values();
  auto g = out.grad.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double ti = t[i];
    sum += std::max(xi, 0.0) - xi * ti + std::log1p(std::exp(-std::abs(xi)));
    const double sigmoid = xi >= 0 ? 1.0 / (1.0 + std::exp(-xi)) : std::exp(xi) / (1.0 + std::exp(xi));
    g[i] = static_cast<T>((sigmoid - ti) * scale);
  }
  out.loss = sum * scale;
  return out;
}

struct TagMetrics {
  std::vector<std::optional<double>> roc_auc;
  std::vector<std::optional<double>> pr_auc;
  std::optional<double> macro_roc_auc;
  std::optional<double> macro_pr_auc;
  std::size_t included_tags = 0;
};

inline TagMetrics tag_metrics(const Tensor2<float>& scores, const Tensor2<float>& targets) {
  if (scores.rows() != targets.rows() || scores.cols() != targets.cols()) {
    throw EvaluationError("score and target matrices differ in shape");
  }
  TagMetrics out;
  std::vector<double> column(scores.rows());
  std::vector<std::uint8_t> labels(scores.rows());
  for (std::size_t t = 0; t < scores.cols(); ++t) {
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      column[i] = scores(i, t);
      labels[i] = targets(i, t) > 0.5f ? 1 : 0;
    }
    out.roc_auc.push_back(roc_auc(column, labels));
    out.pr_auc.push_back(pr_auc(column, labels));
    if (out.roc_auc.back()) {
      ++out.included_tags;
    } else {
      logger().warn("tag {} has only one class in the evaluation set; excluded from averages", t);
    }
  }
  out.macro_roc_auc = mean_defined(out.roc_auc);
  out.macro_pr_auc = mean_defined(out.pr_auc);
  return out;
}

inline nlohmann::json to_json(const TagMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json per_tag = nlohmann::json::array();
  for (std::size_t t = 0; t < m.roc_auc.size(); ++t) {
    per_tag.push_back({{"tag", t}, {"roc_auc", opt(m.roc_auc[t])}, {"pr_auc", opt(m.pr_auc[t])}});
  }
  return {{"macro_roc_auc", opt(m.macro_roc_auc)},
          {"macro_pr_auc", opt(m.macro_pr_auc)},
          {"included_tags", m.included_tags},
          {"per_tag", per_tag}};
}

struct ProbeResult {
  TagProbe<float> probe;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch, empty without validation data
  std::size_t best_epoch = 0;
};

// Mini-batch AdamW on mean BCE. With validation data the probe from the
// epoch with the lowest validation BCE is returned, else the final one.
inline ProbeResult train_tag_probe(const Tensor2<float>& features, const Tensor2<float>& targets,
                                   const ProbeConfig& config, const Tensor2<float>* val_features = nullptr,
                                   const Tensor2<float>* val_targets = nullptr) {
  if (features.rows() != targets.rows()) throw ConfigError("probe features and targets differ in row count");
  if (features.rows() < 2) throw ConfigError("probe training needs at least 2 items");
  if (config.batch_size < 2) throw ConfigError("probe batch size must be at least 2");
  ProbeResult result;
  TagProbe<float> probe(features.cols(), config.hidden_dim, targets.cols(), config);
  AdamW<float> optimizer({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<ParamRef<float>> params;
  probe.collect("probe", params);
  CyclicOrder order(features.rows(), derive_rng(config.seed, "probe.order"));

  const std::size_t n = features.rows();
  std::vector<std::size_t> sizes(n / config.batch_size, config.batch_size);
  if (const std::size_t rem = n % config.batch_size; rem >= 2 || sizes.empty()) {
    sizes.push_back(rem);
  } else if (rem == 1) {
    sizes.back() += 1;
  }

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order.restart();
    double sum = 0.0;
    for (std::size_t size : sizes) {
      std::vector<std::size_t> idx(size);
      for (auto& i : idx) i = order.next();
      probe.zero_grad();
      const auto logits = probe.forward(gather_rows(features, std::span<const std::size_t>(idx)), Mode::Train);
      const auto bce = bce_with_logits(logits, gather_rows(targets, std::span<const std::size_t>(idx)));
      if (!std::isfinite(bce.loss)) {
        throw NonFiniteError("non-finite probe loss at epoch " + std::to_string(epoch));
      }
      probe.backward(bce.grad);
      optimizer.step(params);
      sum += bce.loss * static_cast<double>(size);
    }
    result.train_loss.push_back(sum / static_cast<double>(n));
    if (val_features && val_targets && val_features->rows() > 0) {
      const double val = bce_with_logits(probe.infer(*val_features), *val_targets).loss;
      result.val_loss.push_back(val);
      if (val < best) {
        best = val;
        result.probe = probe;
        result.best_epoch = epoch;
      }
    }
    logger().debug("probe epoch {}  train BCE {:.6f}", epoch, result.train_loss.back());
  }
  if (result.val_loss.empty()) {
    result.probe = probe;
    result.best_epoch = config.epochs;
  }
  return result;
}

}  // namespace emoclim
