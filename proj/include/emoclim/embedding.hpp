#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emoclim/emotion.hpp"
#include "emoclim/error.hpp"
#include "emoclim/feature_file.hpp"
#include "emoclim/layers.hpp"
#include "emoclim/log.hpp"
#include "emoclim/rng.hpp"
#include "emoclim/tensor.hpp"

namespace emoclim {

struct HeadConfig {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;  // 0 selects in_dim
  std::size_t embed_dim = 128;
  double dropout = 0.5;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

// linear -> batchnorm -> relu -> dropout -> linear -> L2 normalize.
template <typename T>
class ProjectionHead {
 public:
  ProjectionHead() = default;

  ProjectionHead(const HeadConfig& config, std::uint64_t seed) : config_(resolve(config)) {
    auto init = derive_rng(seed, "init");
    layer1 = Linear<T>(config_.in_dim, config_.hidden_dim, init);
    bn = BatchNorm<T>(config_.hidden_dim, config_.bn_momentum, config_.bn_eps);
    dropout = Dropout<T>(config_.dropout, derive_seed(seed, "dropout"));
    layer2 = Linear<T>(config_.hidden_dim, config_.embed_dim, init);
  }

  const HeadConfig& config() const noexcept { return config_; }
  std::size_t in_dim() const noexcept { return config_.in_dim; }
  std::size_t embed_dim() const noexcept { return config_.embed_dim; }

  // Forward pass that caches activations for backward().
  Tensor2<T> forward(const Tensor2<T>& features, Mode mode) {
    if (mode == Mode::Train && features.rows() < 2) {
      throw BatchTooSmallError("projection in train mode needs at least 2 rows, got " +
                               std::to_string(features.rows()));
    }
    input_ = features;
    pre_bn_ = layer1.forward(features);
    pre_relu_ = bn.forward(pre_bn_, mode);
    post_relu_ = relu_forward(pre_relu_);
    dropped_ = dropout.forward(post_relu_, mode);
    pre_norm_ = layer2.forward(dropped_);
    has_cache_ = true;
    return l2_normalize_forward(pre_norm_);
  }

  // Eval-mode projection with no cached state.
  Tensor2<T> infer(const Tensor2<T>& features) const {
    auto h = relu_forward(bn.infer(layer1.forward(features)));
    return l2_normalize_forward(layer2.forward(h));
  }

  // Accumulates parameter gradients; returns the gradient w.r.t. the input features.
  Tensor2<T> backward(const Tensor2<T>& grad_embeddings) {
    if (!has_cache_) throw StateError("projection head backward called before forward");
    auto g = l2_normalize_backward(pre_norm_, grad_embeddings);
    g = layer2.backward(dropped_, g);
    g = dropout.backward(g);
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
  ProjectionHead<U> cast() const {
    ProjectionHead<U> out;
    out.config_ = config_;
    out.layer1 = layer1.template cast<U>();
    out.bn = bn.template cast<U>();
    out.dropout = Dropout<U>(config_.dropout, 0);
    out.layer2 = layer2.template cast<U>();
    return out;
  }

  Linear<T> layer1;
  BatchNorm<T> bn;
  Dropout<T> dropout;
  Linear<T> layer2;

 private:
  template <typename>
  friend class ProjectionHead;

  static HeadConfig resolve(HeadConfig c) {
    if (c.in_dim == 0 || c.embed_dim == 0) throw ConfigError("projection head dimensions must be positive");
    if (c.hidden_dim == 0) c.hidden_dim = c.in_dim;
    return c;
  }

  HeadConfig config_;
  bool has_cache_ = false;
  Tensor2<T> input_, pre_bn_, pre_relu_, post_relu_, dropped_, pre_norm_;
};

struct JointEmbedding {
  std::vector<float> vector;
  Modality modality = Modality::Image;
  UnifiedEmotion label = UnifiedEmotion::AmusementFunny;
  std::string item_id;
};

// Sliding-window layout over a clip, all lengths in seconds.
struct ChunkPlan {
  double total_len = 10.0;
  double window_len = 10.0;
  double overlap_ratio = 0.75;

  double hop() const { return window_len * (1.0 - overlap_ratio); }
};

inline std::size_t num_chunks(const ChunkPlan& plan) {
  if (!(plan.overlap_ratio >= 0.0 && plan.overlap_ratio < 1.0)) {
    throw ConfigError("overlap ratio must lie in [0, 1)");
  }
  if (!(plan.window_len > 0.0) || !(plan.total_len > 0.0)) throw ConfigError("chunk lengths must be positive");
  if (plan.window_len > plan.total_len) {
    logger().warn("window {}s exceeds clip length {}s; using a single full-length chunk", plan.window_len,
                  plan.total_len);
    return 1;
  }
  // Small slack so exact multiples of the hop are not lost to rounding.
  const double steps = (plan.total_len - plan.window_len) / plan.hop();
  return static_cast<std::size_t>(std::floor(steps + 1e-9)) + 1;
}

// Projects every chunk in eval mode, averages, and renormalizes the mean.
template <typename T>
std::vector<float> embed_chunks(const ProjectionHead<T>& head, const FeatureRecord& record) {
  if (record.num_chunks() == 0) throw ConfigError("record '" + record.item_id + "' has no chunks");
  const Tensor2<T> z = head.infer(record.chunks.template cast<T>());
  std::vector<double> mean(z.cols(), 0.0);
  for (std::size_t c = 0; c < z.rows(); ++c) {
    const auto row = z.row(c);
    for (std::size_t j = 0; j < row.size(); ++j) mean[j] += static_cast<double>(row[j]);
  }
  double norm = 0.0;
  for (double& v : mean) {
    v /= static_cast<double>(z.rows());
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (!(norm > kNormFloor)) {
    throw DegenerateInputError("chunk embeddings of '" + record.item_id + "' average to a near-zero vector");
  }
  std::vector<float> out(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j) out[j] = static_cast<float>(mean[j] / norm);
  return out;
}

template <typename T>
JointEmbedding embed_item_eval(const ProjectionHead<T>& head, const FeatureRecord& record, Modality modality,
                               UnifiedEmotion label) {
  return {embed_chunks(head, record), modality, label, record.item_id};
}

template <typename T>
std::vector<JointEmbedding> embed_dataset(const ProjectionHead<T>& head, const Dataset& data) {
  std::vector<JointEmbedding> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back(embed_item_eval(head, data.records[i], data.modality, data.labels[i]));
  }
  return out;
}

inline std::size_t sample_chunk_index(const FeatureRecord& record, Rng& rng) {
  if (record.num_chunks() <= 1) return 0;
  std::uniform_int_distribution<std::size_t> dist(0, record.num_chunks() - 1);
  return dist(rng);
}

inline std::span<const float> sample_train_chunk(const FeatureRecord& record, Rng& rng) {
  return record.chunks.row(sample_chunk_index(record, rng));
}

}  // namespace emoclim
