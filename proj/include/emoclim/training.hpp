#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoclim/checkpoint.hpp"
#include "emoclim/embedding.hpp"
#include "emoclim/feature_file.hpp"
#include "emoclim/log.hpp"
#include "emoclim/losses.hpp"
#include "emoclim/model.hpp"
#include "emoclim/sampler.hpp"
#include "emoclim/split.hpp"

namespace emoclim {

struct LossSummary {
  double total = 0.0;
  std::array<double, 4> components{};  // mean over batches where the component was active
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::array<double, 4> train_components{};
  std::array<double, 4> val_components{};
  double wall_time_s = 0.0;
};

inline nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"val_loss", e.val_loss},
          {"train_components", e.train_components},
          {"val_components", e.val_components},
          {"wall_time_s", e.wall_time_s}};
}

namespace detail {

inline Tensor2<float> stack(const std::vector<JointEmbedding>& embeddings, std::size_t dim) {
  Tensor2<float> out(embeddings.size(), dim);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    std::copy(embeddings[i].vector.begin(), embeddings[i].vector.end(), out.row(i).begin());
  }
  return out;
}

class ComponentMeans {
 public:
  void add(const TotalLoss<float>& loss) {
    for (std::size_t c = 0; c < 4; ++c) {
      if (!loss.active[c]) continue;
      sums_[c] += loss.components[c];
      ++counts_[c];
    }
  }
  std::array<double, 4> means() const {
    std::array<double, 4> out{};
    for (std::size_t c = 0; c < 4; ++c) out[c] = counts_[c] ? sums_[c] / static_cast<double>(counts_[c]) : 0.0;
    return out;
  }

 private:
  std::array<double, 4> sums_{};
  std::array<std::size_t, 4> counts_{};
};

}  // namespace detail

// Mean total loss over fixed, unshuffled validation batches in eval mode.
// Items are embedded with chunk averaging. Batches walk the larger pool in
// order while the smaller pool wraps around; a final batch with fewer than
// 2 items is dropped.
inline LossSummary validate(const EmoClimModel& model, const Dataset& image_val, const Dataset& audio_val,
                            const TrainConfig& config) {
  if (image_val.size() == 0 || audio_val.size() == 0) throw EvaluationError("validation pools must be nonempty");
  const auto image_emb = detail::stack(embed_dataset(model.image, image_val), config.embed_dim);
  const auto audio_emb = detail::stack(embed_dataset(model.audio, audio_val), config.embed_dim);
  const std::size_t total = std::max(image_val.size(), audio_val.size());
  const LossConfig loss_config = config.loss();

  double sum = 0.0;
  std::size_t batches = 0;
  detail::ComponentMeans components;
  for (std::size_t start = 0; start < total; start += config.batch_size) {
    const std::size_t n = std::min(config.batch_size, total - start);
    if (n < 2) continue;
    std::vector<std::size_t> image_idx(n), audio_idx(n);
    for (std::size_t i = 0; i < n; ++i) {
      image_idx[i] = (start + i) % image_val.size();
      audio_idx[i] = (start + i) % audio_val.size();
    }
    std::vector<UnifiedEmotion> image_labels(n), audio_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      image_labels[i] = image_val.labels[image_idx[i]];
      audio_labels[i] = audio_val.labels[audio_idx[i]];
    }
    try {
      const auto loss = total_loss(gather_rows(image_emb, std::span<const std::size_t>(image_idx)), image_labels,
                                   gather_rows(audio_emb, std::span<const std::size_t>(audio_idx)), audio_labels,
                                   loss_config);
      sum += loss.total;
      components.add(loss);
      ++batches;
    } catch (const EmptyPositivesError&) {
      logger().warn("validation batch at offset {} has no positive pairs; skipped", start);
    }
  }
  if (batches == 0) throw EvaluationError("no validation batch produced a loss");
  return {sum / static_cast<double>(batches), components.means()};
}

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

// Runs config.epochs epochs and keeps the parameters with the lowest
// validation loss (earliest epoch on ties).
inline TrainResult train(const Dataset& image_train, const Dataset& audio_train, const Dataset& image_val,
                         const Dataset& audio_val, const TrainConfig& config,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  config.validate();
  if (config.epochs == 0) throw ConfigError("epochs must be positive: no checkpoint can be selected");
  if (image_train.dim != image_val.dim || audio_train.dim != audio_val.dim) {
    throw ConfigError("train and validation features differ in dimension");
  }

  EmoClimModel model(config, image_train.dim, audio_train.dim);
  AdamW<float> optimizer(config.optimizer());
  BatchSampler sampler(image_train, audio_train, config.batch_size, config.seed);
  const LossConfig loss_config = config.loss();

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    double sum = 0.0;
    std::size_t steps = 0;
    detail::ComponentMeans components;
    const auto batches = sampler.next_epoch();
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      model.zero_grad();
      const auto z_image = model.image.forward(batch.image, Mode::Train);
      const auto z_audio = model.audio.forward(batch.audio, Mode::Train);
      TotalLoss<float> loss;
      try {
        loss = total_loss(z_image, batch.image_labels, z_audio, batch.audio_labels, loss_config);
      } catch (const EmptyPositivesError&) {
        logger().warn("epoch {} batch {} has no positive pairs; skipped", epoch, b);
        continue;
      }
      if (!std::isfinite(loss.total)) {
        throw NonFiniteError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b));
      }
      model.image.backward(loss.grad_image);
      model.audio.backward(loss.grad_audio);
      optimizer.step(model.params());
      sum += loss.total;
      components.add(loss);
      ++steps;
    }
    if (steps == 0) throw EvaluationError("epoch " + std::to_string(epoch) + " produced no training step");

    const auto val = validate(model, image_val, audio_val, config);
    if (!std::isfinite(val.total)) {
      throw NonFiniteError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = sum / static_cast<double>(steps);
    entry.train_components = components.means();
    entry.val_loss = val.total;
    entry.val_components = val.components;
    entry.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    logger().info("epoch {:>3}  train {:.6f}  val {:.6f}", epoch, entry.train_loss, entry.val_loss);

    if (val.total < best) {
      best = val.total;
      result.best.config = config;
      result.best.model = model;
      result.best.optimizer = optimizer;
      result.best.best_epoch = epoch;
      result.best.best_val_loss = val.total;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

inline TrainResult train(const Dataset& image, const Dataset& audio, const DatasetSplit& image_split,
                         const DatasetSplit& audio_split, const TrainConfig& config,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  return train(select(image, image_split.train), select(audio, audio_split.train), select(image, image_split.val),
               select(audio, audio_split.val), config, on_epoch);
}

}  // namespace emoclim
