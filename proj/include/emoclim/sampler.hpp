#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "emoclim/embedding.hpp"
#include "emoclim/feature_file.hpp"
#include "emoclim/rng.hpp"

namespace emoclim {

// Pre-projection features for one training step: N images and N clips,
// one sampled chunk per record.
struct FeatureBatch {
  Tensor2<float> image;
  Tensor2<float> audio;
  std::vector<UnifiedEmotion> image_labels;
  std::vector<UnifiedEmotion> audio_labels;
  std::vector<std::size_t> image_indices;
  std::vector<std::size_t> audio_indices;
};

// Endless stream of pool indices, reshuffled each time the pool is exhausted.
class CyclicOrder {
 public:
  CyclicOrder(std::size_t size, Rng rng) : order_(size), rng_(std::move(rng)) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    pos_ = order_.size();
  }

  std::size_t next() {
    if (pos_ == order_.size()) restart();
    return order_[pos_++];
  }

  void restart() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

// One epoch is a single pass over the larger pool; the smaller pool wraps
// around with a fresh shuffle on every cycle.
class BatchSampler {
 public:
  BatchSampler(const Dataset& image, const Dataset& audio, std::size_t batch_size, std::uint64_t seed)
      : image_(&image),
        audio_(&audio),
        batch_size_(batch_size),
        image_order_(image.size(), derive_rng(seed, "sampler.image")),
        audio_order_(audio.size(), derive_rng(seed, "sampler.audio")),
        chunk_rng_(derive_rng(seed, "sampler.chunks")) {
    if (batch_size < 2) throw ConfigError("batch size must be at least 2");
    if (image.size() < 2 || audio.size() < 2) throw ConfigError("each training pool needs at least 2 records");
  }

  std::size_t epoch_size() const { return std::max(image_->size(), audio_->size()); }

  // Batch sizes for one epoch. A trailing remainder of one item is merged
  // into the previous batch since batchnorm cannot train on a single row.
  std::vector<std::size_t> epoch_batch_sizes() const {
    const std::size_t total = epoch_size();
    std::vector<std::size_t> sizes(total / batch_size_, batch_size_);
    const std::size_t rem = total % batch_size_;
    if (rem >= 2 || sizes.empty()) {
      sizes.push_back(rem);
    } else if (rem == 1) {
      sizes.back() += 1;
    }
    return sizes;
  }

  std::vector<FeatureBatch> next_epoch() {
    if (image_->size() == epoch_size()) image_order_.restart();
    if (audio_->size() == epoch_size()) audio_order_.restart();
    std::vector<FeatureBatch> batches;
    for (std::size_t n : epoch_batch_sizes()) {
      FeatureBatch batch;
      batch.image_indices.resize(n);
      batch.audio_indices.resize(n);
      for (std::size_t i = 0; i < n; ++i) batch.image_indices[i] = image_order_.next();
      for (std::size_t i = 0; i < n; ++i) batch.audio_indices[i] = audio_order_.next();
      fill(*image_, batch.image_indices, batch.image, batch.image_labels);
      fill(*audio_, batch.audio_indices, batch.audio, batch.audio_labels);
      batches.push_back(std::move(batch));
    }
    return batches;
  }

 private:
  void fill(const Dataset& data, const std::vector<std::size_t>& indices, Tensor2<float>& features,
            std::vector<UnifiedEmotion>& labels) {
    features = Tensor2<float>(indices.size(), data.dim);
    labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto& record = data.records[indices[i]];
      const auto chunk = sample_train_chunk(record, chunk_rng_);
      std::copy(chunk.begin(), chunk.end(), features.row(i).begin());
      labels[i] = data.labels[indices[i]];
    }
  }

  const Dataset* image_;
  const Dataset* audio_;
  std::size_t batch_size_;
  CyclicOrder image_order_;
  CyclicOrder audio_order_;
  Rng chunk_rng_;
};

}  // namespace emoclim
