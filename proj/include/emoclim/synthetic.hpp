#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "emoclim/emotion.hpp"
#include "emoclim/feature_file.hpp"
#include "emoclim/rng.hpp"
#include "emoclim/tag_file.hpp"

namespace emoclim {

// Gaussian clusters per emotion in each modality. Image and audio class
// means share a common latent direction per emotion (weight `correlation`)
// so the two modalities are alignable.
struct SyntheticConfig {
  std::size_t per_class = 100;
  std::size_t image_dim = 64;
  std::size_t audio_dim = 64;
  std::size_t image_chunks = 1;
  std::size_t audio_chunks = 5;
  double separation = 6.0;   // approximate norm of each class mean
  double sigma = 0.5;        // per-coordinate spread of items around their class mean
  double chunk_sigma = 0.2;  // per-coordinate spread of chunks around their item
  double correlation = 0.8;
  std::size_t dropped_per_label = 0;  // extra items carrying unmappable labels
  std::uint64_t seed = 0;
};

struct SyntheticPair {
  FeatureFile image;
  FeatureFile audio;
  // Class means in unified-emotion order, exposed for oracle checks.
  std::vector<std::vector<double>> image_means;
  std::vector<std::vector<double>> audio_means;
};

namespace detail {

inline std::vector<double> gaussian_vector(std::size_t dim, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng) * scale;
  return v;
}

inline FeatureFile synth_modality(Modality modality, std::size_t dim, std::size_t chunks,
                                  const std::vector<std::vector<double>>& means,
                                  const std::vector<std::vector<double>>& dropped_means,
                                  const SyntheticConfig& config, Rng& rng) {
  FeatureFile file;
  file.modality = modality;
  file.feature_dim = static_cast<std::uint32_t>(dim);
  file.taxonomy = default_taxonomy(modality);
  std::normal_distribution<double> normal(0.0, 1.0);
  const char* prefix = modality == Modality::Image ? "img" : "aud";
  std::size_t serial = 0;

  auto emit = [&](const std::vector<double>& mean, const std::string& label, std::size_t count) {
    for (std::size_t n = 0; n < count; ++n) {
      std::vector<double> centre(dim);
      for (std::size_t j = 0; j < dim; ++j) centre[j] = mean[j] + config.sigma * normal(rng);
      std::vector<float> values(chunks * dim);
      for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t j = 0; j < dim; ++j) {
          values[c * dim + j] = static_cast<float>(centre[j] + config.chunk_sigma * normal(rng));
        }
      }
      char id[32];
      std::snprintf(id, sizeof id, "%s_%06zu", prefix, serial++);
      file.records.push_back({id, label, Tensor2<float>(chunks, dim, std::move(values))});
    }
  };

  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    emit(means[k], std::string(source_label_for(modality, kAllEmotions[k])), config.per_class);
  }
  for (std::size_t d = 0; d < file.taxonomy.dropped.size(); ++d) {
    emit(dropped_means[d], file.taxonomy.dropped[d], config.dropped_per_label);
  }
  return file;
}

}  // namespace detail

inline SyntheticPair generate_synthetic(const SyntheticConfig& config) {
  if (config.image_dim == 0 || config.audio_dim == 0 || config.image_chunks == 0 || config.audio_chunks == 0) {
    throw ConfigError("synthetic dimensions and chunk counts must be positive");
  }
  if (!(config.correlation >= 0.0 && config.correlation <= 1.0)) {
    throw ConfigError("synthetic correlation must lie in [0, 1]");
  }
  auto rng = derive_rng(config.seed, "synthetic");
  const std::size_t shared_dim = std::max(config.image_dim, config.audio_dim);
  const double rho = config.correlation;
  const double independent = std::sqrt(1.0 - rho * rho);

  SyntheticPair out;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    const auto shared = detail::gaussian_vector(shared_dim, config.separation / std::sqrt(double(shared_dim)), rng);
    const auto own_image = detail::gaussian_vector(config.image_dim, config.separation / std::sqrt(double(config.image_dim)), rng);
    const auto own_audio = detail::gaussian_vector(config.audio_dim, config.separation / std::sqrt(double(config.audio_dim)), rng);
    std::vector<double> image_mean(config.image_dim), audio_mean(config.audio_dim);
    for (std::size_t j = 0; j < config.image_dim; ++j) image_mean[j] = rho * shared[j] + independent * own_image[j];
    for (std::size_t j = 0; j < config.audio_dim; ++j) audio_mean[j] = rho * shared[j] + independent * own_audio[j];
    out.image_means.push_back(std::move(image_mean));
    out.audio_means.push_back(std::move(audio_mean));
  }
  std::vector<std::vector<double>> image_dropped, audio_dropped;
  for (std::size_t d = 0; d < image_taxonomy().dropped.size(); ++d) {
    image_dropped.push_back(detail::gaussian_vector(config.image_dim, config.separation / std::sqrt(double(config.image_dim)), rng));
  }
  for (std::size_t d = 0; d < music_taxonomy().dropped.size(); ++d) {
    audio_dropped.push_back(detail::gaussian_vector(config.audio_dim, config.separation / std::sqrt(double(config.audio_dim)), rng));
  }
  out.image = detail::synth_modality(Modality::Image, config.image_dim, config.image_chunks, out.image_means,
                                     image_dropped, config, rng);
  out.audio = detail::synth_modality(Modality::Audio, config.audio_dim, config.audio_chunks, out.audio_means,
                                     audio_dropped, config, rng);
  return out;
}

// Multi-label tagging data: standard normal features, tag t switched on
// where a random linear score plus noise clears a per-tag threshold.
struct SyntheticTagConfig {
  std::size_t items = 2000;
  std::size_t dim = 64;
  std::size_t chunks = 1;
  std::uint16_t tags = 50;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticTagged {
  FeatureFile features;
  TagFile tags;
};

inline SyntheticTagged generate_synthetic_tags(const SyntheticTagConfig& config) {
  if (config.items == 0 || config.dim == 0 || config.chunks == 0 || config.tags == 0) {
    throw ConfigError("synthetic tag dimensions must be positive");
  }
  auto rng = derive_rng(config.seed, "synthetic.tags");
  std::normal_distribution<double> normal(0.0, 1.0);
  // w.x is close to standard normal, so cuts in [0.25, 1.3] tag roughly 10% to 40% of items
  std::uniform_real_distribution<double> cut(0.25, 1.3);
  std::vector<std::vector<double>> directions;
  std::vector<double> thresholds;
  for (std::size_t t = 0; t < config.tags; ++t) {
    auto w = detail::gaussian_vector(config.dim, 1.0 / std::sqrt(double(config.dim)), rng);
    directions.push_back(std::move(w));
    thresholds.push_back(cut(rng));
  }

  SyntheticTagged out;
  out.features.modality = Modality::Audio;
  out.features.feature_dim = static_cast<std::uint32_t>(config.dim);
  out.features.taxonomy = default_taxonomy(Modality::Audio);
  out.tags.num_tags = config.tags;
  std::vector<std::string> labels;
  for (UnifiedEmotion e : kAllEmotions) labels.emplace_back(source_label_for(Modality::Audio, e));
  for (std::size_t n = 0; n < config.items; ++n) {
    std::vector<double> x(config.dim);
    for (double& v : x) v = normal(rng);
    std::vector<float> values(config.chunks * config.dim);
    for (std::size_t c = 0; c < config.chunks; ++c) {
      for (std::size_t j = 0; j < config.dim; ++j) values[c * config.dim + j] = static_cast<float>(x[j]);
    }
    char id[32];
    std::snprintf(id, sizeof id, "trk_%06zu", n);
    TaggedItem item{id, std::vector<std::uint8_t>(config.tags)};
    for (std::size_t t = 0; t < config.tags; ++t) {
      double score = config.noise * normal(rng);
      for (std::size_t j = 0; j < config.dim; ++j) score += directions[t][j] * x[j];
      item.tags[t] = score > thresholds[t] ? 1 : 0;
    }
    out.features.records.push_back({id, labels[n % labels.size()], Tensor2<float>(config.chunks, config.dim, std::move(values))});
    out.tags.items.push_back(std::move(item));
  }
  return out;
}

}  // namespace emoclim
