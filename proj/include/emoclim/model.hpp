#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoclim/adamw.hpp"
#include "emoclim/embedding.hpp"
#include "emoclim/error.hpp"
#include "emoclim/losses.hpp"

namespace emoclim {

struct TrainConfig {
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 0;  // 0: match each head's input width
  double temperature = 0.07;
  std::array<double, 4> lambdas{0.25, 0.25, 0.25, 0.25};
  std::size_t batch_size = 64;
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 15;
  double dropout = 0.5;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  std::uint64_t seed = 0;

  LossConfig loss() const { return {temperature, lambdas}; }
  AdamWConfig optimizer() const { return {lr, beta1, beta2, adam_eps, weight_decay}; }
  HeadConfig head(std::size_t in_dim) const {
    return {in_dim, hidden_dim, embed_dim, dropout, bn_momentum, bn_eps};
  }

  void validate() const {
    if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (!(lr >= 0.0)) throw ConfigError("lr must be nonnegative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    loss().validate();
  }

  bool operator==(const TrainConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim},     {"hidden_dim", c.hidden_dim}, {"temperature", c.temperature},
                     {"lambdas", c.lambdas},         {"batch_size", c.batch_size}, {"lr", c.lr},
                     {"weight_decay", c.weight_decay}, {"beta1", c.beta1},       {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},       {"epochs", c.epochs},         {"dropout", c.dropout},
                     {"bn_momentum", c.bn_momentum}, {"bn_eps", c.bn_eps},         {"seed", c.seed}};
}

// Reads the TrainConfig keys present in `j`, leaving absent ones at their
// current value. Returns true if `key` was consumed.
inline bool read_train_key(TrainConfig& c, const std::string& key, const nlohmann::json& v) {
  if (key == "embed_dim") v.get_to(c.embed_dim);
  else if (key == "hidden_dim") v.get_to(c.hidden_dim);
  else if (key == "temperature") v.get_to(c.temperature);
  else if (key == "lambdas") v.get_to(c.lambdas);
  else if (key == "batch_size") v.get_to(c.batch_size);
  else if (key == "lr") v.get_to(c.lr);
  else if (key == "weight_decay") v.get_to(c.weight_decay);
  else if (key == "beta1") v.get_to(c.beta1);
  else if (key == "beta2") v.get_to(c.beta2);
  else if (key == "adam_eps") v.get_to(c.adam_eps);
  else if (key == "epochs") v.get_to(c.epochs);
  else if (key == "dropout") v.get_to(c.dropout);
  else if (key == "bn_momentum") v.get_to(c.bn_momentum);
  else if (key == "bn_eps") v.get_to(c.bn_eps);
  else if (key == "seed") v.get_to(c.seed);
  else return false;
  return true;
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  for (const auto& [key, value] : j.items()) {
    if (!read_train_key(c, key, value)) throw ConfigError("unknown training config key '" + key + "'");
  }
}

// The two projection heads trained jointly.
struct EmoClimModel {
  ProjectionHead<float> image;
  ProjectionHead<float> audio;

  EmoClimModel() = default;
  EmoClimModel(const TrainConfig& config, std::size_t image_dim, std::size_t audio_dim)
      : image(config.head(image_dim), derive_seed(config.seed, "head.image")),
        audio(config.head(audio_dim), derive_seed(config.seed, "head.audio")) {}

  std::vector<ParamRef<float>> params() {
    std::vector<ParamRef<float>> out;
    image.collect("image", out);
    audio.collect("audio", out);
    return out;
  }

  void zero_grad() {
    image.zero_grad();
    audio.zero_grad();
  }
};

}  // namespace emoclim
