#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "emoclim/bytes.hpp"
#include "emoclim/model.hpp"
#include "emoclim/probe.hpp"

namespace emoclim {

// Everything one JSON config file can set: the training hyperparameters,
// input/output paths, retrieval settings and the tagging probe.
struct RunConfig {
  TrainConfig train;
  std::string image_features, audio_features;
  std::string image_split, audio_split;
  std::string checkpoint_path, log_path;
  std::size_t k = 5;
  std::size_t threads = 1;
  ProbeConfig probe;
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = c.train;
  auto path = [&](const char* key, const std::string& v) {
    if (!v.empty()) j[key] = v;
  };
  path("image_features", c.image_features);
  path("audio_features", c.audio_features);
  path("image_split", c.image_split);
  path("audio_split", c.audio_split);
  path("checkpoint_path", c.checkpoint_path);
  path("log_path", c.log_path);
  j["k"] = c.k;
  j["threads"] = c.threads;
  j["probe_hidden_dim"] = c.probe.hidden_dim;
  j["probe_lr"] = c.probe.lr;
  j["probe_weight_decay"] = c.probe.weight_decay;
  j["probe_epochs"] = c.probe.epochs;
  j["probe_batch_size"] = c.probe.batch_size;
  return j;
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (read_train_key(c.train, key, v)) continue;
      if (key == "image_features") v.get_to(c.image_features);
      else if (key == "audio_features") v.get_to(c.audio_features);
      else if (key == "image_split") v.get_to(c.image_split);
      else if (key == "audio_split") v.get_to(c.audio_split);
      else if (key == "checkpoint_path") v.get_to(c.checkpoint_path);
      else if (key == "log_path") v.get_to(c.log_path);
      else if (key == "k") v.get_to(c.k);
      else if (key == "threads") v.get_to(c.threads);
      else if (key == "probe_hidden_dim") v.get_to(c.probe.hidden_dim);
      else if (key == "probe_lr") v.get_to(c.probe.lr);
      else if (key == "probe_weight_decay") v.get_to(c.probe.weight_decay);
      else if (key == "probe_epochs") v.get_to(c.probe.epochs);
      else if (key == "probe_batch_size") v.get_to(c.probe.batch_size);
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  if (c.k == 0) throw ConfigError("k must be positive");
  return c;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace emoclim
