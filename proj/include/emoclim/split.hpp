#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoclim/bytes.hpp"
#include "emoclim/emotion.hpp"
#include "emoclim/feature_file.hpp"
#include "emoclim/log.hpp"
#include "emoclim/rng.hpp"

namespace emoclim {

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::vector<std::string> train, val, test;

  bool operator==(const DatasetSplit&) const = default;
};

// Largest-remainder allocation of n items over 80/10/10, computed in
// integer tenths. Equal remainders favour train, then val.
inline std::array<std::size_t, 3> stratified_counts(std::size_t n) {
  constexpr std::array<std::size_t, 3> weights{8, 1, 1};
  std::array<std::size_t, 3> counts{};
  std::array<std::size_t, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    counts[k] = n * weights[k] / 10;
    remainders[k] = n * weights[k] % 10;
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i]];
  return counts;
}

// Per-class seeded shuffle, then consecutive train/val/test slices. Output
// lists are grouped by class in unified-taxonomy order.
inline DatasetSplit stratified_split(const Dataset& data, std::uint64_t seed) {
  DatasetSplit split;
  split.seed = seed;
  for (UnifiedEmotion emotion : kAllEmotions) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      if (data.labels[i] == emotion) ids.push_back(data.records[i].item_id);
    }
    if (ids.empty()) continue;
    if (ids.size() < 3) {
      logger().warn("class {} has only {} items; stratification degenerates to train-first",
                    to_string(emotion), ids.size());
    }
    auto rng = derive_rng(seed, "split." + std::string(to_string(emotion)));
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto counts = stratified_counts(ids.size());
    auto it = ids.begin();
    split.train.insert(split.train.end(), it, it + static_cast<std::ptrdiff_t>(counts[0]));
    it += static_cast<std::ptrdiff_t>(counts[0]);
    split.val.insert(split.val.end(), it, it + static_cast<std::ptrdiff_t>(counts[1]));
    it += static_cast<std::ptrdiff_t>(counts[1]);
    split.test.insert(split.test.end(), it, ids.end());
  }
  return split;
}

inline nlohmann::json to_json(const DatasetSplit& split) {
  return {{"seed", split.seed}, {"train", split.train}, {"val", split.val}, {"test", split.test}};
}

inline std::string dump_split(const DatasetSplit& split) { return to_json(split).dump(2) + "\n"; }

inline DatasetSplit parse_split(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("split file is not valid JSON: ") + e.what(), e.byte);
  }
  DatasetSplit split;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "seed" && key != "train" && key != "val" && key != "test") {
        throw ConfigError("unknown key '" + key + "' in split file");
      }
    }
    split.seed = j.at("seed").get<std::uint64_t>();
    split.train = j.at("train").get<std::vector<std::string>>();
    split.val = j.at("val").get<std::vector<std::string>>();
    split.test = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed split file: ") + e.what(), 0);
  }
  return split;
}

inline DatasetSplit read_split(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_split(std::string(bytes.begin(), bytes.end()));
}

inline void write_split(const std::filesystem::path& path, const DatasetSplit& split) {
  write_file_atomic(path, dump_split(split));
}

}  // namespace emoclim
