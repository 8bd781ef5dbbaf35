#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "emoclim/emoclim.hpp"

namespace testing_support {

using emoclim::Rng;
using emoclim::Tensor2;

inline Tensor2<double> random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor2<double> t(n, d);
  for (double& v : t.values()) v = normal(rng);
  return emoclim::l2_normalize_forward(t);
}

inline std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
  std::uniform_int_distribution<int> dist(0, classes - 1);
  std::vector<int> y(n);
  for (int& v : y) v = dist(rng);
  return y;
}

// Literal transcription of the supervised contrastive loss: for each anchor
// with positives, -1/|P| sum_p log(exp(s_ip/t) / sum_a exp(s_ia/t)), then the
// mean over those anchors. `intra` removes i from its own P and A.
// Returns NaN when no anchor has a positive.
inline double naive_supcon(const Tensor2<double>& za, const std::vector<int>& ya, const Tensor2<double>& zb,
                           const std::vector<int>& yb, double tau, bool intra) {
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < za.rows(); ++i) {
    std::vector<std::size_t> positives;
    double denom = 0.0;
    for (std::size_t a = 0; a < zb.rows(); ++a) {
      if (intra && a == i) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < za.cols(); ++j) s += za(i, j) * zb(a, j);
      denom += std::exp(s / tau);
      if (yb[a] == ya[i]) positives.push_back(a);
    }
    if (positives.empty()) continue;
    double sum = 0.0;
    for (std::size_t p : positives) {
      double s = 0.0;
      for (std::size_t j = 0; j < za.cols(); ++j) s += za(i, j) * zb(p, j);
      sum += std::log(std::exp(s / tau) / denom);
    }
    total += -sum / static_cast<double>(positives.size());
    ++anchors;
  }
  return anchors == 0 ? std::nan("") : total / static_cast<double>(anchors);
}

// All-pairs concordance: positives scored above negatives count 1, ties 1/2.
inline double brute_roc_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  std::uint64_t twice = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j]) twice += 2;
      else if (s[i] == s[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / static_cast<double>(2 * pairs);
}

// Average precision by explicit rank: for each positive, count items ranked
// at or above it (higher score, or equal score and lower index).
inline double brute_average_precision(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  std::size_t positives = 0;
  std::vector<double> terms;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    ++positives;
    std::size_t rank = 0, hits = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const bool above = s[j] > s[i] || (s[j] == s[i] && j <= i);
      if (!above) continue;
      ++rank;
      if (y[j]) ++hits;
    }
    terms.push_back(static_cast<double>(hits) / static_cast<double>(rank));
  }
  // order-independent, so the per-positive order here need not match the ranking
  return emoclim::exact_sum(terms) / static_cast<double>(positives);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("emoclim_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline emoclim::SyntheticConfig small_synthetic(std::uint64_t seed, std::size_t per_class = 20) {
  emoclim::SyntheticConfig c;
  c.per_class = per_class;
  c.image_dim = 12;
  c.audio_dim = 10;
  c.audio_chunks = 3;
  c.seed = seed;
  return c;
}

inline emoclim::TrainConfig small_train_config(std::uint64_t seed) {
  emoclim::TrainConfig c;
  c.embed_dim = 16;
  // narrow hidden layers plus dropout 0.5 can zero a whole row at init
  c.hidden_dim = 64;
  c.batch_size = 16;
  c.epochs = 3;
  c.lr = 1e-3;
  c.seed = seed;
  return c;
}

}  // namespace testing_support
