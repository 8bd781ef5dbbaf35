#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emoclim/embedding.hpp"
#include "emoclim/error.hpp"
#include "emoclim/log.hpp"

namespace emoclim {

// Correctly rounded sum of doubles (Shewchuk partials), independent of the
// order of the terms.
inline double exact_sum(std::span<const double> terms) {
  std::vector<double> partials;
  for (double x : terms) {
    std::size_t used = 0;
    for (double y : partials) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[used++] = lo;
      x = hi;
    }
    partials.resize(used);
    partials.push_back(x);
  }
  if (partials.empty()) return 0.0;
  // Round the non-overlapping partials from the top, fixing half-way cases.
  std::size_t n = partials.size();
  double hi = partials[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials[--n];
    hi = x + y;
    const double yr = hi - x;
    lo = y - yr;
    if (lo != 0.0) break;
  }
  if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

// Candidate indices by descending cosine similarity (dot product of unit
// vectors), ties broken by ascending item_id. With `exclude_self` the
// candidate sharing the query's item_id is left out.
inline std::vector<std::size_t> rank_candidates(const JointEmbedding& query,
                                                std::span<const JointEmbedding> candidates,
                                                bool exclude_self = false) {
  std::vector<std::size_t> order;
  std::vector<double> scores(candidates.size());
  order.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (exclude_self && candidates[i].item_id == query.item_id) continue;
    if (candidates[i].vector.size() != query.vector.size()) {
      throw EvaluationError("embedding dimension mismatch for candidate '" + candidates[i].item_id + "'");
    }
    scores[i] = dot<float>(query.vector, candidates[i].vector);
    order.push_back(i);
  }
  if (order.empty()) throw EvaluationError("no candidates to rank for query '" + query.item_id + "'");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a].item_id < candidates[b].item_id;
  });
  return order;
}

template <typename Label>
double precision_at_k(std::span<const Label> ranked, const Label& query, std::size_t k) {
  if (k == 0) throw EvaluationError("K must be positive");
  if (ranked.size() < k) {
    throw EvaluationError("precision@" + std::to_string(k) + " needs at least " + std::to_string(k) +
                          " candidates, got " + std::to_string(ranked.size()));
  }
  const auto hits = std::count(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), query);
  return static_cast<double>(hits) / static_cast<double>(k);
}

template <typename Label>
double reciprocal_rank(std::span<const Label> ranked, const Label& query) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] == query) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

template <typename Label>
struct MacroAverage {
  std::map<Label, double> per_class;
  double macro = 0.0;
};

// Mean per class, then the unweighted mean over classes that have queries.
template <typename Label>
MacroAverage<Label> macro_average(std::span<const double> values, std::span<const Label> labels) {
  if (values.size() != labels.size()) throw EvaluationError("metric and label counts differ");
  if (values.empty()) throw EvaluationError("cannot macro-average zero queries");
  std::map<Label, std::pair<double, std::size_t>> sums;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& [sum, count] = sums[labels[i]];
    sum += values[i];
    ++count;
  }
  MacroAverage<Label> out;
  double total = 0.0;
  for (const auto& [label, acc] : sums) {
    const double mean = acc.first / static_cast<double>(acc.second);
    out.per_class[label] = mean;
    total += mean;
  }
  out.macro = total / static_cast<double>(sums.size());
  return out;
}

// Mann-Whitney U over all (positive, negative) pairs, ties counting one
// half. nullopt when either class is absent.
inline std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw EvaluationError("score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t positives = 0, negatives = 0;
  for (auto l : labels) (l ? positives : negatives) += 1;
  if (positives == 0 || negatives == 0) return std::nullopt;

  // Twice the concordance count, kept integral until the final division.
  std::uint64_t twice_u = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t group_pos = 0, group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? group_pos : group_neg) += 1;
      ++j;
    }
    twice_u += group_pos * (2 * negatives_below + group_neg);
    negatives_below += group_neg;
    i = j;
  }
  return static_cast<double>(twice_u) / static_cast<double>(2 * positives * negatives);
}

// Average precision: mean over positives of precision at the positive's
// rank. Rank is by descending score, ties broken by ascending input index.
inline std::optional<double> pr_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw EvaluationError("score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::size_t positives = 0, negatives = 0;
  for (auto l : labels) (l ? positives : negatives) += 1;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<double> terms;
  terms.reserve(positives);
  std::size_t hits = 0;
  for (std::size_t rank = 1; rank <= order.size(); ++rank) {
    if (!labels[order[rank - 1]]) continue;
    ++hits;
    terms.push_back(static_cast<double>(hits) / static_cast<double>(rank));
  }
  return exact_sum(terms) / static_cast<double>(positives);
}

// Unweighted mean over the tags for which the metric is defined.
inline std::optional<double> mean_defined(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace emoclim
