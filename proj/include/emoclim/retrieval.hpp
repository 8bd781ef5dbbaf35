#pragma once

#include <array>
#include <cstddef>
#include <algorithm>
#include <exception>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "emoclim/embedding.hpp"
#include "emoclim/metrics.hpp"
#include "emoclim/model.hpp"

namespace emoclim {

struct DirectionReport {
  std::string name;
  std::size_t queries = 0;
  std::map<UnifiedEmotion, double> precision_per_class;
  std::map<UnifiedEmotion, double> mrr_per_class;
  double precision = 0.0;  // macro P@K
  double mrr = 0.0;        // macro MRR
};

struct RetrievalReport {
  std::size_t k = 5;
  // image->audio, audio->image, image->image, audio->audio
  std::array<DirectionReport, 4> directions;
};

// Ranks every candidate for every query. Queries are split into contiguous
// blocks across `threads` workers; each writes only its own slots, so the
// result does not depend on the thread count.
inline DirectionReport evaluate_direction(const std::string& name, std::span<const JointEmbedding> queries,
                                          std::span<const JointEmbedding> candidates, std::size_t k,
                                          bool exclude_self, std::size_t threads = 1) {
  std::vector<double> precision(queries.size()), rr(queries.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<UnifiedEmotion> ranked_labels;
    for (std::size_t q = begin; q < end; ++q) {
      const auto order = rank_candidates(queries[q], candidates, exclude_self);
      ranked_labels.resize(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) ranked_labels[i] = candidates[order[i]].label;
      const std::span<const UnifiedEmotion> ranked(ranked_labels);
      precision[q] = precision_at_k(ranked, queries[q].label, k);
      rr[q] = reciprocal_rank(ranked, queries[q].label);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, queries.size()));
  if (threads == 1) {
    work(0, queries.size());
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t block = (queries.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = std::min(queries.size(), t * block);
      const std::size_t end = std::min(queries.size(), begin + block);
      pool.emplace_back([&, t, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<UnifiedEmotion> labels(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) labels[q] = queries[q].label;
  for (UnifiedEmotion e : kAllEmotions) {
    if (std::find(labels.begin(), labels.end(), e) == labels.end()) {
      logger().warn("{}: no {} queries; class excluded from the macro average", name, to_string(e));
    }
  }
  const auto p = macro_average(std::span<const double>(precision), std::span<const UnifiedEmotion>(labels));
  const auto m = macro_average(std::span<const double>(rr), std::span<const UnifiedEmotion>(labels));
  DirectionReport out;
  out.name = name;
  out.queries = queries.size();
  out.precision_per_class = p.per_class;
  out.mrr_per_class = m.per_class;
  out.precision = p.macro;
  out.mrr = m.macro;
  return out;
}

inline RetrievalReport evaluate_retrieval(const std::vector<JointEmbedding>& images,
                                          const std::vector<JointEmbedding>& audio, std::size_t k,
                                          std::size_t threads = 1) {
  RetrievalReport report;
  report.k = k;
  report.directions[0] = evaluate_direction("image_to_audio", images, audio, k, false, threads);
  report.directions[1] = evaluate_direction("audio_to_image", audio, images, k, false, threads);
  report.directions[2] = evaluate_direction("image_to_image", images, images, k, true, threads);
  report.directions[3] = evaluate_direction("audio_to_audio", audio, audio, k, true, threads);
  return report;
}

// Embeds the test records with chunk averaging, then evaluates all four directions.
inline RetrievalReport evaluate_retrieval(const EmoClimModel& model, const Dataset& image_test,
                                          const Dataset& audio_test, std::size_t k, std::size_t threads = 1) {
  return evaluate_retrieval(embed_dataset(model.image, image_test), embed_dataset(model.audio, audio_test), k,
                            threads);
}

inline nlohmann::json to_json(const RetrievalReport& report) {
  nlohmann::json j;
  j["k"] = report.k;
  for (const auto& d : report.directions) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [label, value] : d.precision_per_class) {
      per_class[std::string(to_string(label))] = {{"precision_at_k", value}, {"mrr", d.mrr_per_class.at(label)}};
    }
    j["directions"][d.name] = {{"queries", d.queries},
                               {"macro_precision_at_k", d.precision},
                               {"macro_mrr", d.mrr},
                               {"per_class", per_class}};
  }
  return j;
}

// One row, columns grouped by direction as P@K then MRR, in percent.
inline std::string to_csv(const RetrievalReport& report, const std::string& row_label = "emoclim") {
  std::ostringstream out;
  out << "model";
  for (const auto& d : report.directions) out << "," << d.name << "_p@" << report.k << "," << d.name << "_mrr";
  out << "\n" << row_label;
  out.setf(std::ios::fixed);
  out.precision(2);
  for (const auto& d : report.directions) out << "," << 100.0 * d.precision << "," << 100.0 * d.mrr;
  out << "\n";
  return out.str();
}

}  // namespace emoclim
