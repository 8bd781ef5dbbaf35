#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "emoclim/embedding.hpp"
#include "emoclim/error.hpp"
#include "emoclim/feature_file.hpp"
#include "emoclim/tag_file.hpp"
#include "emoclim/tensor.hpp"

namespace emoclim {

struct ProbeData {
  Tensor2<float> x, y;
};

// Joins features and tags by item_id for the probe. With a head the inputs
// are chunk-averaged joint embeddings, otherwise chunk-mean raw features.
class ProbeInputs {
 public:
  ProbeInputs(const FeatureFile& features, const TagFile& tags, const ProjectionHead<float>* head = nullptr)
      : features_(features), tags_(tags), head_(head) {
    if (head_ && features_.feature_dim != head_->in_dim()) {
      throw ConfigError("tagged feature dimension " + std::to_string(features_.feature_dim) +
                        " does not match the head's " + std::to_string(head_->in_dim()));
    }
    for (const auto& r : features_.records) records_.emplace(r.item_id, &r);
    for (const auto& t : tags_.items) tagged_.emplace(t.item_id, &t);
  }

  std::size_t width() const { return head_ ? head_->embed_dim() : features_.feature_dim; }

  ProbeData gather(const std::vector<std::string>& ids) const {
    ProbeData d{Tensor2<float>(ids.size(), width()), Tensor2<float>(ids.size(), tags_.num_tags)};
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto rec = records_.find(ids[i]);
      if (rec == records_.end()) throw IntegrityError("split references unknown item_id '" + ids[i] + "'");
      const auto tag = tagged_.find(ids[i]);
      if (tag == tagged_.end()) throw IntegrityError("no tags for item_id '" + ids[i] + "'");
      auto row = d.x.row(i);
      if (head_) {
        const auto z = embed_chunks(*head_, *rec->second);
        std::copy(z.begin(), z.end(), row.begin());
      } else {
        const auto& chunks = rec->second->chunks;
        for (std::size_t c = 0; c < chunks.rows(); ++c) {
          for (std::size_t j = 0; j < row.size(); ++j) row[j] += chunks(c, j) / static_cast<float>(chunks.rows());
        }
      }
      for (std::size_t t = 0; t < tags_.num_tags; ++t) d.y(i, t) = tag->second->tags[t];
    }
    return d;
  }

 private:
  const FeatureFile& features_;
  const TagFile& tags_;
  const ProjectionHead<float>* head_;
  std::unordered_map<std::string, const FeatureRecord*> records_;
  std::unordered_map<std::string, const TaggedItem*> tagged_;
};

}  // namespace emoclim
