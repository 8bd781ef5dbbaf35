#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emoclim/error.hpp"

namespace emoclim {

enum class Modality : std::uint8_t { Image = 0, Audio = 1 };

inline std::string_view to_string(Modality m) { return m == Modality::Image ? "image" : "audio"; }

// Six classes shared by the image and music datasets after merging.
enum class UnifiedEmotion : std::uint8_t {
  AmusementFunny = 0,
  ExcitementExciting,
  ContentmentHappy,
  AngerAngry,
  SadnessSad,
  FearScary,
};

inline constexpr std::size_t kNumEmotions = 6;

inline constexpr std::array<UnifiedEmotion, kNumEmotions> kAllEmotions{
    UnifiedEmotion::AmusementFunny, UnifiedEmotion::ExcitementExciting, UnifiedEmotion::ContentmentHappy,
    UnifiedEmotion::AngerAngry,     UnifiedEmotion::SadnessSad,         UnifiedEmotion::FearScary};

inline std::string_view to_string(UnifiedEmotion e) {
  static constexpr std::array<std::string_view, kNumEmotions> names{
      "AMUSEMENT_FUNNY", "EXCITEMENT_EXCITING", "CONTENTMENT_HAPPY", "ANGER_ANGRY", "SADNESS_SAD", "FEAR_SCARY"};
  return names[static_cast<std::size_t>(e)];
}

inline std::size_t index_of(UnifiedEmotion e) { return static_cast<std::size_t>(e); }

// A dataset's own label set as it appears in feature files.
struct SourceTaxonomy {
  Modality modality = Modality::Image;
  std::string name;
  std::vector<std::string> labels;
  std::vector<std::string> dropped;

  bool contains(std::string_view label) const {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
  }
  bool is_dropped(std::string_view label) const {
    return std::find(dropped.begin(), dropped.end(), label) != dropped.end();
  }
  std::optional<std::size_t> label_index(std::string_view label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels.begin());
  }

  bool operator==(const SourceTaxonomy&) const = default;
};

inline SourceTaxonomy image_taxonomy() {
  return {Modality::Image,
          "deepemotion",
          {"amusement", "awe", "contentment", "excitement", "anger", "disgust", "fear", "sadness"},
          {"awe", "disgust"}};
}

inline SourceTaxonomy music_taxonomy() {
  return {Modality::Audio,
          "audioset_mood",
          {"exciting", "funny", "happy", "tender", "angry", "sad", "scary"},
          {"tender"}};
}

inline SourceTaxonomy default_taxonomy(Modality m) {
  return m == Modality::Image ? image_taxonomy() : music_taxonomy();
}

namespace detail {

struct LabelPair {
  std::string_view source;
  UnifiedEmotion unified;
};

// contentment <-> happy is the one pairing not matched by wording alone.
inline constexpr std::array<LabelPair, 6> kImageMapping{{
    {"amusement", UnifiedEmotion::AmusementFunny},
    {"excitement", UnifiedEmotion::ExcitementExciting},
    {"contentment", UnifiedEmotion::ContentmentHappy},
    {"anger", UnifiedEmotion::AngerAngry},
    {"sadness", UnifiedEmotion::SadnessSad},
    {"fear", UnifiedEmotion::FearScary},
}};

inline constexpr std::array<LabelPair, 6> kMusicMapping{{
    {"funny", UnifiedEmotion::AmusementFunny},
    {"exciting", UnifiedEmotion::ExcitementExciting},
    {"happy", UnifiedEmotion::ContentmentHappy},
    {"angry", UnifiedEmotion::AngerAngry},
    {"sad", UnifiedEmotion::SadnessSad},
    {"scary", UnifiedEmotion::FearScary},
}};

}  // namespace detail

// nullopt means the label is dropped (no counterpart in the other modality).
inline std::optional<UnifiedEmotion> map_label(const SourceTaxonomy& taxonomy, std::string_view label) {
  if (!taxonomy.contains(label)) {
    throw TaxonomyError("label '" + std::string(label) + "' is not part of the " +
                        std::string(to_string(taxonomy.modality)) + " taxonomy");
  }
  if (taxonomy.is_dropped(label)) return std::nullopt;
  const auto& table = taxonomy.modality == Modality::Image ? detail::kImageMapping : detail::kMusicMapping;
  for (const auto& pair : table) {
    if (pair.source == label) return pair.unified;
  }
  throw TaxonomyError("label '" + std::string(label) + "' has no mapping in the unified " +
                      std::string(to_string(taxonomy.modality)) + " taxonomy");
}

// Reverse lookup, used by the synthetic generator to emit source labels.
inline std::string_view source_label_for(Modality modality, UnifiedEmotion e) {
  const auto& table = modality == Modality::Image ? detail::kImageMapping : detail::kMusicMapping;
  for (const auto& pair : table) {
    if (pair.unified == e) return pair.source;
  }
  return {};
}

}  // namespace emoclim
