#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "emoclim/bytes.hpp"
#include "emoclim/emotion.hpp"
#include "emoclim/log.hpp"
#include "emoclim/tensor.hpp"

namespace emoclim {

// One item's frozen encoder output: C chunk (or crop) feature vectors.
struct FeatureRecord {
  std::string item_id;
  std::string source_label;
  Tensor2<float> chunks;  // C x D

  std::size_t num_chunks() const noexcept { return chunks.rows(); }
  bool operator==(const FeatureRecord&) const = default;
};

// In-memory image of an EMOF file.
struct FeatureFile {
  Modality modality = Modality::Image;
  std::uint32_t feature_dim = 0;
  SourceTaxonomy taxonomy;
  std::vector<FeatureRecord> records;

  bool operator==(const FeatureFile&) const = default;
};

inline constexpr std::string_view kEmofMagic = "EMOF";
inline constexpr std::uint32_t kEmofVersion = 1;

inline std::vector<std::uint8_t> encode_feature_file(const FeatureFile& file) {
  const auto& tax = file.taxonomy;
  if (tax.labels.size() > 0xFFFF || tax.dropped.size() > 0xFFFF) throw ConfigError("taxonomy too large");
  ByteWriter w;
  w.raw(kEmofMagic);
  w.u32(kEmofVersion);
  w.u8(static_cast<std::uint8_t>(file.modality));
  w.u32(file.feature_dim);
  w.u64(file.records.size());
  w.u16(static_cast<std::uint16_t>(tax.labels.size()));
  for (const auto& label : tax.labels) w.short_string(label);
  w.u16(static_cast<std::uint16_t>(tax.dropped.size()));
  for (const auto& label : tax.dropped) {
    const auto idx = tax.label_index(label);
    if (!idx) throw TaxonomyError("dropped label '" + label + "' is not in the taxonomy");
    w.u16(static_cast<std::uint16_t>(*idx));
  }
  std::unordered_set<std::string_view> seen;
  for (std::size_t r = 0; r < file.records.size(); ++r) {
    const auto& rec = file.records[r];
    if (!seen.insert(rec.item_id).second) throw IntegrityError("duplicate item_id '" + rec.item_id + "'");
    const auto label = tax.label_index(rec.source_label);
    if (!label) throw TaxonomyError("record '" + rec.item_id + "' has unknown label '" + rec.source_label + "'");
    if (rec.chunks.rows() == 0 || rec.chunks.rows() > 0xFFFF) {
      throw ConfigError("record '" + rec.item_id + "' must have between 1 and 65535 chunks");
    }
    if (rec.chunks.cols() != file.feature_dim) {
      throw ConfigError("record '" + rec.item_id + "' has dimension " + std::to_string(rec.chunks.cols()) +
                        ", file declares " + std::to_string(file.feature_dim));
    }
    w.short_string(rec.item_id);
    w.u16(static_cast<std::uint16_t>(*label));
    w.u16(static_cast<std::uint16_t>(rec.chunks.rows()));
    for (float v : rec.chunks.values()) w.f32(v);
  }
  return w.take();
}

inline FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.set_context("header");
  if (r.raw(4, "magic") != kEmofMagic) {
    throw FormatError("bad magic: not an EMOF file", 0);
  }
  if (const auto version = r.u32(); version != kEmofVersion) {
    r.fail("unsupported EMOF version " + std::to_string(version));
  }
  FeatureFile file;
  const auto modality = r.u8();
  if (modality > 1) r.fail("invalid modality byte " + std::to_string(modality));
  file.modality = static_cast<Modality>(modality);
  file.feature_dim = r.u32();
  if (file.feature_dim == 0) r.fail("feature dimension must be positive");
  const std::uint64_t count = r.u64();

  r.set_context("taxonomy");
  file.taxonomy.modality = file.modality;
  file.taxonomy.name = default_taxonomy(file.modality).name;
  const auto label_count = r.u16();
  for (std::uint16_t i = 0; i < label_count; ++i) file.taxonomy.labels.push_back(r.short_string("label name"));
  const auto dropped_count = r.u16();
  for (std::uint16_t i = 0; i < dropped_count; ++i) {
    const auto idx = r.u16();
    if (idx >= label_count) r.fail("dropped label index " + std::to_string(idx) + " out of range");
    file.taxonomy.dropped.push_back(file.taxonomy.labels[idx]);
  }

  // Smallest record: empty id, label, one chunk of D floats.
  const std::uint64_t min_record = 6 + 4ULL * file.feature_dim;
  file.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, r.remaining() / min_record + 1)));
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    r.set_context("record " + std::to_string(i));
    FeatureRecord rec;
    rec.item_id = r.short_string("item id");
    const auto label = r.u16();
    if (label >= label_count) r.fail("label index " + std::to_string(label) + " out of range");
    rec.source_label = file.taxonomy.labels[label];
    const auto chunks = r.u16();
    if (chunks == 0) r.fail("record has zero chunks");
    std::vector<float> values(static_cast<std::size_t>(chunks) * file.feature_dim);
    for (float& v : values) {
      v = r.f32();
      if (!std::isfinite(v)) r.fail("non-finite feature value");
    }
    rec.chunks = Tensor2<float>(chunks, file.feature_dim, std::move(values));
    if (!seen.insert(rec.item_id).second) {
      throw IntegrityError("duplicate item_id '" + rec.item_id + "' at record " + std::to_string(i));
    }
    file.records.push_back(std::move(rec));
  }
  r.set_context("trailer");
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " unexpected trailing bytes");
  return file;
}

inline FeatureFile read_feature_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_feature_file(bytes);
}

inline void write_feature_file(const std::filesystem::path& path, const FeatureFile& file) {
  write_file_atomic(path, encode_feature_file(file));
}

// Records of one modality with their unified labels; dropped labels removed.
struct Dataset {
  Modality modality = Modality::Image;
  SourceTaxonomy taxonomy;
  std::size_t dim = 0;
  std::vector<FeatureRecord> records;
  std::vector<UnifiedEmotion> labels;

  std::size_t size() const noexcept { return records.size(); }
};

inline Dataset unify(FeatureFile file) {
  Dataset out;
  out.modality = file.modality;
  out.taxonomy = file.taxonomy;
  out.dim = file.feature_dim;
  std::size_t dropped = 0;
  for (auto& rec : file.records) {
    const auto label = map_label(file.taxonomy, rec.source_label);
    if (!label) {
      ++dropped;
      continue;
    }
    out.labels.push_back(*label);
    out.records.push_back(std::move(rec));
  }
  if (dropped > 0) {
    logger().info("{}: removed {} records with unmappable labels", to_string(out.modality), dropped);
  }
  return out;
}

inline Dataset load_dataset(const std::filesystem::path& path) { return unify(read_feature_file(path)); }

// Subset in the order of `ids`; every id must exist.
inline Dataset select(const Dataset& data, const std::vector<std::string>& ids) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < data.records.size(); ++i) index.emplace(data.records[i].item_id, i);
  Dataset out;
  out.modality = data.modality;
  out.taxonomy = data.taxonomy;
  out.dim = data.dim;
  out.records.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw IntegrityError("split references unknown item_id '" + id + "'");
    out.records.push_back(data.records[it->second]);
    out.labels.push_back(data.labels[it->second]);
  }
  return out;
}

}  // namespace emoclim
