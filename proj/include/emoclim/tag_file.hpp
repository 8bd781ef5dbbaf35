#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "emoclim/bytes.hpp"

namespace emoclim {

// Binary tag sidecar: "EMOT", u64 item count, u16 tag count T, then per
// item a u16-prefixed id and ceil(T/8) bytes of tag bits, least
// significant bit first.
struct TaggedItem {
  std::string item_id;
  std::vector<std::uint8_t> tags;  // T entries, 0 or 1

  bool operator==(const TaggedItem&) const = default;
};

struct TagFile {
  std::uint16_t num_tags = 0;
  std::vector<TaggedItem> items;

  bool operator==(const TagFile&) const = default;
};

inline constexpr std::string_view kTagMagic = "EMOT";

inline std::vector<std::uint8_t> encode_tag_file(const TagFile& file) {
  ByteWriter w;
  w.raw(kTagMagic);
  w.u64(file.items.size());
  w.u16(file.num_tags);
  const std::size_t packed = (file.num_tags + 7u) / 8u;
  for (const auto& item : file.items) {
    if (item.tags.size() != file.num_tags) {
      throw ConfigError("item '" + item.item_id + "' has " + std::to_string(item.tags.size()) + " tags, expected " +
                        std::to_string(file.num_tags));
    }
    w.short_string(item.item_id);
    for (std::size_t b = 0; b < packed; ++b) {
      std::uint8_t byte = 0;
      for (std::size_t bit = 0; bit < 8 && b * 8 + bit < file.num_tags; ++bit) {
        if (item.tags[b * 8 + bit]) byte |= static_cast<std::uint8_t>(1u << bit);
      }
      w.u8(byte);
    }
  }
  return w.take();
}

inline TagFile decode_tag_file(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.set_context("tag header");
  if (r.raw(4, "magic") != kTagMagic) throw FormatError("bad magic: not an EMOT tag file", 0);
  TagFile file;
  const auto count = r.u64();
  file.num_tags = r.u16();
  const std::size_t packed = (file.num_tags + 7u) / 8u;
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    r.set_context("tag record " + std::to_string(i));
    TaggedItem item;
    item.item_id = r.short_string("item id");
    item.tags.resize(file.num_tags);
    for (std::size_t b = 0; b < packed; ++b) {
      const auto byte = r.u8();
      for (std::size_t bit = 0; bit < 8; ++bit) {
        const std::size_t t = b * 8 + bit;
        const bool set = (byte >> bit) & 1u;
        if (t < file.num_tags) {
          item.tags[t] = set ? 1 : 0;
        } else if (set) {
          r.fail("padding bit set beyond tag count");
        }
      }
    }
    if (!seen.insert(item.item_id).second) throw IntegrityError("duplicate item_id '" + item.item_id + "' in tag file");
    file.items.push_back(std::move(item));
  }
  r.set_context("tag trailer");
  if (!r.at_end()) r.fail("unexpected trailing bytes");
  return file;
}

inline TagFile read_tag_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_tag_file(bytes);
}

inline void write_tag_file(const std::filesystem::path& path, const TagFile& file) {
  write_file_atomic(path, encode_tag_file(file));
}

}  // namespace emoclim
