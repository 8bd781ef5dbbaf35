#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoclim/adamw.hpp"
#include "emoclim/bytes.hpp"
#include "emoclim/model.hpp"

namespace emoclim {

inline constexpr std::string_view kCheckpointMagic = "EMOC";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Best-validation snapshot: both heads (including batchnorm running
// statistics), optimizer moments, and the run configuration.
struct Checkpoint {
  TrainConfig config;
  EmoClimModel model;
  AdamW<float> optimizer;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

namespace detail {

struct TensorSlot {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::span<float> values;
};

inline void head_slots(const std::string& prefix, ProjectionHead<float>& head, std::vector<TensorSlot>& out) {
  auto matrix = [&](const std::string& name, Tensor2<float>& t) {
    out.push_back({prefix + name,
                   {static_cast<std::uint32_t>(t.rows()), static_cast<std::uint32_t>(t.cols())},
                   t.values()});
  };
  auto vec = [&](const std::string& name, std::vector<float>& v) {
    out.push_back({prefix + name, {static_cast<std::uint32_t>(v.size())}, v});
  };
  matrix(".layer1.weight", head.layer1.weight);
  vec(".layer1.bias", head.layer1.bias);
  vec(".bn.gamma", head.bn.gamma);
  vec(".bn.beta", head.bn.beta);
  vec(".bn.running_mean", head.bn.running_mean);
  vec(".bn.running_var", head.bn.running_var);
  matrix(".layer2.weight", head.layer2.weight);
  vec(".layer2.bias", head.layer2.bias);
}

// Fixed slot order shared by encoder and decoder. Optimizer moments are
// allocated here when the optimizer has not stepped yet.
inline std::vector<TensorSlot> checkpoint_slots(Checkpoint& ckpt) {
  std::vector<TensorSlot> slots;
  head_slots("image", ckpt.model.image, slots);
  head_slots("audio", ckpt.model.audio, slots);
  std::map<std::string, std::vector<std::uint32_t>> dims;
  for (const auto& s : slots) dims[s.name] = s.dims;

  const auto params = ckpt.model.params();
  if (ckpt.optimizer.first_moment().size() != params.size()) ckpt.optimizer.init_state(params);
  for (std::size_t p = 0; p < params.size(); ++p) {
    slots.push_back({"optim.m." + params[p].name, dims.at(params[p].name), ckpt.optimizer.first_moment()[p]});
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    slots.push_back({"optim.v." + params[p].name, dims.at(params[p].name), ckpt.optimizer.second_moment()[p]});
  }
  return slots;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(Checkpoint& ckpt) {
  const auto slots = detail::checkpoint_slots(ckpt);
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u16(static_cast<std::uint16_t>(slots.size()));
  for (const auto& slot : slots) {
    w.short_string(slot.name);
    w.u8(static_cast<std::uint8_t>(slot.dims.size()));
    for (auto d : slot.dims) w.u32(d);
    for (float v : slot.values) w.f32(v);
  }
  const nlohmann::json meta{{"config", ckpt.config},
                            {"image_in_dim", ckpt.model.image.in_dim()},
                            {"audio_in_dim", ckpt.model.audio.in_dim()},
                            {"best_epoch", ckpt.best_epoch},
                            {"best_val_loss", ckpt.best_val_loss},
                            {"optimizer_step", ckpt.optimizer.step_count()}};
  const std::string text = meta.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  return w.take();
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.set_context("checkpoint header");
  if (r.raw(4, "magic") != kCheckpointMagic) throw FormatError("bad magic: not an EMOC checkpoint", 0);
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }

  struct RawTensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
  };
  std::map<std::string, RawTensor> tensors;
  const auto count = r.u16();
  for (std::uint16_t t = 0; t < count; ++t) {
    r.set_context("checkpoint tensor " + std::to_string(t));
    const std::string name = r.short_string("tensor name");
    RawTensor raw;
    const auto rank = r.u8();
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      raw.dims.push_back(r.u32());
      n *= raw.dims.back();
    }
    if (n > r.remaining() / 4) r.fail("tensor '" + name + "' larger than the remaining file");
    raw.values.resize(n);
    for (float& v : raw.values) v = r.f32();
    if (!tensors.emplace(name, std::move(raw)).second) r.fail("duplicate tensor '" + name + "'");
  }

  r.set_context("checkpoint metadata");
  const auto meta_len = r.u32();
  const std::string text = r.raw(meta_len, "metadata");
  if (!r.at_end()) r.fail("unexpected trailing bytes");

  Checkpoint ckpt;
  std::size_t image_dim = 0, audio_dim = 0;
  std::uint64_t step = 0;
  try {
    const auto meta = nlohmann::json::parse(text);
    ckpt.config = meta.at("config").get<TrainConfig>();
    image_dim = meta.at("image_in_dim").get<std::size_t>();
    audio_dim = meta.at("audio_in_dim").get<std::size_t>();
    ckpt.best_epoch = meta.at("best_epoch").get<std::size_t>();
    ckpt.best_val_loss = meta.at("best_val_loss").get<double>();
    step = meta.at("optimizer_step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("malformed metadata: ") + e.what());
  }

  ckpt.model = EmoClimModel(ckpt.config, image_dim, audio_dim);
  ckpt.optimizer = AdamW<float>(ckpt.config.optimizer());
  for (auto& slot : detail::checkpoint_slots(ckpt)) {
    auto it = tensors.find(slot.name);
    if (it == tensors.end()) r.fail("missing tensor '" + slot.name + "'");
    if (it->second.dims != slot.dims) r.fail("tensor '" + slot.name + "' has unexpected shape");
    std::copy(it->second.values.begin(), it->second.values.end(), slot.values.begin());
    tensors.erase(it);
  }
  if (!tensors.empty()) r.fail("unknown tensor '" + tensors.begin()->first + "'");
  ckpt.optimizer.set_step_count(step);
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_checkpoint(bytes);
}

}  // namespace emoclim
