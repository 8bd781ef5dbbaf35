#include <gtest/gtest.h>

#include <map>
#include <set>

#include "support.hpp"

using namespace emoclim;
using testing_support::small_synthetic;
using testing_support::small_train_config;

namespace {

Dataset labelled_pool(Modality m, std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Dataset d;
  d.modality = m;
  d.dim = dim;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor2<float> t(2, dim);
    for (float& v : t.values()) v = normal(rng);
    d.records.push_back({"p" + std::to_string(i), "x", t});
    d.labels.push_back(kAllEmotions[i % 3]);
  }
  return d;
}

struct Fixture {
  Dataset image, audio;
  DatasetSplit image_split, audio_split;
};

Fixture synthetic_fixture(std::uint64_t seed, std::size_t per_class = 20) {
  const auto pair = generate_synthetic(small_synthetic(seed, per_class));
  Fixture f{unify(pair.image), unify(pair.audio), {}, {}};
  f.image_split = stratified_split(f.image, seed);
  f.audio_split = stratified_split(f.audio, seed);
  return f;
}

nlohmann::json without_wall_time(const EpochLog& e) {
  auto j = to_json(e);
  j.erase("wall_time_s");
  return j;
}

}  // namespace

TEST(Sampler, ExactPoolsGiveEveryItemOncePerBatch) {
  const auto image = labelled_pool(Modality::Image, 8, 3, 1);
  const auto audio = labelled_pool(Modality::Audio, 8, 3, 2);
  BatchSampler sampler(image, audio, 8, 0);
  for (int epoch = 0; epoch < 3; ++epoch) {
    const auto batches = sampler.next_epoch();
    ASSERT_EQ(batches.size(), 1u);
    EXPECT_EQ(std::set<std::size_t>(batches[0].image_indices.begin(), batches[0].image_indices.end()).size(), 8u);
    EXPECT_EQ(std::set<std::size_t>(batches[0].audio_indices.begin(), batches[0].audio_indices.end()).size(), 8u);
  }
}

TEST(Sampler, LargerPoolCoveredOnceSmallerPoolCycles) {
  const auto image = labelled_pool(Modality::Image, 50, 3, 1);
  const auto audio = labelled_pool(Modality::Audio, 17, 3, 2);
  BatchSampler sampler(image, audio, 8, 3);
  const auto batches = sampler.next_epoch();
  std::map<std::size_t, int> image_seen, audio_seen;
  std::size_t total = 0;
  for (const auto& b : batches) {
    EXPECT_EQ(b.image_indices.size(), b.audio_indices.size());
    EXPECT_GE(b.image_indices.size(), 2u);
    total += b.image_indices.size();
    for (auto i : b.image_indices) ++image_seen[i];
    for (auto i : b.audio_indices) ++audio_seen[i];
  }
  EXPECT_EQ(total, 50u);
  EXPECT_EQ(image_seen.size(), 50u);
  for (const auto& [i, n] : image_seen) EXPECT_EQ(n, 1) << i;
  // 50 draws from a pool of 17: two full cycles plus 16 of the third
  EXPECT_EQ(audio_seen.size(), 17u);
  for (const auto& [i, n] : audio_seen) {
    EXPECT_GE(n, 2);
    EXPECT_LE(n, 3);
  }
}

TEST(Sampler, SingleLeftoverMergedIntoLastBatch) {
  const auto image = labelled_pool(Modality::Image, 17, 3, 1);
  const auto audio = labelled_pool(Modality::Audio, 4, 3, 2);
  BatchSampler sampler(image, audio, 8, 0);
  EXPECT_EQ(sampler.epoch_batch_sizes(), (std::vector<std::size_t>{8, 9}));
  BatchSampler keep(labelled_pool(Modality::Image, 18, 3, 1), audio, 8, 0);
  EXPECT_EQ(keep.epoch_batch_sizes(), (std::vector<std::size_t>{8, 8, 2}));
}

TEST(Sampler, SameSeedSameSequence) {
  const auto image = labelled_pool(Modality::Image, 30, 3, 1);
  const auto audio = labelled_pool(Modality::Audio, 20, 3, 2);
  BatchSampler a(image, audio, 8, 5), b(image, audio, 8, 5);
  for (int epoch = 0; epoch < 3; ++epoch) {
    const auto ba = a.next_epoch();
    const auto bb = b.next_epoch();
    ASSERT_EQ(ba.size(), bb.size());
    for (std::size_t i = 0; i < ba.size(); ++i) {
      EXPECT_EQ(ba[i].image_indices, bb[i].image_indices);
      EXPECT_EQ(ba[i].audio_indices, bb[i].audio_indices);
      EXPECT_EQ(ba[i].image, bb[i].image);
      EXPECT_EQ(ba[i].audio, bb[i].audio);
    }
  }
}

TEST(Validate, DeterministicAndFinite) {
  const auto f = synthetic_fixture(2);
  const auto cfg = small_train_config(2);
  const EmoClimModel model(cfg, f.image.dim, f.audio.dim);
  const auto a = validate(model, f.image, f.audio, cfg);
  const auto b = validate(model, f.image, f.audio, cfg);
  EXPECT_EQ(a.total, b.total);
  EXPECT_TRUE(std::isfinite(a.total));
  EXPECT_GE(a.total, 0.0);
}

TEST(Validate, FourItemPoolsEqualDirectLoss) {
  const auto image = labelled_pool(Modality::Image, 4, 5, 1);
  const auto audio = labelled_pool(Modality::Audio, 4, 6, 2);
  auto cfg = small_train_config(0);
  cfg.embed_dim = 3;
  const EmoClimModel model(cfg, 5, 6);
  Tensor2<float> zi(4, 3), za(4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto ei = embed_chunks(model.image, image.records[i]);
    const auto ea = embed_chunks(model.audio, audio.records[i]);
    std::copy(ei.begin(), ei.end(), zi.row(i).begin());
    std::copy(ea.begin(), ea.end(), za.row(i).begin());
  }
  const double direct = total_loss(zi, image.labels, za, audio.labels, cfg.loss()).total;
  EXPECT_EQ(validate(model, image, audio, cfg).total, direct);
}

TEST(Train, ZeroEpochsRejected) {
  const auto f = synthetic_fixture(1);
  auto cfg = small_train_config(1);
  cfg.epochs = 0;
  EXPECT_THROW(train(f.image, f.audio, f.image_split, f.audio_split, cfg), ConfigError);
}

TEST(Train, ZeroLrFreezesParameters) {
  const auto f = synthetic_fixture(1);
  auto cfg = small_train_config(1);
  cfg.lr = 0.0;
  const EmoClimModel initial(cfg, f.image.dim, f.audio.dim);
  const auto result = train(f.image, f.audio, f.image_split, f.audio_split, cfg);
  EXPECT_EQ(result.best.model.image.layer1.weight, initial.image.layer1.weight);
  EXPECT_EQ(result.best.model.image.layer2.weight, initial.image.layer2.weight);
  EXPECT_EQ(result.best.model.audio.bn.gamma, initial.audio.bn.gamma);
  EXPECT_EQ(result.best.model.audio.layer2.bias, initial.audio.layer2.bias);
}

TEST(Train, ZeroLrAndFrozenStatsGiveConstantValLoss) {
  // Batchnorm running statistics are not parameters: they keep moving under
  // lr=0 unless momentum is also 0.
  const auto f = synthetic_fixture(1);
  auto cfg = small_train_config(1);
  cfg.lr = 0.0;
  cfg.bn_momentum = 0.0;
  const auto result = train(f.image, f.audio, f.image_split, f.audio_split, cfg);
  for (const auto& e : result.log) EXPECT_EQ(e.val_loss, result.log.front().val_loss);
  EXPECT_EQ(result.best.best_epoch, 1u);
}

TEST(Train, ValLossDecreasesEarlyOnSeparableData) {
  const auto f = synthetic_fixture(3);
  auto cfg = small_train_config(3);
  cfg.epochs = 4;
  const auto result = train(f.image, f.audio, f.image_split, f.audio_split, cfg);
  int decreases = 0;
  for (std::size_t e = 1; e < 4; ++e) decreases += result.log[e].val_loss < result.log[e - 1].val_loss;
  EXPECT_GE(decreases, 2);
}

TEST(Train, BestEpochIsEarliestMinimum) {
  const auto f = synthetic_fixture(4);
  auto cfg = small_train_config(4);
  cfg.epochs = 5;
  const auto result = train(f.image, f.audio, f.image_split, f.audio_split, cfg);
  std::size_t best = 0;
  for (std::size_t e = 1; e < result.log.size(); ++e) {
    if (result.log[e].val_loss < result.log[best].val_loss) best = e;
  }
  EXPECT_EQ(result.best.best_epoch, result.log[best].epoch);
  EXPECT_EQ(result.best.best_val_loss, result.log[best].val_loss);
}

TEST(Train, DeterministicCheckpointsAndLogs) {
  const auto f = synthetic_fixture(5);
  const auto cfg = small_train_config(5);
  auto a = train(f.image, f.audio, f.image_split, f.audio_split, cfg);
  auto b = train(f.image, f.audio, f.image_split, f.audio_split, cfg);
  EXPECT_EQ(encode_checkpoint(a.best), encode_checkpoint(b.best));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) EXPECT_EQ(without_wall_time(a.log[e]), without_wall_time(b.log[e]));
}

TEST(Train, ReloadedCheckpointReproducesBestValLoss) {
  testing_support::TempDir dir("reload");
  const auto f = synthetic_fixture(6);
  const auto cfg = small_train_config(6);
  auto result = train(f.image, f.audio, f.image_split, f.audio_split, cfg);
  save_checkpoint(dir / "m.ckpt", result.best);
  const auto loaded = load_checkpoint(dir / "m.ckpt");
  const double val =
      validate(loaded.model, select(f.image, f.image_split.val), select(f.audio, f.audio_split.val), loaded.config)
          .total;
  EXPECT_NEAR(val, result.best.best_val_loss, 1e-6);
}

TEST(Train, ComponentsLoggedAndNonNegative) {
  const auto f = synthetic_fixture(7);
  const auto result = train(f.image, f.audio, f.image_split, f.audio_split, small_train_config(7));
  for (const auto& e : result.log) {
    for (double c : e.train_components) EXPECT_GE(c, 0.0);
    for (double c : e.val_components) EXPECT_GE(c, 0.0);
    EXPECT_GE(e.wall_time_s, 0.0);
  }
}
