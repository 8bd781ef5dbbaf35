#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"

using namespace emoclim;
using testing_support::naive_supcon;
using testing_support::random_labels;
using testing_support::random_unit_rows;

TEST(SupCon, CrossHandExample) {
  const auto z = Tensor2<double>::from_rows({{1, 0}, {0, 1}});
  const std::vector<int> y{0, 1};
  const auto r = supcon_cross(z, y, z, y, 1.0);
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  EXPECT_NEAR(r.loss, expected, 1e-12);
  EXPECT_NEAR(r.loss, 0.3133, 1e-4);
}

TEST(SupCon, IntraHandExample) {
  const auto z = Tensor2<double>::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto r = supcon_intra(z, std::vector<int>{0, 0, 1}, 1.0);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
  EXPECT_EQ(r.contributing_anchors, 2u);
}

TEST(SupCon, IntraWithoutPairsIsEmpty) {
  const auto z = Tensor2<double>::from_rows({{1, 0}, {0, 1}});
  EXPECT_THROW(supcon_intra(z, std::vector<int>{0, 1}, 0.07), EmptyPositivesError);
}

TEST(SupCon, UniformLogitsGiveLogN) {
  for (std::size_t n : {2u, 4u, 16u, 64u}) {
    Tensor2<double> z(n, 3);
    for (std::size_t i = 0; i < n; ++i) z(i, 0) = 1.0;
    const std::vector<int> y(n, 0);
    EXPECT_NEAR(supcon_cross(z, y, z, y, 0.07).loss, std::log(double(n)), 1e-6);
  }
  Tensor2<double> z(4, 2);
  for (std::size_t i = 0; i < 4; ++i) z(i, 1) = 1.0;
  EXPECT_NEAR(supcon_cross(z, std::vector<int>(4, 2), z, std::vector<int>(4, 2), 0.5).loss, 1.3863, 1e-4);
}

TEST(SupCon, MatchesNaiveOracle) {
  for (std::size_t n : {2u, 4u, 16u, 64u}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto rng = derive_rng(seed, "oracle." + std::to_string(n));
      const auto za = random_unit_rows(n, 8, rng);
      const auto zb = random_unit_rows(n, 8, rng);
      const auto ya = random_labels(n, 3, rng);
      const auto yb = random_labels(n, 3, rng);
      const double cross = naive_supcon(za, ya, zb, yb, 0.1, false);
      if (!std::isnan(cross)) {
        EXPECT_NEAR(supcon_cross(za, ya, zb, yb, 0.1).loss, cross, 1e-6);
      }
      const double intra = naive_supcon(za, ya, za, ya, 0.1, true);
      if (!std::isnan(intra)) {
        EXPECT_NEAR(supcon_intra(za, ya, 0.1).loss, intra, 1e-6);
      }
    }
  }
}

TEST(SupCon, NonNegative) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const auto za = random_unit_rows(12, 4, rng);
    const auto zb = random_unit_rows(12, 4, rng);
    const auto ya = testing_support::random_labels(12, 2, rng);
    const auto yb = testing_support::random_labels(12, 2, rng);
    EXPECT_GE(supcon_cross(za, ya, zb, yb, 0.07).loss, 0.0);
    EXPECT_GE(supcon_intra(za, ya, 0.07).loss, 0.0);
  }
}

TEST(SupCon, AnchorsWithoutPositivesAreSkipped) {
  Rng rng(4);
  const auto za = random_unit_rows(4, 3, rng);
  const auto zb = random_unit_rows(4, 3, rng);
  const std::vector<int> ya{0, 0, 1, 5};  // label 5 never appears among candidates
  const std::vector<int> yb{0, 1, 1, 0};
  const auto r = supcon_cross(za, ya, zb, yb, 0.2);
  EXPECT_EQ(r.contributing_anchors, 3u);
  EXPECT_NEAR(r.loss, naive_supcon(za, ya, zb, yb, 0.2, false), 1e-9);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.grad_anchors(3, j), 0.0);
}

TEST(SupCon, PermutationInvariance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t n = 10;
    const auto zi = random_unit_rows(n, 5, rng);
    const auto za = random_unit_rows(n, 5, rng);
    const auto yi = random_labels(n, 3, rng);
    const auto ya = random_labels(n, 3, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> yi_p(n), ya_p(n);
    for (std::size_t i = 0; i < n; ++i) {
      yi_p[i] = yi[perm[i]];
      ya_p[i] = ya[perm[i]];
    }
    try {
      const auto a = total_loss(zi, yi, za, ya, LossConfig{});
      const auto b = total_loss(gather_rows(zi, std::span<const std::size_t>(perm)), yi_p,
                                gather_rows(za, std::span<const std::size_t>(perm)), ya_p, LossConfig{});
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a.components[c], b.components[c], 1e-6);
    } catch (const EmptyPositivesError&) {
    }
  }
}

TEST(SupCon, PerfectAlignmentBeatsRandomConfigurations) {
  const std::size_t n = 12;
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 3);
  Tensor2<double> aligned(n, 3);
  for (std::size_t i = 0; i < n; ++i) aligned(i, y[i]) = 1.0;
  const double best = total_loss(aligned, y, aligned, y, LossConfig{}).total;
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto zi = random_unit_rows(n, 3, rng);
    const auto za = random_unit_rows(n, 3, rng);
    EXPECT_LT(best, total_loss(zi, y, za, y, LossConfig{}).total);
  }
}

TEST(TotalLoss, SingleWeightSelectsComponent) {
  Rng rng(5);
  const auto zi = random_unit_rows(8, 4, rng);
  const auto za = random_unit_rows(8, 4, rng);
  const auto yi = random_labels(8, 2, rng);
  const auto ya = random_labels(8, 2, rng);
  const auto t = total_loss(zi, yi, za, ya, LossConfig{0.07, {1, 0, 0, 0}});
  const auto c = supcon_cross(zi, yi, za, ya, 0.07);
  EXPECT_EQ(t.total, c.loss);
  EXPECT_EQ(t.grad_image, c.grad_anchors);
  EXPECT_EQ(t.grad_audio, c.grad_candidates);
}

TEST(TotalLoss, EqualWeightsAverageComponents) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto zi = random_unit_rows(16, 6, rng);
    const auto za = random_unit_rows(16, 6, rng);
    const auto yi = random_labels(16, 3, rng);
    const auto ya = random_labels(16, 3, rng);
    const double sum = supcon_cross(zi, yi, za, ya, 0.07).loss + supcon_cross(za, ya, zi, yi, 0.07).loss +
                       supcon_intra(zi, yi, 0.07).loss + supcon_intra(za, ya, 0.07).loss;
    EXPECT_NEAR(total_loss(zi, yi, za, ya, LossConfig{}).total, 0.25 * sum, 1e-6);
  }
}

TEST(TotalLoss, ModalitySymmetry) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto zi = random_unit_rows(16, 6, rng);
    const auto za = random_unit_rows(16, 6, rng);
    const auto yi = random_labels(16, 3, rng);
    const auto ya = random_labels(16, 3, rng);
    const double forward = total_loss(zi, yi, za, ya, LossConfig{}).total;
    EXPECT_NEAR(total_loss(za, ya, zi, yi, LossConfig{}).total, forward, 1e-6);
    const double skewed = total_loss(zi, yi, za, ya, LossConfig{0.07, {0.1, 0.2, 0.3, 0.4}}).total;
    EXPECT_NEAR(total_loss(za, ya, zi, yi, LossConfig{0.07, {0.2, 0.1, 0.4, 0.3}}).total, skewed, 1e-6);
  }
}

TEST(TotalLoss, MissingComponentContributesZero) {
  // Distinct labels within each modality: no intra positives, cross pairs exist.
  const auto z = Tensor2<double>::from_rows({{1, 0}, {0, 1}});
  const std::vector<int> y{0, 1};
  const auto t = total_loss(z, y, z, y, LossConfig{});
  EXPECT_FALSE(t.active[2]);
  EXPECT_FALSE(t.active[3]);
  EXPECT_NEAR(t.total, 0.25 * 2 * std::log1p(std::exp(-1.0 / 0.07)), 1e-12);
}

TEST(TotalLoss, AllComponentsEmptyThrows) {
  const auto z = Tensor2<double>::from_rows({{1, 0}, {0, 1}});
  EXPECT_THROW(total_loss(z, std::vector<int>{0, 1}, z, std::vector<int>{2, 3}, LossConfig{}), EmptyPositivesError);
}

TEST(TotalLoss, RejectsBadConfig) {
  const auto z = Tensor2<double>::from_rows({{1, 0}, {0, 1}});
  const std::vector<int> y{0, 0};
  EXPECT_THROW(total_loss(z, y, z, y, LossConfig{0.0, {0.25, 0.25, 0.25, 0.25}}), ConfigError);
  EXPECT_THROW(total_loss(z, y, z, y, LossConfig{0.07, {0, 0, 0, 0}}), ConfigError);
  EXPECT_THROW(total_loss(z, y, z, y, LossConfig{0.07, {-1, 0, 0, 1}}), ConfigError);
}

TEST(TotalLoss, UnequalBatchSidesRejected) {
  Rng rng(1);
  const auto zi = random_unit_rows(3, 2, rng);
  const auto za = random_unit_rows(4, 2, rng);
  EXPECT_THROW(total_loss(zi, std::vector<int>{0, 0, 0}, za, std::vector<int>{0, 0, 0, 0}, LossConfig{}),
               ConfigError);
}
