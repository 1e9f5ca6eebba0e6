#include <gtest/gtest.h>

#include "eitnet/augment.hpp"
#include "oracles.hpp"

using namespace eitnet;

TEST(AugmentTest, FlipIsInvolution) {
  SplitMix64 rng(1);
  const Tensor clip = oracle::random_tensor({2, 3, 5, 6}, rng);
  EXPECT_EQ(flip_horizontal(flip_horizontal(clip)), clip);
  AugmentParams forced{0, 0, 5, 6, true, 0.0};
  EXPECT_EQ(apply_augment(apply_augment(clip, forced), forced), clip);
  EXPECT_NE(flip_horizontal(clip), clip);
}

TEST(AugmentTest, FullCropNoRotationIsIdentity) {
  SplitMix64 rng(2);
  const Tensor clip = oracle::random_tensor({1, 4, 7, 7}, rng);
  EXPECT_EQ(apply_augment(clip, {0, 0, 7, 7, false, 0.0}), clip);
  EXPECT_EQ(rotate_nearest(clip, 0.0), clip);
}

TEST(AugmentTest, QuarterTurnPermutesPixels) {
  Tensor clip({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) clip[i] = static_cast<double>(i);
  const Tensor r = rotate_nearest(clip, 90.0);
  // Output (i, j) samples source (row j, col w-1-i) up to floor rounding.
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(r.at(0, 0, i, j), clip.at(0, 0, 3 - j, i));
}

TEST(AugmentTest, SeedDeterminismAndRanges) {
  SplitMix64 rng(3);
  const Tensor clip = oracle::random_tensor({1, 2, 12, 12}, rng);
  const AugmentConfig cfg{10, 9};
  EXPECT_EQ(augment(clip, cfg, 42), augment(clip, cfg, 42));
  int flips = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto p = sample_augment(cfg, 12, 12, s);
    EXPECT_LE(p.crop_y, 2u);
    EXPECT_LE(p.crop_x, 3u);
    EXPECT_LE(std::abs(p.angle_degrees), 15.0);
    flips += p.flip;
  }
  EXPECT_NEAR(flips / 2000.0, 0.5, 0.05);
  EXPECT_EQ(augment(clip, cfg, 1).shape(), (Shape{1, 2, 10, 9}));
}

TEST(AugmentTest, CropLargerThanInputRejected) {
  const Tensor clip({1, 1, 8, 8});
  EXPECT_THROW(augment(clip, AugmentConfig{}, 1), ValueError);
  EXPECT_THROW(augment(clip, AugmentConfig{9, 4}, 1), ValueError);
  EXPECT_THROW(augment(Tensor({8, 8}), AugmentConfig{4, 4}, 1), ShapeError);
}

TEST(AugmentTest, BoxFollowsPixels) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const BoundingBox box{rng.uniform(8, 16), rng.uniform(8, 16), rng.uniform(3, 8),
                          rng.uniform(3, 8), 1.0, 1};
    Tensor mask({1, 1, 24, 24}, 0.0);
    for (std::size_t y = 0; y < 24; ++y)
      for (std::size_t x = 0; x < 24; ++x)
        if (x + 0.5 > box.left() && x + 0.5 < box.right() && y + 0.5 > box.top() &&
            y + 0.5 < box.bottom())
          mask.at(0, 0, y, x) = 1.0;
    const auto p = sample_augment({20, 20}, 24, 24, rng.next());
    const Tensor moved = apply_augment(mask, p);
    const BoundingBox b = augment_box(box, p);
    for (std::size_t y = 0; y < 20; ++y)
      for (std::size_t x = 0; x < 20; ++x)
        if (moved.at(0, 0, y, x) > 0.0) {
          EXPECT_GE(x + 1.0, b.left());
          EXPECT_LE(x + 0.0, b.right());
          EXPECT_GE(y + 1.0, b.top());
          EXPECT_LE(y + 0.0, b.bottom());
        }
  }
}

TEST(AugmentTest, PaperCropConstant) { EXPECT_EQ(kPaperCropSize, 224u); }
