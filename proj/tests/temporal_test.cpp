#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "eitnet/temporal.hpp"
#include "oracles.hpp"

using namespace eitnet;

namespace {

EncoderParams random_params(std::size_t d, SplitMix64& rng) {
  EncoderParams p = random_encoder(d, 2 * d, rng.next());
  p.bq = oracle::random_tensor({d}, rng);
  p.bk = oracle::random_tensor({d}, rng);
  p.bv = oracle::random_tensor({d}, rng);
  p.b1 = oracle::random_tensor({2 * d}, rng);
  p.b2 = oracle::random_tensor({d}, rng);
  p.ln1_gamma = oracle::random_vector(d, rng, 0.5, 1.5);
  p.ln1_beta = oracle::random_vector(d, rng);
  p.ln2_gamma = oracle::random_vector(d, rng, 0.5, 1.5);
  p.ln2_beta = oracle::random_vector(d, rng);
  return p;
}

TokenSequence random_sequence(std::size_t frames, std::size_t gh, std::size_t gw, std::size_t d,
                              SplitMix64& rng) {
  const TokenLayout layout{frames, gh, gw, 1, 0};
  return {oracle::random_tensor({layout.token_count(), d}, rng), layout};
}

// Joint-mode encoder block composed from the loop oracles.
Tensor encoder_oracle(const Tensor& x, const EncoderParams& p) {
  const Tensor z = oracle::attention(x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv);
  Tensor r = z;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += x[i];
  const Tensor h = oracle::layer_norm(r, p.ln1_gamma, p.ln1_beta, kLayerNormEps);
  Tensor hidden = oracle::linear(h, p.w1, p.b1);
  for (auto& v : hidden.data()) v = std::max(v, 0.0);
  Tensor f = oracle::linear(hidden, p.w2, p.b2);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += h[i];
  return oracle::layer_norm(f, p.ln2_gamma, p.ln2_beta, kLayerNormEps);
}

}  // namespace

TEST(PatchEmbedTest, OnePatchPerFrame) {
  SplitMix64 rng(1);
  const Tensor clip = oracle::random_tensor({2, 3, 4, 4}, rng);
  const auto seq = patch_embed(clip, 4, oracle::random_tensor({32, 5}, rng), Tensor({5}),
                               Tensor({3, 5}));
  EXPECT_EQ(seq.length(), 3u);
  EXPECT_EQ(seq.layout->grid_h, 1u);
}

TEST(PatchEmbedTest, ZeroClipGivesPositionalRows) {
  SplitMix64 rng(2);
  const Tensor pos = oracle::random_tensor({8, 6}, rng);
  const auto seq = patch_embed(Tensor({1, 2, 4, 4}), 2, Tensor({4, 6}), Tensor({6}), pos);
  EXPECT_EQ(seq.tokens, pos);
}

TEST(PatchEmbedTest, MatchesHandFlattenProject) {
  SplitMix64 rng(3);
  const Tensor clip = oracle::random_tensor({1, 2, 4, 4}, rng);
  const Tensor w = oracle::random_tensor({4, 3}, rng);
  const Tensor b = oracle::random_tensor({3}, rng);
  const Tensor pos = oracle::random_tensor({8, 3}, rng);
  const auto seq = patch_embed(clip, 2, w, b, pos);
  ASSERT_EQ(seq.length(), 8u);
  std::size_t token = 0;
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t gy = 0; gy < 2; ++gy)
      for (std::size_t gx = 0; gx < 2; ++gx, ++token) {
        const double flat[4] = {clip.at(0, t, 2 * gy, 2 * gx), clip.at(0, t, 2 * gy, 2 * gx + 1),
                                clip.at(0, t, 2 * gy + 1, 2 * gx),
                                clip.at(0, t, 2 * gy + 1, 2 * gx + 1)};
        for (std::size_t j = 0; j < 3; ++j) {
          double e = b[j] + pos.at(token, j);
          for (std::size_t k = 0; k < 4; ++k) e += flat[k] * w.at(k, j);
          EXPECT_NEAR(seq.tokens.at(token, j), e, 1e-12);
        }
      }
}

TEST(PatchEmbedTest, NonDividingPatchFails) {
  EXPECT_THROW(patch_embed(Tensor({1, 2, 5, 4}), 2, Tensor({4, 3}), Tensor({3}), Tensor({8, 3})),
               ShapeError);
}

TEST(SelfAttentionTest, SingleTokenReturnsValue) {
  SplitMix64 rng(4);
  const EncoderParams p = random_params(4, rng);
  const Tensor x = oracle::random_tensor({1, 4}, rng);
  EXPECT_LE(max_abs_diff(self_attention(x, p), oracle::linear(x, p.wv, p.bv)), 1e-14);
}

TEST(SelfAttentionTest, IdenticalTokensGiveSharedValue) {
  SplitMix64 rng(5);
  const EncoderParams p = random_params(4, rng);
  const Tensor row = oracle::random_tensor({1, 4}, rng);
  Tensor x({5, 4});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) x.at(i, j) = row.at(0, j);
  const Tensor v = oracle::linear(row, p.wv, p.bv);
  const Tensor z = self_attention(x, p);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(z.at(i, j), v.at(0, j), 1e-12);
}

TEST(SelfAttentionTest, MatchesLoopOracle) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const EncoderParams p = random_params(4, rng);
    const Tensor x = oracle::random_tensor({3, 4}, rng, -2, 2);
    EXPECT_LE(max_abs_diff(self_attention(x, p),
                           oracle::attention(x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv)),
              1e-10);
  }
  const EncoderParams p = random_params(4, rng);
  EXPECT_THROW(self_attention(Tensor({3, 5}), p), ShapeError);
}

TEST(SelfAttentionTest, RowsAreStochastic) {
  SplitMix64 rng(7);
  const EncoderParams p = random_params(6, rng);
  const RowMatrix a = attention_weights(oracle::random_tensor({9, 6}, rng, -3, 3), p);
  EXPECT_GE(a.minCoeff(), 0.0);
  for (Eigen::Index r = 0; r < a.rows(); ++r) EXPECT_NEAR(a.row(r).sum(), 1.0, 1e-12);
}

TEST(EncoderBlockTest, JointMatchesComposedOracle) {
  SplitMix64 rng(8);
  const EncoderParams p = random_params(4, rng);
  const auto seq = random_sequence(2, 2, 1, 4, rng);
  const auto out = encoder_block(seq, p, AttentionMode::joint);
  EXPECT_LE(max_abs_diff(out.tokens, encoder_oracle(seq.tokens, p)), 1e-10);
}

TEST(EncoderBlockTest, SingleFrameDividedEqualsSpatial) {
  SplitMix64 rng(9);
  const EncoderParams p = random_params(8, rng);
  const auto seq = random_sequence(1, 3, 2, 8, rng);
  EXPECT_EQ(encoder_block(seq, p, AttentionMode::divided).tokens,
            encoder_block(seq, p, AttentionMode::spatial).tokens);
}

TEST(EncoderBlockTest, UnitGridDividedEqualsTemporal) {
  SplitMix64 rng(10);
  const EncoderParams p = random_params(8, rng);
  const auto seq = random_sequence(5, 1, 1, 8, rng);
  EXPECT_EQ(encoder_block(seq, p, AttentionMode::divided).tokens,
            encoder_block(seq, p, AttentionMode::temporal).tokens);
}

TEST(EncoderBlockTest, SingleTokenAgreesAcrossFactorizedModes) {
  SplitMix64 rng(12);
  const EncoderParams p = random_params(4, rng);
  const auto seq = random_sequence(1, 1, 1, 4, rng);
  const Tensor divided = encoder_block(seq, p, AttentionMode::divided).tokens;
  EXPECT_EQ(divided, encoder_block(seq, p, AttentionMode::spatial).tokens);
  EXPECT_EQ(divided, encoder_block(seq, p, AttentionMode::temporal).tokens);
  EXPECT_NE(divided, seq.tokens);
}

TEST(EncoderBlockTest, TemporalGroupsFollowSpatialPosition) {
  // Temporal attention on a T x 1 x 2 grid equals joint attention applied
  // separately to each spatial column.
  SplitMix64 rng(11);
  const EncoderParams p = random_params(4, rng);
  const auto seq = random_sequence(3, 1, 2, 4, rng);
  const auto out = encoder_block(seq, p, AttentionMode::temporal);
  for (std::size_t col = 0; col < 2; ++col) {
    Tensor sub({3, 4});
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t j = 0; j < 4; ++j) sub.at(t, j) = seq.tokens.at(2 * t + col, j);
    const Tensor expect = encoder_oracle(sub, p);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t j = 0; j < 4; ++j)
        EXPECT_NEAR(out.tokens.at(2 * t + col, j), expect.at(t, j), 1e-10);
  }
}

TEST(EncoderBlockTest, PreservesShapeAndIsDeterministic) {
  SplitMix64 rng(12);
  const EncoderParams p = random_params(8, rng);
  auto seq = random_sequence(3, 2, 2, 8, rng);
  seq = prepend_summary(seq, oracle::random_vector(8, rng));
  EXPECT_EQ(seq.layout->prefix, 1u);
  for (auto mode : {AttentionMode::joint, AttentionMode::temporal, AttentionMode::spatial,
                    AttentionMode::divided}) {
    const auto a = encoder_block(seq, p, mode);
    const auto b = encoder_block(seq, p, mode);
    EXPECT_EQ(a.tokens.shape(), seq.tokens.shape());
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_TRUE(all_finite(a.tokens));
  }
}

TEST(EncoderBlockTest, DividedModesNeedLayout) {
  SplitMix64 rng(13);
  const EncoderParams p = random_params(4, rng);
  const TokenSequence bare{oracle::random_tensor({4, 4}, rng), std::nullopt};
  EXPECT_NO_THROW(encoder_block(bare, p, AttentionMode::joint));
  EXPECT_THROW(encoder_block(bare, p, AttentionMode::divided), ShapeError);
  EXPECT_THROW(encoder_block(bare, p, AttentionMode::temporal), ShapeError);
}

TEST(EncoderBlockTest, JointModePermutationEquivariant) {
  SplitMix64 rng(14);
  const EncoderParams p = random_params(6, rng);
  const Tensor x = oracle::random_tensor({7, 6}, rng);
  std::vector<std::size_t> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Tensor px({7, 6});
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 6; ++j) px.at(i, j) = x.at(perm[i], j);
  const Tensor y = encoder_block({x, std::nullopt}, p, AttentionMode::joint).tokens;
  const Tensor py = encoder_block({px, std::nullopt}, p, AttentionMode::joint).tokens;
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(py.at(i, j), y.at(perm[i], j), 1e-12);
}

TEST(ClassifySequenceTest, Examples) {
  SplitMix64 rng(15);
  const Tensor tokens = oracle::random_tensor({5, 3}, rng);
  const Vector u = classify_sequence(tokens, LinearHead::zeros(3, 4));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(u[i], 0.25);

  LinearHead head = LinearHead::random(3, 4, 2);
  const Vector p = classify_sequence(tokens, head);
  head.bias.array() += 17.0;
  EXPECT_LE((classify_sequence(tokens, head) - p).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);

  LinearHead two = LinearHead::zeros(1, 2);
  two.weight(0, 1) = std::log(3.0);
  const Vector q = classify_sequence(Tensor({2, 1}, 1.0), two);
  EXPECT_NEAR(q[0], 0.25, 1e-15);
  EXPECT_NEAR(q[1], 0.75, 1e-15);
  EXPECT_THROW(classify_sequence(Tensor(), two), ValueError);
}
