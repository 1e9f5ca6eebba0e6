#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "eitnet/linear_head.hpp"
#include "eitnet/ops.hpp"

namespace eitnet {

/// Where each token sits in the (frame, row, col) grid. Tokens are ordered
/// frame-major, then row, then column, after `prefix` summary tokens.
struct TokenLayout {
  std::size_t frames = 1;
  std::size_t grid_h = 1;
  std::size_t grid_w = 1;
  std::size_t patch = 1;
  std::size_t prefix = 0;

  std::size_t grid_tokens() const { return frames * grid_h * grid_w; }
  std::size_t token_count() const { return prefix + grid_tokens(); }
};

struct TokenSequence {
  Tensor tokens;  // [S, d_model]
  std::optional<TokenLayout> layout;

  std::size_t length() const { return tokens.dim(0); }
  std::size_t width() const { return tokens.dim(1); }
  void validate() const;
};

/// Single-head encoder weights. Projections are [d, d]; FFN is d -> hidden -> d.
struct EncoderParams {
  Tensor wq, wk, wv;
  Tensor bq, bk, bv;
  Tensor w1, b1, w2, b2;
  Vector ln1_gamma, ln1_beta;
  Vector ln2_gamma, ln2_beta;

  std::size_t d_model() const { return wq.dim(0); }
  std::size_t hidden() const { return w1.dim(1); }
  void validate() const;
};

EncoderParams random_encoder(std::size_t d_model, std::size_t hidden, std::uint64_t seed);

enum class AttentionMode { joint, temporal, spatial, divided };

const char* to_string(AttentionMode mode);

/// Splits clip [C,T,H,W] into P x P patches, flattens each as (c, dy, dx),
/// projects with proj_weight [C*P*P, d] + proj_bias [d] and adds pos_enc
/// [T*(H/P)*(W/P), d].
TokenSequence patch_embed(const Tensor& clip, std::size_t patch, const Tensor& proj_weight,
                          const Tensor& proj_bias, const Tensor& pos_enc);

/// Inserts `token` [d] ahead of the grid tokens and bumps layout.prefix.
TokenSequence prepend_summary(const TokenSequence& seq, const Vector& token);

/// Row-stochastic attention matrix softmax(Q K^T / sqrt(d)) over all tokens.
RowMatrix attention_weights(const Tensor& tokens, const EncoderParams& params);

/// Z = softmax(Q K^T / sqrt(d)) V with every token attending to every token.
Tensor self_attention(const Tensor& tokens, const EncoderParams& params);

/// Attention + residual/layer norm + FFN + residual/layer norm.
///
/// temporal: each grid token attends to tokens at its spatial position in
/// every frame. spatial: to tokens of its own frame. Summary tokens are keys
/// for every group and themselves attend to the whole sequence. divided:
/// a temporal block followed by a spatial block with the same weights; a
/// pass in which every group is a single token (T = 1 for temporal, a 1x1
/// grid for spatial) carries no interaction and is skipped.
TokenSequence encoder_block(const TokenSequence& seq, const EncoderParams& params,
                            AttentionMode mode);

/// Mean over tokens, linear head, softmax.
Vector classify_sequence(const Tensor& tokens, const LinearHead& classifier);

/// Mean over tokens, i.e. the classifier input.
Vector pool_tokens(const Tensor& tokens);

}  // namespace eitnet
