#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eitnet/ops.hpp"

namespace eitnet {

/// One inflated-3D block: conv -> ReLU -> max-pool -> batch norm -> dropout.
struct I3DBlockParams {
  Tensor conv_weight;  // [C_out, C_in, kt, kh, kw]
  Tensor conv_bias;    // [C_out]
  ConvSpec conv;
  std::optional<ConvSpec> pool;
  Vector bn_mean;
  Vector bn_var;
  Vector bn_gamma;
  Vector bn_beta;
  Scalar bn_eps = kBatchNormEps;
  Scalar dropout_p = 0.0;

  std::size_t in_channels() const { return conv_weight.dim(1); }
  std::size_t out_channels() const { return conv_weight.dim(0); }
};

/// Final classification layer: W_c [C_final, classes], b_c [classes].
struct I3DHeadParams {
  Tensor weight;
  Tensor bias;
};

/// Block with a centre-tap delta kernel, no pooling, identity normalization
/// and no dropout. Maps a clip to itself.
I3DBlockParams identity_block(std::size_t channels);

/// Kaiming-uniform 3x3x3 conv (same padding) followed by a 2x2x2 stride-2
/// pool, identity batch-norm statistics.
I3DBlockParams random_block(std::size_t in_channels, std::size_t out_channels,
                            std::uint64_t seed);

Tensor i3d_block(const Tensor& input, const I3DBlockParams& params, std::uint64_t seed);

/// Runs the blocks in order (block i draws dropout from derive_seed(seed, i))
/// and global-average-pools the result to [C_final].
Tensor i3d_forward(const Tensor& clip, std::span<const I3DBlockParams> blocks,
                   std::uint64_t seed = 0);

/// softmax(W_c^T features + b_c).
Vector i3d_classify(const Tensor& features, const I3DHeadParams& head);

/// Sets each block's running mean/variance to the per-channel statistics of
/// its pre-normalization activations over `clips`, block by block.
void fit_batch_norm(std::vector<I3DBlockParams>& blocks, std::span<const Tensor> clips);

}  // namespace eitnet
