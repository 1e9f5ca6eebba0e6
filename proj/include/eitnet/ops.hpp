#pragma once

#include <array>
#include <cstdint>

#include "eitnet/tensor.hpp"

namespace eitnet {

using Extents3 = std::array<std::size_t, 3>;  // (t, h, w)

/// Window geometry shared by conv3d and pool3d_max.
struct ConvSpec {
  Extents3 kernel{1, 1, 1};
  Extents3 stride{1, 1, 1};
  Extents3 padding{0, 0, 0};
  bool bias_enabled = true;

  /// floor((in + 2 pad - k) / stride) + 1 per axis; throws ShapeError if any
  /// axis would come out empty.
  Extents3 output_extents(const Extents3& in) const;
  void validate() const;
};

inline constexpr Scalar kBatchNormEps = 1e-5;
inline constexpr Scalar kLayerNormEps = 1e-5;

/// Cross-correlation of input [C_in,T,H,W] with weights [C_out,C_in,kt,kh,kw]
/// (no kernel flip), zero padding. bias [C_out] is read only when
/// spec.bias_enabled.
Tensor conv3d(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
              const Tensor& bias = {});

/// Max over each window of input [C,T,H,W]. Padded cells never win.
Tensor pool3d_max(const Tensor& input, const ConvSpec& spec);

Tensor relu(const Tensor& input);

/// Inference-mode batch norm over axis 0 (channels) with supplied statistics.
Tensor batch_norm(const Tensor& input, const Vector& mean, const Vector& var,
                  const Vector& gamma, const Vector& beta, Scalar eps = kBatchNormEps);

/// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
/// One SplitMix64 uniform per element, in row-major order.
Tensor dropout(const Tensor& input, Scalar p, std::uint64_t seed);

/// Per-channel mean of input [C, ...] -> [C].
Tensor global_avg_pool(const Tensor& input);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& input, std::size_t axis);
Vector softmax(const Vector& logits);

/// Normalizes over the last axis, then applies gamma/beta (length = last extent).
Tensor layer_norm(const Tensor& input, const Vector& gamma, const Vector& beta,
                  Scalar eps = kLayerNormEps);

/// input [..., d_in] * weight [d_in, d_out] + bias [d_out].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

Scalar sigmoid(Scalar x);

}  // namespace eitnet
