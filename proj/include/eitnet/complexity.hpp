#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "eitnet/ops.hpp"

namespace eitnet {

struct ModelConfig;

/// y = W^T x + b applied to `rows` independent inputs.
struct LinearLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  bool bias = true;
  std::size_t rows = 1;
};

struct Conv3dLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  Extents3 input{1, 1, 1};
  ConvSpec spec;
};

/// Single-head attention: Q/K/V projections (d x d, optional bias) of
/// `tokens` tokens, then one score and one value mix per query-key pair.
/// Joint attention over S tokens has S^2 pairs.
struct AttentionLayer {
  std::size_t tokens = 0;
  std::size_t d_model = 0;
  std::size_t pairs = 0;
  bool bias = true;
};

/// Layer norm or batch norm: a scale and shift per feature, no MACs.
struct NormLayer {
  std::size_t features = 0;
};

/// Weighted sum of `inputs` resampled maps of `features` values each, one
/// scalar weight per input.
struct FusionLayer {
  std::size_t inputs = 0;
  std::size_t features = 0;
};

using LayerSpec = std::variant<LinearLayer, Conv3dLayer, AttentionLayer, NormLayer, FusionLayer>;

struct Complexity {
  std::uint64_t weights = 0;
  std::uint64_t biases = 0;
  std::uint64_t macs = 0;

  std::uint64_t params() const { return weights + biases; }
  Complexity& operator+=(const Complexity& o);
  bool operator==(const Complexity&) const = default;
};

Complexity count_layer(const LayerSpec& layer);

/// Exact parameter and multiply-accumulate counts from shape arithmetic.
Complexity count_params_flops(std::span<const LayerSpec> layers);

struct NamedLayer {
  std::string stage;
  std::string name;
  LayerSpec layer;
  bool shared = false;  // reuses an earlier layer's weights: MACs only
};

/// Sums the layers, counting parameters of shared layers once.
Complexity count_model(std::span<const NamedLayer> layers);

/// Every parameterized layer of the toy pipeline for a frame of the given
/// extent, in execution order.
std::vector<NamedLayer> model_layers(const ModelConfig& config, std::size_t height,
                                     std::size_t width);

}  // namespace eitnet
