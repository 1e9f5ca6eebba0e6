#include "eitnet/spatiotemporal.hpp"

#include <cmath>
#include <string>

#include "eitnet/rng.hpp"

namespace eitnet {

namespace {

Tensor conv_relu_pool(const Tensor& input, const I3DBlockParams& p) {
  Tensor x = relu(conv3d(input, p.conv_weight, p.conv, p.conv_bias));
  if (p.pool) x = pool3d_max(x, *p.pool);
  return x;
}

}  // namespace

I3DBlockParams identity_block(std::size_t channels) {
  I3DBlockParams p;
  p.conv_weight = Tensor({channels, channels, 3, 3, 3});
  for (std::size_t c = 0; c < channels; ++c) p.conv_weight.at(c, c, 1, 1, 1) = 1.0;
  p.conv_bias = Tensor({channels}, 0.0);
  p.conv = {{3, 3, 3}, {1, 1, 1}, {1, 1, 1}, true};
  const auto n = static_cast<Eigen::Index>(channels);
  p.bn_mean = Vector::Zero(n);
  p.bn_var = Vector::Ones(n);
  p.bn_gamma = Vector::Ones(n);
  p.bn_beta = Vector::Zero(n);
  p.bn_eps = 0.0;
  return p;
}

I3DBlockParams random_block(std::size_t in_channels, std::size_t out_channels,
                            std::uint64_t seed) {
  I3DBlockParams p;
  SplitMix64 rng(seed);
  p.conv_weight = Tensor({out_channels, in_channels, 3, 3, 3});
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(in_channels * 27));
  for (auto& v : p.conv_weight.data()) v = rng.uniform(-bound, bound);
  p.conv_bias = Tensor({out_channels}, 0.0);
  p.conv = {{3, 3, 3}, {1, 1, 1}, {1, 1, 1}, true};
  p.pool = ConvSpec{{2, 2, 2}, {2, 2, 2}, {0, 0, 0}, false};
  const auto n = static_cast<Eigen::Index>(out_channels);
  p.bn_mean = Vector::Zero(n);
  p.bn_var = Vector::Ones(n);
  p.bn_gamma = Vector::Ones(n);
  p.bn_beta = Vector::Zero(n);
  return p;
}

Tensor i3d_block(const Tensor& input, const I3DBlockParams& params, std::uint64_t seed) {
  const Tensor pooled = conv_relu_pool(input, params);
  const Tensor normed = batch_norm(pooled, params.bn_mean, params.bn_var, params.bn_gamma,
                                   params.bn_beta, params.bn_eps);
  return dropout(normed, params.dropout_p, seed);
}

Tensor i3d_forward(const Tensor& clip, std::span<const I3DBlockParams> blocks,
                   std::uint64_t seed) {
  if (blocks.empty()) throw ValueError("i3d_forward: at least one block is required");
  Tensor x = clip;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    try {
      x = i3d_block(x, blocks[i], derive_seed(seed, i));
    } catch (const ShapeError& e) {
      throw ShapeError("i3d block " + std::to_string(i) + ": " + e.what());
    }
  }
  return global_avg_pool(x);
}

Vector i3d_classify(const Tensor& features, const I3DHeadParams& head) {
  if (features.rank() != 1) {
    throw ShapeError("i3d_classify: features must be a vector, got " +
                     to_string(features.shape()));
  }
  return softmax(linear(features, head.weight, head.bias).vector().eval());
}

void fit_batch_norm(std::vector<I3DBlockParams>& blocks, std::span<const Tensor> clips) {
  if (clips.empty()) return;
  std::vector<Tensor> inputs(clips.begin(), clips.end());
  for (auto& block : blocks) {
    const auto channels = static_cast<Eigen::Index>(block.out_channels());
    Vector sum = Vector::Zero(channels), sq = Vector::Zero(channels);
    Scalar count = 0.0;
    for (auto& x : inputs) {
      x = conv_relu_pool(x, block);
      const std::size_t per = x.size() / x.dim(0);
      for (Eigen::Index c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < per; ++i) {
          const Scalar v = x[static_cast<std::size_t>(c) * per + i];
          sum[c] += v;
          sq[c] += v * v;
        }
      }
      count += static_cast<Scalar>(per);
    }
    block.bn_mean = sum / count;
    block.bn_var = (sq / count - block.bn_mean.cwiseAbs2()).cwiseMax(0.0);
    for (auto& x : inputs) {
      x = batch_norm(x, block.bn_mean, block.bn_var, block.bn_gamma, block.bn_beta, block.bn_eps);
    }
  }
}

}  // namespace eitnet
