#include "eitnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "eitnet/rng.hpp"

namespace eitnet {

namespace {

Extents3 spatial_extents(const Tensor& t, const char* op) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected [C,T,H,W] input, got " + to_string(t.shape()));
  }
  return {t.dim(1), t.dim(2), t.dim(3)};
}

void check_channel_param(const Vector& v, std::size_t channels, const char* name) {
  if (static_cast<std::size_t>(v.size()) != channels) {
    throw ShapeError(std::string("batch_norm: ") + name + " has length " +
                     std::to_string(v.size()) + ", expected " + std::to_string(channels));
  }
}

}  // namespace

void ConvSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (kernel[a] == 0 || stride[a] == 0) {
      throw ValueError("kernel and stride extents must be >= 1");
    }
  }
}

Extents3 ConvSpec::output_extents(const Extents3& in) const {
  validate();
  Extents3 out{};
  for (int a = 0; a < 3; ++a) {
    const std::size_t padded = in[a] + 2 * padding[a];
    if (padded < kernel[a]) {
      throw ShapeError("kernel extent " + std::to_string(kernel[a]) + " exceeds padded input " +
                       std::to_string(padded) + " on axis " + std::to_string(a));
    }
    out[a] = (padded - kernel[a]) / stride[a] + 1;
  }
  return out;
}

Tensor conv3d(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
              const Tensor& bias) {
  const Extents3 in = spatial_extents(input, "conv3d");
  if (weights.rank() != 5) {
    throw ShapeError("conv3d: weights must be [C_out,C_in,kt,kh,kw], got " +
                     to_string(weights.shape()));
  }
  const std::size_t c_in = input.dim(0);
  const std::size_t c_out = weights.dim(0);
  if (weights.dim(1) != c_in) {
    throw ShapeError("conv3d: input has " + std::to_string(c_in) + " channels, weights expect " +
                     std::to_string(weights.dim(1)));
  }
  const Extents3 k{weights.dim(2), weights.dim(3), weights.dim(4)};
  if (k != spec.kernel) {
    throw ShapeError("conv3d: weight kernel extents disagree with ConvSpec.kernel");
  }
  if (spec.bias_enabled && (bias.rank() != 1 || bias.dim(0) != c_out)) {
    throw ShapeError("conv3d: bias must be [" + std::to_string(c_out) + "], got " +
                     to_string(bias.shape()));
  }
  const Extents3 out = spec.output_extents(in);
  const std::size_t cells = out[0] * out[1] * out[2];
  const std::size_t taps = c_in * k[0] * k[1] * k[2];

  // im2col: one column per output cell, one row per (c, dt, dh, dw) tap.
  RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(taps),
                                   static_cast<Eigen::Index>(cells));
  const auto data = input.data();
  std::size_t row = 0;
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t dt = 0; dt < k[0]; ++dt) {
      for (std::size_t dh = 0; dh < k[1]; ++dh) {
        for (std::size_t dw = 0; dw < k[2]; ++dw, ++row) {
          Scalar* dst = cols.row(static_cast<Eigen::Index>(row)).data();
          std::size_t col = 0;
          for (std::size_t ot = 0; ot < out[0]; ++ot) {
            const auto t = static_cast<std::ptrdiff_t>(ot * spec.stride[0] + dt) -
                           static_cast<std::ptrdiff_t>(spec.padding[0]);
            for (std::size_t oh = 0; oh < out[1]; ++oh) {
              const auto h = static_cast<std::ptrdiff_t>(oh * spec.stride[1] + dh) -
                             static_cast<std::ptrdiff_t>(spec.padding[1]);
              for (std::size_t ow = 0; ow < out[2]; ++ow, ++col) {
                const auto w = static_cast<std::ptrdiff_t>(ow * spec.stride[2] + dw) -
                               static_cast<std::ptrdiff_t>(spec.padding[2]);
                if (t < 0 || h < 0 || w < 0 || t >= static_cast<std::ptrdiff_t>(in[0]) ||
                    h >= static_cast<std::ptrdiff_t>(in[1]) ||
                    w >= static_cast<std::ptrdiff_t>(in[2])) {
                  continue;
                }
                dst[col] = data[((c * in[0] + t) * in[1] + h) * in[2] + w];
              }
            }
          }
        }
      }
    }
  }

  const ConstMatrixMap kernel(weights.data().data(), static_cast<Eigen::Index>(c_out),
                              static_cast<Eigen::Index>(taps));
  Tensor result({c_out, out[0], out[1], out[2]});
  MatrixMap dst(result.data().data(), static_cast<Eigen::Index>(c_out),
                static_cast<Eigen::Index>(cells));
  dst.noalias() = kernel * cols;
  if (spec.bias_enabled) dst.colwise() += bias.vector();
  return result;
}

Tensor pool3d_max(const Tensor& input, const ConvSpec& spec) {
  const Extents3 in = spatial_extents(input, "pool3d_max");
  for (int a = 0; a < 3; ++a) {
    if (spec.padding[a] >= spec.kernel[a]) {
      throw ShapeError("pool3d_max: padding must be smaller than the kernel");
    }
  }
  const Extents3 out = spec.output_extents(in);
  const std::size_t channels = input.dim(0);
  Tensor result({channels, out[0], out[1], out[2]});
  const auto src = input.data();
  auto dst = result.data();
  std::size_t idx = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ot = 0; ot < out[0]; ++ot) {
      for (std::size_t oh = 0; oh < out[1]; ++oh) {
        for (std::size_t ow = 0; ow < out[2]; ++ow, ++idx) {
          const std::size_t o[3] = {ot, oh, ow};
          std::size_t lo[3], hi[3];
          for (int a = 0; a < 3; ++a) {
            const auto start = static_cast<std::ptrdiff_t>(o[a] * spec.stride[a]) -
                               static_cast<std::ptrdiff_t>(spec.padding[a]);
            lo[a] = static_cast<std::size_t>(std::max<std::ptrdiff_t>(start, 0));
            hi[a] = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                start + static_cast<std::ptrdiff_t>(spec.kernel[a]),
                static_cast<std::ptrdiff_t>(in[a])));
          }
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          for (std::size_t t = lo[0]; t < hi[0]; ++t) {
            for (std::size_t h = lo[1]; h < hi[1]; ++h) {
              const Scalar* row = &src[((c * in[0] + t) * in[1] + h) * in[2]];
              for (std::size_t w = lo[2]; w < hi[2]; ++w) best = std::max(best, row[w]);
            }
          }
          dst[idx] = best;
        }
      }
    }
  }
  return result;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = std::max<Scalar>(v, 0.0);
  return out;
}

Tensor batch_norm(const Tensor& input, const Vector& mean, const Vector& var,
                  const Vector& gamma, const Vector& beta, Scalar eps) {
  const std::size_t channels = input.dim(0);
  check_channel_param(mean, channels, "mean");
  check_channel_param(var, channels, "var");
  check_channel_param(gamma, channels, "gamma");
  check_channel_param(beta, channels, "beta");
  if ((var.array() < 0.0).any()) throw ValueError("batch_norm: negative variance");
  if (eps < 0.0) throw ValueError("batch_norm: negative eps");
  Tensor out = input;
  const std::size_t per_channel = input.size() / channels;
  auto d = out.data();
  for (std::size_t c = 0; c < channels; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    const Scalar denom = std::sqrt(var[ci] + eps);
    if (denom == 0.0) throw ValueError("batch_norm: zero variance with eps 0");
    for (std::size_t i = c * per_channel; i < (c + 1) * per_channel; ++i) {
      d[i] = gamma[ci] * (d[i] - mean[ci]) / denom + beta[ci];
    }
  }
  return out;
}

Tensor dropout(const Tensor& input, Scalar p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValueError("dropout: p must be in [0, 1]");
  if (p == 0.0) return input;
  Tensor out(input.shape(), 0.0);
  if (p == 1.0) return out;
  SplitMix64 rng(seed);
  const Scalar scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = rng.uniform() < p ? 0.0 : input[i] * scale;
  }
  return out;
}

Tensor global_avg_pool(const Tensor& input) {
  if (input.rank() < 2) {
    throw ShapeError("global_avg_pool: expected [C, ...], got " + to_string(input.shape()));
  }
  const std::size_t channels = input.dim(0);
  const std::size_t per_channel = input.size() / channels;
  Tensor out({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    Scalar sum = 0.0;
    for (std::size_t i = 0; i < per_channel; ++i) sum += input[c * per_channel + i];
    out[c] = sum / static_cast<Scalar>(per_channel);
  }
  return out;
}

Tensor softmax(const Tensor& input, std::size_t axis) {
  if (axis >= input.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for " +
                     to_string(input.shape()));
  }
  const auto& s = input.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= s[a];
  for (std::size_t a = axis + 1; a < s.size(); ++a) inner *= s[a];
  const std::size_t n = s[axis];
  Tensor out = input;
  auto d = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      Scalar mx = d[base];
      for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, d[base + k * inner]);
      Scalar sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        auto& v = d[base + k * inner];
        v = std::exp(v - mx);
        sum += v;
      }
      for (std::size_t k = 0; k < n; ++k) d[base + k * inner] /= sum;
    }
  }
  return out;
}

Vector softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Tensor layer_norm(const Tensor& input, const Vector& gamma, const Vector& beta, Scalar eps) {
  const std::size_t width = input.shape().back();
  if (static_cast<std::size_t>(gamma.size()) != width ||
      static_cast<std::size_t>(beta.size()) != width) {
    throw ShapeError("layer_norm: affine parameters must have length " + std::to_string(width));
  }
  Tensor out = input;
  auto rows = out.matrix();
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    auto row = rows.row(r);
    const Scalar mean = row.mean();
    const Scalar var = (row.array() - mean).square().mean();
    const Scalar inv = 1.0 / std::sqrt(var + eps);
    row = ((row.array() - mean) * inv * gamma.transpose().array() + beta.transpose().array())
              .matrix();
  }
  return out;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2) {
    throw ShapeError("linear: weight must be [d_in, d_out], got " + to_string(weight.shape()));
  }
  const std::size_t d_in = weight.dim(0), d_out = weight.dim(1);
  if (input.shape().back() != d_in) {
    throw ShapeError("linear: input width " + std::to_string(input.shape().back()) +
                     " does not match weight rows " + std::to_string(d_in));
  }
  if (bias.rank() != 1 || bias.dim(0) != d_out) {
    throw ShapeError("linear: bias must be [" + std::to_string(d_out) + "], got " +
                     to_string(bias.shape()));
  }
  Shape shape = input.shape();
  shape.back() = d_out;
  Tensor out(std::move(shape));
  out.matrix().noalias() = input.matrix() * weight.matrix();
  out.matrix().rowwise() += bias.vector().transpose();
  return out;
}

Scalar sigmoid(Scalar x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace eitnet
