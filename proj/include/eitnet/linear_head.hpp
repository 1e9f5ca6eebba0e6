#pragma once

#include <cstdint>

#include "eitnet/tensor.hpp"

namespace eitnet {

/// Dense layer y = W^T x + b with W [d_in, d_out]. Used for every trainable
/// head, so parameters flatten to one vector (weights row-major, then bias).
struct LinearHead {
  RowMatrix weight;
  Vector bias;

  std::size_t in_features() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_features() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(weight.size() + bias.size());
  }

  Vector apply(const Vector& x) const;
  Vector flatten() const;
  void assign(const Vector& flat);

  Tensor weight_tensor() const { return Tensor::from_matrix(weight); }
  Tensor bias_tensor() const { return Tensor::from_vector(bias); }

  static LinearHead zeros(std::size_t in, std::size_t out);
  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
  static LinearHead random(std::size_t in, std::size_t out, std::uint64_t seed);
};

}  // namespace eitnet
