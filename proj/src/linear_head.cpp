#include "eitnet/linear_head.hpp"

#include <cmath>
#include <string>

#include "eitnet/rng.hpp"

namespace eitnet {

Vector LinearHead::apply(const Vector& x) const {
  if (x.size() != weight.rows()) {
    throw ShapeError("LinearHead: input length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(weight.rows()));
  }
  return weight.transpose() * x + bias;
}

Vector LinearHead::flatten() const {
  Vector flat(weight.size() + bias.size());
  flat.head(weight.size()) = Eigen::Map<const Vector>(weight.data(), weight.size());
  flat.tail(bias.size()) = bias;
  return flat;
}

void LinearHead::assign(const Vector& flat) {
  if (flat.size() != weight.size() + bias.size()) {
    throw ShapeError("LinearHead::assign: wrong parameter count");
  }
  Eigen::Map<Vector>(weight.data(), weight.size()) = flat.head(weight.size());
  bias = flat.tail(bias.size());
}

LinearHead LinearHead::zeros(std::size_t in, std::size_t out) {
  const auto r = static_cast<Eigen::Index>(in), c = static_cast<Eigen::Index>(out);
  return {RowMatrix::Zero(r, c), Vector::Zero(c)};
}

LinearHead LinearHead::random(std::size_t in, std::size_t out, std::uint64_t seed) {
  LinearHead head = zeros(in, out);
  SplitMix64 rng(seed);
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(in));
  for (Eigen::Index i = 0; i < head.weight.size(); ++i) {
    head.weight.data()[i] = rng.uniform(-bound, bound);
  }
  return head;
}

}  // namespace eitnet
