#include "eitnet/heads.hpp"

#include <cmath>
#include <string>

#include "eitnet/ops.hpp"

namespace eitnet {

void accumulate_linear_grad(const LinearHead& head, const Vector& x, const Vector& g,
                            Vector& grad) {
  const Eigen::Index w = head.weight.size();
  if (grad.size() == 0) grad = Vector::Zero(w + head.bias.size());
  Eigen::Map<RowMatrix>(grad.data(), head.weight.rows(), head.weight.cols()).noalias() +=
      x * g.transpose();
  grad.tail(head.bias.size()) += g;
}

HeadLoss softmax_cross_entropy(const LinearHead& head, const Vector& x, int label) {
  if (label < 0 || label >= static_cast<int>(head.out_features())) {
    throw ValueError("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
  }
  const Vector logits = head.apply(x);
  const Scalar m = logits.maxCoeff();
  const Scalar lse = m + std::log((logits.array() - m).exp().sum());
  Vector g = (logits.array() - lse).exp().matrix();
  HeadLoss out;
  out.loss = lse - logits[label];
  g[label] -= 1.0;
  accumulate_linear_grad(head, x, g, out.grad);
  return out;
}

HeadLoss mean_squared_error(const LinearHead& head, const Vector& x, const Vector& target) {
  const Vector diff = head.apply(x) - target;
  if (diff.size() != target.size()) throw ShapeError("mean_squared_error: target size");
  const Scalar n = static_cast<Scalar>(diff.size());
  HeadLoss out;
  out.loss = diff.squaredNorm() / n;
  accumulate_linear_grad(head, x, (2.0 / n) * diff, out.grad);
  return out;
}

HeadLoss anchor_box_loss(const LinearHead& head, const Vector& fused,
                         std::span<const BoundingBox> anchors, std::size_t matched,
                         const BoundingBox& truth, Scalar frame_h, Scalar frame_w,
                         Scalar lambda) {
  if (head.out_features() != 4 * anchors.size() || matched >= anchors.size()) {
    throw ShapeError("anchor_box_loss: head/anchor mismatch");
  }
  const Vector logits = head.apply(fused);
  const auto a = anchors[matched].coords();
  const auto t = truth.coords();
  const std::array<Scalar, 4> extent{frame_w, frame_h, frame_w, frame_h};
  Vector g = Vector::Zero(logits.size());
  HeadLoss out;
  for (int k = 0; k < 4; ++k) {
    const auto idx = static_cast<Eigen::Index>(4 * matched) + k;
    const Scalar s = sigmoid(logits[idx]);
    const Scalar d = (s * a[k] - t[k]) / extent[k];
    out.loss += lambda * smooth_l1(d) / 4.0;
    g[idx] = lambda / 4.0 * smooth_l1_grad(d) * a[k] / extent[k] * s * (1.0 - s);
  }
  accumulate_linear_grad(head, fused, g, out.grad);
  return out;
}

HeadLoss anchor_score_loss(const LinearHead& head, const Vector& fused, std::size_t anchor_count,
                           std::size_t matched) {
  if (head.out_features() != 2 * anchor_count || matched >= anchor_count) {
    throw ShapeError("anchor_score_loss: head/anchor mismatch");
  }
  const Vector logits = head.apply(fused);
  Vector g(logits.size());
  HeadLoss out;
  const Scalar n = static_cast<Scalar>(anchor_count);
  for (std::size_t a = 0; a < anchor_count; ++a) {
    const auto i = static_cast<Eigen::Index>(2 * a);
    const Vector p = softmax(Vector(logits.segment(i, 2)));
    const int label = a == matched ? 1 : 0;
    out.loss -= std::log(std::max(p[label], 1e-300)) / n;
    g.segment(i, 2) = p / n;
    g[i + label] -= 1.0 / n;
  }
  accumulate_linear_grad(head, fused, g, out.grad);
  return out;
}

std::size_t matched_anchor(std::span<const BoundingBox> anchors, const BoundingBox& truth) {
  const auto m = match_anchors(anchors, std::span<const BoundingBox>(&truth, 1));
  return m.empty() ? 0 : m.front().first;
}

}  // namespace eitnet
