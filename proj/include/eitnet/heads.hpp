#pragma once

#include <span>

#include "eitnet/detection.hpp"
#include "eitnet/linear_head.hpp"

namespace eitnet {

/// Loss value and its gradient with respect to LinearHead::flatten().
struct HeadLoss {
  Scalar loss = 0.0;
  Vector grad;
};

/// Accumulates x g^T into the weight block and g into the bias block.
void accumulate_linear_grad(const LinearHead& head, const Vector& x, const Vector& g,
                            Vector& grad);

/// -log softmax(W^T x + b)[label]. Gradient (p - onehot) x^T.
HeadLoss softmax_cross_entropy(const LinearHead& head, const Vector& x, int label);

/// mean((W^T x + b - target)^2).
HeadLoss mean_squared_error(const LinearHead& head, const Vector& x, const Vector& target);

/// Detector box head regression: lambda * mean_k smooth_l1((pred_k - truth_k) / extent_k),
/// where pred = sigmoid(logit) * anchor for the matched anchor and extent is
/// (width, height, width, height).
HeadLoss anchor_box_loss(const LinearHead& head, const Vector& fused,
                         std::span<const BoundingBox> anchors, std::size_t matched,
                         const BoundingBox& truth, Scalar frame_h, Scalar frame_w,
                         Scalar lambda);

/// Detector score head: mean over anchors of the two-way cross-entropy with
/// label player for the matched anchor and background elsewhere.
HeadLoss anchor_score_loss(const LinearHead& head, const Vector& fused, std::size_t anchor_count,
                           std::size_t matched);

/// Best-IoU anchor for a single truth box; anchor 0 when nothing overlaps.
std::size_t matched_anchor(std::span<const BoundingBox> anchors, const BoundingBox& truth);

}  // namespace eitnet
