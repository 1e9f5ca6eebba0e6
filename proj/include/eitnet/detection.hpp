#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "eitnet/linear_head.hpp"
#include "eitnet/ops.hpp"
#include "eitnet/tensor.hpp"

namespace eitnet {

/// Multi-scale features, coarse to fine. All levels share a channel count.
struct FeaturePyramid {
  std::vector<Tensor> levels;

  std::size_t level_count() const { return levels.size(); }
  void validate() const;
};

/// Raw nonnegative per-level fusion weights. Normalized as
/// alpha_i = w_i / (sum_j w_j + eps), so the alphas are a sub-convex set.
struct FusionWeights {
  std::vector<Scalar> raw;
  Scalar eps = 1e-4;

  std::vector<Scalar> normalized() const;
};

struct BoundingBox {
  Scalar cx = 0.0;
  Scalar cy = 0.0;
  Scalar w = 1.0;
  Scalar h = 1.0;
  Scalar score = 0.0;
  int class_id = 0;

  Scalar left() const { return cx - 0.5 * w; }
  Scalar right() const { return cx + 0.5 * w; }
  Scalar top() const { return cy - 0.5 * h; }
  Scalar bottom() const { return cy + 0.5 * h; }
  Scalar area() const { return w * h; }
  std::array<Scalar, 4> coords() const { return {cx, cy, w, h}; }

  bool operator==(const BoundingBox&) const = default;
};

Scalar iou(const BoundingBox& a, const BoundingBox& b);

using Point2 = std::array<Scalar, 2>;  // (x, y) in pixels

/// Bounding box of the points grown by `pad` on every side and clamped to
/// [0, width] x [0, height].
BoundingBox points_box(std::span<const Point2> points, Scalar pad, Scalar height, Scalar width);

struct DetectionLossParts {
  Scalar cls = 0.0;
  Scalar reg = 0.0;
  Scalar lambda = 1.0;

  Scalar total() const { return cls + lambda * reg; }
};

inline constexpr Scalar kDefaultLambda = 1.0;

/// Nearest-neighbour resize of [C,H,W] to [C,out_h,out_w]. Source index is
/// floor((o + 0.5) * in / out).
Tensor resample_nearest(const Tensor& map, std::size_t out_h, std::size_t out_w);

/// Weighted sum of pyramid levels. Levels must already share one extent.
Tensor bifpn_fuse(const FeaturePyramid& pyramid, const FusionWeights& weights);

/// Elementwise current / (previous + eps).
Tensor level_attention(const Tensor& current, const Tensor& previous, Scalar eps);

/// Box_k = sigmoid(FC_reg(fused))_k * anchor_k, coordinatewise over
/// (cx, cy, w, h). reg_weight is [fused.size(), 4 * anchors], reg_bias
/// [4 * anchors]. Score and class_id are copied from the anchor.
std::vector<BoundingBox> predict_boxes(const Tensor& fused, const Tensor& reg_weight,
                                       const Tensor& reg_bias,
                                       std::span<const BoundingBox> anchors);

Scalar smooth_l1(Scalar x);
Scalar smooth_l1_grad(Scalar x);

/// cls = mean cross-entropy of pred_scores[i] (probabilities) against
/// true_labels[i]; reg = mean smooth-L1 over all coordinates of the matched
/// box pairs; total = cls + lambda * reg.
DetectionLossParts detection_loss(std::span<const Vector> pred_scores,
                                  std::span<const int> true_labels,
                                  std::span<const BoundingBox> pred_boxes,
                                  std::span<const BoundingBox> true_boxes,
                                  Scalar lambda = kDefaultLambda);

/// Greedy one-to-one assignment: repeatedly take the highest-IoU unassigned
/// (anchor, truth) pair with IoU > 0. Returns (anchor index, truth index).
std::vector<std::pair<std::size_t, std::size_t>> match_anchors(
    std::span<const BoundingBox> anchors, std::span<const BoundingBox> truths);

/// Greedy suppression in (score desc, class_id asc, cx asc) order.
std::vector<BoundingBox> nms(std::vector<BoundingBox> boxes, Scalar iou_threshold);

/// Crop [C,H,W] to the box (clamped to the frame, integer pixel bounds) and
/// resample nearest-neighbour to out_h x out_w.
Tensor crop_region(const Tensor& frame, const BoundingBox& box, std::size_t out_h,
                   std::size_t out_w);

/// Same crop applied to every frame of a clip [C,T,H,W].
Tensor crop_clip(const Tensor& clip, const BoundingBox& box, std::size_t out_h,
                 std::size_t out_w);

// ---------------------------------------------------------------------------
// Toy detector: a 3-level stride-2 conv backbone stands in for EfficientNet.

struct DetectorConfig {
  std::size_t in_channels = 1;
  std::size_t channels = 4;
  std::size_t levels = 3;
  std::size_t fused_extent = 8;
  std::vector<std::pair<Scalar, Scalar>> anchor_scales{{1.0, 1.0}, {0.75, 0.9}, {0.5, 0.75}};
  Scalar nms_iou = 0.5;
};

struct DetectorParams {
  DetectorConfig config;
  std::vector<Tensor> backbone_weights;  // [C_out, C_in, 1, 3, 3]
  std::vector<Tensor> backbone_biases;
  FusionWeights fusion;
  LinearHead box_head;    // fused -> 4 * anchors
  LinearHead score_head;  // fused -> 2 * anchors (background, player)

  std::size_t anchor_count() const { return config.anchor_scales.size(); }
};

DetectorParams init_detector(const DetectorConfig& config, std::uint64_t seed);

/// Anchors for a frame of the given extent. Because predicted boxes are
/// sigmoid-scaled anchors, every anchor is centred on the far corner
/// (width, height) so a predicted centre can land anywhere in the frame.
std::vector<BoundingBox> make_anchors(const DetectorConfig& config, std::size_t height,
                                      std::size_t width);

struct DetectorOutput {
  Tensor fused;                        // [C, e, e]
  std::vector<BoundingBox> anchors;
  std::vector<BoundingBox> candidates;  // one per anchor, scored
  std::vector<Vector> anchor_probs;     // (background, player) per anchor
  std::vector<BoundingBox> kept;        // after NMS
};

/// Frame is [C,H,W].
DetectorOutput detect(const DetectorParams& params, const Tensor& frame);

}  // namespace eitnet
