#include "eitnet/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "eitnet/rng.hpp"

namespace eitnet {

void FeaturePyramid::validate() const {
  if (levels.size() < 2) throw ShapeError("feature pyramid needs at least 2 levels");
  const std::size_t channels = levels.front().dim(0);
  for (const auto& level : levels) {
    if (level.dim(0) != channels) {
      throw ShapeError("pyramid levels disagree on channel count: " +
                       to_string(levels.front().shape()) + " vs " + to_string(level.shape()));
    }
  }
}

std::vector<Scalar> FusionWeights::normalized() const {
  if (eps < 0.0) throw ValueError("fusion eps must be nonnegative");
  Scalar sum = 0.0;
  for (Scalar w : raw) {
    if (!(w >= 0.0)) throw ValueError("fusion weights must be nonnegative");
    sum += w;
  }
  if (sum + eps <= 0.0) throw ValueError("fusion weights sum to zero with eps 0");
  std::vector<Scalar> alpha(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) alpha[i] = raw[i] / (sum + eps);
  return alpha;
}

Scalar iou(const BoundingBox& a, const BoundingBox& b) {
  const Scalar iw = std::max<Scalar>(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const Scalar ih = std::max<Scalar>(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const Scalar inter = iw * ih;
  const Scalar uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

BoundingBox points_box(std::span<const Point2> points, Scalar pad, Scalar height,
                       Scalar width) {
  if (points.empty()) throw ValueError("points_box: no points");
  Scalar x0 = points[0][0], x1 = x0, y0 = points[0][1], y1 = y0;
  for (const auto& [x, y] : points) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  x0 = std::clamp(x0 - pad, 0.0, width);
  x1 = std::clamp(x1 + pad, 0.0, width);
  y0 = std::clamp(y0 - pad, 0.0, height);
  y1 = std::clamp(y1 + pad, 0.0, height);
  return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0, 1.0, 1};
}

Tensor resample_nearest(const Tensor& map, std::size_t out_h, std::size_t out_w) {
  if (map.rank() != 3) {
    throw ShapeError("resample_nearest: expected [C,H,W], got " + to_string(map.shape()));
  }
  const std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  Tensor out({c, out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = std::min(h - 1, (2 * y + 1) * h / (2 * out_h));
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t sx = std::min(w - 1, (2 * x + 1) * w / (2 * out_w));
      for (std::size_t k = 0; k < c; ++k) out.at(k, y, x) = map.at(k, sy, sx);
    }
  }
  return out;
}

Tensor bifpn_fuse(const FeaturePyramid& pyramid, const FusionWeights& weights) {
  pyramid.validate();
  if (weights.raw.size() != pyramid.level_count()) {
    throw ShapeError("bifpn_fuse: " + std::to_string(weights.raw.size()) + " weights for " +
                     std::to_string(pyramid.level_count()) + " levels");
  }
  const Shape& shape = pyramid.levels.front().shape();
  for (const auto& level : pyramid.levels) {
    if (level.shape() != shape) {
      throw ShapeError("bifpn_fuse: levels must be resampled to a common extent, got " +
                       to_string(shape) + " and " + to_string(level.shape()));
    }
  }
  const auto alpha = weights.normalized();
  Tensor out(shape, 0.0);
  for (std::size_t i = 0; i < pyramid.level_count(); ++i) {
    const auto src = pyramid.levels[i].data();
    auto dst = out.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += alpha[i] * src[j];
  }
  return out;
}

Tensor level_attention(const Tensor& current, const Tensor& previous, Scalar eps) {
  if (current.shape() != previous.shape()) {
    throw ShapeError("level_attention: " + to_string(current.shape()) + " vs " +
                     to_string(previous.shape()));
  }
  Tensor out = current;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = current[i] / (previous[i] + eps);
  return out;
}

std::vector<BoundingBox> predict_boxes(const Tensor& fused, const Tensor& reg_weight,
                                       const Tensor& reg_bias,
                                       std::span<const BoundingBox> anchors) {
  if (reg_weight.rank() != 2 || reg_weight.dim(1) != 4 * anchors.size()) {
    throw ShapeError("predict_boxes: regression head emits " +
                     std::to_string(reg_weight.rank() == 2 ? reg_weight.dim(1) : 0) +
                     " values for " + std::to_string(anchors.size()) + " anchors");
  }
  const Tensor logits = linear(fused.reshaped({fused.size()}), reg_weight, reg_bias);
  std::vector<BoundingBox> boxes;
  boxes.reserve(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    BoundingBox box = anchors[a];
    box.cx = sigmoid(logits[4 * a + 0]) * anchors[a].cx;
    box.cy = sigmoid(logits[4 * a + 1]) * anchors[a].cy;
    box.w = sigmoid(logits[4 * a + 2]) * anchors[a].w;
    box.h = sigmoid(logits[4 * a + 3]) * anchors[a].h;
    boxes.push_back(box);
  }
  return boxes;
}

Scalar smooth_l1(Scalar x) {
  const Scalar a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

Scalar smooth_l1_grad(Scalar x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

DetectionLossParts detection_loss(std::span<const Vector> pred_scores,
                                  std::span<const int> true_labels,
                                  std::span<const BoundingBox> pred_boxes,
                                  std::span<const BoundingBox> true_boxes, Scalar lambda) {
  if (pred_scores.empty() || pred_boxes.empty()) {
    throw ValueError("detection_loss: empty match set");
  }
  if (pred_scores.size() != true_labels.size() || pred_boxes.size() != true_boxes.size()) {
    throw ShapeError("detection_loss: prediction and target counts differ");
  }
  if (lambda < 0.0) throw ValueError("detection_loss: lambda must be nonnegative");
  DetectionLossParts parts;
  parts.lambda = lambda;
  for (std::size_t i = 0; i < pred_scores.size(); ++i) {
    const int label = true_labels[i];
    if (label < 0 || label >= pred_scores[i].size()) {
      throw ValueError("detection_loss: label " + std::to_string(label) + " out of range");
    }
    // Clamp keeps a zero probability finite.
    parts.cls -= std::log(std::max(pred_scores[i][label], 1e-300));
  }
  parts.cls /= static_cast<Scalar>(pred_scores.size());
  for (std::size_t i = 0; i < pred_boxes.size(); ++i) {
    const auto p = pred_boxes[i].coords();
    const auto t = true_boxes[i].coords();
    for (int k = 0; k < 4; ++k) parts.reg += smooth_l1(p[k] - t[k]);
  }
  parts.reg /= static_cast<Scalar>(4 * pred_boxes.size());
  return parts;
}

std::vector<std::pair<std::size_t, std::size_t>> match_anchors(
    std::span<const BoundingBox> anchors, std::span<const BoundingBox> truths) {
  struct Candidate {
    Scalar overlap;
    std::size_t anchor, truth;
  };
  std::vector<Candidate> candidates;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t t = 0; t < truths.size(); ++t) {
      const Scalar o = iou(anchors[a], truths[t]);
      if (o > 0.0) candidates.push_back({o, a, t});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) { return x.overlap > y.overlap; });
  std::vector<bool> anchor_used(anchors.size()), truth_used(truths.size());
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (const auto& c : candidates) {
    if (anchor_used[c.anchor] || truth_used[c.truth]) continue;
    anchor_used[c.anchor] = truth_used[c.truth] = true;
    matches.emplace_back(c.anchor, c.truth);
  }
  return matches;
}

std::vector<BoundingBox> nms(std::vector<BoundingBox> boxes, Scalar iou_threshold) {
  std::stable_sort(boxes.begin(), boxes.end(), [](const BoundingBox& a, const BoundingBox& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return a.cx < b.cx;
  });
  std::vector<BoundingBox> kept;
  for (const auto& box : boxes) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const BoundingBox& k) {
      return iou(k, box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(box);
  }
  return kept;
}

namespace {

struct PixelWindow {
  std::size_t y0, y1, x0, x1;
};

PixelWindow clamp_box(const BoundingBox& box, std::size_t height, std::size_t width) {
  const auto clampi = [](Scalar v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp<Scalar>(v, 0.0, static_cast<Scalar>(hi)));
  };
  PixelWindow win{clampi(std::floor(box.top()), height), clampi(std::ceil(box.bottom()), height),
                  clampi(std::floor(box.left()), width), clampi(std::ceil(box.right()), width)};
  if (win.y1 <= win.y0 || win.x1 <= win.x0) {
    throw ValueError("crop_region: box does not intersect the frame");
  }
  return win;
}

}  // namespace

Tensor crop_region(const Tensor& frame, const BoundingBox& box, std::size_t out_h,
                   std::size_t out_w) {
  if (frame.rank() != 3) {
    throw ShapeError("crop_region: expected [C,H,W], got " + to_string(frame.shape()));
  }
  const std::size_t c = frame.dim(0);
  const PixelWindow win = clamp_box(box, frame.dim(1), frame.dim(2));
  Tensor cropped({c, win.y1 - win.y0, win.x1 - win.x0});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = win.y0; y < win.y1; ++y) {
      for (std::size_t x = win.x0; x < win.x1; ++x) {
        cropped.at(k, y - win.y0, x - win.x0) = frame.at(k, y, x);
      }
    }
  }
  return resample_nearest(cropped, out_h, out_w);
}

Tensor crop_clip(const Tensor& clip, const BoundingBox& box, std::size_t out_h,
                 std::size_t out_w) {
  if (clip.rank() != 4) {
    throw ShapeError("crop_clip: expected [C,T,H,W], got " + to_string(clip.shape()));
  }
  const std::size_t c = clip.dim(0), t = clip.dim(1), h = clip.dim(2), w = clip.dim(3);
  Tensor out({c, t, out_h, out_w});
  const std::size_t frame_size = h * w, out_size = out_h * out_w;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t f = 0; f < t; ++f) {
      const std::size_t base = (k * t + f) * frame_size;
      Tensor frame({1, h, w}, std::vector<Scalar>(clip.data().begin() + base,
                                                   clip.data().begin() + base + frame_size));
      const Tensor cropped = crop_region(frame, box, out_h, out_w);
      std::copy(cropped.data().begin(), cropped.data().end(),
                out.data().begin() + (k * t + f) * out_size);
    }
  }
  return out;
}

DetectorParams init_detector(const DetectorConfig& config, std::uint64_t seed) {
  if (config.levels < 2) throw ValueError("detector needs at least 2 pyramid levels");
  DetectorParams p;
  p.config = config;
  SplitMix64 rng(seed);
  std::size_t in = config.in_channels;
  for (std::size_t l = 0; l < config.levels; ++l) {
    Tensor w({config.channels, in, 1, 3, 3});
    const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(in * 9));
    for (auto& v : w.data()) v = rng.uniform(-bound, bound);
    p.backbone_weights.push_back(std::move(w));
    p.backbone_biases.emplace_back(Shape{config.channels}, 0.0);
    in = config.channels;
  }
  p.fusion.raw.assign(config.levels, 1.0);
  const std::size_t features = config.channels * config.fused_extent * config.fused_extent;
  const std::size_t anchors = config.anchor_scales.size();
  p.box_head = LinearHead::random(features, 4 * anchors, rng.next());
  p.box_head.weight *= 0.1;
  p.score_head = LinearHead::random(features, 2 * anchors, rng.next());
  return p;
}

std::vector<BoundingBox> make_anchors(const DetectorConfig& config, std::size_t height,
                                      std::size_t width) {
  std::vector<BoundingBox> anchors;
  for (const auto& [sw, sh] : config.anchor_scales) {
    anchors.push_back({static_cast<Scalar>(width), static_cast<Scalar>(height),
                       sw * static_cast<Scalar>(width), sh * static_cast<Scalar>(height), 0.0,
                       1});
  }
  return anchors;
}

DetectorOutput detect(const DetectorParams& params, const Tensor& frame) {
  if (frame.rank() != 3) {
    throw ShapeError("detect: expected [C,H,W] frame, got " + to_string(frame.shape()));
  }
  const auto& cfg = params.config;
  const ConvSpec down{{1, 3, 3}, {1, 2, 2}, {0, 1, 1}, true};
  Tensor x = frame.reshaped({frame.dim(0), 1, frame.dim(1), frame.dim(2)});
  FeaturePyramid pyramid;
  for (std::size_t l = 0; l < cfg.levels; ++l) {
    x = relu(conv3d(x, params.backbone_weights[l], down, params.backbone_biases[l]));
    pyramid.levels.push_back(
        resample_nearest(x.reshaped({x.dim(0), x.dim(2), x.dim(3)}), cfg.fused_extent,
                         cfg.fused_extent));
  }
  std::reverse(pyramid.levels.begin(), pyramid.levels.end());  // coarse first

  DetectorOutput out;
  out.fused = bifpn_fuse(pyramid, params.fusion);
  out.anchors = make_anchors(cfg, frame.dim(1), frame.dim(2));
  out.candidates = predict_boxes(out.fused, params.box_head.weight_tensor(),
                                 params.box_head.bias_tensor(), out.anchors);
  const Vector score_logits = params.score_head.apply(out.fused.vector());
  for (std::size_t a = 0; a < out.anchors.size(); ++a) {
    const Vector probs = softmax(Vector(score_logits.segment(2 * static_cast<Eigen::Index>(a), 2)));
    out.candidates[a].score = probs[1];
    out.candidates[a].class_id = 1;
    out.anchor_probs.push_back(probs);
  }
  out.kept = nms(out.candidates, cfg.nms_iou);
  return out;
}

}  // namespace eitnet
