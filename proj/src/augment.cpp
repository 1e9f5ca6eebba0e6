#include "eitnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "eitnet/rng.hpp"

namespace eitnet {

namespace {

void require_clip(const Tensor& clip, const char* op) {
  if (clip.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected [C,T,H,W], got " + to_string(clip.shape()));
  }
}

}  // namespace

AugmentParams sample_augment(const AugmentConfig& config, std::size_t height, std::size_t width,
                             std::uint64_t seed) {
  if (config.crop_h > height || config.crop_w > width || config.crop_h == 0 ||
      config.crop_w == 0) {
    throw ValueError("augment: crop " + std::to_string(config.crop_h) + "x" +
                     std::to_string(config.crop_w) + " does not fit a " + std::to_string(height) +
                     "x" + std::to_string(width) + " frame");
  }
  SplitMix64 rng(seed);
  AugmentParams p;
  p.crop_h = config.crop_h;
  p.crop_w = config.crop_w;
  p.crop_y = static_cast<std::size_t>(rng.below(height - config.crop_h + 1));
  p.crop_x = static_cast<std::size_t>(rng.below(width - config.crop_w + 1));
  p.flip = rng.bernoulli(config.flip_probability);
  p.angle_degrees = rng.uniform(-config.max_rotation_degrees, config.max_rotation_degrees);
  return p;
}

AugmentParams centre_crop(std::size_t height, std::size_t width, std::size_t crop_h,
                          std::size_t crop_w) {
  if (crop_h > height || crop_w > width) {
    throw ValueError("centre_crop: crop exceeds the frame");
  }
  return {(height - crop_h) / 2, (width - crop_w) / 2, crop_h, crop_w, false, 0.0};
}

Tensor crop_frames(const Tensor& clip, std::size_t y, std::size_t x, std::size_t h,
                   std::size_t w) {
  require_clip(clip, "crop_frames");
  if (y + h > clip.dim(2) || x + w > clip.dim(3)) {
    throw ValueError("crop_frames: window exceeds " + to_string(clip.shape()));
  }
  Tensor out({clip.dim(0), clip.dim(1), h, w});
  for (std::size_t c = 0; c < clip.dim(0); ++c)
    for (std::size_t t = 0; t < clip.dim(1); ++t)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) out.at(c, t, i, j) = clip.at(c, t, y + i, x + j);
  return out;
}

Tensor flip_horizontal(const Tensor& clip) {
  require_clip(clip, "flip_horizontal");
  Tensor out(clip.shape());
  const std::size_t w = clip.dim(3);
  for (std::size_t c = 0; c < clip.dim(0); ++c)
    for (std::size_t t = 0; t < clip.dim(1); ++t)
      for (std::size_t i = 0; i < clip.dim(2); ++i)
        for (std::size_t j = 0; j < w; ++j) out.at(c, t, i, j) = clip.at(c, t, i, w - 1 - j);
  return out;
}

Tensor rotate_nearest(const Tensor& clip, Scalar degrees) {
  require_clip(clip, "rotate_nearest");
  const std::size_t h = clip.dim(2), w = clip.dim(3);
  const Scalar rad = degrees * std::numbers::pi / 180.0;
  const Scalar cs = std::cos(rad), sn = std::sin(rad);
  const Scalar cy = 0.5 * static_cast<Scalar>(h), cx = 0.5 * static_cast<Scalar>(w);
  Tensor out(clip.shape(), 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      // Inverse map of the output pixel centre.
      const Scalar dx = static_cast<Scalar>(j) + 0.5 - cx, dy = static_cast<Scalar>(i) + 0.5 - cy;
      const Scalar sx = std::floor(cs * dx + sn * dy + cx);
      const Scalar sy = std::floor(-sn * dx + cs * dy + cy);
      if (sx < 0.0 || sy < 0.0 || sx >= static_cast<Scalar>(w) || sy >= static_cast<Scalar>(h)) {
        continue;
      }
      const auto si = static_cast<std::size_t>(sy), sj = static_cast<std::size_t>(sx);
      for (std::size_t c = 0; c < clip.dim(0); ++c)
        for (std::size_t t = 0; t < clip.dim(1); ++t) out.at(c, t, i, j) = clip.at(c, t, si, sj);
    }
  }
  return out;
}

Tensor apply_augment(const Tensor& clip, const AugmentParams& params) {
  require_clip(clip, "augment");
  Tensor out = crop_frames(clip, params.crop_y, params.crop_x, params.crop_h, params.crop_w);
  if (params.flip) out = flip_horizontal(out);
  if (params.angle_degrees != 0.0) out = rotate_nearest(out, params.angle_degrees);
  return out;
}

Tensor augment(const Tensor& clip, const AugmentConfig& config, std::uint64_t seed) {
  require_clip(clip, "augment");
  return apply_augment(clip, sample_augment(config, clip.dim(2), clip.dim(3), seed));
}

Point2 augment_point(const Point2& p, const AugmentParams& params) {
  const Scalar w = static_cast<Scalar>(params.crop_w), h = static_cast<Scalar>(params.crop_h);
  Scalar x = p[0] - static_cast<Scalar>(params.crop_x);
  const Scalar y = p[1] - static_cast<Scalar>(params.crop_y);
  if (params.flip) x = w - x;
  const Scalar rad = params.angle_degrees * std::numbers::pi / 180.0;
  const Scalar cs = std::cos(rad), sn = std::sin(rad);
  const Scalar dx = x - 0.5 * w, dy = y - 0.5 * h;
  return {cs * dx - sn * dy + 0.5 * w, sn * dx + cs * dy + 0.5 * h};
}

BoundingBox augment_box(const BoundingBox& box, const AugmentParams& params) {
  std::vector<Point2> corners;
  for (const Scalar x : {box.left(), box.right()})
    for (const Scalar y : {box.top(), box.bottom()}) corners.push_back(augment_point({x, y}, params));
  BoundingBox b = points_box(corners, 0.0, static_cast<Scalar>(params.crop_h),
                             static_cast<Scalar>(params.crop_w));
  b.score = box.score;
  b.class_id = box.class_id;
  return b;
}

}  // namespace eitnet
