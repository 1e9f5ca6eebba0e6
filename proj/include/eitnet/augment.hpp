#pragma once

#include <cstdint>
#include <vector>

#include "eitnet/detection.hpp"
#include "eitnet/tensor.hpp"

namespace eitnet {

/// Full-scale crop extent. Desk-scale runs pass a smaller crop.
inline constexpr std::size_t kPaperCropSize = 224;
inline constexpr Scalar kMaxRotationDegrees = 15.0;

struct AugmentConfig {
  std::size_t crop_h = kPaperCropSize;
  std::size_t crop_w = kPaperCropSize;
  Scalar flip_probability = 0.5;
  Scalar max_rotation_degrees = kMaxRotationDegrees;
};

/// One draw of the augmentation, shared by every frame of a clip.
struct AugmentParams {
  std::size_t crop_y = 0;
  std::size_t crop_x = 0;
  std::size_t crop_h = 0;
  std::size_t crop_w = 0;
  bool flip = false;
  Scalar angle_degrees = 0.0;
};

/// Crop offset uniform over valid positions, flip with the configured
/// probability, angle uniform in [-max, max].
AugmentParams sample_augment(const AugmentConfig& config, std::size_t height, std::size_t width,
                             std::uint64_t seed);

/// Deterministic centred crop with no flip or rotation.
AugmentParams centre_crop(std::size_t height, std::size_t width, std::size_t crop_h,
                          std::size_t crop_w);

/// Crop, then horizontal flip, then rotation about the crop centre. Clip is
/// [C,T,H,W]; rotation samples nearest-neighbour and fills with zero.
Tensor apply_augment(const Tensor& clip, const AugmentParams& params);

/// sample_augment + apply_augment.
Tensor augment(const Tensor& clip, const AugmentConfig& config, std::uint64_t seed);

/// Where a pixel-space point of the source frame lands after augmentation.
Point2 augment_point(const Point2& p, const AugmentParams& params);

/// Box in the augmented frame: the bounding box of the transformed corners,
/// clamped to the crop.
BoundingBox augment_box(const BoundingBox& box, const AugmentParams& params);

Tensor crop_frames(const Tensor& clip, std::size_t y, std::size_t x, std::size_t h, std::size_t w);
Tensor flip_horizontal(const Tensor& clip);
Tensor rotate_nearest(const Tensor& clip, Scalar degrees);

}  // namespace eitnet
