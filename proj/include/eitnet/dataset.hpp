#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "eitnet/detection.hpp"
#include "eitnet/pose_metrics.hpp"

namespace eitnet {

enum class Action { dribble = 0, shoot = 1, pass = 2, jump = 3 };

inline constexpr std::size_t kActionCount = 4;
inline constexpr std::array<const char*, kActionCount> kActionNames{"dribble", "shoot", "pass",
                                                                    "jump"};

const char* to_string(Action action);
Action parse_action(std::string_view name);

/// 13-joint skeleton: pelvis, neck, head, then shoulder/elbow/hand for the
/// left and right arm, then knee/foot for the left and right leg.
inline constexpr std::size_t kJointCount = 13;

struct SyntheticConfig {
  std::size_t subjects = 10;
  std::size_t views = 5;
  std::size_t classes = kActionCount;
  std::size_t repetitions = 2;
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  Scalar pixels_per_mm = 0.012;
  Scalar pixel_noise = 0.05;
  Scalar bone_sigma = 0.7;

  void validate() const;
  std::size_t sample_count() const { return subjects * views * classes * repetitions; }
};

/// One rendered clip with its ground truth. Poses are in camera coordinates
/// (millimetres, y up); the camera is orthographic and looks down -z.
struct SyntheticAction {
  std::size_t sample_id = 0;
  Tensor clip;  // [1, T, H, W], intensities roughly in [0, 1]
  PoseSequence poses;
  int subject_id = 1;
  int view_id = 1;
  Action label = Action::dribble;
  std::vector<Point2> keypoints;  // projected joints, frame-major
  Scalar box_pad = 0.0;
  BoundingBox box;  // points_box(keypoints, box_pad, H, W)

  int label_index() const { return static_cast<int>(label); }
};

/// Subject-major, then view, class and repetition. Sample i draws its noise
/// from derive_seed(seed, i), so any subset regenerates identically.
std::vector<SyntheticAction> generate_synthetic_dataset(const SyntheticConfig& config,
                                                        std::uint64_t seed);

/// Pixel coordinates (x right, y down) of a camera-space joint.
Point2 project_joint(const SyntheticConfig& config, const Eigen::RowVector3d& p);

/// Projected joints of every frame, frame-major.
std::vector<Point2> project_poses(const SyntheticConfig& config, const PoseSequence& poses);

/// Fills keypoints, box_pad and box from the poses.
void annotate_box(const SyntheticConfig& config, SyntheticAction& sample);

/// Writes clips/<id>.eitt, poses/<id>.eitt and manifest.csv under dir.
void save_dataset(const std::string& dir, const std::vector<SyntheticAction>& samples,
                  std::uint64_t seed);

/// Reads a directory written by save_dataset. Boxes are recomputed from the
/// poses with the given config.
std::vector<SyntheticAction> load_dataset(const std::string& dir, const SyntheticConfig& config);

}  // namespace eitnet
