#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "eitnet/tensor.hpp"

namespace eitnet {

/// N joints as rows of (x, y, z) in millimetres.
using SkeletonPose = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using PoseSequence = std::vector<SkeletonPose>;
using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

/// x -> scale * rotation * x + translation, applied row-wise.
struct SimilarityTransform {
  Scalar scale = 1.0;
  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  SkeletonPose apply(const SkeletonPose& pose) const;
};

class DegenerateGeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mean Euclidean joint distance.
Scalar mpjpe(const SkeletonPose& pred, const SkeletonPose& truth);
/// Mean over every joint of every frame.
Scalar mpjpe(const PoseSequence& pred, const PoseSequence& truth);

/// Least-squares similarity transform taking pred onto truth, i.e. the
/// minimizer of sum_i |truth_i - s R pred_i - t|^2 with det R = +1.
/// Throws DegenerateGeometryError for fewer than 3 joints or collinear /
/// coincident point sets.
SimilarityTransform procrustes_align(const SkeletonPose& pred, const SkeletonPose& truth);

/// MPJPE after aligning pred to truth; sequences are aligned frame by frame.
Scalar pa_mpjpe(const SkeletonPose& pred, const SkeletonPose& truth);
Scalar pa_mpjpe(const PoseSequence& pred, const PoseSequence& truth);

/// 100 * correct / total.
Scalar accuracy(std::span<const int> predictions, std::span<const int> truths);

/// [T, J, 3] tensor <-> pose sequence.
Tensor poses_to_tensor(const PoseSequence& poses);
PoseSequence tensor_to_poses(const Tensor& t);

}  // namespace eitnet
