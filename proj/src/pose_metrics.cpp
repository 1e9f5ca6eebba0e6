#include "eitnet/pose_metrics.hpp"

#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace eitnet {

namespace {

void check_pair(const SkeletonPose& pred, const SkeletonPose& truth) {
  if (pred.rows() == 0 || pred.rows() != truth.rows()) {
    throw ShapeError("pose joint counts differ or are zero: " + std::to_string(pred.rows()) +
                     " vs " + std::to_string(truth.rows()));
  }
}

void check_sequences(const PoseSequence& pred, const PoseSequence& truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw ShapeError("pose sequence lengths differ or are zero: " + std::to_string(pred.size()) +
                     " vs " + std::to_string(truth.size()));
  }
}

// Second singular value of the centred set relative to the first; near zero
// means the points lie on a line (or a single point).
void check_spread(const SkeletonPose& centred, const char* which) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred);
  const auto& sv = svd.singularValues();
  if (sv[0] <= 1e-12 || sv[1] <= 1e-9 * sv[0]) {
    throw DegenerateGeometryError(std::string("procrustes_align: ") + which +
                                  " joints are collinear or coincident");
  }
}

}  // namespace

SkeletonPose SimilarityTransform::apply(const SkeletonPose& pose) const {
  SkeletonPose out = (scale * (pose * rotation.transpose())).rowwise() + translation.transpose();
  return out;
}

Scalar mpjpe(const SkeletonPose& pred, const SkeletonPose& truth) {
  check_pair(pred, truth);
  return (pred - truth).rowwise().norm().mean();
}

Scalar mpjpe(const PoseSequence& pred, const PoseSequence& truth) {
  check_sequences(pred, truth);
  Scalar sum = 0.0;
  Eigen::Index count = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    check_pair(pred[f], truth[f]);
    sum += (pred[f] - truth[f]).rowwise().norm().sum();
    count += pred[f].rows();
  }
  return sum / static_cast<Scalar>(count);
}

SimilarityTransform procrustes_align(const SkeletonPose& pred, const SkeletonPose& truth) {
  check_pair(pred, truth);
  if (pred.rows() < 3) throw DegenerateGeometryError("procrustes_align: need at least 3 joints");
  const Eigen::RowVector3d mu_pred = pred.colwise().mean();
  const Eigen::RowVector3d mu_truth = truth.colwise().mean();
  const SkeletonPose x = pred.rowwise() - mu_pred;
  const SkeletonPose y = truth.rowwise() - mu_truth;
  check_spread(x, "predicted");
  check_spread(y, "ground-truth");

  const auto n = static_cast<Scalar>(pred.rows());
  const Matrix3 cross = y.transpose() * x / n;  // sum_i y_i x_i^T / N
  const Eigen::JacobiSVD<Matrix3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector3 sign = Vector3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign[2] = -1.0;

  SimilarityTransform tf;
  tf.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  const Scalar var_pred = x.squaredNorm() / n;
  tf.scale = svd.singularValues().dot(sign) / var_pred;
  tf.translation = mu_truth.transpose() - tf.scale * tf.rotation * mu_pred.transpose();
  return tf;
}

Scalar pa_mpjpe(const SkeletonPose& pred, const SkeletonPose& truth) {
  return mpjpe(procrustes_align(pred, truth).apply(pred), truth);
}

Scalar pa_mpjpe(const PoseSequence& pred, const PoseSequence& truth) {
  check_sequences(pred, truth);
  PoseSequence aligned;
  aligned.reserve(pred.size());
  for (std::size_t f = 0; f < pred.size(); ++f) {
    aligned.push_back(procrustes_align(pred[f], truth[f]).apply(pred[f]));
  }
  return mpjpe(aligned, truth);
}

Scalar accuracy(std::span<const int> predictions, std::span<const int> truths) {
  if (predictions.empty()) throw ValueError("accuracy: no predictions");
  if (predictions.size() != truths.size()) {
    throw ShapeError("accuracy: prediction and label counts differ");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == truths[i];
  return 100.0 * static_cast<Scalar>(correct) / static_cast<Scalar>(predictions.size());
}

Tensor poses_to_tensor(const PoseSequence& poses) {
  if (poses.empty()) throw ShapeError("poses_to_tensor: empty sequence");
  const auto joints = static_cast<std::size_t>(poses.front().rows());
  Tensor t({poses.size(), joints, 3});
  for (std::size_t f = 0; f < poses.size(); ++f) {
    if (static_cast<std::size_t>(poses[f].rows()) != joints) {
      throw ShapeError("poses_to_tensor: joint count changes within sequence");
    }
    std::copy(poses[f].data(), poses[f].data() + joints * 3, t.data().begin() + f * joints * 3);
  }
  return t;
}

PoseSequence tensor_to_poses(const Tensor& t) {
  if (t.rank() != 3 || t.dim(2) != 3) {
    throw ShapeError("tensor_to_poses: expected [T, J, 3], got " + to_string(t.shape()));
  }
  const std::size_t joints = t.dim(1);
  PoseSequence poses;
  for (std::size_t f = 0; f < t.dim(0); ++f) {
    SkeletonPose p(static_cast<Eigen::Index>(joints), 3);
    std::copy(t.data().begin() + f * joints * 3, t.data().begin() + (f + 1) * joints * 3,
              p.data());
    poses.push_back(std::move(p));
  }
  return poses;
}

}  // namespace eitnet
