#include "eitnet/gradcheck.hpp"

#include <cmath>
#include <string>

namespace eitnet {

GradCheckResult gradient_check(const Objective& f, const Vector& x, Scalar h) {
  if (!(h > 0.0)) throw ValueError("gradient_check: step must be positive");
  const HeadLoss at = f(x);
  if (!std::isfinite(at.loss) || !at.grad.allFinite()) {
    throw ValueError("gradient_check: non-finite loss or gradient at the base point");
  }
  if (at.grad.size() != x.size()) {
    throw ShapeError("gradient_check: gradient has " + std::to_string(at.grad.size()) +
                     " entries for " + std::to_string(x.size()) + " parameters");
  }
  GradCheckResult r;
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const Scalar up = f(probe).loss;
    probe[i] = x[i] - h;
    const Scalar down = f(probe).loss;
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw ValueError("gradient_check: non-finite loss near coordinate " + std::to_string(i));
    }
    const Scalar numeric = (up - down) / (2.0 * h);
    const Scalar abs_err = std::abs(numeric - at.grad[i]);
    const Scalar rel_err = abs_err / std::max(std::abs(numeric) + std::abs(at.grad[i]), 1e-8);
    r.max_abs_error = std::max(r.max_abs_error, abs_err);
    if (rel_err > r.max_rel_error) {
      r.max_rel_error = rel_err;
      r.worst_index = static_cast<std::size_t>(i);
    }
  }
  return r;
}

namespace {

LinearHead with_params(LinearHead head, const Vector& flat) {
  head.assign(flat);
  return head;
}

}  // namespace

std::vector<LayerGradCheck> check_trainable_heads(const PipelineModel& model,
                                                  const StageToggles& toggles,
                                                  const SyntheticAction& sample, Scalar lambda,
                                                  Scalar h) {
  const AugmentParams crop = input_crop(model, sample.clip.dim(2), sample.clip.dim(3));
  const Tensor clip = apply_augment(sample.clip, crop);
  const BoundingBox box = augment_box(sample.box, crop);
  const PipelineFeatures f = extract_features(model, clip, toggles, box);
  const Vector rep = model.representation_scaler.apply(f.representation);
  const Vector feat = model.feature_scaler.apply(f.features);
  Vector pose(static_cast<Eigen::Index>(model.config.pose_dim()));
  Eigen::Index k = 0;
  for (const auto& p : sample.poses)
    for (Eigen::Index i = 0; i < p.size(); ++i) pose[k++] = p.data()[i] / 1000.0;

  std::vector<LayerGradCheck> out;
  const auto run = [&](const std::string& name, const LinearHead& head, const Objective& fn) {
    out.push_back({name, head.parameter_count(), gradient_check(fn, head.flatten(), h)});
  };
  run("classifier", model.classifier, [&](const Vector& p) {
    return softmax_cross_entropy(with_params(model.classifier, p), rep, sample.label_index());
  });
  run("pose_head", model.pose_head, [&](const Vector& p) {
    return mean_squared_error(with_params(model.pose_head, p), feat, pose);
  });
  if (toggles.detection) {
    const Scalar fh = static_cast<Scalar>(clip.dim(2)), fw = static_cast<Scalar>(clip.dim(3));
    const auto anchors = make_anchors(model.detector.config, clip.dim(2), clip.dim(3));
    const std::size_t a = matched_anchor(anchors, box);
    run("detector_box_head", model.detector.box_head, [&](const Vector& p) {
      return anchor_box_loss(with_params(model.detector.box_head, p), f.fused, anchors, a, box, fh,
                             fw, lambda);
    });
    run("detector_score_head", model.detector.score_head, [&](const Vector& p) {
      return anchor_score_loss(with_params(model.detector.score_head, p), f.fused, anchors.size(),
                               a);
    });
  }
  return out;
}

}  // namespace eitnet
