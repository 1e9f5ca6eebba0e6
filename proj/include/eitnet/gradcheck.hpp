#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eitnet/heads.hpp"
#include "eitnet/pipeline.hpp"

namespace eitnet {

struct GradCheckResult {
  Scalar max_abs_error = 0.0;
  Scalar max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

/// Loss and analytic gradient at a parameter vector.
using Objective = std::function<HeadLoss(const Vector&)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h against the
/// analytic gradient at x. Relative error per coordinate is
/// |a - n| / max(|a| + |n|, 1e-8).
GradCheckResult gradient_check(const Objective& f, const Vector& x, Scalar h = 1e-5);

struct LayerGradCheck {
  std::string layer;
  std::size_t parameters = 0;
  GradCheckResult result;
};

/// Checks every trainable head of the model on one sample: classifier,
/// pose head, and (with detection on) the detector box and score heads.
std::vector<LayerGradCheck> check_trainable_heads(const PipelineModel& model,
                                                  const StageToggles& toggles,
                                                  const SyntheticAction& sample, Scalar lambda,
                                                  Scalar h = 1e-5);

}  // namespace eitnet
