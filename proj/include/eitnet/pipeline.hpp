#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eitnet/augment.hpp"
#include "eitnet/dataset.hpp"
#include "eitnet/detection.hpp"
#include "eitnet/spatiotemporal.hpp"
#include "eitnet/temporal.hpp"

namespace eitnet {

/// Which stages run. A disabled stage is replaced by a pass-through: the
/// full frame as the box, mean-frame features instead of I3D, or pooled
/// patch embeddings without encoder blocks.
struct StageToggles {
  bool detection = true;
  bool spatiotemporal = true;
  bool temporal = true;

  bool any() const { return detection || spatiotemporal || temporal; }
  /// "full", "-detection", "-I3D", "-TimeSformer" or a '+'-joined stage list.
  std::string label() const;
  /// Comma list of enabled stages drawn from {det, i3d, tsf}.
  static StageToggles parse(const std::string& text);
  bool operator==(const StageToggles&) const = default;
};

/// Full pipeline followed by the three single-stage-off variants.
std::vector<StageToggles> ablation_rows();

struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t frames = 8;
  std::size_t classes = kActionCount;
  std::size_t joints = kJointCount;
  DetectorConfig detector;
  std::size_t crop = 16;
  std::vector<std::size_t> i3d_channels{8, 16, 32};
  std::size_t patch = 4;
  std::size_t d_model = 32;
  std::size_t ffn_hidden = 64;
  std::size_t encoder_blocks = 2;
  AttentionMode attention = AttentionMode::divided;

  void validate() const;
  std::size_t feature_dim() const { return i3d_channels.back(); }
  std::size_t grid() const { return crop / patch; }
  std::size_t token_count() const { return 1 + frames * grid() * grid(); }
  /// Classifier input: summary-token state followed by the mean grid token
  /// of each frame.
  std::size_t representation_dim() const { return (1 + frames) * d_model; }
  std::size_t pose_dim() const { return frames * joints * 3; }
};

/// Per-feature standardization fitted on training features.
struct FeatureScaler {
  Vector mean;
  Vector inv_std;

  Vector apply(const Vector& x) const;
  static FeatureScaler identity(std::size_t dim);
  static FeatureScaler fit(std::span<const Vector> samples);
};

struct PipelineModel {
  ModelConfig config;
  DetectorParams detector;
  std::vector<I3DBlockParams> i3d;
  Tensor patch_weight;  // [C*P*P, d_model]
  Tensor patch_bias;    // [d_model]
  Tensor pos_enc;       // [grid tokens, d_model]
  LinearHead summary;   // feature_dim -> d_model
  std::vector<EncoderParams> encoder;

  // Centre crop applied to incoming clips, matching the training crop.
  std::size_t input_crop_h = 0;
  std::size_t input_crop_w = 0;

  // Trainable heads.
  FeatureScaler representation_scaler;
  FeatureScaler feature_scaler;
  LinearHead classifier;  // representation_dim -> classes
  LinearHead pose_head;   // feature_dim -> T * J * 3, metres
};

/// Random frozen stages and zero-initialized trainable heads.
PipelineModel init_model(const ModelConfig& config, std::uint64_t seed);

/// Sinusoidal positional table [count, d].
Tensor sinusoidal_positions(std::size_t count, std::size_t d);

/// Mean over frames of a clip [C,T,H,W].
Tensor mean_frame(const Tensor& clip);

/// Pass-through for the spatiotemporal stage: the mean frame, flattened and
/// averaged over consecutive runs so it has `dim` entries.
Vector mean_frame_features(const Tensor& crop, std::size_t dim);

struct PipelineFeatures {
  BoundingBox box;
  Tensor crop;           // [C, T, crop, crop]
  Vector fused;          // detector features, empty when detection is off
  Vector features;       // I3D (or pass-through) features
  Vector representation; // classifier input
};

/// Runs detection (unless `box` is supplied or detection is off), crops,
/// extracts spatiotemporal features and encodes tokens.
PipelineFeatures extract_features(const PipelineModel& model, const Tensor& clip,
                                  const StageToggles& toggles,
                                  std::optional<BoundingBox> box = std::nullopt);

/// Detector pyramid features of a clip's mean frame, flattened.
Vector detector_features(const PipelineModel& model, const Tensor& clip);

struct Prediction {
  Vector probabilities;
  int label = 0;
  PoseSequence poses;  // millimetres
  BoundingBox box;
};

Prediction predict(const PipelineModel& model, const PipelineFeatures& features);
/// Applies the model's input crop, then the full pipeline.
Prediction predict(const PipelineModel& model, const Tensor& clip, const StageToggles& toggles);

/// The input crop for a clip of the given extent (identity when unset).
AugmentParams input_crop(const PipelineModel& model, std::size_t height, std::size_t width);

struct EvalResult {
  std::size_t samples = 0;
  Scalar accuracy = 0.0;
  Scalar mpjpe = 0.0;
  Scalar pa_mpjpe = 0.0;
  Scalar mean_box_iou = 0.0;
  std::size_t degenerate_frames = 0;  // skipped by PA-MPJPE
  std::vector<int> predictions;
};

/// Accuracy, MPJPE and per-frame PA-MPJPE over the given samples. Samples are
/// processed in parallel and reduced in input order.
EvalResult evaluate(const PipelineModel& model, const StageToggles& toggles,
                    std::span<const SyntheticAction> samples, std::size_t threads = 0);

/// Runs fn(i) for i in [0, n) on a small thread pool. Each index is handled
/// by exactly one worker; callers write results into index-owned slots.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace eitnet
