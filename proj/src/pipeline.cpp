#include "eitnet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "eitnet/rng.hpp"

namespace eitnet {

std::string StageToggles::label() const {
  if (detection && spatiotemporal && temporal) return "full";
  if (!detection && spatiotemporal && temporal) return "-detection";
  if (detection && !spatiotemporal && temporal) return "-I3D";
  if (detection && spatiotemporal && !temporal) return "-TimeSformer";
  std::string out;
  for (const auto& [on, name] : {std::pair{detection, "det"}, std::pair{spatiotemporal, "i3d"},
                                 std::pair{temporal, "tsf"}}) {
    if (!on) continue;
    if (!out.empty()) out += '+';
    out += name;
  }
  return out.empty() ? "none" : out;
}

StageToggles StageToggles::parse(const std::string& text) {
  StageToggles t{false, false, false};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "det") {
      t.detection = true;
    } else if (item == "i3d") {
      t.spatiotemporal = true;
    } else if (item == "tsf") {
      t.temporal = true;
    } else if (!item.empty()) {
      throw std::invalid_argument("unknown stage toggle '" + item + "' (expected det,i3d,tsf)");
    }
  }
  if (!t.any()) throw std::invalid_argument("at least one stage must be enabled");
  return t;
}

std::vector<StageToggles> ablation_rows() {
  return {{true, true, true}, {false, true, true}, {true, false, true}, {true, true, false}};
}

void ModelConfig::validate() const {
  if (in_channels == 0 || frames == 0 || classes < 2 || joints == 0) {
    throw std::invalid_argument("model config: empty input or label space");
  }
  if (i3d_channels.empty()) throw std::invalid_argument("model config: no I3D blocks");
  if (patch == 0 || crop % patch != 0) {
    throw std::invalid_argument("model config: crop " + std::to_string(crop) +
                                " not divisible by patch " + std::to_string(patch));
  }
  const std::size_t area = crop * crop;
  if (area % feature_dim() != 0) {
    throw std::invalid_argument("model config: mean-frame pass-through needs crop^2 divisible "
                                "by the feature width");
  }
  if (d_model == 0 || ffn_hidden == 0) throw std::invalid_argument("model config: zero width");
}

Vector FeatureScaler::apply(const Vector& x) const {
  if (x.size() != mean.size()) {
    throw ShapeError("FeatureScaler: input length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(mean.size()));
  }
  return ((x - mean).array() * inv_std.array()).matrix();
}

FeatureScaler FeatureScaler::identity(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return {Vector::Zero(n), Vector::Ones(n)};
}

FeatureScaler FeatureScaler::fit(std::span<const Vector> samples) {
  if (samples.empty()) throw ValueError("FeatureScaler::fit: no samples");
  const Eigen::Index d = samples.front().size();
  Vector mean = Vector::Zero(d), sq = Vector::Zero(d);
  for (const auto& s : samples) mean += s;
  mean /= static_cast<Scalar>(samples.size());
  for (const auto& s : samples) sq += (s - mean).cwiseAbs2();
  sq /= static_cast<Scalar>(samples.size());
  Vector inv = (sq.array() + 1e-8).rsqrt().matrix();
  return {mean, inv};
}

Tensor sinusoidal_positions(std::size_t count, std::size_t d) {
  Tensor pe({count, d});
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t i = 0; i < d; ++i) {
      const Scalar rate =
          std::pow(10000.0, -static_cast<Scalar>(i - i % 2) / static_cast<Scalar>(d));
      const Scalar angle = static_cast<Scalar>(p) * rate;
      pe.at(p, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

PipelineModel init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  PipelineModel m;
  m.config = config;
  DetectorConfig det = config.detector;
  det.in_channels = config.in_channels;
  m.detector = init_detector(det, derive_seed(seed, 1));
  std::size_t in = config.in_channels;
  for (std::size_t i = 0; i < config.i3d_channels.size(); ++i) {
    m.i3d.push_back(random_block(in, config.i3d_channels[i], derive_seed(seed, 10 + i)));
    in = config.i3d_channels[i];
  }
  const std::size_t patch_in = config.in_channels * config.patch * config.patch;
  m.patch_weight = Tensor({patch_in, config.d_model});
  SplitMix64 rng(derive_seed(seed, 2));
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(patch_in + config.d_model));
  for (auto& v : m.patch_weight.data()) v = rng.uniform(-bound, bound);
  m.patch_bias = Tensor({config.d_model}, 0.0);
  m.pos_enc = sinusoidal_positions(config.token_count() - 1, config.d_model);
  m.summary = LinearHead::random(config.feature_dim(), config.d_model, derive_seed(seed, 3));
  for (std::size_t b = 0; b < config.encoder_blocks; ++b) {
    m.encoder.push_back(random_encoder(config.d_model, config.ffn_hidden, derive_seed(seed, 100 + b)));
  }
  m.representation_scaler = FeatureScaler::identity(config.representation_dim());
  m.feature_scaler = FeatureScaler::identity(config.feature_dim());
  m.classifier = LinearHead::zeros(config.representation_dim(), config.classes);
  m.pose_head = LinearHead::zeros(config.feature_dim(), config.pose_dim());
  return m;
}

Tensor mean_frame(const Tensor& clip) {
  if (clip.rank() != 4) {
    throw ShapeError("mean_frame: expected [C,T,H,W], got " + to_string(clip.shape()));
  }
  const std::size_t c = clip.dim(0), t = clip.dim(1), hw = clip.dim(2) * clip.dim(3);
  Tensor out({c, clip.dim(2), clip.dim(3)}, 0.0);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t f = 0; f < t; ++f)
      for (std::size_t i = 0; i < hw; ++i) out[k * hw + i] += clip[(k * t + f) * hw + i];
  for (auto& v : out.data()) v /= static_cast<Scalar>(t);
  return out;
}

Vector mean_frame_features(const Tensor& crop, std::size_t dim) {
  const Tensor frame = mean_frame(crop);
  if (dim == 0 || frame.size() % dim != 0) {
    throw ShapeError("mean_frame_features: " + std::to_string(frame.size()) +
                     " values do not split into " + std::to_string(dim) + " runs");
  }
  const std::size_t run = frame.size() / dim;
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < frame.size(); ++i) out[static_cast<Eigen::Index>(i / run)] += frame[i];
  return out / static_cast<Scalar>(run);
}

Vector detector_features(const PipelineModel& model, const Tensor& clip) {
  return detect(model.detector, mean_frame(clip)).fused.vector();
}

PipelineFeatures extract_features(const PipelineModel& model, const Tensor& clip,
                                  const StageToggles& toggles, std::optional<BoundingBox> box) {
  const ModelConfig& cfg = model.config;
  if (clip.rank() != 4 || clip.dim(0) != cfg.in_channels || clip.dim(1) != cfg.frames) {
    throw ShapeError("pipeline: expected clip [" + std::to_string(cfg.in_channels) + "," +
                     std::to_string(cfg.frames) + ",H,W], got " + to_string(clip.shape()));
  }
  if (!toggles.any()) throw std::invalid_argument("pipeline: every stage disabled");
  PipelineFeatures f;
  const auto h = static_cast<Scalar>(clip.dim(2)), w = static_cast<Scalar>(clip.dim(3));
  if (toggles.detection) {
    const DetectorOutput det = detect(model.detector, mean_frame(clip));
    f.fused = det.fused.vector();
    f.box = box ? *box : det.kept.front();
  } else {
    f.box = {0.5 * w, 0.5 * h, w, h, 1.0, 1};
  }
  f.crop = crop_clip(clip, f.box, cfg.crop, cfg.crop);
  f.features = toggles.spatiotemporal ? i3d_forward(f.crop, model.i3d).vector()
                                      : mean_frame_features(f.crop, cfg.feature_dim());

  TokenSequence seq = prepend_summary(
      patch_embed(f.crop, cfg.patch, model.patch_weight, model.patch_bias, model.pos_enc),
      model.summary.apply(f.features));
  if (toggles.temporal) {
    for (const auto& block : model.encoder) seq = encoder_block(seq, block, cfg.attention);
  }
  const auto tokens = seq.tokens.matrix();
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto per_frame = static_cast<Eigen::Index>(cfg.grid() * cfg.grid());
  f.representation.resize(static_cast<Eigen::Index>(cfg.representation_dim()));
  f.representation.head(d) = tokens.row(0).transpose();
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(cfg.frames); ++t) {
    f.representation.segment(d * (1 + t), d) =
        tokens.middleRows(1 + t * per_frame, per_frame).colwise().mean().transpose();
  }
  return f;
}

Prediction predict(const PipelineModel& model, const PipelineFeatures& features) {
  const ModelConfig& cfg = model.config;
  Prediction p;
  p.box = features.box;
  p.probabilities =
      softmax(model.classifier.apply(model.representation_scaler.apply(features.representation)));
  Eigen::Index best = 0;
  p.probabilities.maxCoeff(&best);
  p.label = static_cast<int>(best);
  const Vector joints = model.pose_head.apply(model.feature_scaler.apply(features.features));
  const auto j = static_cast<Eigen::Index>(cfg.joints);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    SkeletonPose pose(j, 3);
    for (Eigen::Index i = 0; i < pose.size(); ++i) {
      pose.data()[i] = 1000.0 * joints[static_cast<Eigen::Index>(t) * j * 3 + i];
    }
    p.poses.push_back(std::move(pose));
  }
  return p;
}

AugmentParams input_crop(const PipelineModel& model, std::size_t height, std::size_t width) {
  if (model.input_crop_h == 0 || model.input_crop_w == 0) {
    return {0, 0, height, width, false, 0.0};
  }
  return centre_crop(height, width, model.input_crop_h, model.input_crop_w);
}

Prediction predict(const PipelineModel& model, const Tensor& clip, const StageToggles& toggles) {
  if (clip.rank() != 4) {
    throw ShapeError("predict: expected [C,T,H,W], got " + to_string(clip.shape()));
  }
  const AugmentParams crop = input_crop(model, clip.dim(2), clip.dim(3));
  return predict(model, extract_features(model, apply_augment(clip, crop), toggles));
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

EvalResult evaluate(const PipelineModel& model, const StageToggles& toggles,
                    std::span<const SyntheticAction> samples, std::size_t threads) {
  if (samples.empty()) throw ValueError("evaluate: no samples");
  std::vector<Prediction> preds(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    preds[i] = predict(model, samples[i].clip, toggles);
  });
  EvalResult r;
  r.samples = samples.size();
  std::vector<int> truth;
  Scalar mp = 0.0, pa = 0.0, iou_sum = 0.0;
  std::size_t pa_frames = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    r.predictions.push_back(preds[i].label);
    truth.push_back(samples[i].label_index());
    mp += mpjpe(preds[i].poses, samples[i].poses);
    const auto& clip = samples[i].clip;
    iou_sum += iou(preds[i].box,
                   augment_box(samples[i].box, input_crop(model, clip.dim(2), clip.dim(3))));
    for (std::size_t t = 0; t < preds[i].poses.size(); ++t) {
      try {
        pa += pa_mpjpe(preds[i].poses[t], samples[i].poses[t]);
        ++pa_frames;
      } catch (const DegenerateGeometryError&) {
        ++r.degenerate_frames;
      }
    }
  }
  const auto n = static_cast<Scalar>(samples.size());
  r.accuracy = accuracy(r.predictions, truth);
  r.mpjpe = mp / n;
  r.pa_mpjpe = pa_frames ? pa / static_cast<Scalar>(pa_frames)
                         : std::numeric_limits<Scalar>::quiet_NaN();
  r.mean_box_iou = iou_sum / n;
  return r;
}

}  // namespace eitnet
