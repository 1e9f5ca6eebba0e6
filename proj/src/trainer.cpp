#include "eitnet/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "eitnet/csv.hpp"
#include "eitnet/heads.hpp"
#include "eitnet/rng.hpp"

namespace eitnet {

void TrainConfig::validate() const {
  if (!(base_lr > 0.0) || !(lr_decay > 0.0) || lr_step == 0) {
    throw std::invalid_argument("train config: learning-rate schedule must be positive");
  }
  if (max_epochs == 0 || batch_size == 0 || patience == 0) {
    throw std::invalid_argument("train config: epochs, batch size and patience must be >= 1");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("train config: val_fraction must be in (0, 1)");
  }
  if (lambda < 0.0) throw std::invalid_argument("train config: lambda must be nonnegative");
}

Scalar learning_rate(const TrainConfig& config, std::size_t epoch) {
  if (epoch == 0) throw std::invalid_argument("learning_rate: epochs are counted from 1");
  return config.base_lr *
         std::pow(config.lr_decay, static_cast<Scalar>((epoch - 1) / config.lr_step));
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience == 0) throw std::invalid_argument("EarlyStopping: patience must be >= 1");
}

bool EarlyStopping::update(Scalar val_loss) {
  ++epoch_;
  if (val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

Adam::Adam(std::size_t params, Scalar beta1, Scalar beta2, Scalar eps)
    : m_(Vector::Zero(static_cast<Eigen::Index>(params))),
      v_(Vector::Zero(static_cast<Eigen::Index>(params))),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(Vector& params, const Vector& grad, Scalar lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ShapeError("Adam: parameter count changed");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const Scalar c1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
  const Scalar c2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

namespace {

struct Example {
  Vector representation;
  Vector features;
  Vector fused;
  BoundingBox box;
  Scalar frame_h = 0.0, frame_w = 0.0;
  int label = 0;
  Vector pose;  // metres, [T*J*3]
};

struct Heads {
  LinearHead classifier, pose, box, score;
};

Heads heads_of(const PipelineModel& m) {
  return {m.classifier, m.pose_head, m.detector.box_head, m.detector.score_head};
}

void install(PipelineModel& m, const Heads& h) {
  m.classifier = h.classifier;
  m.pose_head = h.pose;
  m.detector.box_head = h.box;
  m.detector.score_head = h.score;
}

Vector pose_target(const PoseSequence& poses) {
  Vector v(static_cast<Eigen::Index>(poses.size() * poses.front().size()));
  Eigen::Index k = 0;
  for (const auto& p : poses)
    for (Eigen::Index i = 0; i < p.size(); ++i) v[k++] = p.data()[i] / 1000.0;
  return v;
}

BoundingBox moved_box(const SyntheticAction& sample, const AugmentParams& aug) {
  if (sample.keypoints.empty()) return augment_box(sample.box, aug);
  std::vector<Point2> pts;
  pts.reserve(sample.keypoints.size());
  for (const auto& p : sample.keypoints) pts.push_back(augment_point(p, aug));
  return points_box(pts, sample.box_pad, static_cast<Scalar>(aug.crop_h),
                    static_cast<Scalar>(aug.crop_w));
}

Example make_example(const PipelineModel& model, const StageToggles& toggles,
                     const SyntheticAction& sample, const AugmentParams* aug) {
  AugmentParams params = input_crop(model, sample.clip.dim(2), sample.clip.dim(3));
  if (aug) {
    const BoundingBox moved = moved_box(sample, *aug);
    if (moved.w >= 1.0 && moved.h >= 1.0) params = *aug;
  }
  const Tensor clip = apply_augment(sample.clip, params);
  const BoundingBox box = moved_box(sample, params);
  const PipelineFeatures f = extract_features(model, clip, toggles, box);
  return {f.representation,
          f.features,
          f.fused,
          box,
          static_cast<Scalar>(clip.dim(2)),
          static_cast<Scalar>(clip.dim(3)),
          sample.label_index(),
          pose_target(sample.poses)};
}

struct Evaluation {
  Scalar loss = 0.0;
  bool correct = false;
  Vector g_cls, g_pose, g_box, g_score;
};

Evaluation evaluate_example(const PipelineModel& model, const Heads& h,
                            const StageToggles& toggles, const Example& ex, Scalar lambda) {
  Evaluation e;
  const Vector rep = model.representation_scaler.apply(ex.representation);
  const HeadLoss cls = softmax_cross_entropy(h.classifier, rep, ex.label);
  Eigen::Index best = 0;
  h.classifier.apply(rep).maxCoeff(&best);
  e.correct = best == ex.label;
  const HeadLoss pose = mean_squared_error(h.pose, model.feature_scaler.apply(ex.features), ex.pose);
  e.loss = cls.loss + pose.loss;
  e.g_cls = cls.grad;
  e.g_pose = pose.grad;
  if (toggles.detection) {
    const auto anchors = make_anchors(model.detector.config, static_cast<std::size_t>(ex.frame_h),
                                      static_cast<std::size_t>(ex.frame_w));
    const std::size_t a = matched_anchor(anchors, ex.box);
    const HeadLoss reg =
        anchor_box_loss(h.box, ex.fused, anchors, a, ex.box, ex.frame_h, ex.frame_w, lambda);
    const HeadLoss score = anchor_score_loss(h.score, ex.fused, anchors.size(), a);
    e.loss += reg.loss + score.loss;
    e.g_box = reg.grad;
    e.g_score = score.grad;
  }
  return e;
}

void check_finite(Scalar loss, std::size_t epoch, std::size_t sample, const char* phase) {
  if (!std::isfinite(loss)) {
    throw TrainingDivergedError(std::string("non-finite ") + phase + " loss at epoch " +
                                std::to_string(epoch) + ", sample " + std::to_string(sample));
  }
}

struct Summary {
  Scalar loss = 0.0;
  Scalar acc = 0.0;
};

Summary summarize(const PipelineModel& model, const Heads& h, const StageToggles& toggles,
                  const std::vector<Example>& set, Scalar lambda, std::size_t epoch,
                  const char* phase) {
  Summary s;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Evaluation e = evaluate_example(model, h, toggles, set[i], lambda);
    check_finite(e.loss, epoch, i, phase);
    s.loss += e.loss;
    correct += e.correct;
  }
  s.loss /= static_cast<Scalar>(set.size());
  s.acc = 100.0 * static_cast<Scalar>(correct) / static_cast<Scalar>(set.size());
  return s;
}

Scalar logit(Scalar p) {
  p = std::clamp(p, 0.01, 0.99);
  return std::log(p / (1.0 - p));
}

// Output biases start at the training-set mean target: mean pose for the
// pose head, the mean box (as a sigmoid fraction of each anchor) for the box
// head, and log class frequencies for the classifier.
void init_head_priors(const PipelineModel& model, const StageToggles& toggles,
                      const std::vector<Example>& fit, Heads& h) {
  const auto n = static_cast<Scalar>(fit.size());
  Vector pose = Vector::Zero(h.pose.bias.size());
  Vector freq = Vector::Constant(h.classifier.bias.size(), 1e-3);
  std::array<Scalar, 4> box{};
  for (const auto& e : fit) {
    pose += e.pose;
    freq[e.label] += 1.0;
    const auto c = e.box.coords();
    const std::array<Scalar, 4> extent{e.frame_w, e.frame_h, e.frame_w, e.frame_h};
    for (int k = 0; k < 4; ++k) box[static_cast<std::size_t>(k)] += c[k] / extent[k] / n;
  }
  h.pose.bias = pose / n;
  h.classifier.bias = (freq / freq.sum()).array().log().matrix();
  if (toggles.detection) {
    const auto anchors = make_anchors(model.detector.config, 1, 1);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const auto ac = anchors[a].coords();
      for (int k = 0; k < 4; ++k) {
        h.box.bias[static_cast<Eigen::Index>(4 * a) + k] =
            logit(box[static_cast<std::size_t>(k)] / ac[k]);
      }
    }
  }
}

struct HeadOptimizer {
  LinearHead* head;
  Adam adam;
  Vector grad;
};

}  // namespace

TrainResult train_toy(const ModelConfig& config, const StageToggles& toggles,
                      std::span<const SyntheticAction> samples, const TrainConfig& train) {
  train.validate();
  if (!toggles.any()) throw std::invalid_argument("train_toy: every stage disabled");
  if (samples.size() < 2) throw ValueError("train_toy: need at least 2 samples");

  TrainResult result;
  PipelineModel model = init_model(config, derive_seed(train.seed, 0));
  if (train.augment) {
    model.input_crop_h = train.augment_config.crop_h;
    model.input_crop_w = train.augment_config.crop_w;
  }

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 split_rng(derive_seed(train.seed, 1));
  split_rng.shuffle(order);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train.val_fraction * static_cast<Scalar>(samples.size()))),
      1, samples.size() - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(fit_idx.begin(), fit_idx.end());
  result.train_samples = fit_idx.size();
  result.val_samples = val_idx.size();

  if (toggles.spatiotemporal) {
    std::vector<Tensor> crops(fit_idx.size());
    parallel_for(fit_idx.size(), train.threads, [&](std::size_t i) {
      const auto& s = samples[fit_idx[i]];
      const AugmentParams p = input_crop(model, s.clip.dim(2), s.clip.dim(3));
      crops[i] = crop_clip(apply_augment(s.clip, p), moved_box(s, p), config.crop, config.crop);
    });
    fit_batch_norm(model.i3d, crops);
  }

  const auto build = [&](const std::vector<std::size_t>& idx, std::size_t epoch, bool augmented) {
    std::vector<Example> set(idx.size());
    parallel_for(idx.size(), train.threads, [&](std::size_t i) {
      const auto& s = samples[idx[i]];
      if (augmented) {
        const AugmentParams p = sample_augment(train.augment_config, s.clip.dim(2), s.clip.dim(3),
                                               derive_seed(derive_seed(train.seed, 2 + epoch), idx[i]));
        set[i] = make_example(model, toggles, s, &p);
      } else {
        set[i] = make_example(model, toggles, s, nullptr);
      }
    });
    return set;
  };

  const std::vector<Example> plain_fit = build(fit_idx, 0, false);
  const std::vector<Example> val = build(val_idx, 0, false);
  {
    std::vector<Vector> reps, feats;
    for (const auto& e : plain_fit) {
      reps.push_back(e.representation);
      feats.push_back(e.features);
    }
    model.representation_scaler = FeatureScaler::fit(reps);
    model.feature_scaler = FeatureScaler::fit(feats);
  }

  Heads heads = heads_of(model);
  init_head_priors(model, toggles, plain_fit, heads);
  result.initial_train_loss =
      summarize(model, heads, toggles, plain_fit, train.lambda, 0, "initial train").loss;
  result.initial_val_loss =
      summarize(model, heads, toggles, val, train.lambda, 0, "initial validation").loss;

  std::vector<HeadOptimizer> opt;
  opt.push_back({&heads.classifier, Adam(heads.classifier.parameter_count()), {}});
  opt.push_back({&heads.pose, Adam(heads.pose.parameter_count()), {}});
  if (toggles.detection) {
    opt.push_back({&heads.box, Adam(heads.box.parameter_count()), {}});
    opt.push_back({&heads.score, Adam(heads.score.parameter_count()), {}});
  }

  EarlyStopping stopper(train.patience);
  Heads best = heads;
  for (std::size_t epoch = 1; epoch <= train.max_epochs; ++epoch) {
    const Scalar lr = learning_rate(train, epoch);
    const std::vector<Example> fit =
        train.augment ? build(fit_idx, epoch, true) : plain_fit;
    std::vector<std::size_t> perm(fit.size());
    std::iota(perm.begin(), perm.end(), 0);
    SplitMix64 shuffle_rng(derive_seed(train.seed, 10'000 + epoch));
    shuffle_rng.shuffle(perm);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < perm.size(); start += train.batch_size) {
      const std::size_t end = std::min(perm.size(), start + train.batch_size);
      for (auto& o : opt) o.grad = Vector::Zero(o.head->weight.size() + o.head->bias.size());
      for (std::size_t b = start; b < end; ++b) {
        const Evaluation e = evaluate_example(model, heads, toggles, fit[perm[b]], train.lambda);
        check_finite(e.loss, epoch, perm[b], "training");
        rec.train_loss += e.loss;
        correct += e.correct;
        opt[0].grad += e.g_cls;
        opt[1].grad += e.g_pose;
        if (toggles.detection) {
          opt[2].grad += e.g_box;
          opt[3].grad += e.g_score;
        }
      }
      const auto count = static_cast<Scalar>(end - start);
      for (auto& o : opt) {
        Vector params = o.head->flatten();
        o.adam.step(params, o.grad / count, lr);
        o.head->assign(params);
      }
    }
    rec.train_loss /= static_cast<Scalar>(fit.size());
    rec.train_acc = 100.0 * static_cast<Scalar>(correct) / static_cast<Scalar>(fit.size());
    const Summary v = summarize(model, heads, toggles, val, train.lambda, epoch, "validation");
    rec.val_loss = v.loss;
    rec.val_acc = v.acc;
    result.history.push_back(rec);

    const bool stop = stopper.update(v.loss);
    if (stopper.improved()) best = heads;
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  install(model, best);
  result.model = std::move(model);
  return result;
}

void write_learning_curves(std::ostream& os, const TrainResult& result, std::uint64_t seed) {
  CsvWriter csv(os, seed, {"epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc"},
                "best_epoch=" + std::to_string(result.best_epoch));
  for (const auto& r : result.history) {
    csv.row({format_number(static_cast<std::uint64_t>(r.epoch)), format_number(r.lr),
             format_number(r.train_loss), format_number(r.train_acc), format_number(r.val_loss),
             format_number(r.val_acc)});
  }
}

}  // namespace eitnet
