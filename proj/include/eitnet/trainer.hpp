#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "eitnet/augment.hpp"
#include "eitnet/pipeline.hpp"

namespace eitnet {

struct TrainConfig {
  Scalar base_lr = 0.001;
  Scalar lr_decay = 0.1;
  std::size_t lr_step = 10;
  std::size_t max_epochs = 50;
  std::size_t batch_size = 8;
  std::size_t patience = 5;
  Scalar val_fraction = 0.2;
  Scalar lambda = kDefaultLambda;
  bool augment = true;
  AugmentConfig augment_config{28, 28};
  std::uint64_t seed = 7;
  std::size_t threads = 0;

  void validate() const;
};

/// base * decay^floor((epoch - 1) / step), epochs counted from 1.
Scalar learning_rate(const TrainConfig& config, std::size_t epoch);

/// Tracks the best validation loss. An epoch improves only when its loss is
/// strictly below the best so far; update() returns true once `patience`
/// consecutive epochs have failed to improve.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  bool update(Scalar val_loss);
  bool improved() const { return stale_ == 0; }
  std::size_t stale_epochs() const { return stale_; }
  std::size_t best_epoch() const { return best_epoch_; }
  Scalar best_loss() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  Scalar best_ = std::numeric_limits<Scalar>::infinity();
};

class Adam {
 public:
  explicit Adam(std::size_t params, Scalar beta1 = 0.9, Scalar beta2 = 0.999, Scalar eps = 1e-8);

  void step(Vector& params, const Vector& grad, Scalar lr);
  std::size_t steps() const { return t_; }

 private:
  Vector m_, v_;
  Scalar beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  std::size_t epoch = 0;
  Scalar lr = 0.0;
  Scalar train_loss = 0.0;
  Scalar train_acc = 0.0;
  Scalar val_loss = 0.0;
  Scalar val_acc = 0.0;
};

struct TrainResult {
  PipelineModel model;  // heads restored to the best validation epoch
  std::vector<EpochRecord> history;
  Scalar initial_train_loss = 0.0;
  Scalar initial_val_loss = 0.0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
};

/// Fits batch-norm statistics and feature scalers, then trains the heads
/// with Adam on mini-batches of augmented clips. About val_fraction of the
/// samples are held out for early stopping. Downstream heads see crops at the
/// ground-truth box; the detector heads learn that box.
TrainResult train_toy(const ModelConfig& config, const StageToggles& toggles,
                      std::span<const SyntheticAction> samples, const TrainConfig& train);

/// CSV "epoch,lr,train_loss,train_acc,val_loss,val_acc".
void write_learning_curves(std::ostream& os, const TrainResult& result, std::uint64_t seed);

}  // namespace eitnet
