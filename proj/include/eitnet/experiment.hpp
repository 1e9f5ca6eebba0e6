#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "eitnet/split.hpp"
#include "eitnet/trainer.hpp"

namespace eitnet {

struct SplitSamples {
  SplitPlan plan;
  std::vector<SyntheticAction> train;
  std::vector<SyntheticAction> test;
};

/// Partitions samples by subject or view id according to make_split.
SplitSamples split_samples(std::span<const SyntheticAction> samples, SplitAxis axis,
                           std::uint64_t seed);

struct SplitReport {
  SplitAxis axis = SplitAxis::subject;
  std::uint64_t seed = 0;
  StageToggles toggles;
  std::size_t train_groups = 0;
  std::size_t test_groups = 0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  EvalResult eval;
  TrainResult training;
};

/// Trains on the split's training groups and evaluates on the held-out ones.
SplitReport run_split(std::span<const SyntheticAction> samples, SplitAxis axis,
                      const StageToggles& toggles, const ModelConfig& model,
                      const TrainConfig& train);

/// One training run per configuration on the same split and seed. Rows
/// follow `configs`; ablation_rows() gives full, -detection, -I3D,
/// -TimeSformer.
std::vector<SplitReport> run_ablation(std::span<const SyntheticAction> samples, SplitAxis axis,
                                      std::span<const StageToggles> configs,
                                      const ModelConfig& model, const TrainConfig& train);

/// True when the first row's accuracy is at least every other row's.
bool full_pipeline_leads(std::span<const SplitReport> rows);

/// CSV "split_axis,seed,accuracy,mpjpe,pa_mpjpe,train_groups,test_groups,train_samples,test_samples".
void write_metrics_report(std::ostream& os, std::span<const SplitReport> reports,
                          std::uint64_t seed);

/// CSV "configuration,detection,i3d,timesformer,accuracy,mpjpe,pa_mpjpe,box_iou,epochs".
void write_ablation_report(std::ostream& os, std::span<const SplitReport> rows,
                           std::uint64_t seed);

}  // namespace eitnet
