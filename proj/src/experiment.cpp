#include "eitnet/experiment.hpp"

#include <ostream>
#include <stdexcept>

#include "eitnet/csv.hpp"

namespace eitnet {

SplitSamples split_samples(std::span<const SyntheticAction> samples, SplitAxis axis,
                           std::uint64_t seed) {
  SplitSamples out;
  out.plan = make_split(axis, seed);
  for (const auto& s : samples) {
    const int id = axis == SplitAxis::subject ? s.subject_id : s.view_id;
    (out.plan.is_train(id) ? out.train : out.test).push_back(s);
  }
  if (out.train.empty() || out.test.empty()) {
    throw ValueError("split leaves an empty train or test set");
  }
  return out;
}

SplitReport run_split(std::span<const SyntheticAction> samples, SplitAxis axis,
                      const StageToggles& toggles, const ModelConfig& model,
                      const TrainConfig& train) {
  const SplitSamples split = split_samples(samples, axis, train.seed);
  SplitReport r;
  r.axis = axis;
  r.seed = train.seed;
  r.toggles = toggles;
  r.train_groups = split.plan.train_ids.size();
  r.test_groups = split.plan.test_ids.size();
  r.train_samples = split.train.size();
  r.test_samples = split.test.size();
  r.training = train_toy(model, toggles, split.train, train);
  r.eval = evaluate(r.training.model, toggles, split.test, train.threads);
  return r;
}

std::vector<SplitReport> run_ablation(std::span<const SyntheticAction> samples, SplitAxis axis,
                                      std::span<const StageToggles> configs,
                                      const ModelConfig& model, const TrainConfig& train) {
  if (configs.empty()) throw std::invalid_argument("run_ablation: no configurations");
  for (const auto& c : configs) {
    if (!c.any()) throw std::invalid_argument("run_ablation: configuration with every stage off");
  }
  std::vector<SplitReport> rows;
  for (const auto& c : configs) rows.push_back(run_split(samples, axis, c, model, train));
  return rows;
}

bool full_pipeline_leads(std::span<const SplitReport> rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].eval.accuracy > rows.front().eval.accuracy) return false;
  }
  return true;
}

void write_metrics_report(std::ostream& os, std::span<const SplitReport> reports,
                          std::uint64_t seed) {
  CsvWriter csv(os, seed,
                {"split_axis", "seed", "accuracy", "mpjpe", "pa_mpjpe", "train_groups",
                 "test_groups", "train_samples", "test_samples"});
  for (const auto& r : reports) {
    csv.row({to_string(r.axis), format_number(r.seed), format_number(r.eval.accuracy),
             format_number(r.eval.mpjpe), format_number(r.eval.pa_mpjpe),
             format_number(static_cast<std::uint64_t>(r.train_groups)),
             format_number(static_cast<std::uint64_t>(r.test_groups)),
             format_number(static_cast<std::uint64_t>(r.train_samples)),
             format_number(static_cast<std::uint64_t>(r.test_samples))});
  }
}

void write_ablation_report(std::ostream& os, std::span<const SplitReport> rows,
                           std::uint64_t seed) {
  CsvWriter csv(os, seed,
                {"configuration", "detection", "i3d", "timesformer", "accuracy", "mpjpe",
                 "pa_mpjpe", "box_iou", "epochs"},
                rows.empty() ? "" : std::string("split_axis=") + to_string(rows.front().axis));
  const auto flag = [](bool on) { return std::string(on ? "on" : "off"); };
  for (const auto& r : rows) {
    csv.row({r.toggles.label(), flag(r.toggles.detection), flag(r.toggles.spatiotemporal),
             flag(r.toggles.temporal), format_number(r.eval.accuracy), format_number(r.eval.mpjpe),
             format_number(r.eval.pa_mpjpe), format_number(r.eval.mean_box_iou),
             format_number(static_cast<std::uint64_t>(r.training.history.size()))});
  }
}

}  // namespace eitnet
