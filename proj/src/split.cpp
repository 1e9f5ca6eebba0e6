#include "eitnet/split.hpp"

#include <algorithm>
#include <stdexcept>

#include "eitnet/rng.hpp"

namespace eitnet {

const char* to_string(SplitAxis axis) {
  return axis == SplitAxis::subject ? "subject" : "view";
}

SplitAxis parse_split_axis(const std::string& text) {
  if (text == "subject") return SplitAxis::subject;
  if (text == "view") return SplitAxis::view;
  throw std::invalid_argument("unknown split axis '" + text + "' (expected subject or view)");
}

bool SplitPlan::is_train(int id) const {
  return std::find(train_ids.begin(), train_ids.end(), id) != train_ids.end();
}

std::vector<int> split_universe(SplitAxis axis) {
  const int n = axis == SplitAxis::subject ? 10 : 5;
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  return ids;
}

SplitPlan make_split(SplitAxis axis, std::uint64_t seed) {
  const auto ids = split_universe(axis);
  return make_split(axis, seed, ids);
}

SplitPlan make_split(SplitAxis axis, std::uint64_t seed, std::span<const int> ids) {
  std::vector<int> shuffled(ids.begin(), ids.end());
  std::vector<int> sorted = shuffled;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != split_universe(axis)) {
    throw std::invalid_argument(std::string("make_split: ids are not the ") + to_string(axis) +
                                " universe");
  }
  SplitMix64 rng(seed);
  rng.shuffle(shuffled);
  const std::size_t train_count = axis == SplitAxis::subject ? 6 : 3;
  SplitPlan plan;
  plan.axis = axis;
  plan.seed = seed;
  plan.train_ids.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(train_count));
  plan.test_ids.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(train_count), shuffled.end());
  std::sort(plan.train_ids.begin(), plan.train_ids.end());
  std::sort(plan.test_ids.begin(), plan.test_ids.end());
  return plan;
}

}  // namespace eitnet
