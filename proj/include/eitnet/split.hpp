#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eitnet {

enum class SplitAxis { subject, view };

const char* to_string(SplitAxis axis);
SplitAxis parse_split_axis(const std::string& text);

/// Held-out evaluation protocol: 10 subjects split 6 train / 4 test, or
/// 5 camera views split 3 train / 2 test.
struct SplitPlan {
  std::vector<int> train_ids;
  std::vector<int> test_ids;
  SplitAxis axis = SplitAxis::subject;
  std::uint64_t seed = 0;

  bool is_train(int id) const;
};

/// Id universe for the axis: subjects 1..10, views 1..5.
std::vector<int> split_universe(SplitAxis axis);

/// Seeded Fisher-Yates shuffle of the id universe, then a prefix split.
/// Both id lists come back sorted.
SplitPlan make_split(SplitAxis axis, std::uint64_t seed);
/// As above over caller-supplied ids, which must be exactly the universe.
SplitPlan make_split(SplitAxis axis, std::uint64_t seed, std::span<const int> ids);

}  // namespace eitnet
