#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "eitnet/dataset.hpp"
#include "eitnet/split.hpp"

using namespace eitnet;

namespace {

const std::vector<SyntheticAction>& dataset() {
  static const auto samples = generate_synthetic_dataset({}, 7);
  return samples;
}

// Pose trajectory relative to the first frame's pelvis, flattened.
Eigen::VectorXd trajectory(const SyntheticAction& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.poses.size() * kJointCount * 3));
  const Eigen::RowVector3d origin = a.poses.front().row(0);
  Eigen::Index k = 0;
  for (const auto& p : a.poses) {
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
      for (int c = 0; c < 3; ++c) v[k++] = p(j, c) - origin[c];
    }
  }
  return v;
}

}  // namespace

TEST(SyntheticDatasetTest, CountsAndBalance) {
  const auto& d = dataset();
  ASSERT_EQ(d.size(), 400u);
  std::map<int, int> labels, subjects, views;
  for (const auto& a : d) {
    ++labels[a.label_index()];
    ++subjects[a.subject_id];
    ++views[a.view_id];
    EXPECT_EQ(a.clip.shape(), (Shape{1, 8, 32, 32}));
    EXPECT_EQ(a.poses.size(), a.clip.dim(1));
    EXPECT_TRUE(all_finite(a.clip));
    EXPECT_GT(a.box.w, 4.0);
    EXPECT_LE(a.box.right(), 32.0);
    EXPECT_GE(a.box.left(), 0.0);
  }
  for (int c = 0; c < 4; ++c) EXPECT_EQ(labels[c], 100);
  for (int s = 1; s <= 10; ++s) EXPECT_EQ(subjects[s], 40);
  for (int v = 1; v <= 5; ++v) EXPECT_EQ(views[v], 80);
}

TEST(SyntheticDatasetTest, SeedDeterminism) {
  SyntheticConfig small;
  small.repetitions = 1;
  const auto a = generate_synthetic_dataset(small, 3);
  const auto b = generate_synthetic_dataset(small, 3);
  const auto c = generate_synthetic_dataset(small, 4);
  ASSERT_EQ(a.size(), 200u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].clip, b[i].clip);
    EXPECT_EQ(a[i].poses, b[i].poses);
  }
  EXPECT_NE(a[0].clip, c[0].clip);
}

TEST(SyntheticDatasetTest, InvalidConfig) {
  SyntheticConfig bad;
  bad.classes = 3;
  EXPECT_THROW(generate_synthetic_dataset(bad, 1), std::invalid_argument);
  bad = {};
  bad.views = 4;
  EXPECT_THROW(generate_synthetic_dataset(bad, 1), std::invalid_argument);
}

TEST(SyntheticDatasetTest, ClassesAreSeparableByNearestCentroid) {
  const auto& d = dataset();
  for (auto axis : {SplitAxis::subject, SplitAxis::view}) {
    const auto plan = make_split(axis, 7);
    std::vector<Eigen::VectorXd> centroid(4);
    std::vector<int> count(4, 0);
    for (const auto& a : d) {
      if (!plan.is_train(axis == SplitAxis::subject ? a.subject_id : a.view_id)) continue;
      const auto v = trajectory(a);
      auto& c = centroid[static_cast<std::size_t>(a.label_index())];
      if (c.size() == 0) c = Eigen::VectorXd::Zero(v.size());
      c += v;
      ++count[static_cast<std::size_t>(a.label_index())];
    }
    for (std::size_t c = 0; c < 4; ++c) centroid[c] /= count[c];
    std::vector<int> pred, truth;
    for (const auto& a : d) {
      if (plan.is_train(axis == SplitAxis::subject ? a.subject_id : a.view_id)) continue;
      const auto v = trajectory(a);
      int best = 0;
      for (int c = 1; c < 4; ++c) {
        if ((v - centroid[static_cast<std::size_t>(c)]).squaredNorm() <
            (v - centroid[static_cast<std::size_t>(best)]).squaredNorm()) {
          best = c;
        }
      }
      pred.push_back(best);
      truth.push_back(a.label_index());
    }
    EXPECT_GT(accuracy(pred, truth), 90.0) << to_string(axis);
  }
}

TEST(SyntheticDatasetTest, BoxCoversRenderedPerson) {
  const auto& a = dataset()[5];
  Scalar inside = 0.0, total = 0.0;
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t x = 0; x < 32; ++x) {
        const Scalar v = std::max(0.0, a.clip.at(0, t, y, x) - 0.2);
        total += v;
        if (x + 0.5 >= a.box.left() && x + 0.5 <= a.box.right() && y + 0.5 >= a.box.top() &&
            y + 0.5 <= a.box.bottom()) {
          inside += v;
        }
      }
    }
  }
  EXPECT_GT(inside / total, 0.9);
}

TEST(SyntheticDatasetTest, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "eitnet_dataset_test";
  std::filesystem::remove_all(dir);
  std::vector<SyntheticAction> few(dataset().begin(), dataset().begin() + 6);
  save_dataset(dir.string(), few, 7);
  const auto back = load_dataset(dir.string(), {});
  ASSERT_EQ(back.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(back[i].clip, few[i].clip);
    EXPECT_EQ(back[i].poses, few[i].poses);
    EXPECT_EQ(back[i].label, few[i].label);
    EXPECT_EQ(back[i].subject_id, few[i].subject_id);
    EXPECT_EQ(back[i].box, few[i].box);
  }
  std::filesystem::remove_all(dir);
}
