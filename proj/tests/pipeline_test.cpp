#include <gtest/gtest.h>

#include <cmath>

#include "eitnet/pipeline.hpp"

using namespace eitnet;

namespace {

const std::vector<SyntheticAction>& samples() {
  static const auto s = [] {
    auto all = generate_synthetic_dataset({}, 5);
    all.resize(8);
    return all;
  }();
  return s;
}

}  // namespace

TEST(StageTogglesTest, LabelsAndParsing) {
  const auto rows = ablation_rows();
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].label(), "full");
  EXPECT_EQ(rows[1].label(), "-detection");
  EXPECT_EQ(rows[2].label(), "-I3D");
  EXPECT_EQ(rows[3].label(), "-TimeSformer");
  EXPECT_EQ(StageToggles::parse("det,i3d,tsf"), StageToggles{});
  EXPECT_EQ(StageToggles::parse("i3d,tsf"), (StageToggles{false, true, true}));
  EXPECT_THROW(StageToggles::parse("det,bogus"), std::exception);
}

TEST(PipelineTest, FeatureShapes) {
  const ModelConfig config;
  const PipelineModel model = init_model(config, 1);
  const auto f = extract_features(model, samples().front().clip, {});
  EXPECT_EQ(f.crop.shape(), (Shape{1, config.frames, config.crop, config.crop}));
  EXPECT_EQ(static_cast<std::size_t>(f.features.size()), config.feature_dim());
  EXPECT_EQ(static_cast<std::size_t>(f.representation.size()), config.representation_dim());
  EXPECT_FALSE(f.fused.size() == 0);
  const Prediction p = predict(model, f);
  EXPECT_EQ(static_cast<std::size_t>(p.probabilities.size()), config.classes);
  EXPECT_NEAR(p.probabilities.sum(), 1.0, 1e-12);
  EXPECT_EQ(p.poses.size(), config.frames);
  EXPECT_EQ(static_cast<std::size_t>(p.poses.front().rows()), config.joints);
}

TEST(PipelineTest, EveryToggleCombinationRuns) {
  const PipelineModel model = init_model({}, 2);
  for (int mask = 1; mask < 8; ++mask) {
    const StageToggles t{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
    const Prediction p = predict(model, samples().front().clip, t);
    for (const auto v : p.probabilities) EXPECT_TRUE(std::isfinite(v)) << t.label();
  }
  EXPECT_THROW(predict(model, samples().front().clip, StageToggles{false, false, false}),
               std::exception);
}

TEST(PipelineTest, DetectionOffUsesFullFrame) {
  const PipelineModel model = init_model({}, 3);
  const Tensor& clip = samples().front().clip;
  const auto f = extract_features(model, clip, {false, true, true});
  EXPECT_EQ(f.box.cx, clip.dim(3) / 2.0);
  EXPECT_EQ(f.box.cy, clip.dim(2) / 2.0);
  EXPECT_EQ(f.box.w, static_cast<Scalar>(clip.dim(3)));
  EXPECT_EQ(f.box.h, static_cast<Scalar>(clip.dim(2)));
  EXPECT_EQ(f.fused.size(), 0);
}

TEST(PipelineTest, SuppliedBoxOverridesDetector) {
  const PipelineModel model = init_model({}, 4);
  const Tensor& clip = samples().front().clip;
  const BoundingBox box{16.0, 16.0, 32.0, 32.0, 1.0};
  const auto with = extract_features(model, clip, {}, box);
  const auto without = extract_features(model, clip, {false, true, true});
  EXPECT_EQ(max_abs_diff(with.crop, without.crop), 0.0);
  EXPECT_EQ(with.features, without.features);
  EXPECT_EQ(with.representation, without.representation);
}

TEST(PipelineTest, EvaluationIsThreadIndependent) {
  const PipelineModel model = init_model({}, 6);
  const auto one = evaluate(model, {}, samples(), 1);
  const auto many = evaluate(model, {}, samples(), 4);
  EXPECT_EQ(one.predictions, many.predictions);
  EXPECT_EQ(one.mpjpe, many.mpjpe);
  EXPECT_EQ(one.samples, samples().size());
}

TEST(PipelineTest, FeatureScalerStandardizes) {
  std::vector<Vector> xs;
  for (int i = 0; i < 5; ++i) {
    Vector v(2);
    v << i, 10.0 - 2.0 * i;
    xs.push_back(v);
  }
  const FeatureScaler s = FeatureScaler::fit(xs);
  Vector mean = Vector::Zero(2), sq = Vector::Zero(2);
  for (const auto& x : xs) {
    const Vector y = s.apply(x);
    mean += y;
    sq += y.cwiseAbs2();
  }
  EXPECT_NEAR(mean.norm() / 5, 0.0, 1e-12);
  // Variance floor of 1e-8 inside the scaler.
  EXPECT_NEAR(sq[0] / 5, 2.0 / (2.0 + 1e-8), 1e-12);
  EXPECT_NEAR(sq[1] / 5, 8.0 / (8.0 + 1e-8), 1e-12);
}

TEST(ParallelForTest, VisitsEveryIndexOnce) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const int h : hits) EXPECT_EQ(h, 1);
}
