#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "support.hpp"
#include "ticnn/evalgrid.hpp"
#include "ticnn/stats.hpp"

namespace ticnn {
namespace {

// Images whose constant intensity encodes the label, so the oracle below is
// correct under any translation.
Dataset label_coded(std::size_t count, std::size_t side) {
  Dataset d;
  d.num_classes = 10;
  d.images = Tensor(Shape{count, 1, side, side});
  for (std::size_t i = 0; i < count; ++i) {
    d.labels.push_back(static_cast<int>(i % 10));
    for (auto& v : d.images.sample(i)) v = static_cast<double>(i % 10) / 10.0;
  }
  return d;
}

std::vector<int> oracle(const Tensor& batch) {
  std::vector<int> out;
  for (std::size_t n = 0; n < batch.shape().n; ++n) out.push_back(static_cast<int>(std::lround(batch.sample(n)[0] * 10)));
  return out;
}

Grid make_grid(std::vector<long> dxs, std::vector<long> dys, std::vector<double> values) {
  return Grid{std::move(dxs), std::move(dys), std::move(values)};
}

TEST(Offsets, SymmetricAscendingAndAxisSelection) {
  EXPECT_EQ(axis_offsets({6, 3, GridAxes::both}, true), (std::vector<long>{-6, -3, 0, 3, 6}));
  EXPECT_EQ(axis_offsets({7, 3, GridAxes::both}, false), (std::vector<long>{-6, -3, 0, 3, 6}));
  EXPECT_EQ(axis_offsets({4, 2, GridAxes::horizontal}, false), (std::vector<long>{0}));
  EXPECT_EQ(axis_offsets({4, 2, GridAxes::vertical}, true), (std::vector<long>{0}));
  EXPECT_EQ(axis_offsets({0, 1, GridAxes::both}, true), (std::vector<long>{0}));
  EXPECT_THROW(axis_offsets({4, 0, GridAxes::both}, true), ConfigError);
  EXPECT_THROW(axis_offsets({-1, 1, GridAxes::both}, true), ConfigError);
}

TEST(EvaluateGrid, OracleClassifierScoresOneEverywhere) {
  const auto data = label_coded(30, 6);
  for (auto t : {Translator::mosaic, Translator::circular}) {
    const auto g = evaluate_grid(oracle, data, {4, 2, GridAxes::both}, t, 3);
    EXPECT_EQ(g.values.size(), 25u);
    for (double v : g.values) EXPECT_EQ(v, 1.0);
  }
}

TEST(EvaluateGrid, CenterOnlyGridEqualsPlainAccuracy) {
  const auto data = make_synthetic_digits({.count = 40, .size = 12, .seed = 2});
  ToyConfig c;
  c.input_size = 12;
  const auto model = make_model(build_toy_variant(Variant::final_gap, c), 3);
  const auto g = evaluate_grid(model_predictor(model), data, {0, 1, GridAxes::both});
  ASSERT_EQ(g.values.size(), 1u);
  EXPECT_EQ(g.values[0], evaluate_accuracy(model, data));
  EXPECT_EQ(summarize(g).mean_loss, 0.0);
}

TEST(EvaluateGrid, ResultIndependentOfWorkerCount) {
  const auto data = make_synthetic_digits({.count = 40, .size = 12, .seed = 4});
  ToyConfig c;
  c.input_size = 12;
  const auto model = make_model(build_toy_variant(Variant::base, c), 5);
  const GridSpec spec{4, 2, GridAxes::both};
  const auto one = evaluate_grid(model_predictor(model), data, spec, Translator::mosaic, 1);
  for (std::size_t w : {2u, 5u, 0u}) {
    const auto many = evaluate_grid(model_predictor(model), data, spec, Translator::mosaic, w);
    EXPECT_EQ(many.values, one.values);
  }
}

TEST(EvaluateGrid, CircularGapModelIsFlatWhereFlattenModelIsNot) {
  const auto train_set = make_synthetic_digits({.count = 300, .size = 12, .seed = 6});
  const auto test_set = make_synthetic_digits({.count = 100, .size = 12, .seed = 7});
  ToyConfig c;
  c.input_size = 12;
  c.padding = PaddingMode::circular;
  c.pooled_stages = 0;
  TrainConfig tc;
  tc.epochs = 3;
  auto gap = make_model(build_toy_variant(Variant::final_gap, c), 8);
  auto flat = make_model(build_toy_variant(Variant::base, c), 8);
  train(gap, train_set, tc);
  train(flat, train_set, tc);
  const GridSpec spec{6, 1, GridAxes::both};
  const auto g = summarize(evaluate_grid(model_predictor(gap), test_set, spec, Translator::circular));
  const auto b = summarize(evaluate_grid(model_predictor(flat), test_set, spec, Translator::circular));
  EXPECT_LE(g.std_accuracy, 1e-6);
  EXPECT_GT(b.std_accuracy, 10.0 * std::max(g.std_accuracy, 1e-6));
}

TEST(EvaluateGrid, EmptyDatasetRejected) {
  Dataset empty;
  EXPECT_THROW(evaluate_grid(oracle, empty, {1, 1, GridAxes::both}), DataError);
  EXPECT_THROW(shift_curve(oracle, empty, 3), DataError);
}

TEST(ShiftCurve, PeriodicPredictorYieldsItsPeriod) {
  // A marker pixel in column 0 travels with the shift; the predictor is right
  // only when the marker sits in a column divisible by 3.
  Dataset d;
  d.num_classes = 2;
  d.images = Tensor(Shape{4, 1, 4, 16});
  for (std::size_t n = 0; n < 4; ++n) {
    d.labels.push_back(1);
    d.images.at(n, 0, 0, 0) = 1.0;
  }
  const BatchPredictor periodic = [](const Tensor& batch) {
    std::vector<int> out;
    for (std::size_t n = 0; n < batch.shape().n; ++n) {
      std::size_t col = 0;
      while (batch.at(n, 0, 0, col) == 0.0) ++col;
      out.push_back(col % 3 == 0 ? 1 : 0);
    }
    return out;
  };
  const auto curve = shift_curve(periodic, d, 12);
  ASSERT_EQ(curve.size(), 13u);
  for (std::size_t s = 0; s < curve.size(); ++s) EXPECT_EQ(curve[s], s % 3 == 0 ? 1.0 : 0.0);
  EXPECT_EQ(detect_period(curve).period, 3u);
}

TEST(RelativeLoss, CenterZeroAndSubtraction) {
  const auto g = make_grid({-1, 0, 1}, {0}, {0.6, 0.9, 0.9});
  const auto loss = relative_loss_grid(g);
  EXPECT_EQ(loss.values[1], 0.0);
  EXPECT_NEAR(loss.values[0], 0.3, 1e-15);
  EXPECT_EQ(loss.values[2], 0.0);
  const auto flat = relative_loss_grid(make_grid({-1, 0}, {-1, 0}, {0.4, 0.4, 0.4, 0.4}));
  for (double v : flat.values) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(relative_loss_grid(make_grid({1}, {0}, {0.5})), DataError);
}

TEST(Normalize, MinMaxOverUnion) {
  const auto a = make_grid({0, 1}, {0}, {0.0, 0.5});
  auto single = normalize_grids(std::vector<Grid>{a});
  EXPECT_EQ(single.grids[0].values, (std::vector<double>{0.0, 1.0}));
  EXPECT_FALSE(single.degenerate);

  const auto twins = normalize_grids(std::vector<Grid>{a, a});
  EXPECT_EQ(twins.grids[0].values, twins.grids[1].values);

  const auto big = make_grid({0, 1}, {0}, {0.1, 1.0});
  const auto joint = normalize_grids(std::vector<Grid>{big, a});
  EXPECT_EQ(*std::max_element(joint.grids[0].values.begin(), joint.grids[0].values.end()), 1.0);
  EXPECT_LT(*std::max_element(joint.grids[1].values.begin(), joint.grids[1].values.end()), 1.0);
  EXPECT_EQ(joint.min, 0.0);
  EXPECT_EQ(joint.max, 1.0);

  const auto same = normalize_grids(std::vector<Grid>{make_grid({0}, {0}, {0.7}), make_grid({0}, {0}, {0.7})});
  EXPECT_TRUE(same.degenerate);
  EXPECT_EQ(same.grids[1].values[0], 0.0);
  EXPECT_THROW(normalize_grids(std::vector<Grid>{}), DataError);
}

TEST(Summarize, HandExamples) {
  const auto c = summarize(make_grid({-1, 0, 1}, {0}, {0.8, 0.8, 0.8}));
  EXPECT_NEAR(c.mean_accuracy, 0.8, 1e-15);
  EXPECT_NEAR(c.std_accuracy, 0.0, 1e-15);
  EXPECT_EQ(c.mean_loss, 0.0);
  EXPECT_EQ(c.std_loss, 0.0);
  const auto two = summarize(make_grid({0, 1}, {0}, {1.0, 0.8}));
  EXPECT_NEAR(two.mean_accuracy, 0.9, 1e-15);
  EXPECT_NEAR(two.std_accuracy, 0.1, 1e-15);
  EXPECT_NEAR(two.mean_loss, 0.1, 1e-15);
  EXPECT_NEAR(two.std_loss, 0.1, 1e-15);
}

TEST(Summarize, LowerMeanLossMeansMoreRobust) {
  const auto robust = summarize(make_grid({-1, 0, 1}, {0}, {0.85, 0.9, 0.88}));
  const auto fragile = summarize(make_grid({-1, 0, 1}, {0}, {0.5, 0.9, 0.6}));
  EXPECT_LT(robust.mean_loss, fragile.mean_loss);
}

TEST(DetectPeriod, CosineOracle) {
  for (std::size_t period : {2u, 3u, 4u, 5u}) {
    std::vector<double> curve;
    for (std::size_t s = 0; s < 4 * period + 1; ++s)
      curve.push_back(std::cos(2.0 * std::numbers::pi * static_cast<double>(s) / static_cast<double>(period)));
    const auto est = detect_period(curve);
    EXPECT_EQ(est.period, period);
    EXPECT_GE(est.confidence, kPeriodConfidenceFloor);
    EXPECT_LE(est.confidence, 1.0);
  }
}

TEST(DetectPeriod, NoStructureGivesNone) {
  const std::vector<double> constant(12, 0.7);
  const auto est = detect_period(constant);
  EXPECT_FALSE(est.period.has_value());
  EXPECT_EQ(est.confidence, 0.0);
  const std::vector<double> noisy_constant{0.3, 0.3 + 1e-17, 0.3, 0.3, 0.3, 0.3};
  EXPECT_FALSE(detect_period(noisy_constant).period.has_value());
  // A trend without oscillation peaks at the shortest lag.
  const std::vector<double> ramp{0, 1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(detect_period(ramp).period, 1u);
  EXPECT_THROW(detect_period(std::vector<double>{1, 2}), DataError);
}

TEST(Sweep, IdentityTransformMatchesPlainAccuracy) {
  const auto data = label_coded(20, 6);
  const std::vector<AffineParams> sweep{AffineParams{}, make_rotation(90.0), make_scale(1.0)};
  const auto acc = evaluate_sweep(oracle, data, sweep);
  EXPECT_EQ(acc, (std::vector<double>{1.0, 1.0, 1.0}));
}

}  // namespace
}  // namespace ticnn
