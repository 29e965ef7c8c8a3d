#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "support.hpp"
#include "ticnn/model.hpp"
#include "ticnn/transforms.hpp"

namespace ticnn {
namespace {

using testing::check_gradient;
using testing::kFdTolerance;
using testing::random_tensor;

constexpr Variant kVariants[] = {Variant::base, Variant::multi, Variant::final_gap, Variant::flat};

// One dense layer reading the 1 x side x side image directly.
ArchitectureSpec dense_only(std::size_t side, std::size_t classes) {
  ArchitectureSpec spec;
  spec.input_size = side;
  spec.num_classes = classes;
  LayerSpec fc;
  fc.name = "fc";
  fc.kind = LayerKind::dense;
  fc.units = classes;
  fc.inputs = {kNetworkInput};
  spec.layers.push_back(fc);
  validate(spec);
  return spec;
}

ToyConfig small_toy(PaddingMode padding) {
  ToyConfig c;
  c.channels = {3, 4};
  c.input_size = 8;
  c.num_classes = 3;
  c.padding = padding;
  return c;
}

// Two Gaussian blobs on 1x2x2 images, one per class.
Dataset blobs(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.num_classes = 2;
  d.images = Tensor(Shape{count, 1, 2, 2});
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 2);
    d.labels.push_back(label);
    for (std::size_t p = 0; p < 4; ++p) {
      const double centre = (label == 0) == (p < 2) ? 1.0 : -1.0;
      d.images[i * 4 + p] = centre + 0.3 * rng.normal();
    }
  }
  return d;
}

TEST(Forward, DenseIdentityReturnsFlattenedInput) {
  auto model = make_model(dense_only(2, 4), 1);
  auto& w = model.params.get(weight_name(model.spec.layers[0])).value;
  for (auto& v : w.data()) v = 0.0;
  for (std::size_t i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
  Rng rng(2);
  const auto x = random_tensor(Shape{3, 1, 2, 2}, rng);
  EXPECT_EQ(logits(model, x).values(), x.values());
}

TEST(Forward, ZeroParametersGiveZeroLogits) {
  for (Variant v : kVariants) {
    auto model = make_model(build_toy_variant(v, small_toy(PaddingMode::zero)), 3);
    for (auto& e : model.params.entries())
      for (auto& x : e.value.data()) x = 0.0;
    Rng rng(4);
    const auto out = logits(model, random_tensor(Shape{2, 1, 8, 8}, rng));
    for (double x : out.values()) EXPECT_EQ(x, 0.0);
  }
}

TEST(Forward, DeterministicAcrossRuns) {
  const auto spec = build_toy_variant(Variant::base, small_toy(PaddingMode::zero));
  Rng rng(5);
  const auto x = random_tensor(Shape{4, 1, 8, 8}, rng);
  EXPECT_EQ(logits(make_model(spec, 9), x), logits(make_model(spec, 9), x));
  EXPECT_EQ(make_model(spec, 9).params, make_model(spec, 9).params);
  EXPECT_FALSE(make_model(spec, 9).params == make_model(spec, 10).params);
}

TEST(Forward, RejectsWrongInputShape) {
  const auto model = make_model(build_toy_variant(Variant::final_gap, small_toy(PaddingMode::zero)), 1);
  EXPECT_THROW(forward(model, Tensor(Shape{1, 1, 9, 8})), DimensionError);
  EXPECT_THROW(forward(model, Tensor(Shape{1, 2, 8, 8})), DimensionError);
}

TEST(Forward, CircularGapModelIsExactlyShiftInvariant) {
  auto c = small_toy(PaddingMode::circular);
  c.pooled_stages = 0;
  const auto model = make_model(build_toy_variant(Variant::final_gap, c), 6);
  Rng rng(7);
  const auto x = random_tensor(Shape{1, 1, 8, 8}, rng);
  const auto ref = logits(model, x);
  for (long dy = 0; dy < 8; ++dy)
    for (long dx = 0; dx < 8; ++dx) EXPECT_LE(max_abs_diff(logits(model, circular_shift(x, dx, dy)), ref), 1e-12);
}

TEST(Forward, PooledCircularGapModelIsInvariantToStrideMultiples) {
  for (Variant v : {Variant::multi, Variant::final_gap}) {
    const auto model = make_model(build_toy_variant(v, small_toy(PaddingMode::circular)), 8);
    Rng rng(9);
    const auto x = random_tensor(Shape{1, 1, 8, 8}, rng);
    const auto ref = logits(model, x);
    EXPECT_LE(max_abs_diff(logits(model, circular_shift(x, 4, 0)), ref), 1e-12);
    EXPECT_LE(max_abs_diff(logits(model, circular_shift(x, 0, 4)), ref), 1e-12);
  }
}

TEST(Forward, BaseModelIsShiftSensitive) {
  const auto model = make_model(build_toy_variant(Variant::base, small_toy(PaddingMode::circular)), 8);
  Rng rng(10);
  const auto x = random_tensor(Shape{1, 1, 8, 8}, rng);
  EXPECT_GT(max_abs_diff(logits(model, circular_shift(x, 4, 0)), logits(model, x)), 1e-6);
}

TEST(CrossEntropy, AnalyticValues) {
  const std::vector<int> zero{0};
  EXPECT_NEAR(cross_entropy(Tensor(Shape{1, 2, 1, 1}, {0.0, std::log(3.0)}), zero), std::log(4.0), 1e-15);
  EXPECT_NEAR(cross_entropy(Tensor(Shape{1, 7, 1, 1}, 2.0), zero), std::log(7.0), 1e-15);
  EXPECT_LT(cross_entropy(Tensor(Shape{1, 2, 1, 1}, {800.0, 0.0}), zero), 1e-300);
}

TEST(CrossEntropy, InvariantToConstantOffset) {
  Rng rng(11);
  const auto z = random_tensor(Shape{5, 4, 1, 1}, rng, -5.0, 5.0);
  const std::vector<int> labels{0, 3, 2, 1, 3};
  for (double c : {-1000.0, -3.0, 0.5, 700.0}) {
    auto shifted = z;
    for (auto& v : shifted.data()) v += c;
    EXPECT_NEAR(cross_entropy(shifted, labels), cross_entropy(z, labels), 1e-10);
  }
}

TEST(CrossEntropy, RejectsBadLabels) {
  const Tensor z(Shape{2, 3, 1, 1});
  EXPECT_THROW(cross_entropy(z, std::vector<int>{0, 3}), DataError);
  EXPECT_THROW(cross_entropy(z, std::vector<int>{0, -1}), DataError);
  EXPECT_THROW(cross_entropy(z, std::vector<int>{0}), DimensionError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  auto z = random_tensor(Shape{4, 5, 1, 1}, rng, -3.0, 3.0);
  const std::vector<int> labels{4, 0, 2, 2};
  EXPECT_LT(check_gradient(z, [&] { return cross_entropy(z, labels); }, cross_entropy_grad(z, labels), rng),
            kFdTolerance);
}

TEST(Backward, DenseWeightGradientIsOuterProduct) {
  auto model = make_model(dense_only(2, 3), 1);
  Rng rng(13);
  const auto x = random_tensor(Shape{1, 1, 2, 2}, rng);
  const auto g = random_tensor(Shape{1, 3, 1, 1}, rng);
  backward(model, forward(model, x), g);
  const auto& gw = model.params.get(weight_name(model.spec.layers[0])).gradient;
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(gw[o * 4 + i], g[o] * x[i]);
}

// Every parameter and the input, for every head and both paddings.
TEST(Backward, FullModelMatchesFiniteDifferences) {
  Rng rng(14);
  for (Variant v : kVariants) {
    for (auto padding : {PaddingMode::zero, PaddingMode::circular}) {
      auto model = make_model(build_toy_variant(v, small_toy(padding)), 15);
      auto x = random_tensor(Shape{3, 1, 8, 8}, rng);
      const std::vector<int> labels{0, 2, 1};
      const auto loss = [&] { return cross_entropy(logits(model, x), labels); };
      const auto cache = forward(model, x);
      const auto input_grad = backward(model, cache, cross_entropy_grad(cache.logits(), labels), true);
      for (auto& e : model.params.entries()) {
        const Tensor analytic = e.gradient;
        EXPECT_LT(check_gradient(e.value, loss, analytic, rng), kFdTolerance)
            << variant_name(v) << ' ' << e.name;
      }
      EXPECT_LT(check_gradient(x, loss, input_grad, rng), kFdTolerance) << variant_name(v) << " input";
      EXPECT_DOUBLE_EQ(loss_and_gradients(model, x, labels), loss());
    }
  }
}

TEST(Backward, FrozenEntriesReceiveZeroGradient) {
  auto model = make_model(with_frozen_backbone(build_toy_variant(Variant::multi, small_toy(PaddingMode::zero))), 16);
  Rng rng(17);
  loss_and_gradients(model, random_tensor(Shape{2, 1, 8, 8}, rng), std::vector<int>{1, 2});
  for (const auto& e : model.params.entries()) {
    if (e.trainable) continue;
    for (double g : e.gradient.values()) EXPECT_EQ(g, 0.0) << e.name;
  }
}

TEST(Sgd, ZeroGradientAndFrozenEntriesAreUnchanged) {
  ParameterStore store;
  store.add("a", Tensor(Shape{1, 1, 1, 3}, {1, 2, 3}), true);
  auto& frozen = store.add("b", Tensor(Shape{1, 1, 1, 2}, {4, 5}), false);
  frozen.gradient = Tensor(Shape{1, 1, 1, 2}, {9, 9});
  const auto before = store;
  MomentumState state;
  for (int i = 0; i < 5; ++i) sgd_step(store, TrainConfig{}, state);
  EXPECT_EQ(store, before);
}

TEST(Sgd, QuadraticLossDecreasesMonotonically) {
  ParameterStore store;
  auto& w = store.add("w", Tensor(Shape{1, 1, 1, 1}, 5.0), true);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.momentum = 0.0;
  MomentumState state;
  double previous = w.value[0] * w.value[0];
  for (int step = 0; step < 100; ++step) {
    w.gradient[0] = 2.0 * w.value[0];
    sgd_step(store, cfg, state);
    const double loss = w.value[0] * w.value[0];
    ASSERT_LT(loss, previous);
    previous = loss;
  }
}

TEST(Train, SeparableBlobsReachHighAccuracy) {
  auto model = make_model(dense_only(2, 2), 1);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.05;
  const auto data = blobs(200, 18);
  const auto history = train(model, data, cfg);
  ASSERT_EQ(history.epoch_accuracy.size(), 20u);
  EXPECT_GE(evaluate_accuracy(model, data), 0.99);
}

TEST(Train, ZeroEpochsLeavesInitialization) {
  auto model = make_model(build_toy_variant(Variant::final_gap, small_toy(PaddingMode::zero)), 19);
  const auto before = model.params;
  TrainConfig cfg;
  cfg.epochs = 0;
  Dataset d;
  d.num_classes = 3;
  d.images = Tensor(Shape{2, 1, 8, 8});
  d.labels = {0, 1};
  train(model, d, cfg);
  EXPECT_EQ(model.params, before);
}

TEST(Train, SameSeedIsBitIdentical) {
  const auto data = make_synthetic_digits({.count = 64, .size = 12, .seed = 3});
  ToyConfig c = small_toy(PaddingMode::zero);
  c.input_size = 12;
  c.num_classes = 10;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = 4;
  auto a = make_model(build_toy_variant(Variant::multi, c), 20);
  auto b = make_model(build_toy_variant(Variant::multi, c), 20);
  const auto ha = train(a, data, cfg);
  const auto hb = train(b, data, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(ha.epoch_loss, hb.epoch_loss);
}

TEST(Train, FrozenBackboneIsBitIdenticalAfterTraining) {
  const auto data = make_synthetic_digits({.count = 64, .size = 12, .seed = 5});
  ToyConfig c = small_toy(PaddingMode::zero);
  c.input_size = 12;
  c.num_classes = 10;
  auto model = make_model(with_frozen_backbone(build_toy_variant(Variant::final_gap, c)), 21);
  const auto before = model.params;
  TrainConfig cfg;
  cfg.epochs = 3;
  train(model, data, cfg);
  std::size_t frozen = 0, moved = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& b = before.entries()[i];
    const auto& a = model.params.entries()[i];
    if (!b.trainable) {
      ++frozen;
      EXPECT_EQ(a.value, b.value) << a.name;
    } else {
      moved += !(a.value == b.value);
    }
  }
  EXPECT_EQ(frozen, 4u);
  EXPECT_GT(moved, 0u);
}

TEST(Train, RejectsEmptyDataAndBadConfig) {
  auto model = make_model(dense_only(2, 2), 1);
  Dataset empty;
  empty.num_classes = 2;
  EXPECT_THROW(train(model, empty, TrainConfig{}), DataError);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = TrainConfig{};
  bad.batch_size = 0;
  EXPECT_THROW(validate(bad), ConfigError);
}

TEST(Parameters, CopyMatchingByNameAndShape) {
  const auto base = make_model(build_toy_variant(Variant::base, small_toy(PaddingMode::zero)), 22);
  auto final_model = make_model(build_toy_variant(Variant::final_gap, small_toy(PaddingMode::zero)), 23);
  // Both convolutions, plus fc.bias whose shape agrees; fc.weight does not.
  EXPECT_EQ(copy_matching_parameters(base.params, final_model.params), 5u);
  EXPECT_NE(final_model.params.get("fc.weight").value.shape(), base.params.get("fc.weight").value.shape());
  EXPECT_EQ(final_model.params.get("conv1.weight").value, base.params.get("conv1.weight").value);
  EXPECT_THROW(final_model.params.get("nope"), DataError);
  EXPECT_THROW(final_model.params.add("conv1.weight", Tensor(), true), ConfigError);
}

TEST(Parameters, InitializationStaysWithinFanInBound) {
  const auto model = make_model(build_toy_variant(Variant::flat, small_toy(PaddingMode::zero)), 24);
  for (const auto& e : model.params.entries()) {
    const auto s = e.value.shape();
    if (e.name.ends_with(".bias")) {
      for (double v : e.value.values()) EXPECT_EQ(v, 0.0);
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(s.c * s.h * s.w));
    for (double v : e.value.values()) EXPECT_LE(std::abs(v), bound) << e.name;
  }
}

TEST(Predict, LowestIndexWinsTies) {
  const Tensor z(Shape{2, 3, 1, 1}, {1, 5, 5, 2, 2, 2});
  EXPECT_EQ(argmax_rows(z), (std::vector<int>{1, 0}));
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, 0}, std::vector<int>{1, 2}), 0.5);
}

}  // namespace
}  // namespace ticnn
