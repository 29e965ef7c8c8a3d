#include <gtest/gtest.h>

#include "support.hpp"
#include "ticnn/tensor.hpp"

namespace ticnn {
namespace {

TEST(Shape, SizesAndFormatting) {
  const Shape s{2, 3, 4, 5};
  EXPECT_EQ(s.size(), 120u);
  EXPECT_EQ(s.plane(), 20u);
  EXPECT_EQ(s.sample(), 60u);
  EXPECT_EQ(to_string(s), "(2, 3, 4, 5)");
}

TEST(Tensor, RowMajorIndexing) {
  Tensor t(Shape{2, 2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t.at(1, 0, 2, 3), ((1 * 2 + 0) * 3 + 2) * 4 + 3);
  EXPECT_EQ(t.plane(1, 1)[0], t.at(1, 1, 0, 0));
  EXPECT_EQ(t.sample(1).size(), 24u);
  EXPECT_EQ(t.sample(1)[0], 24.0);
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor(Shape{1, 1, 2, 2}, std::vector<double>(3)), DimensionError);
  EXPECT_NO_THROW(Tensor(Shape{1, 1, 2, 2}, std::vector<double>(4)));
}

TEST(Tensor, ReshapeKeepsDataAndChecksCount) {
  Tensor t(Shape{1, 2, 2, 2}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  const auto r = t.reshaped(Shape{1, 8, 1, 1});
  EXPECT_EQ(r.values(), t.values());
  EXPECT_THROW(t.reshaped(Shape{1, 3, 3, 1}), DimensionError);
}

TEST(Tensor, SliceAndStackAreInverse) {
  Rng rng(1);
  const auto t = testing::random_tensor(Shape{4, 2, 3, 3}, rng);
  std::vector<Tensor> parts;
  for (std::size_t i = 0; i < 4; ++i) parts.push_back(t.slice_batch(i, 1));
  EXPECT_EQ(stack_batch(parts), t);
  EXPECT_THROW(t.slice_batch(3, 2), DimensionError);
  parts.push_back(Tensor(Shape{1, 1, 3, 3}));
  EXPECT_THROW(stack_batch(parts), DimensionError);
}

TEST(Tensor, MaxAbsDiffAndFiniteness) {
  Tensor a(Shape{1, 1, 1, 3}, std::vector<double>{1, 2, 3});
  Tensor b(Shape{1, 1, 1, 3}, std::vector<double>{1, 2.5, 2});
  EXPECT_DOUBLE_EQ(max_abs_diff(a, b), 1.0);
  EXPECT_THROW(max_abs_diff(a, Tensor(Shape{1, 1, 3, 1})), DimensionError);
  EXPECT_TRUE(a.all_finite());
  a[1] = std::nan("");
  EXPECT_FALSE(a.all_finite());
}

}  // namespace
}  // namespace ticnn
