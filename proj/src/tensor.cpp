#include "ticnn/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace ticnn {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) +
         ", " + std::to_string(s.w) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw DimensionError("data", "length " + std::to_string(data_.size()) +
                                     " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape s) const {
  if (s.size() != shape_.size()) {
    throw DimensionError("shape", "cannot reshape " + to_string(shape_) + " to " + to_string(s));
  }
  return Tensor(s, data_);
}

Tensor Tensor::slice_batch(std::size_t first, std::size_t count) const {
  if (first + count > shape_.n) {
    throw DimensionError("n", "batch slice [" + std::to_string(first) + ", " +
                                  std::to_string(first + count) + ") exceeds " +
                                  std::to_string(shape_.n));
  }
  const auto stride = shape_.sample();
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                          data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return Tensor({count, shape_.c, shape_.h, shape_.w}, std::move(out));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor stack_batch(std::span<const Tensor> samples) {
  if (samples.empty()) return {};
  const Shape first = samples.front().shape();
  std::vector<double> data;
  data.reserve(first.sample() * samples.size());
  for (const auto& s : samples) {
    const Shape sh = s.shape();
    if (sh.c != first.c || sh.h != first.h || sh.w != first.w) {
      throw DimensionError("sample", "cannot stack " + to_string(sh) + " with " + to_string(first));
    }
    data.insert(data.end(), s.values().begin(), s.values().end());
  }
  std::size_t n = 0;
  for (const auto& s : samples) n += s.shape().n;
  return Tensor({n, first.c, first.h, first.w}, std::move(data));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("shape", to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ticnn
