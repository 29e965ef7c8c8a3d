#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ticnn/error.hpp"

namespace ticnn {

// Extent of a 4-D (batch, channel, height, width) tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t sample() const noexcept { return c * h * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

// Dense row-major (n, c, h, w) array of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }

  // Contiguous h*w plane for sample n, channel c.
  std::span<double> plane(std::size_t n, std::size_t c) noexcept {
    return std::span<double>(data_).subspan((n * shape_.c + c) * shape_.plane(), shape_.plane());
  }
  std::span<const double> plane(std::size_t n, std::size_t c) const noexcept {
    return std::span<const double>(data_).subspan((n * shape_.c + c) * shape_.plane(),
                                                   shape_.plane());
  }

  // Contiguous c*h*w block for sample n.
  std::span<double> sample(std::size_t n) noexcept {
    return std::span<double>(data_).subspan(n * shape_.sample(), shape_.sample());
  }
  std::span<const double> sample(std::size_t n) const noexcept {
    return std::span<const double>(data_).subspan(n * shape_.sample(), shape_.sample());
  }

  // Same data under a new shape of equal element count.
  Tensor reshaped(Shape s) const;

  // Copy of samples [first, first + count).
  Tensor slice_batch(std::size_t first, std::size_t count) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Stack equally shaped single-sample tensors along the batch axis.
Tensor stack_batch(std::span<const Tensor> samples);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace ticnn
