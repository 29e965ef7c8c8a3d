#pragma once

// Layer algebra on (n, c, h, w) tensors: forward operations and their
// vector-Jacobian products. Convolution is cross-correlation (no kernel flip).

#include <cstddef>
#include <span>
#include <vector>

#include "ticnn/tensor.hpp"

namespace ticnn {

enum class PaddingMode { zero, circular };
enum class PoolMode { max, average };

struct PoolSpec {
  std::size_t kernel = 2;
  std::size_t stride = 2;
  PoolMode mode = PoolMode::max;

  PoolSpec() = default;
  // Non-overlapping windows: stride defaults to the kernel size.
  explicit PoolSpec(std::size_t k, PoolMode m = PoolMode::max) : kernel(k), stride(k), mode(m) {}
  PoolSpec(std::size_t k, std::size_t s, PoolMode m) : kernel(k), stride(s), mode(m) {}

  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct Conv2dParams {
  std::size_t stride = 1;
  std::size_t pad = 0;
  PaddingMode mode = PaddingMode::zero;
};

// Output extent of a convolution along one axis: floor((in + 2 pad - k) / stride) + 1.
// Throws DimensionError(axis) when the result would be < 1.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                            const char* axis);
// floor((in - k) / stride) + 1; remainders are truncated.
std::size_t pool_out_extent(std::size_t in, std::size_t k, std::size_t stride, const char* axis);

// weights: (c_out, c_in, kh, kw); bias: c_out entries.
Tensor conv2d(const Tensor& input, const Tensor& weights, std::span<const double> bias,
              const Conv2dParams& p);

struct Conv2dGrads {
  Tensor input;    // empty when not requested
  Tensor weights;
  std::vector<double> bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                            const Conv2dParams& p, bool want_input_grad = true);

Tensor pool2d(const Tensor& input, const PoolSpec& spec);
// Max pooling routes the gradient to the first maximal element of each
// window in row-major order.
Tensor pool2d_backward(const Tensor& input, const Tensor& grad_out, const PoolSpec& spec);

// (n, c, h, w) -> (n, c, 1, 1), spatial mean per channel.
Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out);

// Affine map W x + b on a single vector. weights shape (d_out, d_in, 1, 1).
std::vector<double> dense(std::span<const double> x, const Tensor& weights,
                          std::span<const double> bias);

// Row-wise dense over a batch: each sample's c*h*w block is the input vector.
// Output shape (n, d_out, 1, 1).
Tensor dense(const Tensor& input, const Tensor& weights, std::span<const double> bias);

struct DenseGrads {
  Tensor input;  // empty when not requested; shaped like the forward input
  Tensor weights;
  std::vector<double> bias;
};

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          bool want_input_grad = true);

enum class Activation { relu, softmax };

// softmax normalizes each sample's c*h*w block (the class axis).
Tensor activation(const Tensor& input, Activation kind);
Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);
Tensor softmax(const Tensor& input);
Tensor softmax_backward(const Tensor& output, const Tensor& grad_out);

// (n, c, h, w) -> (n, c*h*w, 1, 1) in row-major (c, h, w) order.
Tensor flatten(const Tensor& input);

std::vector<double> concat(std::span<const std::vector<double>> parts);

// Per-sample concatenation of flattened features: parts (n, d_i, ...) -> (n, sum d_i, 1, 1).
Tensor concat_features(std::span<const Tensor> parts);
std::vector<Tensor> concat_features_backward(std::span<const Shape> part_shapes,
                                             const Tensor& grad_out);

}  // namespace ticnn
