#include "ticnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ticnn/simd/kernels.hpp"

namespace ticnn {

namespace {

using Index = std::ptrdiff_t;

Index wrap(Index i, Index n) {
  const Index r = i % n;
  return r < 0 ? r + n : r;
}

// Source index along one axis, or -1 when it falls in the zero border.
Index source_index(Index pos, Index extent, PaddingMode mode) {
  if (pos >= 0 && pos < extent) return pos;
  return mode == PaddingMode::circular ? wrap(pos, extent) : -1;
}

// Contiguous runs of output columns [ox, ox + len) reading input columns
// [ix, ix + len) for a stride-1 tap at column offset `offset`.
template <class Fn>
void for_each_run(std::size_t out_w, std::size_t in_w, Index offset, PaddingMode mode, Fn&& fn) {
  const Index ow = static_cast<Index>(out_w);
  const Index iw = static_cast<Index>(in_w);
  if (mode == PaddingMode::zero) {
    const Index lo = std::max<Index>(0, -offset);
    const Index hi = std::min<Index>(ow, iw - offset);
    if (hi > lo) fn(static_cast<std::size_t>(lo), static_cast<std::size_t>(lo + offset),
                    static_cast<std::size_t>(hi - lo));
    return;
  }
  Index ox = 0;
  Index ix = wrap(offset, iw);
  while (ox < ow) {
    const Index len = std::min(ow - ox, iw - ix);
    fn(static_cast<std::size_t>(ox), static_cast<std::size_t>(ix), static_cast<std::size_t>(len));
    ox += len;
    ix = 0;
  }
}

void check_conv_shapes(const Tensor& input, const Tensor& weights, std::size_t bias_len) {
  const Shape& in = input.shape();
  const Shape& ws = weights.shape();
  if (ws.c != in.c) {
    throw DimensionError("c_in", "weights expect " + std::to_string(ws.c) +
                                     " input channels, input has " + std::to_string(in.c));
  }
  if (bias_len != ws.n) {
    throw DimensionError("c_out", "bias has " + std::to_string(bias_len) + " entries, weights have " +
                                      std::to_string(ws.n) + " output channels");
  }
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                            const char* axis) {
  if (stride == 0) throw DimensionError(axis, "stride must be >= 1");
  if (k == 0 || in + 2 * pad < k) {
    throw DimensionError(axis, "kernel " + std::to_string(k) + " exceeds padded extent " +
                                   std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - k) / stride + 1;
}

std::size_t pool_out_extent(std::size_t in, std::size_t k, std::size_t stride, const char* axis) {
  if (k == 0 || stride == 0) throw DimensionError(axis, "pool kernel and stride must be >= 1");
  if (k > in) {
    throw DimensionError(axis, "pool kernel " + std::to_string(k) + " exceeds extent " +
                                   std::to_string(in));
  }
  return (in - k) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weights, std::span<const double> bias,
              const Conv2dParams& p) {
  check_conv_shapes(input, weights, bias.size());
  const Shape& in = input.shape();
  const Shape& ws = weights.shape();
  const std::size_t oh = conv_out_extent(in.h, ws.h, p.stride, p.pad, "h");
  const std::size_t ow = conv_out_extent(in.w, ws.w, p.stride, p.pad, "w");
  Tensor out({in.n, ws.n, oh, ow});
  const auto& k = simd::active();

  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t co = 0; co < ws.n; ++co) {
      auto dst = out.plane(n, co);
      std::fill(dst.begin(), dst.end(), bias[co]);
      for (std::size_t ci = 0; ci < in.c; ++ci) {
        const auto src = input.plane(n, ci);
        for (std::size_t ky = 0; ky < ws.h; ++ky) {
          for (std::size_t kx = 0; kx < ws.w; ++kx) {
            const double wv = weights.at(co, ci, ky, kx);
            const Index xoff = static_cast<Index>(kx) - static_cast<Index>(p.pad);
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const Index iy = source_index(
                  static_cast<Index>(oy * p.stride + ky) - static_cast<Index>(p.pad),
                  static_cast<Index>(in.h), p.mode);
              if (iy < 0) continue;
              const double* in_row = src.data() + static_cast<std::size_t>(iy) * in.w;
              double* out_row = dst.data() + oy * ow;
              if (p.stride == 1) {
                for_each_run(ow, in.w, xoff, p.mode,
                             [&](std::size_t ox, std::size_t ix, std::size_t len) {
                               k.axpy(wv, in_row + ix, out_row + ox, len);
                             });
              } else {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                  const Index ix = source_index(static_cast<Index>(ox * p.stride) + xoff,
                                                static_cast<Index>(in.w), p.mode);
                  if (ix >= 0) out_row[ox] += wv * in_row[ix];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                            const Conv2dParams& p, bool want_input_grad) {
  check_conv_shapes(input, weights, weights.shape().n);
  const Shape& in = input.shape();
  const Shape& ws = weights.shape();
  const std::size_t oh = conv_out_extent(in.h, ws.h, p.stride, p.pad, "h");
  const std::size_t ow = conv_out_extent(in.w, ws.w, p.stride, p.pad, "w");
  if (grad_out.shape() != Shape{in.n, ws.n, oh, ow}) {
    throw DimensionError("grad_out", "expected " + to_string(Shape{in.n, ws.n, oh, ow}) + ", got " +
                                         to_string(grad_out.shape()));
  }
  Conv2dGrads g;
  g.weights = Tensor(ws);
  g.bias.assign(ws.n, 0.0);
  if (want_input_grad) g.input = Tensor(in);
  const auto& k = simd::active();

  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t co = 0; co < ws.n; ++co) {
      const auto gout = grad_out.plane(n, co);
      g.bias[co] += k.sum(gout.data(), gout.size());
      for (std::size_t ci = 0; ci < in.c; ++ci) {
        const auto src = input.plane(n, ci);
        double* gin = want_input_grad ? g.input.plane(n, ci).data() : nullptr;
        for (std::size_t ky = 0; ky < ws.h; ++ky) {
          for (std::size_t kx = 0; kx < ws.w; ++kx) {
            const double wv = weights.at(co, ci, ky, kx);
            const Index xoff = static_cast<Index>(kx) - static_cast<Index>(p.pad);
            double acc = 0.0;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const Index iy = source_index(
                  static_cast<Index>(oy * p.stride + ky) - static_cast<Index>(p.pad),
                  static_cast<Index>(in.h), p.mode);
              if (iy < 0) continue;
              const double* in_row = src.data() + static_cast<std::size_t>(iy) * in.w;
              const double* gout_row = gout.data() + oy * ow;
              double* gin_row = gin ? gin + static_cast<std::size_t>(iy) * in.w : nullptr;
              if (p.stride == 1) {
                for_each_run(ow, in.w, xoff, p.mode,
                             [&](std::size_t ox, std::size_t ix, std::size_t len) {
                               acc += k.dot(gout_row + ox, in_row + ix, len);
                               if (gin_row) k.axpy(wv, gout_row + ox, gin_row + ix, len);
                             });
              } else {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                  const Index ix = source_index(static_cast<Index>(ox * p.stride) + xoff,
                                                static_cast<Index>(in.w), p.mode);
                  if (ix < 0) continue;
                  acc += gout_row[ox] * in_row[ix];
                  if (gin_row) gin_row[ix] += wv * gout_row[ox];
                }
              }
            }
            g.weights.at(co, ci, ky, kx) += acc;
          }
        }
      }
    }
  }
  return g;
}

Tensor pool2d(const Tensor& input, const PoolSpec& spec) {
  const Shape& in = input.shape();
  const std::size_t oh = pool_out_extent(in.h, spec.kernel, spec.stride, "h");
  const std::size_t ow = pool_out_extent(in.w, spec.kernel, spec.stride, "w");
  Tensor out({in.n, in.c, oh, ow});
  const double inv_area = 1.0 / static_cast<double>(spec.kernel * spec.kernel);
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = spec.mode == PoolMode::max ? -std::numeric_limits<double>::infinity() : 0.0;
          for (std::size_t dy = 0; dy < spec.kernel; ++dy) {
            for (std::size_t dx = 0; dx < spec.kernel; ++dx) {
              const double v = input.at(n, c, oy * spec.stride + dy, ox * spec.stride + dx);
              acc = spec.mode == PoolMode::max ? std::max(acc, v) : acc + v;
            }
          }
          out.at(n, c, oy, ox) = spec.mode == PoolMode::max ? acc : acc * inv_area;
        }
      }
    }
  }
  return out;
}

Tensor pool2d_backward(const Tensor& input, const Tensor& grad_out, const PoolSpec& spec) {
  const Shape& in = input.shape();
  const std::size_t oh = pool_out_extent(in.h, spec.kernel, spec.stride, "h");
  const std::size_t ow = pool_out_extent(in.w, spec.kernel, spec.stride, "w");
  if (grad_out.shape() != Shape{in.n, in.c, oh, ow}) {
    throw DimensionError("grad_out", "pool gradient shape " + to_string(grad_out.shape()));
  }
  Tensor gin(in);
  const double inv_area = 1.0 / static_cast<double>(spec.kernel * spec.kernel);
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double g = grad_out.at(n, c, oy, ox);
          if (spec.mode == PoolMode::average) {
            for (std::size_t dy = 0; dy < spec.kernel; ++dy)
              for (std::size_t dx = 0; dx < spec.kernel; ++dx)
                gin.at(n, c, oy * spec.stride + dy, ox * spec.stride + dx) += g * inv_area;
            continue;
          }
          std::size_t by = oy * spec.stride, bx = ox * spec.stride;
          double best = input.at(n, c, by, bx);
          for (std::size_t dy = 0; dy < spec.kernel; ++dy) {
            for (std::size_t dx = 0; dx < spec.kernel; ++dx) {
              const std::size_t y = oy * spec.stride + dy, x = ox * spec.stride + dx;
              if (input.at(n, c, y, x) > best) {
                best = input.at(n, c, y, x);
                by = y;
                bx = x;
              }
            }
          }
          gin.at(n, c, by, bx) += g;
        }
      }
    }
  }
  return gin;
}

Tensor global_avg_pool(const Tensor& input) {
  const Shape& in = input.shape();
  if (in.h == 0 || in.w == 0) throw DimensionError("h", "global average pool of an empty map");
  Tensor out({in.n, in.c, 1, 1});
  const double inv = 1.0 / static_cast<double>(in.plane());
  const auto& k = simd::active();
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t c = 0; c < in.c; ++c) {
      const auto p = input.plane(n, c);
      out.at(n, c, 0, 0) = k.sum(p.data(), p.size()) * inv;
    }
  return out;
}

Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out) {
  if (grad_out.shape() != Shape{input_shape.n, input_shape.c, 1, 1}) {
    throw DimensionError("grad_out", "global pool gradient shape " + to_string(grad_out.shape()));
  }
  Tensor gin(input_shape);
  const double inv = 1.0 / static_cast<double>(input_shape.plane());
  for (std::size_t n = 0; n < input_shape.n; ++n)
    for (std::size_t c = 0; c < input_shape.c; ++c) {
      auto p = gin.plane(n, c);
      std::fill(p.begin(), p.end(), grad_out.at(n, c, 0, 0) * inv);
    }
  return gin;
}

std::vector<double> dense(std::span<const double> x, const Tensor& weights,
                          std::span<const double> bias) {
  const Shape& ws = weights.shape();
  if (ws.sample() != x.size()) {
    throw DimensionError("d_in", "weights expect " + std::to_string(ws.sample()) +
                                     " inputs, got " + std::to_string(x.size()));
  }
  if (bias.size() != ws.n) {
    throw DimensionError("d_out", "bias has " + std::to_string(bias.size()) + " entries, weights " +
                                      std::to_string(ws.n) + " rows");
  }
  std::vector<double> out(ws.n);
  const auto& k = simd::active();
  for (std::size_t o = 0; o < ws.n; ++o) out[o] = bias[o] + k.dot(weights.sample(o).data(), x.data(), x.size());
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weights, std::span<const double> bias) {
  const std::size_t n = input.shape().n;
  Tensor out({n, weights.shape().n, 1, 1});
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = dense(input.sample(i), weights, bias);
    std::copy(row.begin(), row.end(), out.sample(i).begin());
  }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                          bool want_input_grad) {
  const Shape& ws = weights.shape();
  const std::size_t n = input.shape().n;
  const std::size_t d_in = input.shape().sample();
  if (d_in != ws.sample()) throw DimensionError("d_in", "dense backward input width mismatch");
  if (grad_out.shape() != Shape{n, ws.n, 1, 1}) {
    throw DimensionError("grad_out", "dense gradient shape " + to_string(grad_out.shape()));
  }
  DenseGrads g;
  g.weights = Tensor(ws);
  g.bias.assign(ws.n, 0.0);
  if (want_input_grad) g.input = Tensor(input.shape());
  const auto& k = simd::active();
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = input.sample(i);
    for (std::size_t o = 0; o < ws.n; ++o) {
      const double go = grad_out.at(i, o, 0, 0);
      g.bias[o] += go;
      k.axpy(go, x.data(), g.weights.sample(o).data(), d_in);
      if (want_input_grad) k.axpy(go, weights.sample(o).data(), g.input.sample(i).data(), d_in);
    }
  }
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  if (input.shape() != grad_out.shape()) throw DimensionError("grad_out", "relu gradient shape");
  Tensor g(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

Tensor softmax(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t n = 0; n < input.shape().n; ++n) {
    const auto x = input.sample(n);
    auto y = out.sample(n);
    if (x.empty()) continue;
    const double m = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = std::exp(x[i] - m);
      z += y[i];
    }
    for (double& v : y) v /= z;
  }
  return out;
}

Tensor softmax_backward(const Tensor& output, const Tensor& grad_out) {
  if (output.shape() != grad_out.shape()) throw DimensionError("grad_out", "softmax gradient shape");
  Tensor g(output.shape());
  for (std::size_t n = 0; n < output.shape().n; ++n) {
    const auto y = output.sample(n);
    const auto gy = grad_out.sample(n);
    double inner = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += y[i] * gy[i];
    auto gx = g.sample(n);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] = y[i] * (gy[i] - inner);
  }
  return g;
}

Tensor activation(const Tensor& input, Activation kind) {
  return kind == Activation::relu ? relu(input) : softmax(input);
}

Tensor flatten(const Tensor& input) {
  const Shape& s = input.shape();
  return input.reshaped({s.n, s.sample(), 1, 1});
}

std::vector<double> concat(std::span<const std::vector<double>> parts) {
  if (parts.empty()) throw DimensionError("parts", "concat of an empty list");
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Tensor concat_features(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("parts", "concat of an empty list");
  const std::size_t n = parts.front().shape().n;
  std::size_t width = 0;
  for (const auto& p : parts) {
    if (p.shape().n != n) throw DimensionError("n", "concat parts disagree on batch size");
    width += p.shape().sample();
  }
  Tensor out({n, width, 1, 1});
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.sample(i).begin();
    for (const auto& p : parts) dst = std::copy(p.sample(i).begin(), p.sample(i).end(), dst);
  }
  return out;
}

std::vector<Tensor> concat_features_backward(std::span<const Shape> part_shapes,
                                             const Tensor& grad_out) {
  std::vector<Tensor> grads;
  grads.reserve(part_shapes.size());
  for (const auto& s : part_shapes) grads.emplace_back(s);
  for (std::size_t i = 0; i < grad_out.shape().n; ++i) {
    auto src = grad_out.sample(i).begin();
    for (auto& g : grads) {
      auto dst = g.sample(i);
      std::copy(src, src + static_cast<Index>(dst.size()), dst.begin());
      src += static_cast<Index>(dst.size());
    }
  }
  return grads;
}

}  // namespace ticnn
