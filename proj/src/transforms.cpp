#include "ticnn/transforms.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ticnn {

namespace {

long wrap(long i, long n) {
  const long r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

Tensor apply_affine(const Tensor& image, const AffineParams& p, Interpolation interp,
                    FillMode fill) {
  if (!(std::abs(p.det()) > 1e-9)) {
    throw ConfigError("affine matrix is singular (|det M| = " + std::to_string(std::abs(p.det())) + ")");
  }
  const Shape s = image.shape();
  Tensor out(s);
  const long h = static_cast<long>(s.h), w = static_cast<long>(s.w);
  const double cx = 0.5 * static_cast<double>(w - 1);
  const double cy = 0.5 * static_cast<double>(h - 1);

  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto src = image.plane(n, c);
      auto dst = out.plane(n, c);
      auto fetch = [&](long ix, long iy) -> double {
        if (fill == FillMode::mosaic) {
          ix = wrap(ix, w);
          iy = wrap(iy, h);
        } else if (ix < 0 || iy < 0 || ix >= w || iy >= h) {
          return 0.0;
        }
        return src[static_cast<std::size_t>(iy * w + ix)];
      };
      for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
          const double u = static_cast<double>(x) - cx;
          const double v = static_cast<double>(y) - cy;
          const double sx = p.m[0] * u + p.m[1] * v + p.b[0] + cx;
          const double sy = p.m[2] * u + p.m[3] * v + p.b[1] + cy;
          double value;
          if (interp == Interpolation::nearest) {
            value = fetch(static_cast<long>(std::floor(sx + 0.5)), static_cast<long>(std::floor(sy + 0.5)));
          } else {
            const double fx0 = std::floor(sx), fy0 = std::floor(sy);
            const double fx = sx - fx0, fy = sy - fy0;
            const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
            if (fx == 0.0 && fy == 0.0) {
              value = fetch(x0, y0);
            } else {
              value = (1.0 - fx) * (1.0 - fy) * fetch(x0, y0) + fx * (1.0 - fy) * fetch(x0 + 1, y0) +
                      (1.0 - fx) * fy * fetch(x0, y0 + 1) + fx * fy * fetch(x0 + 1, y0 + 1);
            }
          }
          dst[static_cast<std::size_t>(y * w + x)] = value;
        }
      }
    }
  }
  return out;
}

Tensor circular_shift(const Tensor& image, long dx, long dy) {
  const Shape s = image.shape();
  Tensor out(s);
  const long h = static_cast<long>(s.h), w = static_cast<long>(s.w);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto src = image.plane(n, c);
      auto dst = out.plane(n, c);
      for (long y = 0; y < h; ++y) {
        const long sy = wrap(y - dy, h);
        for (long x = 0; x < w; ++x) {
          dst[static_cast<std::size_t>(y * w + x)] = src[static_cast<std::size_t>(sy * w + wrap(x - dx, w))];
        }
      }
    }
  return out;
}

Tensor translate_mosaic(const Tensor& image, long dx, long dy) {
  const Shape s = image.shape();
  const long h = static_cast<long>(s.h), w = static_cast<long>(s.w);
  if (std::labs(dx) > w || std::labs(dy) > h) {
    throw ConfigError("mosaic shift (" + std::to_string(dx) + ", " + std::to_string(dy) +
                      ") exceeds the 3x3 tiling bound (" + std::to_string(w) + ", " +
                      std::to_string(h) + ")");
  }
  Tensor out(s);
  std::vector<double> canvas(static_cast<std::size_t>(9 * h * w));
  const long cw = 3 * w;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto src = image.plane(n, c);
      for (long ty = 0; ty < 3; ++ty)
        for (long tx = 0; tx < 3; ++tx)
          for (long y = 0; y < h; ++y)
            for (long x = 0; x < w; ++x)
              canvas[static_cast<std::size_t>((ty * h + y) * cw + tx * w + x)] =
                  src[static_cast<std::size_t>(y * w + x)];
      // Translating the canvas by (dx, dy) moves canvas pixel (X, Y) to
      // (X + dx, Y + dy); the center patch starts at (w, h).
      auto dst = out.plane(n, c);
      for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
          dst[static_cast<std::size_t>(y * w + x)] =
              canvas[static_cast<std::size_t>((h + y - dy) * cw + (w + x - dx))];
    }
  return out;
}

AffineParams make_translation(double dx, double dy) {
  AffineParams p;
  p.b = {-dx, -dy};
  return p;
}

AffineParams make_rotation(double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  AffineParams p;
  p.m = {std::cos(t), -std::sin(t), std::sin(t), std::cos(t)};
  return p;
}

AffineParams make_scale(double factor) {
  if (!(factor > 0.0)) throw ConfigError("scale factor must be > 0, got " + std::to_string(factor));
  AffineParams p;
  p.m = {1.0 / factor, 0.0, 0.0, 1.0 / factor};
  return p;
}

AffineParams make_affine(const TransformRequest& r) {
  switch (r.kind) {
    case TransformKind::translation:
      return make_translation(r.dx, r.dy);
    case TransformKind::rotation:
      return make_rotation(r.degrees);
    case TransformKind::scale:
      return make_scale(r.factor);
  }
  return {};
}

Tensor apply_aperture(const Tensor& image, double radius, double softness) {
  if (!(radius > 0.0)) throw ConfigError("aperture radius must be > 0");
  if (!(softness >= 0.0)) throw ConfigError("aperture softness must be >= 0");
  const Shape s = image.shape();
  const double cx = 0.5 * static_cast<double>(s.w - 1);
  const double cy = 0.5 * static_cast<double>(s.h - 1);
  std::vector<double> weight(s.plane());
  for (std::size_t y = 0; y < s.h; ++y)
    for (std::size_t x = 0; x < s.w; ++x) {
      const double r = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
      double wv = 0.0;
      if (r <= radius) wv = 1.0;
      else if (softness > 0.0 && r < radius + softness)
        wv = 0.5 * (1.0 + std::cos(std::numbers::pi * (r - radius) / softness));
      weight[y * s.w + x] = wv;
    }
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto src = image.plane(n, c);
      auto dst = out.plane(n, c);
      double mean = 0.0;
      for (double v : src) mean += v;
      mean /= static_cast<double>(src.size());
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = weight[i] == 1.0 ? src[i] : weight[i] * src[i] + (1.0 - weight[i]) * mean;
      }
    }
  return out;
}

}  // namespace ticnn
