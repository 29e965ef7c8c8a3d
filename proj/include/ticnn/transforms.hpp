#pragma once

// Geometric image transforms: affine resampling, mosaic-padded translation,
// cyclic shifts and soft circular apertures. Images are (n, c, h, w)
// tensors; every sample and channel is transformed identically.

#include <array>

#include "ticnn/tensor.hpp"

namespace ticnn {

// v -> M v + b in pixel units, with coordinates centered on the image midpoint.
struct AffineParams {
  std::array<double, 4> m{1.0, 0.0, 0.0, 1.0};  // row-major 2x2, acting on (x, y)
  std::array<double, 2> b{0.0, 0.0};

  double det() const noexcept { return m[0] * m[3] - m[1] * m[2]; }
};

enum class Interpolation { nearest, bilinear };
enum class FillMode { zero, mosaic };

// Inverse mapping: output pixel x reads the input at M x + b. Out-of-range
// reads are zero or taken from the periodic tiling of the image (mosaic).
// Throws ConfigError when |det M| <= 1e-9.
Tensor apply_affine(const Tensor& image, const AffineParams& params,
                    Interpolation interp = Interpolation::bilinear, FillMode fill = FillMode::mosaic);

// out(y, x) = in((y - dy) mod h, (x - dx) mod w): content moves by (+dx, +dy).
Tensor circular_shift(const Tensor& image, long dx, long dy);

// Tiles the image 3x3, translates the canvas by (dx, dy) and extracts the
// center patch. Requires |dx| <= w and |dy| <= h (the 3x3 canvas bound);
// throws ConfigError otherwise.
Tensor translate_mosaic(const Tensor& image, long dx, long dy);

enum class TransformKind { translation, rotation, scale };

struct TransformRequest {
  TransformKind kind = TransformKind::translation;
  double dx = 0.0;       // translation, pixels
  double dy = 0.0;
  double degrees = 0.0;  // rotation, counter-clockwise in display coordinates
  double factor = 1.0;   // scale, > 0
};

AffineParams make_translation(double dx, double dy);
AffineParams make_rotation(double degrees);
AffineParams make_scale(double factor);
AffineParams make_affine(const TransformRequest& request);

// Pixels farther than `radius` from the image center fade to the per-channel
// image mean across a raised-cosine ramp of width `softness`.
Tensor apply_aperture(const Tensor& image, double radius, double softness);

// Translation magnitudes in visual degrees: 50 px corresponds to 0.3 deg.
inline constexpr double kPixelsPerDegree = 50.0 / 0.3;

}  // namespace ticnn
