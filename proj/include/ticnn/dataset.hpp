#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ticnn/tensor.hpp"

namespace ticnn {

// Labeled image set; images are (n, c, h, w) with pixels in [0, 1].
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }

  // Samples [first, first + count).
  Dataset slice(std::size_t first, std::size_t count) const;
  // Samples at the given indices, in order.
  Dataset gather(const std::vector<std::size_t>& indices) const;
};

struct SyntheticDigitsConfig {
  std::size_t count = 1000;
  std::size_t size = 24;       // square canvas in pixels
  double glyph_scale = 0.62;   // glyph box height as a fraction of the canvas
  double max_offset = 1.5;     // uniform position jitter, pixels
  double stroke = 1.3;         // nominal stroke half-width, pixels
  double noise = 0.03;         // additive Gaussian pixel noise
  std::uint64_t seed = 1;
};

// Procedural ten-class digit fixture: stroke glyphs rendered with
// antialiasing, random jitter of position, scale, slant and stroke width.
// Stands in for MNIST when the IDX files are not available. Deterministic
// per seed; labels cycle 0..9.
Dataset make_synthetic_digits(const SyntheticDigitsConfig& config);

// Centered crop (or zero-pad) of every image to size x size.
Dataset center_resize(const Dataset& data, std::size_t size);

}  // namespace ticnn
