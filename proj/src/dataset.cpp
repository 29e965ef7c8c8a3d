#include "ticnn/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "ticnn/error.hpp"
#include "ticnn/rng.hpp"

namespace ticnn {

namespace {

struct Pt {
  double x, y;
};

// Glyph strokes as polylines in a unit box (x right, y down).
const std::vector<std::vector<Pt>>& glyph(int digit) {
  static const std::array<std::vector<std::vector<Pt>>, 10> kGlyphs = {{
      {{{0.5, 0.0}, {0.85, 0.1}, {1.0, 0.5}, {0.85, 0.9}, {0.5, 1.0}, {0.15, 0.9}, {0.0, 0.5},
        {0.15, 0.1}, {0.5, 0.0}}},
      {{{0.2, 0.25}, {0.55, 0.0}, {0.55, 1.0}}},
      {{{0.0, 0.2}, {0.3, 0.0}, {0.75, 0.0}, {1.0, 0.25}, {0.0, 1.0}, {1.0, 1.0}}},
      {{{0.0, 0.0}, {1.0, 0.0}, {0.45, 0.42}, {0.9, 0.6}, {0.9, 0.85}, {0.65, 1.0}, {0.0, 0.95}}},
      {{{0.75, 1.0}, {0.75, 0.0}, {0.0, 0.65}, {1.0, 0.65}}},
      {{{1.0, 0.0}, {0.05, 0.0}, {0.0, 0.45}, {0.7, 0.42}, {1.0, 0.7}, {0.75, 1.0}, {0.0, 0.95}}},
      {{{0.85, 0.0}, {0.25, 0.3}, {0.0, 0.7}, {0.3, 1.0}, {0.75, 1.0}, {1.0, 0.75}, {0.7, 0.5},
        {0.05, 0.62}}},
      {{{0.0, 0.0}, {1.0, 0.0}, {0.35, 1.0}}},
      {{{0.5, 0.45}, {0.1, 0.25}, {0.5, 0.0}, {0.9, 0.25}, {0.5, 0.45}, {0.0, 0.72}, {0.5, 1.0},
        {1.0, 0.72}, {0.5, 0.45}}},
      {{{1.0, 0.45}, {0.3, 0.5}, {0.0, 0.25}, {0.35, 0.0}, {0.8, 0.0}, {1.0, 0.3}, {0.95, 0.55},
        {0.6, 1.0}}},
  }};
  return kGlyphs[static_cast<std::size_t>(digit)];
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
  Dataset out;
  out.images = images.slice_batch(first, count);
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                    labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.num_classes = num_classes;
  return out;
}

Dataset Dataset::gather(const std::vector<std::size_t>& indices) const {
  const Shape s = images.shape();
  Dataset out;
  out.num_classes = num_classes;
  std::vector<double> data;
  data.reserve(indices.size() * s.sample());
  for (std::size_t i : indices) {
    const auto src = images.sample(i);
    data.insert(data.end(), src.begin(), src.end());
    out.labels.push_back(labels[i]);
  }
  out.images = Tensor({indices.size(), s.c, s.h, s.w}, std::move(data));
  return out;
}

Dataset make_synthetic_digits(const SyntheticDigitsConfig& cfg) {
  if (cfg.size < 8) throw ConfigError("synthetic digit canvas must be at least 8 pixels");
  Rng rng(cfg.seed);
  Dataset out;
  out.num_classes = 10;
  out.images = Tensor({cfg.count, 1, cfg.size, cfg.size});
  out.labels.resize(cfg.count);
  const double canvas = static_cast<double>(cfg.size);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const int digit = static_cast<int>(i % 10);
    out.labels[i] = digit;
    const double height = cfg.glyph_scale * canvas * rng.uniform(0.9, 1.1);
    const double width = height * rng.uniform(0.55, 0.7);
    const double slant = rng.uniform(-0.15, 0.15);
    const double cx = 0.5 * (canvas - 1.0) + rng.uniform(-cfg.max_offset, cfg.max_offset);
    const double cy = 0.5 * (canvas - 1.0) + rng.uniform(-cfg.max_offset, cfg.max_offset);
    const double half_width = cfg.stroke * rng.uniform(0.85, 1.2);

    std::vector<std::pair<Pt, Pt>> segs;
    for (const auto& line : glyph(digit)) {
      for (std::size_t j = 0; j + 1 < line.size(); ++j) {
        auto map = [&](Pt p) {
          const double y = (p.y - 0.5) * height;
          return Pt{cx + (p.x - 0.5) * width + slant * y, cy + y};
        };
        segs.emplace_back(map(line[j]), map(line[j + 1]));
      }
    }
    auto plane = out.images.plane(i, 0);
    for (std::size_t y = 0; y < cfg.size; ++y) {
      for (std::size_t x = 0; x < cfg.size; ++x) {
        const Pt p{static_cast<double>(x), static_cast<double>(y)};
        double d = 1e9;
        for (const auto& [a, b] : segs) d = std::min(d, segment_distance(p, a, b));
        double v = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
        v += cfg.noise * rng.normal();
        plane[y * cfg.size + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

Dataset center_resize(const Dataset& data, std::size_t size) {
  const Shape s = data.images.shape();
  Dataset out;
  out.labels = data.labels;
  out.num_classes = data.num_classes;
  out.images = Tensor({s.n, s.c, size, size});
  const auto off_y = (static_cast<std::ptrdiff_t>(s.h) - static_cast<std::ptrdiff_t>(size)) / 2;
  const auto off_x = (static_cast<std::ptrdiff_t>(s.w) - static_cast<std::ptrdiff_t>(size)) / 2;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const auto sy = static_cast<std::ptrdiff_t>(y) + off_y;
          const auto sx = static_cast<std::ptrdiff_t>(x) + off_x;
          if (sy >= 0 && sx >= 0 && sy < static_cast<std::ptrdiff_t>(s.h) &&
              sx < static_cast<std::ptrdiff_t>(s.w)) {
            out.images.at(n, c, y, x) = data.images.at(n, c, static_cast<std::size_t>(sy),
                                                       static_cast<std::size_t>(sx));
          }
        }
  return out;
}

}  // namespace ticnn
