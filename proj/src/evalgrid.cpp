#include "ticnn/evalgrid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parallel.hpp"
#include "ticnn/stats.hpp"

namespace ticnn {

namespace {

Tensor translate(const Tensor& images, long dx, long dy, Translator t) {
  if (dx == 0 && dy == 0) return images;
  return t == Translator::mosaic ? translate_mosaic(images, dx, dy) : circular_shift(images, dx, dy);
}

}  // namespace

std::vector<long> axis_offsets(const GridSpec& grid, bool horizontal) {
  if (grid.step < 1) throw ConfigError("grid step must be >= 1");
  if (grid.max_shift < 0) throw ConfigError("grid max shift must be >= 0");
  const bool active = grid.axes == GridAxes::both ||
                      (horizontal ? grid.axes == GridAxes::horizontal : grid.axes == GridAxes::vertical);
  if (!active) return {0};
  std::vector<long> out;
  for (long v = -(grid.max_shift / grid.step) * grid.step; v <= grid.max_shift; v += grid.step) {
    out.push_back(v);
  }
  return out;
}

std::size_t Grid::center_index() const {
  const auto cx = std::find(dxs.begin(), dxs.end(), 0L);
  const auto cy = std::find(dys.begin(), dys.end(), 0L);
  if (cx == dxs.end() || cy == dys.end()) throw DataError("grid has no (0, 0) center cell");
  return static_cast<std::size_t>(cy - dys.begin()) * dxs.size() +
         static_cast<std::size_t>(cx - dxs.begin());
}

BatchPredictor model_predictor(const Model& model, std::size_t batch_size) {
  return [&model, batch_size](const Tensor& batch) {
    std::vector<int> out;
    out.reserve(batch.shape().n);
    for (std::size_t start = 0; start < batch.shape().n; start += batch_size) {
      const std::size_t count = std::min(batch_size, batch.shape().n - start);
      const auto p = predict(model, batch.slice_batch(start, count));
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  };
}

AccuracyGrid evaluate_grid(const BatchPredictor& predict, const Dataset& data, const GridSpec& grid,
                           Translator translator, std::size_t workers) {
  if (data.size() == 0) throw DataError("cannot evaluate a grid on an empty dataset");
  AccuracyGrid out;
  out.dxs = axis_offsets(grid, true);
  out.dys = axis_offsets(grid, false);
  out.values.assign(out.dxs.size() * out.dys.size(), 0.0);
  detail::parallel_for(out.values.size(), workers, [&](std::size_t cell) {
    const long dx = out.dxs[cell % out.dxs.size()];
    const long dy = out.dys[cell / out.dxs.size()];
    const auto pred = predict(translate(data.images, dx, dy, translator));
    out.values[cell] = accuracy(pred, data.labels);
  });
  return out;
}

std::vector<double> evaluate_sweep(const BatchPredictor& predict, const Dataset& data,
                                   std::span<const AffineParams> sweep, Interpolation interp,
                                   std::size_t workers) {
  if (data.size() == 0) throw DataError("cannot evaluate a sweep on an empty dataset");
  std::vector<double> out(sweep.size());
  detail::parallel_for(sweep.size(), workers, [&](std::size_t i) {
    const auto pred = predict(apply_affine(data.images, sweep[i], interp, FillMode::mosaic));
    out[i] = accuracy(pred, data.labels);
  });
  return out;
}

std::vector<double> shift_curve(const BatchPredictor& predict, const Dataset& data, long max_shift,
                                Translator translator, std::size_t workers) {
  if (data.size() == 0) throw DataError("cannot evaluate shifts on an empty dataset");
  std::vector<double> out(static_cast<std::size_t>(max_shift + 1));
  detail::parallel_for(out.size(), workers, [&](std::size_t s) {
    out[s] = accuracy(predict(translate(data.images, static_cast<long>(s), 0, translator)), data.labels);
  });
  return out;
}

LossGrid relative_loss_grid(const AccuracyGrid& grid) {
  LossGrid out = grid;
  const std::size_t ci = grid.center_index();
  const double center = grid.values[ci];
  for (auto& v : out.values) v = center - v;
  out.values[ci] = 0.0;
  return out;
}

NormalizedGrids normalize_grids(std::span<const Grid> grids) {
  if (grids.empty()) throw DataError("normalize_grids needs at least one grid");
  NormalizedGrids out;
  bool first = true;
  for (const auto& g : grids) {
    for (double v : g.values) {
      if (first) {
        out.min = out.max = v;
        first = false;
      }
      out.min = std::min(out.min, v);
      out.max = std::max(out.max, v);
    }
  }
  const double range = out.max - out.min;
  out.degenerate = !(range > 0.0);
  out.grids.assign(grids.begin(), grids.end());
  for (auto& g : out.grids) {
    for (auto& v : g.values) v = out.degenerate ? 0.0 : (v - out.min) / range;
  }
  return out;
}

RobustnessSummary summarize(const AccuracyGrid& grid) {
  if (grid.values.empty()) throw DataError("cannot summarize an empty grid");
  const auto acc = stats::mean_std(grid.values);
  const auto loss = stats::mean_std(relative_loss_grid(grid).values);
  return {acc.mean, acc.std, loss.mean, loss.std};
}

PeriodEstimate detect_period(std::span<const double> curve) {
  const std::size_t n = curve.size();
  if (n < 3) {
    throw DataError("period detection needs at least 3 samples, got " + std::to_string(n));
  }
  double mean = 0.0;
  for (double v : curve) mean += v;
  mean /= static_cast<double>(n);
  double energy = 0.0;
  for (double v : curve) energy += (v - mean) * (v - mean);
  PeriodEstimate est;
  // Spread at rounding level of the values is treated as a constant curve.
  const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end());
  if (!(*hi - *lo > 1e-12 * std::max(1.0, std::abs(mean))) || !(energy > 0.0)) return est;
  double best = -2.0;
  std::size_t best_lag = 0;
  for (std::size_t lag = 1; lag <= n / 3; ++lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += (curve[t] - mean) * (curve[t + lag] - mean);
    const double r = acc / energy;
    if (r > best) {
      best = r;
      best_lag = lag;
    }
  }
  est.confidence = std::clamp(best, 0.0, 1.0);
  if (best_lag > 0 && best >= kPeriodConfidenceFloor) est.period = best_lag;
  return est;
}

}  // namespace ticnn
