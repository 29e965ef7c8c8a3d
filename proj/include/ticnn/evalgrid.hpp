#pragma once

// Robustness evaluation over displacement grids, relative loss maps,
// joint normalization, summary statistics and aliasing-period detection.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ticnn/dataset.hpp"
#include "ticnn/model.hpp"
#include "ticnn/tensor.hpp"
#include "ticnn/transforms.hpp"

namespace ticnn {

enum class GridAxes { horizontal, vertical, both };

struct GridSpec {
  long max_shift = 0;  // pixels per axis
  long step = 1;
  GridAxes axes = GridAxes::both;
};

// Offsets along one axis: 0, +-step, +-2 step, ... within max_shift, ascending.
std::vector<long> axis_offsets(const GridSpec& grid, bool horizontal);

// Values indexed by (dy, dx); row-major with dys as rows.
struct Grid {
  std::vector<long> dxs;
  std::vector<long> dys;
  std::vector<double> values;

  std::size_t rows() const noexcept { return dys.size(); }
  std::size_t cols() const noexcept { return dxs.size(); }
  double& at(std::size_t r, std::size_t c) { return values[r * dxs.size() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * dxs.size() + c]; }
  // Index of the (0, 0) cell; throws DataError when absent.
  std::size_t center_index() const;
  double center() const { return values[center_index()]; }
};

using AccuracyGrid = Grid;
using LossGrid = Grid;

enum class Translator { mosaic, circular };

// Predicts Top-1 classes for a batch; must be safe to call concurrently.
using BatchPredictor = std::function<std::vector<int>(const Tensor& batch)>;

BatchPredictor model_predictor(const Model& model, std::size_t batch_size = 256);

// Top-1 accuracy of `predict` on the test set translated by every (dx, dy)
// of the grid. Cells are evaluated on up to `workers` threads; results do not
// depend on the worker count.
AccuracyGrid evaluate_grid(const BatchPredictor& predict, const Dataset& data, const GridSpec& grid,
                           Translator translator = Translator::mosaic, std::size_t workers = 0);

// Accuracy for each affine transform in `sweep` (rotation / scale controls).
std::vector<double> evaluate_sweep(const BatchPredictor& predict, const Dataset& data,
                                   std::span<const AffineParams> sweep,
                                   Interpolation interp = Interpolation::bilinear,
                                   std::size_t workers = 0);

// center - cell; the center is exactly 0.
LossGrid relative_loss_grid(const AccuracyGrid& grid);

struct NormalizedGrids {
  std::vector<Grid> grids;
  bool degenerate = false;  // every cell equal; outputs are all zero
  double min = 0.0;
  double max = 0.0;
};

// Joint min-max normalization over the union of all cells.
NormalizedGrids normalize_grids(std::span<const Grid> grids);

struct RobustnessSummary {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_loss = 0.0;  // mean over cells of (center - cell)
  double std_loss = 0.0;
};

// Population statistics.
RobustnessSummary summarize(const AccuracyGrid& grid);

struct PeriodEstimate {
  std::optional<std::size_t> period;
  double confidence = 0.0;  // normalized autocorrelation at the chosen lag, clipped to [0, 1]
};

inline constexpr double kPeriodConfidenceFloor = 0.3;

// Argmax over lags 1..len/3 of the mean-removed normalized autocorrelation;
// no period when the peak is below kPeriodConfidenceFloor or the curve is
// constant to within 1e-12 of its magnitude. Throws DataError for
// fewer than 3 samples.
PeriodEstimate detect_period(std::span<const double> curve);

// Accuracy at horizontal shifts 0..max_shift (one pixel per step).
std::vector<double> shift_curve(const BatchPredictor& predict, const Dataset& data, long max_shift,
                                Translator translator = Translator::mosaic, std::size_t workers = 0);

}  // namespace ticnn
