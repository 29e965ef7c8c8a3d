#pragma once

// File formats: IDX datasets, binary weight archives, CSV tables for grids,
// curves and judgments, PPM heatmaps, and architecture JSON.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ticnn/arch.hpp"
#include "ticnn/dataset.hpp"
#include "ticnn/error.hpp"
#include "ticnn/evalgrid.hpp"
#include "ticnn/model.hpp"
#include "ticnn/perceptual.hpp"

namespace ticnn::io {

namespace fs = std::filesystem;

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Images as (n, 1, rows, cols) with pixels scaled to [0, 1].
Tensor load_idx_images(const fs::path& path);
std::vector<int> load_idx_labels(const fs::path& path);
// Throws DataError on wrong magic, truncation or an image/label count mismatch.
Dataset load_idx(const fs::path& images, const fs::path& labels, std::size_t num_classes = 10);

// Pixels are clamped to [0, 1] and rounded to bytes.
void write_idx_images(const Tensor& images, const fs::path& path);
void write_idx_labels(std::span<const int> labels, const fs::path& path);

inline constexpr std::string_view kWeightsMagic = "TICNN1";

// "TICNN1", u32 record count, then per record: u32 name length, name bytes,
// u32 rank, u32 per dimension, f32 payload. All integers little-endian.
void save_weights(const ParameterStore& store, const fs::path& path);
// Every loaded entry is marked trainable.
ParameterStore load_weights(const fs::path& path);

class WeightMismatchError : public DataError {
 public:
  WeightMismatchError(std::vector<std::string> missing, std::vector<std::string> extra,
                      std::vector<std::string> mismatched);

  const std::vector<std::string>& missing() const noexcept { return missing_; }
  const std::vector<std::string>& extra() const noexcept { return extra_; }
  const std::vector<std::string>& mismatched() const noexcept { return mismatched_; }

 private:
  std::vector<std::string> missing_, extra_, mismatched_;
};

// Replaces every parameter value of `model` from the archive. The archive must
// hold exactly the model's names with matching shapes, otherwise
// WeightMismatchError lists the differences. Trainable flags are kept.
void load_weights_into(Model& model, const fs::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

// Header "dy\dx,<dx...>", then one row per dy: "<dy>,<values...>".
std::string grid_to_csv(const Grid& grid);
Grid grid_from_csv(std::string_view text);

std::string curve_to_csv(const ResponseCurve& curve);  // header "level,value"
ResponseCurve curve_from_csv(std::string_view text);

std::string judgments_to_csv(std::span<const Judgment> judgments);  // header "i,j,k,l,choice"
std::vector<Judgment> judgments_from_csv(std::string_view text);

// Generic table with a header row; rows must match the header width.
std::string table_to_csv(std::span<const std::string> header, std::span<const std::vector<double>> rows);

// Throws DataError on failure. Text is written verbatim ('\n' line endings).
void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

enum class HeatmapScaling { joint, independent };

HeatmapScaling parse_heatmap_scaling(std::string_view name);

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Color range per grid: one shared range (joint) or each grid's own.
std::vector<ValueRange> heatmap_ranges(std::span<const Grid> grids, HeatmapScaling scaling);

// Monotone dark-blue to yellow ramp; t is clamped to [0, 1].
std::array<std::uint8_t, 3> viridis(double t);

// Binary P6 image, one `cell_pixels` square per grid cell, rows = dy. A
// degenerate range paints every cell at the ramp maximum. A CSV sidecar with
// the raw values is written next to it (same stem, .csv extension).
void write_heatmap(const Grid& grid, const fs::path& path, ValueRange range, std::size_t cell_pixels = 1);

struct PpmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;
};

PpmImage read_ppm(const fs::path& path);

std::string arch_to_json(const ArchitectureSpec& spec);
// Validates the result; ConfigError names the offending field.
ArchitectureSpec arch_from_json(std::string_view text);

}  // namespace ticnn::io
