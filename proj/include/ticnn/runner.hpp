#pragma once

// Experiment runner behind the command-line tool: JSON run configuration,
// the six experiments, artifact emission and run manifests.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ticnn/arch.hpp"
#include "ticnn/dataset.hpp"
#include "ticnn/evalgrid.hpp"
#include "ticnn/io.hpp"
#include "ticnn/model.hpp"
#include "ticnn/perceptual.hpp"

namespace ticnn {

inline constexpr std::string_view kRunSchema = "ticnn.run/1";
inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr const char* kOutputDirEnv = "TICNN_OUTPUT_DIR";

enum class Experiment { params, train, grid, aliasing, curves, render };
enum class ModelScale { vgg16, toy };
enum class DataSource { synthetic, idx };
enum class SweepKind { none, rotation, scale };

std::string_view experiment_name(Experiment e) noexcept;

struct ModelSection {
  ModelScale scale = ModelScale::toy;
  std::size_t input_size = 0;  // 0: the data size (toy) or 256 (vgg16)
  std::size_t classes = 0;     // 0: 10 (toy) or 160 (vgg16)
  std::vector<std::size_t> channels{8, 16};
  std::size_t pool = 2;
  std::optional<std::size_t> pooled_stages;
  PaddingMode padding = PaddingMode::zero;
};

struct DataSection {
  DataSource source = DataSource::synthetic;
  std::string train_images, train_labels, test_images, test_labels;
  std::size_t train_count = 2000;  // synthetic only; idx sets are truncated to it when smaller
  std::size_t test_count = 1000;
  std::size_t size = 24;
  double noise = 0.03;
};

struct GridSection {
  GridSpec spec{6, 3, GridAxes::both};
  Translator translator = Translator::mosaic;
  io::HeatmapScaling scaling = io::HeatmapScaling::joint;
  std::size_t cell_pixels = 16;
  SweepKind sweep = SweepKind::none;
  std::vector<double> sweep_values;  // degrees (rotation) or factors (scale)
};

struct AliasingSection {
  std::vector<std::size_t> ks{2, 3, 4};
  long max_shift = 0;  // 0: 4k for each k
  PaddingMode padding = PaddingMode::circular;
  Translator translator = Translator::mosaic;
};

struct CurvesSection {
  TransformKind distortion = TransformKind::translation;
  std::size_t steps = 10;       // images I_0..I_steps
  double step = 1.0;            // distortion per step: pixels, degrees or scale increment
  double level_step = kLevelStepDegrees;
  std::vector<MetricVariant> metrics{MetricVariant::lbase, MetricVariant::lmulti, MetricVariant::lflat};
  std::vector<CurveMethod> methods{CurveMethod::orig_dist, CurveMethod::cumsum, CurveMethod::mlds,
                                   CurveMethod::sequential};
  MLDSConfig mlds;
  std::string reference;  // curve CSV; empty compares against the LFlat sequential curve
  double aperture_radius = 0.0;  // 0: 0.4 of the image size
  double aperture_softness = 0.0;  // 0: 0.1 of the image size
  std::size_t image_index = 0;
};

struct RenderSection {
  std::vector<std::string> inputs;  // grid CSV files
  io::HeatmapScaling scaling = io::HeatmapScaling::joint;
  std::size_t cell_pixels = 16;
};

struct RunConfig {
  Experiment experiment = Experiment::params;
  std::uint64_t seed = 0;
  std::string output_dir;  // empty: $TICNN_OUTPUT_DIR, else "ticnn_out"
  std::size_t workers = 0;
  // Train the Base model once and reuse its frozen backbone for every other head.
  bool shared_backbone = true;
  std::vector<Variant> variants{Variant::base, Variant::multi, Variant::final_gap, Variant::flat};
  ModelSection model;
  DataSection data;
  TrainConfig train;
  GridSection grid;
  AliasingSection aliasing;
  CurvesSection curves;
  RenderSection render;
  std::map<std::string, std::string> weights;  // variant name -> archive to load instead of training
};

// Parses and validates a JSON document. ConfigError messages carry the field
// path ("$.grid.step: must be >= 1"). Referenced input files must exist.
RunConfig parse_run_config(std::string_view json_text);
// Canonical JSON form; parse_run_config(to_json(c)) reproduces c.
std::string to_json(const RunConfig& config);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

std::filesystem::path resolve_output_dir(const RunConfig& config);

struct RunResult {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> artifacts;  // relative to output_dir, sorted
  std::string report;                            // human-readable summary
};

// Runs the experiment, writes its artifacts and a manifest.json (schema,
// seed, config hash, version), and returns the report.
RunResult run(const RunConfig& config, std::ostream* log = nullptr);

// 1 for ConfigError, 2 for DataError / DimensionError, 3 for NumericalError,
// 2 for anything else.
int exit_code_for(const std::exception& e) noexcept;

// Shared pieces of the experiments, exposed for the acceptance harness.
ArchitectureSpec model_spec(const RunConfig& config, Variant variant);
std::pair<Dataset, Dataset> load_data(const RunConfig& config);

struct TrainedVariant {
  Variant variant;
  Model model;
};

// Trains (or loads) one model per configured variant. With a shared
// backbone the Base model is trained first and every other head is trained
// on its frozen copy.
std::vector<TrainedVariant> train_variants(const RunConfig& config, const Dataset& train_set,
                                           std::ostream* log = nullptr);

}  // namespace ticnn
