// Command-line front end: each subcommand assembles a run configuration and
// hands it to the experiment runner.

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ticnn/error.hpp"
#include "ticnn/io.hpp"
#include "ticnn/runner.hpp"

namespace {

using json = nlohmann::json;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> workers;
  std::vector<std::string> variants;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> train_count;
  std::optional<std::size_t> test_count;
  std::optional<std::size_t> size;
  std::string scale;
  std::string padding;
  std::vector<std::string> idx;  // train images, train labels, test images, test labels
  std::vector<std::string> weights;  // variant=path
};

void add_common(CLI::App* cmd, Common& c, bool training) {
  cmd->add_option("--seed", c.seed, "Run seed");
  cmd->add_option("--out", c.out, "Output directory (default: $TICNN_OUTPUT_DIR or ./ticnn_out)");
  cmd->add_option("--workers", c.workers, "Worker threads for grid cells (0: all cores)");
  cmd->add_option("--variant", c.variants, "base, multi, final or flat (repeatable)");
  if (!training) return;
  cmd->add_option("--epochs", c.epochs, "Training epochs");
  cmd->add_option("--train-count", c.train_count, "Training images");
  cmd->add_option("--test-count", c.test_count, "Test images");
  cmd->add_option("--size", c.size, "Image size in pixels");
  cmd->add_option("--padding", c.padding, "Toy convolution padding: zero or circular");
  cmd->add_option("--idx", c.idx, "IDX files: train-images train-labels test-images test-labels")->expected(4);
  cmd->add_option("--weights", c.weights, "variant=archive to load instead of training (repeatable)");
}

void apply_common(json& doc, const Common& c) {
  if (c.seed) doc["seed"] = *c.seed;
  if (!c.out.empty()) doc["output_dir"] = c.out;
  if (c.workers) doc["workers"] = *c.workers;
  if (!c.variants.empty()) doc["variants"] = c.variants;
  if (c.epochs) doc["train"]["epochs"] = *c.epochs;
  if (c.train_count) doc["data"]["train_count"] = *c.train_count;
  if (c.test_count) doc["data"]["test_count"] = *c.test_count;
  if (c.size) doc["data"]["size"] = *c.size;
  if (!c.scale.empty()) doc["model"]["scale"] = c.scale;
  if (!c.padding.empty()) doc["model"]["padding"] = c.padding;
  if (!c.idx.empty()) {
    doc["data"]["source"] = "idx";
    doc["data"]["train_images"] = c.idx[0];
    doc["data"]["train_labels"] = c.idx[1];
    doc["data"]["test_images"] = c.idx[2];
    doc["data"]["test_labels"] = c.idx[3];
  }
  for (const auto& w : c.weights) {
    const auto eq = w.find('=');
    if (eq == std::string::npos) throw ticnn::ConfigError("--weights expects variant=path, got '" + w + "'");
    doc["weights"][w.substr(0, eq)] = w.substr(eq + 1);
  }
}

int execute(const ticnn::RunConfig& config) {
  const auto result = ticnn::run(config, &std::cerr);
  std::cout << result.report;
  std::cerr << "artifacts written to " << result.output_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Translation-invariance test bench for GAP-insertion CNN variants"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ticnn::kVersion));

  json doc{{"schema", ticnn::kRunSchema}};
  Common common;
  std::string config_path;

  auto* params = app.add_subcommand("params", "Parameter accounting for the four head variants");
  std::optional<std::size_t> input, classes;
  params->add_option("--input", input, "Input size in pixels (default 256)");
  params->add_option("--classes", classes, "Number of classes (default 160)");
  params->add_option("--scale", common.scale, "vgg16 (default) or toy");
  add_common(params, common, false);

  auto* train = app.add_subcommand("train", "Train models and save weight archives");
  add_common(train, common, true);

  auto* grid = app.add_subcommand("grid", "Accuracy and loss over a displacement grid");
  std::optional<long> max_shift, step;
  std::string axes, translator, scaling, sweep;
  std::vector<double> sweep_values;
  grid->add_option("--max-shift", max_shift, "Largest displacement per axis, pixels");
  grid->add_option("--step", step, "Grid spacing, pixels");
  grid->add_option("--axes", axes, "both, horizontal or vertical");
  grid->add_option("--translator", translator, "mosaic or circular");
  grid->add_option("--scaling", scaling, "Heatmap color scaling: joint or independent");
  grid->add_option("--sweep", sweep, "Extra 1-D control sweep: rotation or scale");
  grid->add_option("--sweep-values", sweep_values, "Rotation degrees or scale factors");
  add_common(grid, common, true);

  auto* aliasing = app.add_subcommand("aliasing", "Accuracy versus shift for pooling kernels k");
  std::vector<std::size_t> ks;
  std::optional<long> alias_shift;
  aliasing->add_option("--k", ks, "Pooling kernel sizes (repeatable, default 2 3 4)");
  aliasing->add_option("--max-shift", alias_shift, "Largest horizontal shift (default 4k)");
  add_common(aliasing, common, true);

  auto* curves = app.add_subcommand("curves", "Perceptual response curves with the four methodologies");
  std::string distortion, reference;
  std::optional<std::size_t> steps, trials;
  std::optional<double> curve_step;
  curves->add_option("--distortion", distortion, "translation, rotation or scale");
  curves->add_option("--steps", steps, "Number of distortion steps");
  curves->add_option("--step", curve_step, "Distortion per step");
  curves->add_option("--trials", trials, "Simulated MLDS trials");
  curves->add_option("--reference", reference, "Reference curve CSV (level,value)");
  add_common(curves, common, true);

  auto* render = app.add_subcommand("render", "Draw PPM heatmaps from grid CSV files");
  std::vector<std::string> inputs;
  std::string render_scaling;
  render->add_option("inputs", inputs, "Grid CSV files")->required();
  render->add_option("--scaling", render_scaling, "joint or independent");
  render->add_option("--out", common.out, "Output directory");

  auto* run = app.add_subcommand("run", "Run an experiment from a JSON configuration");
  run->add_option("config", config_path, "Configuration file")->required();

  auto* show = app.add_subcommand("config", "Print the canonical configuration of an experiment");
  std::string show_experiment;
  show->add_option("experiment", show_experiment, "params, train, grid, aliasing, curves or render")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      return execute(ticnn::parse_run_config(ticnn::io::read_text(config_path)));
    }
    if (*show) {
      // A render run needs input files; show its defaults through a grid run.
      const bool render_defaults = show_experiment == "render";
      doc["experiment"] = render_defaults ? "grid" : show_experiment;
      auto shown = json::parse(ticnn::to_json(ticnn::parse_run_config(doc.dump())));
      shown["experiment"] = show_experiment;
      std::cout << shown.dump(2) << '\n';
      return 0;
    }
    if (*params) {
      doc["experiment"] = "params";
      if (input) doc["model"]["input_size"] = *input;
      if (classes) doc["model"]["classes"] = *classes;
    } else if (*train) {
      doc["experiment"] = "train";
    } else if (*grid) {
      doc["experiment"] = "grid";
      if (max_shift) doc["grid"]["max_shift"] = *max_shift;
      if (step) doc["grid"]["step"] = *step;
      if (!axes.empty()) doc["grid"]["axes"] = axes;
      if (!translator.empty()) doc["grid"]["translator"] = translator;
      if (!scaling.empty()) doc["grid"]["scaling"] = scaling;
      if (!sweep.empty()) doc["grid"]["sweep"] = sweep;
      if (!sweep_values.empty()) doc["grid"]["sweep_values"] = sweep_values;
    } else if (*aliasing) {
      doc["experiment"] = "aliasing";
      if (!ks.empty()) doc["aliasing"]["ks"] = ks;
      if (alias_shift) doc["aliasing"]["max_shift"] = *alias_shift;
      // The aliasing toys take their padding from the aliasing section.
      if (!common.padding.empty()) doc["aliasing"]["padding"] = std::exchange(common.padding, {});
    } else if (*curves) {
      doc["experiment"] = "curves";
      if (!distortion.empty()) doc["curves"]["distortion"] = distortion;
      if (steps) doc["curves"]["steps"] = *steps;
      if (curve_step) doc["curves"]["step"] = *curve_step;
      if (trials) doc["curves"]["mlds"]["trials"] = *trials;
      if (!reference.empty()) doc["curves"]["reference"] = reference;
    } else if (*render) {
      doc["experiment"] = "render";
      doc["render"]["inputs"] = inputs;
      if (!render_scaling.empty()) doc["render"]["scaling"] = render_scaling;
    }
    apply_common(doc, common);
    return execute(ticnn::parse_run_config(doc.dump()));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ticnn::exit_code_for(e);
  }
}
