#include "ticnn/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ticnn/rng.hpp"
#include "ticnn/simd/kernels.hpp"
#include "ticnn/stats.hpp"
#include "ticnn/transforms.hpp"

namespace ticnn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Typed access to one JSON object with path-qualified errors and a check
// against unknown keys.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return as<T>(j_.at(key), at(key));
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key) + ": missing");
    return as<T>(j_.at(key), at(key));
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, at(key));
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(at(key) + ": unknown field");
    }
  }

 private:
  template <class T>
  static T as(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, long>) {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path + ": wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
auto parse_at(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Experiment parse_experiment(std::string_view s) {
  for (auto e : {Experiment::params, Experiment::train, Experiment::grid, Experiment::aliasing,
                 Experiment::curves, Experiment::render}) {
    if (experiment_name(e) == s) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(s) +
                    "' (expected params, train, grid, aliasing, curves or render)");
}

PaddingMode parse_padding(std::string_view s) {
  if (s == "zero") return PaddingMode::zero;
  if (s == "circular") return PaddingMode::circular;
  throw ConfigError("expected zero or circular, got '" + std::string(s) + "'");
}
std::string_view padding_name(PaddingMode m) { return m == PaddingMode::zero ? "zero" : "circular"; }

Translator parse_translator(std::string_view s) {
  if (s == "mosaic") return Translator::mosaic;
  if (s == "circular") return Translator::circular;
  throw ConfigError("expected mosaic or circular, got '" + std::string(s) + "'");
}
std::string_view translator_name(Translator t) { return t == Translator::mosaic ? "mosaic" : "circular"; }

GridAxes parse_axes(std::string_view s) {
  if (s == "both") return GridAxes::both;
  if (s == "horizontal") return GridAxes::horizontal;
  if (s == "vertical") return GridAxes::vertical;
  throw ConfigError("expected both, horizontal or vertical, got '" + std::string(s) + "'");
}
std::string_view axes_name(GridAxes a) {
  return a == GridAxes::both ? "both" : a == GridAxes::horizontal ? "horizontal" : "vertical";
}

SweepKind parse_sweep(std::string_view s) {
  if (s == "none") return SweepKind::none;
  if (s == "rotation") return SweepKind::rotation;
  if (s == "scale") return SweepKind::scale;
  throw ConfigError("expected none, rotation or scale, got '" + std::string(s) + "'");
}
std::string_view sweep_name(SweepKind k) {
  return k == SweepKind::none ? "none" : k == SweepKind::rotation ? "rotation" : "scale";
}

TransformKind parse_distortion(std::string_view s) {
  if (s == "translation") return TransformKind::translation;
  if (s == "rotation") return TransformKind::rotation;
  if (s == "scale") return TransformKind::scale;
  throw ConfigError("expected translation, rotation or scale, got '" + std::string(s) + "'");
}
std::string_view distortion_name(TransformKind k) {
  return k == TransformKind::translation ? "translation" : k == TransformKind::rotation ? "rotation" : "scale";
}

std::string_view scaling_name(io::HeatmapScaling s) {
  return s == io::HeatmapScaling::joint ? "joint" : "independent";
}

void require_file(const std::string& path, const std::string& field) {
  if (path.empty()) throw ConfigError(field + ": missing");
  if (!fs::is_regular_file(path)) throw ConfigError(field + ": file not found: " + path);
}

std::string with_commas(std::size_t v) {
  std::string digits = std::to_string(v), out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

// CSV rows of pre-formatted fields.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : width_(header.size()) { add(header); }

  void add(const std::vector<std::string>& row) {
    if (row.size() != width_) throw DataError("CSV row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) text_ += (i ? "," : "") + row[i];
    text_ += '\n';
  }

  const std::string& text() const noexcept { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

std::string num(double v) { return io::format_double(v); }
std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  void text(const std::string& name, std::string_view body) {
    io::write_text(root_ / name, body);
    names_.insert(name);
  }
  void heatmap(const std::string& stem, const Grid& g, io::ValueRange range, std::size_t cell) {
    io::write_heatmap(g, root_ / (stem + ".ppm"), range, cell);
    names_.insert(stem + ".ppm");
    names_.insert(stem + ".csv");
  }
  void weights(const std::string& name, const ParameterStore& store) {
    io::save_weights(store, root_ / name);
    names_.insert(name);
  }

  const fs::path& root() const noexcept { return root_; }
  std::vector<fs::path> artifacts() const { return {names_.begin(), names_.end()}; }

 private:
  fs::path root_;
  std::set<std::string> names_;
};

void say(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << '\n' << std::flush;
}

std::uint64_t variant_stream(Variant v) { return static_cast<std::uint64_t>(v); }

TrainConfig train_config_for(const RunConfig& config, std::uint64_t stream) {
  TrainConfig t = config.train;
  t.seed = derive_seed(config.seed, 300 + stream);
  return t;
}

Model obtain_model(const RunConfig& config, ArchitectureSpec spec, Variant v, const Dataset& train_set,
                   const Model* backbone, std::ostream* log) {
  Model m = make_model(std::move(spec), derive_seed(config.seed, 200 + variant_stream(v)));
  if (backbone) {
    for (const auto& layer : m.spec.layers) {
      if (layer.kind != LayerKind::conv) continue;
      for (const auto& name : {weight_name(layer), bias_name(layer)}) {
        m.params.get(name).value = backbone->params.get(name).value;
      }
    }
    sync_trainable_flags(m);
  }
  const auto it = config.weights.find(std::string(variant_name(v)));
  if (it != config.weights.end()) {
    io::load_weights_into(m, it->second);
    say(log, "loaded " + std::string(variant_name(v)) + " weights from " + it->second);
    return m;
  }
  say(log, "training " + std::string(variant_name(v)) + (backbone ? " head on the shared backbone" : ""));
  train(m, train_set, train_config_for(config, variant_stream(v)));
  return m;
}

std::string summary_report(Variant v, const AccuracyGrid& g, const RobustnessSummary& s) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << variant_name(v) << ": center " << g.center() << "  accuracy " << s.mean_accuracy << " +- "
      << s.std_accuracy << "  loss " << s.mean_loss << " +- " << s.std_loss << '\n';
  return out.str();
}

std::vector<AffineParams> sweep_transforms(const GridSection& g) {
  std::vector<AffineParams> out;
  for (double v : g.sweep_values) {
    out.push_back(g.sweep == SweepKind::rotation ? make_rotation(v) : make_scale(v));
  }
  return out;
}

// ---- experiments -----------------------------------------------------------

std::string run_params(const RunConfig& config, ArtifactWriter& out) {
  CsvTable table({"variant", "input", "classes", "total", "trainable", "frozen"});
  std::ostringstream report;
  for (Variant v : config.variants) {
    const auto spec = model_spec(config, v);
    const auto r = count_parameters(spec);
    table.add({std::string(variant_name(v)), std::to_string(spec.input_size), std::to_string(spec.num_classes),
               std::to_string(r.total), std::to_string(r.trainable), std::to_string(r.frozen())});
    CsvTable layers({"layer", "parameters", "trainable"});
    for (const auto& e : r.breakdown) layers.add({e.name, std::to_string(e.count), e.trainable ? "1" : "0"});
    out.text("params_" + std::string(variant_name(v)) + "_layers.csv", layers.text());
    report << variant_name(v) << " (input " << spec.input_size << ", classes " << spec.num_classes << ")\n"
           << "  total      " << with_commas(r.total) << "\n"
           << "  trainable  " << with_commas(r.trainable) << "\n"
           << "  frozen     " << with_commas(r.frozen()) << "\n";
  }
  out.text("params.csv", table.text());
  return report.str();
}

std::string run_train(const RunConfig& config, ArtifactWriter& out, std::ostream* log) {
  auto [train_set, test_set] = load_data(config);
  const auto trained = train_variants(config, train_set, log);
  CsvTable acc({"variant", "test_accuracy"});
  std::ostringstream report;
  for (const auto& t : trained) {
    const double a = evaluate_accuracy(t.model, test_set);
    acc.add({std::string(variant_name(t.variant)), num(a)});
    out.weights("weights_" + std::string(variant_name(t.variant)) + ".bin", t.model.params);
    report << variant_name(t.variant) << ": test accuracy " << a << '\n';
  }
  out.text("accuracy.csv", acc.text());
  return report.str();
}

std::string run_grid(const RunConfig& config, ArtifactWriter& out, std::ostream* log) {
  auto [train_set, test_set] = load_data(config);
  const auto trained = train_variants(config, train_set, log);
  const auto& gs = config.grid;
  std::vector<Grid> acc_grids, loss_grids;
  CsvTable summary({"variant", "center_accuracy", "mean_accuracy", "std_accuracy", "mean_loss", "std_loss"});
  std::string report;
  for (const auto& t : trained) {
    say(log, "evaluating " + std::string(variant_name(t.variant)) + " on the displacement grid");
    const auto predictor = model_predictor(t.model);
    auto grid = evaluate_grid(predictor, test_set, gs.spec, gs.translator, config.workers);
    const auto s = summarize(grid);
    summary.add({std::string(variant_name(t.variant)), num(grid.center()), num(s.mean_accuracy),
                 num(s.std_accuracy), num(s.mean_loss), num(s.std_loss)});
    report += summary_report(t.variant, grid, s);
    loss_grids.push_back(relative_loss_grid(grid));
    acc_grids.push_back(std::move(grid));
    if (gs.sweep != SweepKind::none) {
      const auto sweep = sweep_transforms(gs);
      const auto values = evaluate_sweep(predictor, test_set, sweep, Interpolation::bilinear, config.workers);
      CsvTable table({std::string(sweep_name(gs.sweep)), "accuracy"});
      for (std::size_t i = 0; i < values.size(); ++i) table.add({num(gs.sweep_values[i]), num(values[i])});
      out.text("sweep_" + std::string(variant_name(t.variant)) + ".csv", table.text());
    }
  }
  const auto acc_ranges = io::heatmap_ranges(acc_grids, gs.scaling);
  const auto loss_ranges = io::heatmap_ranges(loss_grids, gs.scaling);
  const auto normalized = normalize_grids(loss_grids);
  for (std::size_t i = 0; i < trained.size(); ++i) {
    const std::string stem = "grid_" + std::string(variant_name(trained[i].variant));
    out.heatmap(stem + "_accuracy", acc_grids[i], acc_ranges[i], gs.cell_pixels);
    out.heatmap(stem + "_loss", loss_grids[i], loss_ranges[i], gs.cell_pixels);
    out.text(stem + "_loss_normalized.csv", io::grid_to_csv(normalized.grids[i]));
  }
  out.text("summary.csv", summary.text());
  return report;
}

std::string run_aliasing(const RunConfig& config, ArtifactWriter& out, std::ostream* log) {
  auto [train_set, test_set] = load_data(config);
  const auto& a = config.aliasing;
  CsvTable report_table({"k", "period", "confidence"});
  std::ostringstream report;
  for (std::size_t k : a.ks) {
    ToyConfig tc;
    tc.channels = config.model.channels;
    tc.pool = PoolSpec(k);
    tc.pooled_stages = 1;
    tc.padding = a.padding;
    tc.input_size = train_set.images.shape().h;
    tc.num_classes = train_set.num_classes;
    Model m = make_model(build_toy_variant(Variant::final_gap, tc), derive_seed(config.seed, 400 + k));
    say(log, "training the pool-" + std::to_string(k) + " toy model");
    train(m, train_set, train_config_for(config, 400 + k));
    const long max_shift = a.max_shift > 0 ? a.max_shift : static_cast<long>(4 * k);
    const auto curve = shift_curve(model_predictor(m), test_set, max_shift, a.translator, config.workers);
    const auto p = detect_period(curve);
    CsvTable table({"shift", "accuracy"});
    for (std::size_t s = 0; s < curve.size(); ++s) table.add({std::to_string(s), num(curve[s])});
    out.text("aliasing_k" + std::to_string(k) + ".csv", table.text());
    report_table.add({std::to_string(k), p.period ? std::to_string(*p.period) : "none", num(p.confidence)});
    report << "k=" << k << " period=" << (p.period ? std::to_string(*p.period) : "none")
           << " confidence=" << num(p.confidence) << '\n';
  }
  out.text("aliasing_report.csv", report_table.text());
  return report.str();
}

std::vector<Tensor> distortion_sequence(const RunConfig& config, const Tensor& image) {
  const auto& c = config.curves;
  const double size = static_cast<double>(image.shape().w);
  const double radius = c.aperture_radius > 0.0 ? c.aperture_radius : 0.4 * size;
  const double softness = c.aperture_softness > 0.0 ? c.aperture_softness : 0.1 * size;
  std::vector<Tensor> seq;
  for (std::size_t n = 0; n <= c.steps; ++n) {
    const double amount = static_cast<double>(n) * c.step;
    TransformRequest req;
    req.kind = c.distortion;
    req.dx = amount;
    req.degrees = amount;
    req.factor = 1.0 + amount;
    seq.push_back(apply_aperture(apply_affine(image, make_affine(req)), radius, softness));
  }
  return seq;
}

std::string run_curves(const RunConfig& config, ArtifactWriter& out, std::ostream* log) {
  const auto& c = config.curves;
  auto [train_set, test_set] = load_data(config);
  if (c.image_index >= test_set.size()) {
    throw ConfigError("$.curves.image_index: " + std::to_string(c.image_index) + " is beyond the " +
                      std::to_string(test_set.size()) + " test images");
  }
  RunConfig flat_config = config;
  flat_config.variants = {Variant::flat};
  flat_config.shared_backbone = false;
  auto trained = train_variants(flat_config, train_set, log);
  auto backbone = std::make_shared<const Model>(std::move(trained.front().model));
  const auto seq = distortion_sequence(config, test_set.images.slice_batch(c.image_index, 1));

  std::optional<ResponseCurve> reference;
  if (!c.reference.empty()) reference = io::curve_from_csv(io::read_text(c.reference));

  std::vector<std::tuple<MetricVariant, CurveMethod, ResponseCurve>> curves;
  for (std::size_t mi = 0; mi < c.metrics.size(); ++mi) {
    const auto metric = variant_metric(c.metrics[mi], backbone);
    std::vector<FeatureSet> features(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) features[i] = extract_features(metric, seq[i]);
    const PairDistance dist = [&](std::size_t x, std::size_t y) {
      return feature_distance(metric, features[x], features[y]);
    };
    MLDSConfig mlds = c.mlds;
    mlds.seed = derive_seed(config.seed, 500 + mi);
    const std::string mname(metric_variant_name(c.metrics[mi]));
    say(log, "building " + mname + " response curves");
    for (CurveMethod method : c.methods) {
      auto curve = build_response_curve(method, seq.size(), dist, mlds, c.level_step);
      out.text("curve_" + mname + "_" + std::string(curve_method_name(method)) + ".csv", io::curve_to_csv(curve));
      if (method == CurveMethod::mlds && !curve.degenerate) {
        auto psi = build_response_curve(CurveMethod::orig_dist, seq.size(), dist, std::nullopt, c.level_step).values;
        const double top = *std::max_element(psi.begin(), psi.end());
        for (auto& v : psi) v /= top;
        out.text("judgments_" + mname + ".csv", io::judgments_to_csv(simulate_mlds(psi, mlds)));
      }
      curves.emplace_back(c.metrics[mi], method, std::move(curve));
    }
  }
  if (!reference) {
    for (const auto& [m, method, curve] : curves) {
      if (method == CurveMethod::sequential && (!reference || m == MetricVariant::lflat)) reference = curve;
    }
  }
  CsvTable stats_table({"metric", "method", "mu", "sigma", "spearman", "pearson"});
  std::ostringstream report;
  for (const auto& [m, method, curve] : curves) {
    std::vector<std::string> row{std::string(metric_variant_name(m)), std::string(curve_method_name(method))};
    try {
      if (!reference) throw DataError("no reference curve");
      const auto d = compare_curves(curve, *reference);
      row.insert(row.end(), {num(d.mu), num(d.sigma), opt_num(d.spearman), opt_num(d.pearson)});
    } catch (const Error& e) {
      row.insert(row.end(), {"NA", "NA", "NA", "NA"});
      say(log, std::string(metric_variant_name(m)) + "/" + std::string(curve_method_name(method)) +
                   ": no comparison (" + e.what() + ")");
    }
    report << row[0] << " " << row[1] << ": mu=" << row[2] << " sigma=" << row[3] << " S=" << row[4]
           << " P=" << row[5] << '\n';
    stats_table.add(row);
  }
  if (reference) out.text("curve_reference.csv", io::curve_to_csv(*reference));
  out.text("curve_stats.csv", stats_table.text());
  return report.str();
}

std::string run_render(const RunConfig& config, ArtifactWriter& out) {
  const auto& r = config.render;
  std::vector<Grid> grids;
  for (const auto& path : r.inputs) grids.push_back(io::grid_from_csv(io::read_text(path)));
  const auto ranges = io::heatmap_ranges(grids, r.scaling);
  std::ostringstream report;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto stem = fs::path(r.inputs[i]).stem().string();
    out.heatmap(stem, grids[i], ranges[i], r.cell_pixels);
    report << stem << ".ppm: range [" << num(ranges[i].lo) << ", " << num(ranges[i].hi) << "]\n";
  }
  return report.str();
}

}  // namespace

std::string_view experiment_name(Experiment e) noexcept {
  switch (e) {
    case Experiment::params: return "params";
    case Experiment::train: return "train";
    case Experiment::grid: return "grid";
    case Experiment::aliasing: return "aliasing";
    case Experiment::curves: return "curves";
    case Experiment::render: return "render";
  }
  return "?";
}

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("$: invalid JSON: ") + e.what());
  }
  Section root(doc, "$");
  RunConfig c;
  const auto schema = root.require<std::string>("schema");
  if (schema != kRunSchema) {
    throw ConfigError("$.schema: expected '" + std::string(kRunSchema) + "', got '" + schema + "'");
  }
  c.experiment = parse_at("$.experiment", [&] { return parse_experiment(root.require<std::string>("experiment")); });
  c.seed = root.get<std::uint64_t>("seed", 0);
  c.output_dir = root.get<std::string>("output_dir", "");
  c.workers = root.get<std::size_t>("workers", 0);
  c.shared_backbone = root.get<bool>("shared_backbone", true);
  if (root.has("variants")) {
    const auto names = root.get<std::vector<std::string>>("variants", {});
    if (names.empty()) throw ConfigError("$.variants: must not be empty");
    c.variants.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      c.variants.push_back(parse_at("$.variants[" + std::to_string(i) + "]", [&] { return parse_variant(names[i]); }));
    }
  }

  {
    auto m = root.child("model");
    const auto default_scale = c.experiment == Experiment::params ? "vgg16" : "toy";
    const auto scale = m.get<std::string>("scale", default_scale);
    if (scale == "vgg16") c.model.scale = ModelScale::vgg16;
    else if (scale == "toy") c.model.scale = ModelScale::toy;
    else throw ConfigError(m.at("scale") + ": expected vgg16 or toy");
    c.model.input_size = m.get<std::size_t>("input_size", 0);
    c.model.classes = m.get<std::size_t>("classes", 0);
    c.model.channels = m.get<std::vector<std::size_t>>("channels", c.model.channels);
    if (c.model.channels.empty() || std::count(c.model.channels.begin(), c.model.channels.end(), 0u)) {
      throw ConfigError(m.at("channels") + ": needs at least one positive width");
    }
    c.model.pool = m.get<std::size_t>("pool", 2);
    if (c.model.pool < 1) throw ConfigError(m.at("pool") + ": must be >= 1");
    if (m.has("pooled_stages")) c.model.pooled_stages = m.get<std::size_t>("pooled_stages", 0);
    c.model.padding = parse_at(m.at("padding"), [&] { return parse_padding(m.get<std::string>("padding", "zero")); });
    m.finish();
  }
  {
    auto d = root.child("data");
    const auto source = d.get<std::string>("source", "synthetic");
    if (source == "synthetic") c.data.source = DataSource::synthetic;
    else if (source == "idx") c.data.source = DataSource::idx;
    else throw ConfigError(d.at("source") + ": expected synthetic or idx");
    c.data.train_images = d.get<std::string>("train_images", "");
    c.data.train_labels = d.get<std::string>("train_labels", "");
    c.data.test_images = d.get<std::string>("test_images", "");
    c.data.test_labels = d.get<std::string>("test_labels", "");
    c.data.train_count = d.get<std::size_t>("train_count", c.data.train_count);
    c.data.test_count = d.get<std::size_t>("test_count", c.data.test_count);
    c.data.size = d.get<std::size_t>("size", c.data.size);
    c.data.noise = d.get<double>("noise", c.data.noise);
    if (c.data.size < 4) throw ConfigError(d.at("size") + ": must be >= 4");
    if (c.data.test_count < 1) throw ConfigError(d.at("test_count") + ": must be >= 1");
    if (!(c.data.noise >= 0.0)) throw ConfigError(d.at("noise") + ": must be >= 0");
    if (c.data.source == DataSource::idx && c.experiment != Experiment::params && c.experiment != Experiment::render) {
      require_file(c.data.train_images, d.at("train_images"));
      require_file(c.data.train_labels, d.at("train_labels"));
      require_file(c.data.test_images, d.at("test_images"));
      require_file(c.data.test_labels, d.at("test_labels"));
    }
    d.finish();
  }
  {
    auto t = root.child("train");
    c.train.learning_rate = t.get<double>("learning_rate", c.train.learning_rate);
    c.train.momentum = t.get<double>("momentum", c.train.momentum);
    c.train.batch_size = t.get<std::size_t>("batch_size", c.train.batch_size);
    c.train.epochs = t.get<std::size_t>("epochs", c.train.epochs);
    parse_at("$.train", [&] {
      validate(c.train);
      return 0;
    });
    t.finish();
  }
  {
    auto g = root.child("grid");
    c.grid.spec.max_shift = g.get<long>("max_shift", c.grid.spec.max_shift);
    c.grid.spec.step = g.get<long>("step", c.grid.spec.step);
    if (c.grid.spec.max_shift < 0) throw ConfigError(g.at("max_shift") + ": must be >= 0");
    if (c.grid.spec.step < 1) throw ConfigError(g.at("step") + ": must be >= 1");
    c.grid.spec.axes = parse_at(g.at("axes"), [&] { return parse_axes(g.get<std::string>("axes", "both")); });
    c.grid.translator =
        parse_at(g.at("translator"), [&] { return parse_translator(g.get<std::string>("translator", "mosaic")); });
    c.grid.scaling = parse_at(g.at("scaling"),
                              [&] { return io::parse_heatmap_scaling(g.get<std::string>("scaling", "joint")); });
    c.grid.cell_pixels = g.get<std::size_t>("cell_pixels", c.grid.cell_pixels);
    if (c.grid.cell_pixels < 1) throw ConfigError(g.at("cell_pixels") + ": must be >= 1");
    c.grid.sweep = parse_at(g.at("sweep"), [&] { return parse_sweep(g.get<std::string>("sweep", "none")); });
    c.grid.sweep_values = g.get<std::vector<double>>("sweep_values", {});
    if (c.grid.sweep != SweepKind::none && c.grid.sweep_values.empty()) {
      throw ConfigError(g.at("sweep_values") + ": needed when a sweep is requested");
    }
    for (double v : c.grid.sweep_values) {
      if (c.grid.sweep == SweepKind::scale && !(v > 0.0)) throw ConfigError(g.at("sweep_values") + ": scale factors must be > 0");
    }
    g.finish();
  }
  {
    auto a = root.child("aliasing");
    c.aliasing.ks = a.get<std::vector<std::size_t>>("ks", c.aliasing.ks);
    if (c.aliasing.ks.empty()) throw ConfigError(a.at("ks") + ": must not be empty");
    for (std::size_t k : c.aliasing.ks) {
      if (k < 1) throw ConfigError(a.at("ks") + ": pooling kernels must be >= 1");
      if (c.experiment == Experiment::aliasing && c.data.size % k != 0) {
        throw ConfigError(a.at("ks") + ": kernel " + std::to_string(k) + " does not divide the image size " +
                          std::to_string(c.data.size));
      }
    }
    c.aliasing.max_shift = a.get<long>("max_shift", 0);
    if (c.aliasing.max_shift < 0) throw ConfigError(a.at("max_shift") + ": must be >= 0");
    c.aliasing.padding =
        parse_at(a.at("padding"), [&] { return parse_padding(a.get<std::string>("padding", "circular")); });
    c.aliasing.translator =
        parse_at(a.at("translator"), [&] { return parse_translator(a.get<std::string>("translator", "mosaic")); });
    a.finish();
  }
  {
    auto cv = root.child("curves");
    c.curves.distortion = parse_at(cv.at("distortion"), [&] {
      return parse_distortion(cv.get<std::string>("distortion", "translation"));
    });
    c.curves.steps = cv.get<std::size_t>("steps", c.curves.steps);
    if (c.curves.steps < 3) throw ConfigError(cv.at("steps") + ": must be >= 3");
    c.curves.step = cv.get<double>("step", c.curves.step);
    c.curves.level_step = cv.get<double>("level_step", c.curves.level_step);
    if (!(c.curves.level_step > 0.0)) throw ConfigError(cv.at("level_step") + ": must be > 0");
    if (c.curves.distortion == TransformKind::scale &&
        !(1.0 + static_cast<double>(c.curves.steps) * c.curves.step > 0.0 && 1.0 + c.curves.step > 0.0)) {
      throw ConfigError(cv.at("step") + ": scale factors must stay > 0");
    }
    if (cv.has("metrics")) {
      const auto names = cv.get<std::vector<std::string>>("metrics", {});
      if (names.empty()) throw ConfigError(cv.at("metrics") + ": must not be empty");
      c.curves.metrics.clear();
      for (const auto& n : names) c.curves.metrics.push_back(parse_at(cv.at("metrics"), [&] { return parse_metric_variant(n); }));
    }
    if (cv.has("methods")) {
      const auto names = cv.get<std::vector<std::string>>("methods", {});
      if (names.empty()) throw ConfigError(cv.at("methods") + ": must not be empty");
      c.curves.methods.clear();
      for (const auto& n : names) c.curves.methods.push_back(parse_at(cv.at("methods"), [&] { return parse_curve_method(n); }));
    }
    auto ml = cv.child("mlds");
    c.curves.mlds.sigma = ml.get<double>("sigma", c.curves.mlds.sigma);
    c.curves.mlds.trials = ml.get<std::size_t>("trials", c.curves.mlds.trials);
    c.curves.mlds.max_iterations = ml.get<std::size_t>("max_iterations", c.curves.mlds.max_iterations);
    c.curves.mlds.gradient_tolerance = ml.get<double>("gradient_tolerance", c.curves.mlds.gradient_tolerance);
    parse_at(cv.at("mlds"), [&] {
      validate(c.curves.mlds);
      return 0;
    });
    ml.finish();
    c.curves.reference = cv.get<std::string>("reference", "");
    if (!c.curves.reference.empty() && c.experiment == Experiment::curves) {
      require_file(c.curves.reference, cv.at("reference"));
    }
    c.curves.aperture_radius = cv.get<double>("aperture_radius", 0.0);
    c.curves.aperture_softness = cv.get<double>("aperture_softness", 0.0);
    if (c.curves.aperture_radius < 0.0) throw ConfigError(cv.at("aperture_radius") + ": must be >= 0");
    if (c.curves.aperture_softness < 0.0) throw ConfigError(cv.at("aperture_softness") + ": must be >= 0");
    c.curves.image_index = cv.get<std::size_t>("image_index", 0);
    cv.finish();
  }
  {
    auto r = root.child("render");
    c.render.inputs = r.get<std::vector<std::string>>("inputs", {});
    c.render.scaling = parse_at(r.at("scaling"),
                                [&] { return io::parse_heatmap_scaling(r.get<std::string>("scaling", "joint")); });
    c.render.cell_pixels = r.get<std::size_t>("cell_pixels", c.render.cell_pixels);
    if (c.render.cell_pixels < 1) throw ConfigError(r.at("cell_pixels") + ": must be >= 1");
    if (c.experiment == Experiment::render) {
      if (c.render.inputs.empty()) throw ConfigError(r.at("inputs") + ": needs at least one grid CSV");
      for (std::size_t i = 0; i < c.render.inputs.size(); ++i) {
        require_file(c.render.inputs[i], r.at("inputs") + "[" + std::to_string(i) + "]");
      }
    }
    r.finish();
  }
  {
    auto w = root.child("weights");
    const json entries = doc.value("weights", json::object());
    for (const auto& [key, value] : entries.items()) {
      parse_at(w.at(key), [&] { return parse_variant(key); });
      const auto path = w.get<std::string>(key, "");
      if (c.experiment != Experiment::params && c.experiment != Experiment::render) require_file(path, w.at(key));
      c.weights[std::string(variant_name(parse_variant(key)))] = path;
    }
    w.finish();
  }
  root.finish();

  // Dry-run the architectures so shape problems surface as config errors.
  if (c.experiment != Experiment::render && c.experiment != Experiment::aliasing) {
    for (Variant v : c.variants) {
      try {
        model_spec(c, v);
      } catch (const DimensionError& e) {
        throw ConfigError(std::string("$.model: ") + e.what());
      }
    }
  }
  return c;
}

std::string to_json(const RunConfig& c) {
  json variants = json::array();
  for (Variant v : c.variants) variants.push_back(variant_name(v));
  json model{{"scale", c.model.scale == ModelScale::vgg16 ? "vgg16" : "toy"},
             {"input_size", c.model.input_size},
             {"classes", c.model.classes},
             {"channels", c.model.channels},
             {"pool", c.model.pool},
             {"padding", padding_name(c.model.padding)}};
  if (c.model.pooled_stages) model["pooled_stages"] = *c.model.pooled_stages;
  json data{{"source", c.data.source == DataSource::idx ? "idx" : "synthetic"},
            {"train_images", c.data.train_images},
            {"train_labels", c.data.train_labels},
            {"test_images", c.data.test_images},
            {"test_labels", c.data.test_labels},
            {"train_count", c.data.train_count},
            {"test_count", c.data.test_count},
            {"size", c.data.size},
            {"noise", c.data.noise}};
  json train{{"learning_rate", c.train.learning_rate},
             {"momentum", c.train.momentum},
             {"batch_size", c.train.batch_size},
             {"epochs", c.train.epochs}};
  json grid{{"max_shift", c.grid.spec.max_shift},
            {"step", c.grid.spec.step},
            {"axes", axes_name(c.grid.spec.axes)},
            {"translator", translator_name(c.grid.translator)},
            {"scaling", scaling_name(c.grid.scaling)},
            {"cell_pixels", c.grid.cell_pixels},
            {"sweep", sweep_name(c.grid.sweep)},
            {"sweep_values", c.grid.sweep_values}};
  json aliasing{{"ks", c.aliasing.ks},
                {"max_shift", c.aliasing.max_shift},
                {"padding", padding_name(c.aliasing.padding)},
                {"translator", translator_name(c.aliasing.translator)}};
  json metrics = json::array(), methods = json::array();
  for (auto m : c.curves.metrics) metrics.push_back(metric_variant_name(m));
  for (auto m : c.curves.methods) methods.push_back(curve_method_name(m));
  json curves{{"distortion", distortion_name(c.curves.distortion)},
              {"steps", c.curves.steps},
              {"step", c.curves.step},
              {"level_step", c.curves.level_step},
              {"metrics", metrics},
              {"methods", methods},
              {"mlds",
               {{"sigma", c.curves.mlds.sigma},
                {"trials", c.curves.mlds.trials},
                {"max_iterations", c.curves.mlds.max_iterations},
                {"gradient_tolerance", c.curves.mlds.gradient_tolerance}}},
              {"reference", c.curves.reference},
              {"aperture_radius", c.curves.aperture_radius},
              {"aperture_softness", c.curves.aperture_softness},
              {"image_index", c.curves.image_index}};
  json render{{"inputs", c.render.inputs}, {"scaling", scaling_name(c.render.scaling)},
              {"cell_pixels", c.render.cell_pixels}};
  json weights = json::object();
  for (const auto& [k, v] : c.weights) weights[k] = v;
  json doc{{"schema", kRunSchema},
           {"experiment", experiment_name(c.experiment)},
           {"seed", c.seed},
           {"output_dir", c.output_dir},
           {"workers", c.workers},
           {"shared_backbone", c.shared_backbone},
           {"variants", variants},
           {"model", model},
           {"data", data},
           {"train", train},
           {"grid", grid},
           {"aliasing", aliasing},
           {"curves", curves},
           {"render", render},
           {"weights", weights}};
  return doc.dump(2) + "\n";
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

fs::path resolve_output_dir(const RunConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "ticnn_out";
}

ArchitectureSpec model_spec(const RunConfig& config, Variant variant) {
  const auto& m = config.model;
  if (m.scale == ModelScale::vgg16) {
    return build_vgg16_variant(variant, m.input_size ? m.input_size : 256, m.classes ? m.classes : 160);
  }
  ToyConfig tc;
  tc.channels = m.channels;
  tc.pool = PoolSpec(m.pool);
  tc.pooled_stages = m.pooled_stages;
  tc.padding = m.padding;
  tc.input_size = m.input_size ? m.input_size : config.data.size;
  tc.num_classes = m.classes ? m.classes : 10;
  return build_toy_variant(variant, tc);
}

std::pair<Dataset, Dataset> load_data(const RunConfig& config) {
  const auto& d = config.data;
  const std::size_t size =
      config.model.scale == ModelScale::toy && config.model.input_size ? config.model.input_size : d.size;
  Dataset train_set, test_set;
  if (d.source == DataSource::synthetic) {
    SyntheticDigitsConfig sc;
    sc.size = size;
    sc.noise = d.noise;
    sc.count = d.train_count;
    sc.seed = derive_seed(config.seed, 10);
    train_set = make_synthetic_digits(sc);
    sc.count = d.test_count;
    sc.seed = derive_seed(config.seed, 11);
    test_set = make_synthetic_digits(sc);
  } else {
    const std::size_t classes = config.model.classes ? config.model.classes : 10;
    train_set = io::load_idx(d.train_images, d.train_labels, classes);
    test_set = io::load_idx(d.test_images, d.test_labels, classes);
    if (train_set.size() > d.train_count) train_set = train_set.slice(0, d.train_count);
    if (test_set.size() > d.test_count) test_set = test_set.slice(0, d.test_count);
    train_set = center_resize(train_set, size);
    test_set = center_resize(test_set, size);
  }
  return {std::move(train_set), std::move(test_set)};
}

std::vector<TrainedVariant> train_variants(const RunConfig& config, const Dataset& train_set, std::ostream* log) {
  std::vector<TrainedVariant> out;
  std::optional<Model> base;
  if (config.shared_backbone) {
    base = obtain_model(config, model_spec(config, Variant::base), Variant::base, train_set, nullptr, log);
  }
  for (Variant v : config.variants) {
    if (base && v == Variant::base) {
      out.push_back({v, *base});
    } else if (base) {
      out.push_back({v, obtain_model(config, with_frozen_backbone(model_spec(config, v)), v, train_set, &*base, log)});
    } else {
      out.push_back({v, obtain_model(config, model_spec(config, v), v, train_set, nullptr, log)});
    }
  }
  return out;
}

RunResult run(const RunConfig& config, std::ostream* log) {
  const auto dir = resolve_output_dir(config);
  ArtifactWriter out(dir);
  std::string report;
  switch (config.experiment) {
    case Experiment::params: report = run_params(config, out); break;
    case Experiment::train: report = run_train(config, out, log); break;
    case Experiment::grid: report = run_grid(config, out, log); break;
    case Experiment::aliasing: report = run_aliasing(config, out, log); break;
    case Experiment::curves: report = run_curves(config, out, log); break;
    case Experiment::render: report = run_render(config, out); break;
  }
  const auto canonical = to_json(config);
  out.text("config.json", canonical);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
  json artifacts = json::array();
  for (const auto& a : out.artifacts()) artifacts.push_back(a.string());
  json manifest{{"schema", "ticnn.manifest/1"},
                {"run_schema", kRunSchema},
                {"experiment", experiment_name(config.experiment)},
                {"seed", config.seed},
                {"config_hash", std::string("fnv1a64:") + hash},
                {"version", kVersion},
                {"simd_backend", simd::backend_name(simd::active().backend)},
                {"artifacts", artifacts}};
  out.text("manifest.json", manifest.dump(2) + "\n");
  return {dir, out.artifacts(), report};
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 2;
}

}  // namespace ticnn
