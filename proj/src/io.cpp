#include "ticnn/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ticnn::io {

namespace {

using json = nlohmann::json;

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(what_ + " is truncated: needed " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", " + std::to_string(bytes_.size() - pos_) + " left");
    }
  }
  std::uint32_t u32_be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }
  std::uint32_t u32_le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32_le() { return std::bit_cast<float>(u32_le()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw DataError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

void check_magic(std::uint32_t found, std::uint32_t expected, const fs::path& path) {
  if (found != expected) {
    throw DataError("bad IDX magic in '" + path.string() + "': expected " + hex32(expected) + ", found " +
                    hex32(found));
  }
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

// Non-empty lines; a trailing '\r' is tolerated.
std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

long parse_long(std::string_view text) {
  long v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw DataError("not an integer: '" + std::string(text) + "'");
  }
  return v;
}

std::string_view padding_name(PaddingMode m) { return m == PaddingMode::zero ? "zero" : "circular"; }
std::string_view pool_mode_name(PoolMode m) { return m == PoolMode::max ? "max" : "average"; }

}  // namespace

Tensor load_idx_images(const fs::path& path) {
  const auto bytes = read_bytes(path);
  Reader r(bytes, "IDX image file '" + path.string() + "'");
  check_magic(r.u32_be(), kIdxImagesMagic, path);
  const std::size_t n = r.u32_be(), rows = r.u32_be(), cols = r.u32_be();
  if (rows != 0 && cols != 0 && n > bytes.size() / (rows * cols)) {
    throw DataError("IDX image file '" + path.string() + "' is truncated: header declares " + std::to_string(n) +
                    " images of " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  const auto px = r.take(n * rows * cols);
  Tensor out(Shape{n, 1, rows, cols});
  auto d = out.data();
  for (std::size_t i = 0; i < px.size(); ++i) d[i] = static_cast<double>(px[i]) / 255.0;
  return out;
}

std::vector<int> load_idx_labels(const fs::path& path) {
  const auto bytes = read_bytes(path);
  Reader r(bytes, "IDX label file '" + path.string() + "'");
  check_magic(r.u32_be(), kIdxLabelsMagic, path);
  const std::size_t n = r.u32_be();
  const auto raw = r.take(n);
  return std::vector<int>(raw.begin(), raw.end());
}

Dataset load_idx(const fs::path& images, const fs::path& labels, std::size_t num_classes) {
  Dataset d;
  d.images = load_idx_images(images);
  d.labels = load_idx_labels(labels);
  d.num_classes = num_classes;
  if (d.images.shape().n != d.labels.size()) {
    throw DataError("IDX count mismatch: " + std::to_string(d.images.shape().n) + " images vs " +
                    std::to_string(d.labels.size()) + " labels");
  }
  for (int l : d.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw DataError("IDX label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  return d;
}

void write_idx_images(const Tensor& images, const fs::path& path) {
  const auto s = images.shape();
  if (s.c != 1) throw DimensionError("channel", "IDX images are single-channel, got " + to_string(s));
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size());
  put_u32_be(out, kIdxImagesMagic);
  put_u32_be(out, to_u32(s.n, "image count"));
  put_u32_be(out, to_u32(s.h, "rows"));
  put_u32_be(out, to_u32(s.w, "cols"));
  for (double v : images.data()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  write_bytes(path, out);
}

void write_idx_labels(std::span<const int> labels, const fs::path& path) {
  std::vector<std::uint8_t> out;
  put_u32_be(out, kIdxLabelsMagic);
  put_u32_be(out, to_u32(labels.size(), "label count"));
  for (int l : labels) {
    if (l < 0 || l > 255) throw DataError("IDX labels must fit in a byte, got " + std::to_string(l));
    out.push_back(static_cast<std::uint8_t>(l));
  }
  write_bytes(path, out);
}

void save_weights(const ParameterStore& store, const fs::path& path) {
  std::vector<std::uint8_t> out(kWeightsMagic.begin(), kWeightsMagic.end());
  put_u32_le(out, to_u32(store.size(), "record count"));
  for (const auto& e : store.entries()) {
    put_u32_le(out, to_u32(e.name.size(), "name length"));
    out.insert(out.end(), e.name.begin(), e.name.end());
    const auto s = e.value.shape();
    put_u32_le(out, 4);
    for (std::size_t d : {s.n, s.c, s.h, s.w}) put_u32_le(out, to_u32(d, "dimension"));
    for (double v : e.value.data()) put_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  write_bytes(path, out);
}

ParameterStore load_weights(const fs::path& path) {
  const auto bytes = read_bytes(path);
  Reader r(bytes, "weight archive '" + path.string() + "'");
  const auto magic = r.take(kWeightsMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kWeightsMagic.begin())) {
    throw DataError("bad weight archive magic in '" + path.string() + "'");
  }
  const std::uint32_t records = r.u32_le();
  ParameterStore store;
  for (std::uint32_t i = 0; i < records; ++i) {
    const auto name_bytes = r.take(r.u32_le());
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t rank = r.u32_le();
    if (rank > 4) throw DataError("record '" + name + "' has rank " + std::to_string(rank) + " (max 4)");
    std::array<std::size_t, 4> dims{1, 1, 1, 1};
    for (std::uint32_t k = 0; k < rank; ++k) dims[4 - rank + k] = r.u32_le();
    Shape s{dims[0], dims[1], dims[2], dims[3]};
    r.need(s.size() * 4);
    std::vector<double> values(s.size());
    for (auto& v : values) v = static_cast<double>(r.f32_le());
    if (store.find(name)) throw DataError("duplicate record '" + name + "' in weight archive");
    store.add(std::move(name), Tensor(s, std::move(values)), true);
  }
  if (!r.done()) throw DataError("trailing bytes after the last record of '" + path.string() + "'");
  return store;
}

namespace {

std::string mismatch_message(const std::vector<std::string>& missing, const std::vector<std::string>& extra,
                             const std::vector<std::string>& mismatched) {
  std::string msg = "weight archive does not match the model";
  auto list = [&](const char* label, const std::vector<std::string>& names) {
    if (names.empty()) return;
    msg += std::string("; ") + label + ":";
    for (const auto& n : names) msg += " " + n;
  };
  list("missing", missing);
  list("extra", extra);
  list("shape mismatch", mismatched);
  return msg;
}

}  // namespace

WeightMismatchError::WeightMismatchError(std::vector<std::string> missing, std::vector<std::string> extra,
                                         std::vector<std::string> mismatched)
    : DataError(mismatch_message(missing, extra, mismatched)),
      missing_(std::move(missing)),
      extra_(std::move(extra)),
      mismatched_(std::move(mismatched)) {}

void load_weights_into(Model& model, const fs::path& path) {
  const auto archive = load_weights(path);
  std::vector<std::string> missing, extra, mismatched;
  for (const auto& e : model.params.entries()) {
    const auto* a = archive.find(e.name);
    if (!a) {
      missing.push_back(e.name);
    } else if (a->value.shape() != e.value.shape()) {
      mismatched.push_back(e.name + " (" + to_string(a->value.shape()) + " vs " + to_string(e.value.shape()) + ")");
    }
  }
  for (const auto& a : archive.entries()) {
    if (!model.params.find(a.name)) extra.push_back(a.name);
  }
  if (!missing.empty() || !extra.empty() || !mismatched.empty()) {
    throw WeightMismatchError(std::move(missing), std::move(extra), std::move(mismatched));
  }
  for (auto& e : model.params.entries()) e.value = archive.get(e.name).value;
}

std::string format_double(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw DataError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::string grid_to_csv(const Grid& grid) {
  if (grid.values.size() != grid.rows() * grid.cols()) throw DataError("grid values do not match its axes");
  std::string out = "dy\\dx";
  for (long dx : grid.dxs) out += "," + std::to_string(dx);
  out += '\n';
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    out += std::to_string(grid.dys[r]);
    for (std::size_t c = 0; c < grid.cols(); ++c) out += "," + format_double(grid.at(r, c));
    out += '\n';
  }
  return out;
}

Grid grid_from_csv(std::string_view text) {
  const auto rows = lines(text);
  if (rows.empty()) throw DataError("grid CSV is empty");
  const auto header = split(rows[0], ',');
  if (header[0] != "dy\\dx") throw DataError("grid CSV header must start with 'dy\\dx'");
  Grid g;
  for (std::size_t i = 1; i < header.size(); ++i) g.dxs.push_back(parse_long(header[i]));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto cells = split(rows[r], ',');
    if (cells.size() != header.size()) {
      throw DataError("grid CSV row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(header.size()));
    }
    g.dys.push_back(parse_long(cells[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) g.values.push_back(parse_double(cells[c]));
  }
  return g;
}

std::string curve_to_csv(const ResponseCurve& curve) {
  if (curve.levels.size() != curve.values.size()) throw DataError("curve levels and values differ in length");
  std::string out = "level,value\n";
  for (std::size_t i = 0; i < curve.levels.size(); ++i) {
    out += format_double(curve.levels[i]) + "," + format_double(curve.values[i]) + "\n";
  }
  return out;
}

ResponseCurve curve_from_csv(std::string_view text) {
  const auto rows = lines(text);
  if (rows.empty() || rows[0] != "level,value") throw DataError("curve CSV must start with 'level,value'");
  ResponseCurve c;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto cells = split(rows[r], ',');
    if (cells.size() != 2) throw DataError("curve CSV row " + std::to_string(r + 1) + " needs 2 fields");
    c.levels.push_back(parse_double(cells[0]));
    c.values.push_back(parse_double(cells[1]));
  }
  return c;
}

std::string judgments_to_csv(std::span<const Judgment> judgments) {
  std::string out = "i,j,k,l,choice\n";
  for (const auto& q : judgments) {
    out += std::to_string(q.i) + "," + std::to_string(q.j) + "," + std::to_string(q.k) + "," +
           std::to_string(q.l) + "," + (q.second_larger ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<Judgment> judgments_from_csv(std::string_view text) {
  const auto rows = lines(text);
  if (rows.empty() || rows[0] != "i,j,k,l,choice") throw DataError("judgment CSV must start with 'i,j,k,l,choice'");
  std::vector<Judgment> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto cells = split(rows[r], ',');
    if (cells.size() != 5) throw DataError("judgment CSV row " + std::to_string(r + 1) + " needs 5 fields");
    std::array<long, 5> v{};
    for (std::size_t k = 0; k < 5; ++k) {
      v[k] = parse_long(cells[k]);
      if (v[k] < 0) throw DataError("negative field in judgment CSV row " + std::to_string(r + 1));
    }
    if (v[4] > 1) throw DataError("judgment choice must be 0 or 1");
    out.push_back({static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2]),
                   static_cast<std::size_t>(v[3]), v[4] == 1});
  }
  return out;
}

std::string table_to_csv(std::span<const std::string> header, std::span<const std::vector<double>> rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw DataError("table row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_double(row[i]);
    out += '\n';
  }
  return out;
}

void write_text(const fs::path& path, std::string_view text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

HeatmapScaling parse_heatmap_scaling(std::string_view name) {
  if (name == "joint") return HeatmapScaling::joint;
  if (name == "independent") return HeatmapScaling::independent;
  throw ConfigError("unknown heatmap scaling '" + std::string(name) + "' (expected joint or independent)");
}

std::vector<ValueRange> heatmap_ranges(std::span<const Grid> grids, HeatmapScaling scaling) {
  std::vector<ValueRange> out;
  for (const auto& g : grids) {
    if (g.values.empty()) throw DataError("cannot color an empty grid");
    const auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
    out.push_back({*lo, *hi});
  }
  if (scaling == HeatmapScaling::joint && !out.empty()) {
    ValueRange all = out.front();
    for (const auto& r : out) {
      all.lo = std::min(all.lo, r.lo);
      all.hi = std::max(all.hi, r.hi);
    }
    std::fill(out.begin(), out.end(), all);
  }
  return out;
}

std::array<std::uint8_t, 3> viridis(double t) {
  static constexpr std::array<std::array<double, 3>, 9> kAnchors{{
      {68, 1, 84},
      {71, 44, 122},
      {59, 81, 139},
      {44, 113, 142},
      {33, 144, 141},
      {39, 173, 129},
      {92, 200, 99},
      {170, 220, 50},
      {253, 231, 37},
  }};
  if (!(t > 0.0)) t = 0.0;  // also maps NaN to the bottom
  t = std::min(t, 1.0);
  const double x = t * static_cast<double>(kAnchors.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(x), kAnchors.size() - 2);
  const double f = x - static_cast<double>(i);
  std::array<std::uint8_t, 3> out{};
  for (std::size_t c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>(std::lround(kAnchors[i][c] + f * (kAnchors[i + 1][c] - kAnchors[i][c])));
  }
  return out;
}

void write_heatmap(const Grid& grid, const fs::path& path, ValueRange range, std::size_t cell_pixels) {
  if (grid.values.empty()) throw DataError("cannot draw an empty grid");
  if (cell_pixels < 1) throw ConfigError("heatmap cell size must be >= 1");
  const std::size_t w = grid.cols() * cell_pixels, h = grid.rows() * cell_pixels;
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + w * h * 3);
  const double span = range.hi - range.lo;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = grid.at(y / cell_pixels, x / cell_pixels);
      const auto rgb = viridis(span > 0.0 ? (v - range.lo) / span : 1.0);
      out.insert(out.end(), rgb.begin(), rgb.end());
    }
  }
  write_bytes(path, out);
  auto sidecar = path;
  sidecar.replace_extension(".csv");
  write_text(sidecar, grid_to_csv(grid));
}

PpmImage read_ppm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    return std::string(bytes.begin() + static_cast<long>(start), bytes.begin() + static_cast<long>(pos));
  };
  if (token() != "P6") throw DataError("'" + path.string() + "' is not a binary PPM");
  PpmImage img;
  img.width = static_cast<std::size_t>(parse_long(token()));
  img.height = static_cast<std::size_t>(parse_long(token()));
  if (token() != "255") throw DataError("PPM max value must be 255");
  ++pos;  // single whitespace before the raster
  const std::size_t n = img.width * img.height * 3;
  if (bytes.size() < pos || bytes.size() - pos != n) throw DataError("PPM raster size mismatch in '" + path.string() + "'");
  img.rgb.assign(bytes.begin() + static_cast<long>(pos), bytes.end());
  return img;
}

std::string arch_to_json(const ArchitectureSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json j{{"name", l.name}, {"kind", layer_kind_name(l.kind)}, {"inputs", l.inputs}, {"trainable", l.trainable}};
    switch (l.kind) {
      case LayerKind::conv:
        j["out_channels"] = l.out_channels;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["pad"] = l.pad;
        j["padding"] = padding_name(l.padding);
        break;
      case LayerKind::pool:
        j["pool"] = {{"kernel", l.pool.kernel}, {"stride", l.pool.stride}, {"mode", pool_mode_name(l.pool.mode)}};
        break;
      case LayerKind::dense:
        j["units"] = l.units;
        break;
      default:
        break;
    }
    layers.push_back(std::move(j));
  }
  json doc{{"variant", variant_name(spec.variant)},
           {"input_size", spec.input_size},
           {"input_channels", spec.input_channels},
           {"num_classes", spec.num_classes},
           {"stage_outputs", spec.stage_outputs},
           {"taps", spec.taps},
           {"layers", std::move(layers)}};
  return doc.dump(2) + "\n";
}

namespace {

template <class T>
T field(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

template <class T>
T field_or(const json& j, const std::string& key, const std::string& path, T fallback) {
  return j.contains(key) ? field<T>(j, key, path) : fallback;
}

}  // namespace

ArchitectureSpec arch_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("architecture JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("$: expected an object");
  ArchitectureSpec spec;
  spec.variant = parse_variant(field<std::string>(doc, "variant", "$"));
  spec.input_size = field<std::size_t>(doc, "input_size", "$");
  spec.input_channels = field_or<std::size_t>(doc, "input_channels", "$", 1);
  spec.num_classes = field<std::size_t>(doc, "num_classes", "$");
  spec.stage_outputs = field_or<std::vector<int>>(doc, "stage_outputs", "$", {});
  spec.taps = field_or<std::vector<int>>(doc, "taps", "$", {});
  if (!doc.contains("layers") || !doc["layers"].is_array()) throw ConfigError("$.layers: expected an array");
  for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
    const auto& j = doc["layers"][i];
    const std::string path = "$.layers[" + std::to_string(i) + "]";
    LayerSpec l;
    l.name = field<std::string>(j, "name", path);
    l.kind = parse_layer_kind(field<std::string>(j, "kind", path));
    l.inputs = field<std::vector<int>>(j, "inputs", path);
    l.trainable = field_or<bool>(j, "trainable", path, true);
    if (l.kind == LayerKind::conv) {
      l.out_channels = field<std::size_t>(j, "out_channels", path);
      l.kernel = field_or<std::size_t>(j, "kernel", path, 3);
      l.stride = field_or<std::size_t>(j, "stride", path, 1);
      l.pad = field_or<std::size_t>(j, "pad", path, 1);
      const auto pad = field_or<std::string>(j, "padding", path, "zero");
      if (pad == "zero") l.padding = PaddingMode::zero;
      else if (pad == "circular") l.padding = PaddingMode::circular;
      else throw ConfigError(path + ".padding: expected zero or circular");
    } else if (l.kind == LayerKind::pool) {
      if (!j.contains("pool")) throw ConfigError(path + ".pool: missing");
      const auto& p = j["pool"];
      l.pool.kernel = field<std::size_t>(p, "kernel", path + ".pool");
      l.pool.stride = field_or<std::size_t>(p, "stride", path + ".pool", l.pool.kernel);
      const auto mode = field_or<std::string>(p, "mode", path + ".pool", "max");
      if (mode == "max") l.pool.mode = PoolMode::max;
      else if (mode == "average") l.pool.mode = PoolMode::average;
      else throw ConfigError(path + ".pool.mode: expected max or average");
    } else if (l.kind == LayerKind::dense) {
      l.units = field<std::size_t>(j, "units", path);
    }
    spec.layers.push_back(std::move(l));
  }
  try {
    validate(spec);
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("$.layers: ") + e.what());
  }
  return spec;
}

}  // namespace ticnn::io
