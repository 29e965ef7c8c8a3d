#include "ticnn/arch.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace ticnn {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

class Builder {
 public:
  explicit Builder(ArchitectureSpec& spec) : spec_(spec) {}

  int add(LayerSpec layer, std::vector<int> inputs) {
    layer.inputs = std::move(inputs);
    spec_.layers.push_back(std::move(layer));
    return static_cast<int>(spec_.layers.size()) - 1;
  }
  int add(LayerSpec layer) { return add(std::move(layer), {last()}); }

  int last() const { return static_cast<int>(spec_.layers.size()) - 1; }

  static LayerSpec conv(std::string name, std::size_t out, PaddingMode mode, bool trainable) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::conv;
    l.out_channels = out;
    l.kernel = 3;
    l.stride = 1;
    l.pad = 1;
    l.padding = mode;
    l.trainable = trainable;
    return l;
  }
  static LayerSpec simple(std::string name, LayerKind kind) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = kind;
    l.trainable = false;
    return l;
  }
  static LayerSpec pool(std::string name, const PoolSpec& p) {
    LayerSpec l = simple(std::move(name), LayerKind::pool);
    l.pool = p;
    return l;
  }
  static LayerSpec dense(std::string name, std::size_t units) {
    LayerSpec l = simple(std::move(name), LayerKind::dense);
    l.units = units;
    l.trainable = true;
    return l;
  }

 private:
  ArchitectureSpec& spec_;
};

// Appends the head for `variant` over the recorded stage outputs.
void add_head(ArchitectureSpec& spec, Builder& b) {
  const auto& stages = spec.stage_outputs;
  const int final_map = stages.back();
  std::vector<int> features;
  auto add_gaps = [&] {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      features.push_back(b.add(Builder::simple("gap" + std::to_string(i + 1), LayerKind::gap),
                               {stages[i]}));
      spec.taps.push_back(stages[i]);
    }
  };
  switch (spec.variant) {
    case Variant::base:
      features.push_back(b.add(Builder::simple("flatten", LayerKind::flatten), {final_map}));
      spec.taps.push_back(final_map);
      break;
    case Variant::final_gap:
      features.push_back(b.add(Builder::simple("gap", LayerKind::gap), {final_map}));
      spec.taps.push_back(final_map);
      break;
    case Variant::multi:
      add_gaps();
      break;
    case Variant::flat:
      features.push_back(b.add(Builder::simple("flatten", LayerKind::flatten), {final_map}));
      spec.taps.push_back(final_map);
      add_gaps();
      break;
  }
  if (features.size() > 1) {
    b.add(Builder::simple("concat", LayerKind::concat), features);
  }
  b.add(Builder::dense("fc", spec.num_classes));
}

}  // namespace

std::string_view variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::base:
      return "base";
    case Variant::multi:
      return "multi";
    case Variant::final_gap:
      return "final";
    case Variant::flat:
      return "flat";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  const std::string n = lower(name);
  for (Variant v : {Variant::base, Variant::multi, Variant::final_gap, Variant::flat}) {
    if (n == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected base|multi|final|flat)");
}

std::string_view layer_kind_name(LayerKind k) noexcept {
  switch (k) {
    case LayerKind::conv:
      return "conv";
    case LayerKind::relu:
      return "relu";
    case LayerKind::pool:
      return "pool";
    case LayerKind::gap:
      return "gap";
    case LayerKind::flatten:
      return "flatten";
    case LayerKind::dense:
      return "dense";
    case LayerKind::softmax:
      return "softmax";
    case LayerKind::concat:
      return "concat";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  const std::string n = lower(name);
  for (LayerKind k : {LayerKind::conv, LayerKind::relu, LayerKind::pool, LayerKind::gap,
                      LayerKind::flatten, LayerKind::dense, LayerKind::softmax,
                      LayerKind::concat}) {
    if (n == layer_kind_name(k)) return k;
  }
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

std::vector<Shape> infer_shapes(const ArchitectureSpec& spec) {
  const Shape input = spec.input_shape();
  std::vector<Shape> shapes;
  shapes.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = "layer '" + l.name + "'";
    if (l.inputs.empty()) throw DimensionError(l.name, where + " has no inputs");
    std::vector<Shape> in;
    for (int src : l.inputs) {
      if (src < kNetworkInput || src >= static_cast<int>(i)) {
        throw DimensionError(l.name, where + " reads layer " + std::to_string(src) +
                                         ", which does not precede it");
      }
      in.push_back(src == kNetworkInput ? input : shapes[static_cast<std::size_t>(src)]);
    }
    if (l.kind != LayerKind::concat && in.size() != 1) {
      throw DimensionError(l.name, where + " expects exactly one input");
    }
    const Shape s = in.front();
    try {
      switch (l.kind) {
        case LayerKind::conv:
          if (l.out_channels == 0) throw DimensionError("c_out", "zero output channels");
          shapes.push_back({1, l.out_channels, conv_out_extent(s.h, l.kernel, l.stride, l.pad, "h"),
                            conv_out_extent(s.w, l.kernel, l.stride, l.pad, "w")});
          break;
        case LayerKind::pool:
          shapes.push_back({1, s.c, pool_out_extent(s.h, l.pool.kernel, l.pool.stride, "h"),
                            pool_out_extent(s.w, l.pool.kernel, l.pool.stride, "w")});
          break;
        case LayerKind::gap:
          shapes.push_back({1, s.c, 1, 1});
          break;
        case LayerKind::flatten:
          shapes.push_back({1, s.sample(), 1, 1});
          break;
        case LayerKind::dense:
          if (l.units == 0) throw DimensionError("d_out", "zero units");
          shapes.push_back({1, l.units, 1, 1});
          break;
        case LayerKind::relu:
        case LayerKind::softmax:
          shapes.push_back(s);
          break;
        case LayerKind::concat: {
          std::size_t width = 0;
          for (const auto& p : in) width += p.sample();
          shapes.push_back({1, width, 1, 1});
          break;
        }
      }
    } catch (const DimensionError& e) {
      throw DimensionError(l.name, where + ": " + e.what());
    }
  }
  return shapes;
}

void validate(const ArchitectureSpec& spec) {
  if (spec.input_size == 0 || spec.input_channels == 0) {
    throw ConfigError("architecture input size and channels must be positive");
  }
  const auto shapes = infer_shapes(spec);
  if (spec.layers.empty()) return;
  std::size_t dense_count = 0;
  for (const auto& l : spec.layers) dense_count += l.kind == LayerKind::dense;
  auto head = spec.layers.end() - 1;
  if (head->kind == LayerKind::softmax && head != spec.layers.begin()) --head;
  if (head->kind != LayerKind::dense || dense_count != 1) {
    throw ConfigError("architecture must end in exactly one dense classification head");
  }
  if (head->units != spec.num_classes) {
    throw ConfigError("head has " + std::to_string(head->units) + " units but num_classes is " +
                      std::to_string(spec.num_classes));
  }
  const int n = static_cast<int>(spec.layers.size());
  for (int t : spec.taps) {
    if (t < 0 || t >= n) throw ConfigError("tap index " + std::to_string(t) + " out of range");
  }
  if (!std::is_sorted(spec.stage_outputs.begin(), spec.stage_outputs.end())) {
    throw ConfigError("stage outputs must be in network order");
  }
}

ArchitectureSpec build_vgg16_variant(Variant variant, std::size_t input_size,
                                     std::size_t num_classes) {
  if (input_size == 0 || input_size % 32 != 0) {
    throw ConfigError("VGG-16 input size must be a positive multiple of 32 (five stride-2 pools), got " +
                      std::to_string(input_size));
  }
  if (num_classes == 0) throw ConfigError("num_classes must be positive");
  ArchitectureSpec spec;
  spec.variant = variant;
  spec.input_size = input_size;
  spec.input_channels = 3;
  spec.num_classes = num_classes;
  Builder b(spec);
  constexpr std::size_t kBlocks[5][2] = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  int prev = kNetworkInput;
  for (std::size_t blk = 0; blk < 5; ++blk) {
    for (std::size_t j = 0; j < kBlocks[blk][0]; ++j) {
      const std::string tag = std::to_string(blk + 1) + "_" + std::to_string(j + 1);
      prev = b.add(Builder::conv("conv" + tag, kBlocks[blk][1], PaddingMode::zero, false), {prev});
      prev = b.add(Builder::simple("relu" + tag, LayerKind::relu));
    }
    prev = b.add(Builder::pool("pool" + std::to_string(blk + 1), PoolSpec(2)));
    spec.stage_outputs.push_back(prev);
  }
  add_head(spec, b);
  validate(spec);
  return spec;
}

ArchitectureSpec build_toy_variant(Variant variant, const ToyConfig& config) {
  if (config.channels.empty()) throw ConfigError("toy network needs at least one conv stage");
  if (config.num_classes == 0) throw ConfigError("num_classes must be positive");
  ArchitectureSpec spec;
  spec.variant = variant;
  spec.input_size = config.input_size;
  spec.input_channels = config.input_channels;
  spec.num_classes = config.num_classes;
  Builder b(spec);
  const std::size_t pooled = config.pooled_stages.value_or(config.channels.size());
  int prev = kNetworkInput;
  for (std::size_t s = 0; s < config.channels.size(); ++s) {
    const std::string tag = std::to_string(s + 1);
    prev = b.add(Builder::conv("conv" + tag, config.channels[s], config.padding, true), {prev});
    prev = b.add(Builder::simple("relu" + tag, LayerKind::relu));
    if (s < pooled) prev = b.add(Builder::pool("pool" + tag, config.pool));
    spec.stage_outputs.push_back(prev);
  }
  add_head(spec, b);
  validate(spec);
  return spec;
}

ParamReport count_parameters(const ArchitectureSpec& spec) {
  ParamReport r;
  if (spec.layers.empty()) return r;
  const auto shapes = infer_shapes(spec);
  const Shape input = spec.input_shape();
  for (const auto& l : spec.layers) {
    if (l.kind != LayerKind::conv && l.kind != LayerKind::dense) continue;
    const int src = l.inputs.front();
    const Shape in = src == kNetworkInput ? input : shapes[static_cast<std::size_t>(src)];
    const std::size_t count = l.kind == LayerKind::conv
                                  ? l.out_channels * in.c * l.kernel * l.kernel + l.out_channels
                                  : l.units * in.sample() + l.units;
    r.breakdown.push_back({l.name, count, l.trainable});
    r.total += count;
    if (l.trainable) r.trainable += count;
  }
  return r;
}

ArchitectureSpec with_frozen_backbone(ArchitectureSpec spec) {
  for (auto& l : spec.layers) {
    if (l.kind == LayerKind::conv) l.trainable = false;
  }
  return spec;
}

}  // namespace ticnn
