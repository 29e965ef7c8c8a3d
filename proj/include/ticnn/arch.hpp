#pragma once

// Declarative network descriptions for the baseline and the GAP-insertion
// variants, at VGG-16 scale and at toy scale, plus exact parameter accounting.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ticnn/layers.hpp"
#include "ticnn/tensor.hpp"

namespace ticnn {

// Head schemes:
//   Base  - flatten(final map) -> dense
//   Multi - GAP after every stage, concatenated -> dense
//   Final - GAP(final map) -> dense
//   Flat  - concat(flatten(final map), GAP of every stage) -> dense
enum class Variant { base, multi, final_gap, flat };

std::string_view variant_name(Variant v) noexcept;
// Case-insensitive; throws ConfigError on an unknown name.
Variant parse_variant(std::string_view name);

enum class LayerKind { conv, relu, pool, gap, flatten, dense, softmax, concat };

std::string_view layer_kind_name(LayerKind k) noexcept;
LayerKind parse_layer_kind(std::string_view name);

// Index used in LayerSpec::inputs for the network input.
inline constexpr int kNetworkInput = -1;

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  // Source layer indices (kNetworkInput for the image). Single-input layers
  // have exactly one entry; concat has one per part.
  std::vector<int> inputs;

  // conv
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
  PaddingMode padding = PaddingMode::zero;
  // pool
  PoolSpec pool;
  // dense
  std::size_t units = 0;

  bool trainable = true;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchitectureSpec {
  Variant variant = Variant::base;
  std::size_t input_size = 0;  // square inputs
  std::size_t input_channels = 1;
  std::size_t num_classes = 0;
  std::vector<LayerSpec> layers;
  // Last layer of each backbone stage (the post-pool maps for VGG).
  std::vector<int> stage_outputs;
  // Layers whose outputs feed the head reducers (GAP/flatten), in network order.
  std::vector<int> taps;

  Shape input_shape(std::size_t batch = 1) const {
    return {batch, input_channels, input_size, input_size};
  }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

// Output shape (batch 1) of every layer. Throws DimensionError naming the
// offending layer when shapes do not compose.
std::vector<Shape> infer_shapes(const ArchitectureSpec& spec);

// Structural checks plus a dry-run shape pass.
void validate(const ArchitectureSpec& spec);

// Standard VGG-16 configuration D, 13 frozen 3x3/pad-1 convolutions with five
// 2x2 max pools, followed by the trainable head for `variant`. Requires
// input_size divisible by 32.
ArchitectureSpec build_vgg16_variant(Variant variant, std::size_t input_size,
                                     std::size_t num_classes);

struct ToyConfig {
  std::vector<std::size_t> channels{8, 16};  // one conv stage per entry
  PoolSpec pool{2};
  // Number of leading stages followed by a pool layer; nullopt pools every stage.
  std::optional<std::size_t> pooled_stages;
  PaddingMode padding = PaddingMode::zero;
  std::size_t input_size = 28;
  std::size_t input_channels = 1;
  std::size_t num_classes = 10;
};

// Small analog of the chosen scheme; every parameter trainable.
ArchitectureSpec build_toy_variant(Variant variant, const ToyConfig& config);

struct ParamEntry {
  std::string name;
  std::size_t count = 0;
  bool trainable = false;
};

struct ParamReport {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::vector<ParamEntry> breakdown;  // layers carrying parameters

  std::size_t frozen() const noexcept { return total - trainable; }
};

// conv: c_out*c_in*kh*kw + c_out; dense: d_out*d_in + d_out; others 0.
ParamReport count_parameters(const ArchitectureSpec& spec);

// Mark every conv layer frozen (keeps heads trainable).
ArchitectureSpec with_frozen_backbone(ArchitectureSpec spec);

}  // namespace ticnn
