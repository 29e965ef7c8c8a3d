#pragma once

// Parameters, forward evaluation with cached activations, reverse-mode
// gradients, and a deterministic momentum-SGD training loop.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ticnn/arch.hpp"
#include "ticnn/dataset.hpp"
#include "ticnn/tensor.hpp"

namespace ticnn {

struct ParameterEntry {
  std::string name;
  Tensor value;
  Tensor gradient;  // same shape as value
  bool trainable = true;
};

class ParameterStore {
 public:
  ParameterEntry& add(std::string name, Tensor value, bool trainable);

  const ParameterEntry* find(std::string_view name) const;
  ParameterEntry* find(std::string_view name);
  // Throws DataError when absent.
  const ParameterEntry& get(std::string_view name) const;
  ParameterEntry& get(std::string_view name);

  std::vector<ParameterEntry>& entries() noexcept { return entries_; }
  const std::vector<ParameterEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  void zero_gradients();

  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  std::vector<ParameterEntry> entries_;
};

std::string weight_name(const LayerSpec& layer);
std::string bias_name(const LayerSpec& layer);

// Kaiming-style fan-in uniform weights, U(-sqrt(6/fan_in), +sqrt(6/fan_in));
// zero biases. Trainable flags follow the spec.
ParameterStore init_parameters(const ArchitectureSpec& spec, std::uint64_t seed);

struct Model {
  ArchitectureSpec spec;
  ParameterStore params;
};

Model make_model(ArchitectureSpec spec, std::uint64_t seed);

// Re-applies the spec's trainable flags to the store (after freezing a backbone).
void sync_trainable_flags(Model& model);

// Copies every parameter of `from` whose name and shape match an entry of `to`.
// Returns the number of entries copied.
std::size_t copy_matching_parameters(const ParameterStore& from, ParameterStore& to);

struct ForwardCache {
  Tensor input;
  std::vector<Tensor> outputs;  // one per layer; outputs.back() holds the logits

  const Tensor& logits() const { return outputs.back(); }
};

// Throws DimensionError naming the layer on any shape mismatch.
ForwardCache forward(const Model& model, const Tensor& batch);
Tensor logits(const Model& model, const Tensor& batch);

// Top-1 class per sample; the lowest class index wins exact ties.
std::vector<int> argmax_rows(const Tensor& logits);
std::vector<int> predict(const Model& model, const Tensor& batch);
double accuracy(std::span<const int> predicted, std::span<const int> labels);

// Mean of -log softmax(logits)[label], stabilized by max-subtraction.
double cross_entropy(const Tensor& logits, std::span<const int> labels);
// d(cross_entropy)/d(logits) = (softmax - onehot) / n.
Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels);

// Writes d(loss)/d(param) into each entry's gradient given d(loss)/d(output of
// the final layer). Frozen entries receive zeros. Returns d(loss)/d(input)
// when requested (empty otherwise).
Tensor backward(Model& model, const ForwardCache& cache, const Tensor& grad_logits,
                bool want_input_grad = false);

// forward + cross_entropy + backward; returns the loss.
double loss_and_gradients(Model& model, const Tensor& batch, std::span<const int> labels);

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

// Per-parameter velocity buffers for momentum SGD.
class MomentumState {
 public:
  Tensor& velocity(const ParameterEntry& entry);

 private:
  std::map<std::string, Tensor, std::less<>> velocity_;
};

// v <- momentum * v - lr * g;  w <- w + v   (trainable entries only)
void sgd_step(ParameterStore& store, const TrainConfig& config, MomentumState& state);

struct TrainHistory {
  std::vector<double> epoch_accuracy;  // running train accuracy during each epoch
  std::vector<double> epoch_loss;      // mean batch loss during each epoch
};

// Deterministic for a fixed seed: shuffling uses derive_seed(seed, 1).
TrainHistory train(Model& model, const Dataset& data, const TrainConfig& config);

// Batched Top-1 accuracy of a model on a dataset.
double evaluate_accuracy(const Model& model, const Dataset& data, std::size_t batch_size = 256);

}  // namespace ticnn
