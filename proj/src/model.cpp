#include "ticnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ticnn/layers.hpp"
#include "ticnn/rng.hpp"

namespace ticnn {

namespace {

bool has_parameters(const LayerSpec& l) {
  return l.kind == LayerKind::conv || l.kind == LayerKind::dense;
}

Conv2dParams conv_params(const LayerSpec& l) { return {l.stride, l.pad, l.padding}; }

void accumulate(Tensor& into, Tensor&& g) {
  if (into.empty()) {
    into = std::move(g);
    return;
  }
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

}  // namespace

ParameterEntry& ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (find(name)) throw ConfigError("duplicate parameter '" + name + "'");
  Tensor grad(value.shape());
  entries_.push_back({std::move(name), std::move(value), std::move(grad), trainable});
  return entries_.back();
}

const ParameterEntry* ParameterStore::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

ParameterEntry* ParameterStore::find(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

const ParameterEntry& ParameterStore::get(std::string_view name) const {
  if (const auto* e = find(name)) return *e;
  throw DataError("missing parameter '" + std::string(name) + "'");
}

ParameterEntry& ParameterStore::get(std::string_view name) {
  if (auto* e = find(name)) return *e;
  throw DataError("missing parameter '" + std::string(name) + "'");
}

void ParameterStore::zero_gradients() {
  for (auto& e : entries_) std::fill(e.gradient.data().begin(), e.gradient.data().end(), 0.0);
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.trainable != y.trainable || !(x.value == y.value)) return false;
  }
  return true;
}

std::string weight_name(const LayerSpec& layer) { return layer.name + ".weight"; }
std::string bias_name(const LayerSpec& layer) { return layer.name + ".bias"; }

ParameterStore init_parameters(const ArchitectureSpec& spec, std::uint64_t seed) {
  const auto shapes = infer_shapes(spec);
  const Shape input = spec.input_shape();
  Rng rng(derive_seed(seed, 0));
  ParameterStore store;
  for (const auto& l : spec.layers) {
    if (!has_parameters(l)) continue;
    const int src = l.inputs.front();
    const Shape in = src == kNetworkInput ? input : shapes[static_cast<std::size_t>(src)];
    Shape ws;
    std::size_t fan_in = 0;
    if (l.kind == LayerKind::conv) {
      ws = {l.out_channels, in.c, l.kernel, l.kernel};
      fan_in = in.c * l.kernel * l.kernel;
    } else {
      ws = {l.units, in.sample(), 1, 1};
      fan_in = in.sample();
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor w(ws);
    for (auto& v : w.data()) v = rng.uniform(-bound, bound);
    store.add(weight_name(l), std::move(w), l.trainable);
    store.add(bias_name(l), Tensor({ws.n, 1, 1, 1}), l.trainable);
  }
  return store;
}

Model make_model(ArchitectureSpec spec, std::uint64_t seed) {
  validate(spec);
  Model m{std::move(spec), {}};
  m.params = init_parameters(m.spec, seed);
  return m;
}

void sync_trainable_flags(Model& model) {
  for (const auto& l : model.spec.layers) {
    if (!has_parameters(l)) continue;
    model.params.get(weight_name(l)).trainable = l.trainable;
    model.params.get(bias_name(l)).trainable = l.trainable;
  }
}

std::size_t copy_matching_parameters(const ParameterStore& from, ParameterStore& to) {
  std::size_t copied = 0;
  for (auto& e : to.entries()) {
    const auto* src = from.find(e.name);
    if (src && src->value.shape() == e.value.shape()) {
      e.value = src->value;
      ++copied;
    }
  }
  return copied;
}

ForwardCache forward(const Model& model, const Tensor& batch) {
  const auto& spec = model.spec;
  const Shape want = spec.input_shape(batch.shape().n);
  if (batch.shape() != want) {
    throw DimensionError("input", "batch shape " + to_string(batch.shape()) +
                                      " does not match model input " + to_string(want));
  }
  ForwardCache cache;
  cache.input = batch;
  cache.outputs.reserve(spec.layers.size());
  auto source = [&](int idx) -> const Tensor& {
    return idx == kNetworkInput ? cache.input : cache.outputs[static_cast<std::size_t>(idx)];
  };
  for (const auto& l : spec.layers) {
    const Tensor& in = source(l.inputs.front());
    try {
      switch (l.kind) {
        case LayerKind::conv: {
          const auto& w = model.params.get(weight_name(l)).value;
          const auto& b = model.params.get(bias_name(l)).value;
          cache.outputs.push_back(conv2d(in, w, b.data(), conv_params(l)));
          break;
        }
        case LayerKind::relu:
          cache.outputs.push_back(relu(in));
          break;
        case LayerKind::pool:
          cache.outputs.push_back(pool2d(in, l.pool));
          break;
        case LayerKind::gap:
          cache.outputs.push_back(global_avg_pool(in));
          break;
        case LayerKind::flatten:
          cache.outputs.push_back(flatten(in));
          break;
        case LayerKind::dense: {
          const auto& w = model.params.get(weight_name(l)).value;
          const auto& b = model.params.get(bias_name(l)).value;
          cache.outputs.push_back(dense(in, w, b.data()));
          break;
        }
        case LayerKind::softmax:
          cache.outputs.push_back(softmax(in));
          break;
        case LayerKind::concat: {
          std::vector<Tensor> parts;
          parts.reserve(l.inputs.size());
          for (int i : l.inputs) parts.push_back(source(i));
          cache.outputs.push_back(concat_features(parts));
          break;
        }
      }
    } catch (const DimensionError& e) {
      throw DimensionError(l.name, "layer '" + l.name + "': " + e.what());
    }
  }
  return cache;
}

Tensor logits(const Model& model, const Tensor& batch) {
  auto cache = forward(model, batch);
  return std::move(cache.outputs.back());
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.shape().n);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = logits.sample(i);
    // max_element returns the first maximum
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::vector<int> predict(const Model& model, const Tensor& batch) {
  return argmax_rows(logits(model, batch));
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw DimensionError("n", "prediction/label count mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

void check_labels(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.shape().n;
  const std::size_t k = logits.shape().sample();
  if (labels.size() != n) {
    throw DimensionError("n", std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                                  " logit rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    }
  }
}

}  // namespace

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  const std::size_t n = labels.size();
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.sample(i);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    total += std::log(z) + m - row[static_cast<std::size_t>(labels[i])];
  }
  return total / static_cast<double>(n);
}

Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  Tensor g = softmax(logits);
  const double inv_n = labels.empty() ? 0.0 : 1.0 / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = g.sample(i);
    row[static_cast<std::size_t>(labels[i])] -= 1.0;
    for (double& v : row) v *= inv_n;
  }
  return g;
}

Tensor backward(Model& model, const ForwardCache& cache, const Tensor& grad_logits,
                bool want_input_grad) {
  const auto& layers = model.spec.layers;
  const std::size_t L = layers.size();
  model.params.zero_gradients();
  if (L == 0) return want_input_grad ? grad_logits : Tensor{};

  // Whether a gradient w.r.t. a layer's output is needed: true when the layer
  // or anything upstream of it carries trainable parameters.
  std::vector<char> upstream(L, 0);
  for (std::size_t i = 0; i < L; ++i) {
    bool any = has_parameters(layers[i]) && layers[i].trainable;
    for (int s : layers[i].inputs) {
      if (s == kNetworkInput) any = any || want_input_grad;
      else any = any || upstream[static_cast<std::size_t>(s)];
    }
    upstream[i] = any;
  }
  auto needs = [&](int s) {
    return s == kNetworkInput ? want_input_grad : static_cast<bool>(upstream[static_cast<std::size_t>(s)]);
  };

  std::vector<Tensor> grads(L);
  Tensor grad_input;
  grads[L - 1] = grad_logits;
  auto route = [&](int s, Tensor&& g) {
    if (s == kNetworkInput) accumulate(grad_input, std::move(g));
    else accumulate(grads[static_cast<std::size_t>(s)], std::move(g));
  };
  auto source = [&](int idx) -> const Tensor& {
    return idx == kNetworkInput ? cache.input : cache.outputs[static_cast<std::size_t>(idx)];
  };

  for (std::size_t i = L; i-- > 0;) {
    const auto& l = layers[i];
    if (grads[i].empty()) continue;
    const Tensor& g = grads[i];
    const int s = l.inputs.front();
    const bool need_in = needs(s);
    switch (l.kind) {
      case LayerKind::conv: {
        const bool need_params = l.trainable;
        if (!need_params && !need_in) break;
        auto& w = model.params.get(weight_name(l));
        auto cg = conv2d_backward(source(s), w.value, g, conv_params(l), need_in);
        if (need_params) {
          w.gradient = std::move(cg.weights);
          auto& b = model.params.get(bias_name(l));
          std::copy(cg.bias.begin(), cg.bias.end(), b.gradient.data().begin());
        }
        if (need_in) route(s, std::move(cg.input));
        break;
      }
      case LayerKind::dense: {
        const bool need_params = l.trainable;
        if (!need_params && !need_in) break;
        auto& w = model.params.get(weight_name(l));
        auto dg = dense_backward(source(s), w.value, g, need_in);
        if (need_params) {
          w.gradient = std::move(dg.weights);
          auto& b = model.params.get(bias_name(l));
          std::copy(dg.bias.begin(), dg.bias.end(), b.gradient.data().begin());
        }
        if (need_in) route(s, std::move(dg.input));
        break;
      }
      case LayerKind::relu:
        if (need_in) route(s, relu_backward(source(s), g));
        break;
      case LayerKind::pool:
        if (need_in) route(s, pool2d_backward(source(s), g, l.pool));
        break;
      case LayerKind::gap:
        if (need_in) route(s, global_avg_pool_backward(source(s).shape(), g));
        break;
      case LayerKind::flatten:
        if (need_in) route(s, g.reshaped(source(s).shape()));
        break;
      case LayerKind::softmax:
        if (need_in) route(s, softmax_backward(cache.outputs[i], g));
        break;
      case LayerKind::concat: {
        std::vector<Shape> shapes;
        for (int p : l.inputs) shapes.push_back(source(p).shape());
        auto parts = concat_features_backward(shapes, g);
        for (std::size_t p = 0; p < parts.size(); ++p) {
          if (needs(l.inputs[p])) route(l.inputs[p], std::move(parts[p]));
        }
        break;
      }
    }
    grads[i] = Tensor{};  // release early
  }
  // Frozen entries never receive gradient mass.
  for (auto& e : model.params.entries()) {
    if (!e.trainable) std::fill(e.gradient.data().begin(), e.gradient.data().end(), 0.0);
  }
  return grad_input;
}

double loss_and_gradients(Model& model, const Tensor& batch, std::span<const int> labels) {
  const auto cache = forward(model, batch);
  const double loss = cross_entropy(cache.logits(), labels);
  backward(model, cache, cross_entropy_grad(cache.logits(), labels));
  return loss;
}

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (c.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (c.momentum < 0.0 || c.momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
}

Tensor& MomentumState::velocity(const ParameterEntry& entry) {
  auto it = velocity_.find(entry.name);
  if (it == velocity_.end()) it = velocity_.emplace(entry.name, Tensor(entry.value.shape())).first;
  return it->second;
}

void sgd_step(ParameterStore& store, const TrainConfig& config, MomentumState& state) {
  for (auto& e : store.entries()) {
    if (!e.trainable) continue;
    Tensor& v = state.velocity(e);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      v[i] = config.momentum * v[i] - config.learning_rate * e.gradient[i];
      e.value[i] += v[i];
    }
  }
}

TrainHistory train(Model& model, const Dataset& data, const TrainConfig& config) {
  validate(config);
  if (data.size() == 0) throw DataError("cannot train on an empty dataset");
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.spec.num_classes) {
      throw DataError("label " + std::to_string(y) + " outside the model's class range");
    }
  }
  Rng rng(derive_seed(config.seed, 1));
  MomentumState state;
  TrainHistory history;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    std::size_t hits = 0;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(start + count));
      const Dataset batch = data.gather(idx);
      const auto cache = forward(model, batch.images);
      const double loss = cross_entropy(cache.logits(), batch.labels);
      const auto pred = argmax_rows(cache.logits());
      for (std::size_t i = 0; i < count; ++i) hits += pred[i] == batch.labels[i];
      backward(model, cache, cross_entropy_grad(cache.logits(), batch.labels));
      sgd_step(model.params, config, state);
      loss_sum += loss;
      ++batches;
    }
    history.epoch_accuracy.push_back(static_cast<double>(hits) / static_cast<double>(data.size()));
    history.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return history;
}

double evaluate_accuracy(const Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  std::size_t hits = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - start);
    const auto pred = predict(model, data.images.slice_batch(start, count));
    for (std::size_t i = 0; i < count; ++i) hits += pred[i] == data.labels[start + i];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace ticnn
