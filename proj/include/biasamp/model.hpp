#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasamp/detmath.hpp"
#include "biasamp/error.hpp"
#include "biasamp/rng.hpp"

// From-scratch binary classifiers: a linear model and a ReLU multilayer
// perceptron, trained with mini-batch SGD under Nesterov momentum. All
// arithmetic is 64-bit.

namespace biasamp {

enum class ModelFamily { linear, mlp };

struct ArchConfig {
  ModelFamily family = ModelFamily::linear;
  int depth = 0;     // hidden layers; forced to 0 for the linear family
  int width = 1;     // hidden units per layer
  int input_dim = 0; // filled from the dataset when 0

  void validate() const {
    if (family == ModelFamily::linear && depth != 0) {
      throw ConfigError("arch.depth must be 0 for the linear family");
    }
    if (depth < 0) throw ConfigError("arch.depth must be >= 0");
    if (width < 1) throw ConfigError("arch.width must be >= 1");
    if (family == ModelFamily::mlp && depth == 0) {
      throw ConfigError("arch.depth must be >= 1 for the mlp family");
    }
  }
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 128;
  double base_lr = 0.1;
  double warmup_lr = 0.01; // used for exactly the first epoch
  std::vector<double> decay_milestone_fractions{0.5, 0.75};
  double decay_factor = 10.0;
  double momentum = 0.9; // Nesterov
  double weight_decay = 1e-4;
  bool augmentation = false;
  // Train-set fraction p driving the 1/p epoch scaling; when unset the
  // trial's subsample fraction is used.
  std::optional<double> epoch_scaling;

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(base_lr > 0.0) || !(warmup_lr > 0.0)) {
      throw ConfigError("train.base_lr and train.warmup_lr must be positive");
    }
    if (!(decay_factor > 0.0)) throw ConfigError("train.decay_factor must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw ConfigError("train.momentum must be in [0, 1)");
    }
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
    double prev = 0.0;
    for (double f : decay_milestone_fractions) {
      if (!(f > 0.0 && f < 1.0) || f <= prev) {
        throw ConfigError(
            "train.decay_milestone_fractions must be strictly increasing in (0, 1)");
      }
      prev = f;
    }
    if (epoch_scaling && !(*epoch_scaling > 0.0 && *epoch_scaling <= 1.0)) {
      throw ConfigError("train.epoch_scaling must be in (0, 1]");
    }
  }

  int effective_epochs(double fallback_fraction = 1.0) const {
    const double p = epoch_scaling.value_or(fallback_fraction);
    return static_cast<int>(std::floor(static_cast<double>(epochs) / p + 0.5));
  }

  std::vector<int> milestones(int effective) const {
    std::vector<int> out;
    out.reserve(decay_milestone_fractions.size());
    for (double f : decay_milestone_fractions) {
      out.push_back(static_cast<int>(std::floor(f * effective + 0.5)));
    }
    return out;
  }
};

// Epoch is 1-based. Epoch 1 runs at the warmup rate; afterwards the base
// rate is divided by decay_factor once per milestone already passed
// (milestone epochs themselves still use the previous rate).
inline double lr_at(const TrainConfig& cfg, int epoch, int effective_epochs) {
  if (epoch == 1) return cfg.warmup_lr;
  int passed = 0;
  for (int m : cfg.milestones(effective_epochs)) {
    if (epoch > m) ++passed;
  }
  double lr = cfg.base_lr;
  for (int i = 0; i < passed; ++i) lr /= cfg.decay_factor;
  return lr;
}

struct Layer {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<double> weights; // row-major, out_dim x in_dim
  std::vector<double> bias;    // out_dim
};

struct ModelState {
  ArchConfig arch;
  std::vector<Layer> layers;   // depth hidden layers + 1 output layer
  std::vector<Layer> velocity; // same shapes, momentum state
  int epoch = 0;
};

inline std::size_t parameter_count(const ArchConfig& arch) {
  std::size_t count = 0;
  int in = arch.input_dim;
  for (int l = 0; l < arch.depth; ++l) {
    count += static_cast<std::size_t>(arch.width) * in + arch.width;
    in = arch.width;
  }
  count += static_cast<std::size_t>(in) + 1;
  return count;
}

// Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero, velocities
// zero.
inline ModelState init_model(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  if (arch.input_dim < 1) throw ConfigError("arch.input_dim must be >= 1");
  ModelState state;
  state.arch = arch;
  Rng rng(derive_seed(seed, "init_model"));
  const auto make_layer = [&](int out_dim, int in_dim, bool randomized) {
    Layer layer;
    layer.out_dim = out_dim;
    layer.in_dim = in_dim;
    layer.weights.resize(static_cast<std::size_t>(out_dim) * in_dim);
    layer.bias.assign(static_cast<std::size_t>(out_dim), 0.0);
    if (randomized) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
      for (double& w : layer.weights) w = (2.0 * rng.uniform01() - 1.0) * bound;
    }
    return layer;
  };
  int in = arch.input_dim;
  for (int l = 0; l < arch.depth; ++l) {
    state.layers.push_back(make_layer(arch.width, in, true));
    state.velocity.push_back(make_layer(arch.width, in, false));
    in = arch.width;
  }
  state.layers.push_back(make_layer(1, in, true));
  state.velocity.push_back(make_layer(1, in, false));
  return state;
}

// Scratch buffers reused across forward/backward calls within one trial.
struct Workspace {
  std::vector<std::vector<double>> activations; // per layer input
  std::vector<std::vector<double>> deltas;

  void prepare(const ModelState& model) {
    activations.resize(model.layers.size() + 1);
    deltas.resize(model.layers.size());
    activations[0].resize(static_cast<std::size_t>(model.arch.input_dim));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      activations[l + 1].resize(static_cast<std::size_t>(model.layers[l].out_dim));
      deltas[l].resize(static_cast<std::size_t>(model.layers[l].out_dim));
    }
  }
};

namespace detail {

// Hidden layers apply ReLU; the last layer emits the raw logit.
inline double forward_logit(const ModelState& model, std::span<const double> x,
                            Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.activations[0].begin());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    const auto& in = ws.activations[l];
    auto& out = ws.activations[l + 1];
    const bool hidden = l + 1 < model.layers.size();
    for (int r = 0; r < layer.out_dim; ++r) {
      const double* wrow = layer.weights.data() + static_cast<std::size_t>(r) * layer.in_dim;
      double acc = layer.bias[static_cast<std::size_t>(r)];
      for (int c = 0; c < layer.in_dim; ++c) acc += wrow[c] * in[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = hidden ? (acc > 0.0 ? acc : 0.0) : acc;
    }
  }
  return ws.activations.back()[0];
}

inline void check_finite_features(std::span<const double> features) {
  for (double v : features) {
    if (!std::isfinite(v)) throw DataError("forward: non-finite feature value");
  }
}

} // namespace detail

// Per-example probability of class +1. Independent of batch composition.
inline std::vector<double> forward(const ModelState& model,
                                   std::span<const double> features, int count) {
  const int dim = model.arch.input_dim;
  detail::check_finite_features(features);
  Workspace ws;
  ws.prepare(model);
  std::vector<double> probs(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double logit = detail::forward_logit(
        model, features.subspan(static_cast<std::size_t>(i) * dim,
                                static_cast<std::size_t>(dim)),
        ws);
    probs[static_cast<std::size_t>(i)] = detmath::sigmoid(logit);
  }
  return probs;
}

struct Gradients {
  std::vector<Layer> layers;

  void match(const ModelState& model) {
    layers.resize(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      layers[l].out_dim = model.layers[l].out_dim;
      layers[l].in_dim = model.layers[l].in_dim;
      layers[l].weights.assign(model.layers[l].weights.size(), 0.0);
      layers[l].bias.assign(model.layers[l].bias.size(), 0.0);
    }
  }
};

// Mean binary cross-entropy over the batch; gradients get the weight-decay
// term lambda*w added on weights (biases are not decayed). The returned
// scalar is the data loss alone.
inline double loss_and_grad(const ModelState& model, std::span<const double> features,
                            std::span<const std::int8_t> labels, double weight_decay,
                            Gradients& grads, Workspace& ws) {
  const int batch = static_cast<int>(labels.size());
  if (batch == 0) throw DataError("loss_and_grad: empty batch");
  const int dim = model.arch.input_dim;
  detail::check_finite_features(features);
  grads.match(model);
  ws.prepare(model);
  double loss_sum = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double logit = detail::forward_logit(
        model, features.subspan(static_cast<std::size_t>(b) * dim,
                                static_cast<std::size_t>(dim)),
        ws);
    const double y = labels[static_cast<std::size_t>(b)] > 0 ? 1.0 : 0.0;
    loss_sum += detmath::softplus(logit) - y * logit;
    double dlogit = detmath::sigmoid(logit) - y;
    ws.deltas.back()[0] = dlogit;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
      const Layer& layer = model.layers[l];
      Layer& g = grads.layers[l];
      const auto& in = ws.activations[l];
      const auto& delta = ws.deltas[l];
      for (int r = 0; r < layer.out_dim; ++r) {
        const double d = delta[static_cast<std::size_t>(r)];
        if (d == 0.0) continue;
        double* grow = g.weights.data() + static_cast<std::size_t>(r) * layer.in_dim;
        for (int c = 0; c < layer.in_dim; ++c) grow[c] += d * in[static_cast<std::size_t>(c)];
        g.bias[static_cast<std::size_t>(r)] += d;
      }
      if (l == 0) break;
      auto& prev_delta = ws.deltas[l - 1];
      const auto& prev_act = ws.activations[l]; // == relu output of layer l-1
      for (int c = 0; c < layer.in_dim; ++c) {
        double acc = 0.0;
        for (int r = 0; r < layer.out_dim; ++r) {
          acc += layer.weights[static_cast<std::size_t>(r) * layer.in_dim + c] *
                 delta[static_cast<std::size_t>(r)];
        }
        prev_delta[static_cast<std::size_t>(c)] =
            prev_act[static_cast<std::size_t>(c)] > 0.0 ? acc : 0.0;
      }
    }
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    Layer& g = grads.layers[l];
    const Layer& w = model.layers[l];
    for (std::size_t i = 0; i < g.weights.size(); ++i) {
      g.weights[i] = g.weights[i] * inv_batch + weight_decay * w.weights[i];
    }
    for (double& bgrad : g.bias) bgrad *= inv_batch;
  }
  return loss_sum * inv_batch;
}

// Nesterov momentum update: v <- mu*v - lr*g; w <- w + mu*v - lr*g.
inline void sgd_step(ModelState& state, const Gradients& grads, double lr,
                     double momentum) {
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    Layer& w = state.layers[l];
    Layer& v = state.velocity[l];
    const Layer& g = grads.layers[l];
    for (std::size_t i = 0; i < w.weights.size(); ++i) {
      if (!std::isfinite(g.weights[i])) {
        throw TrainingError("sgd_step: non-finite weight gradient");
      }
      const double step = momentum * v.weights[i] - lr * g.weights[i];
      v.weights[i] = step;
      w.weights[i] += momentum * step - lr * g.weights[i];
    }
    for (std::size_t i = 0; i < w.bias.size(); ++i) {
      if (!std::isfinite(g.bias[i])) {
        throw TrainingError("sgd_step: non-finite bias gradient");
      }
      const double step = momentum * v.bias[i] - lr * g.bias[i];
      v.bias[i] = step;
      w.bias[i] += momentum * step - lr * g.bias[i];
    }
  }
}

} // namespace biasamp
