#pragma once

// Shared finite-difference gradient oracle. Central differences are invalid
// when a perturbation can flip a ReLU unit, so cases are screened by the
// smallest hidden pre-activation magnitude before differencing.

#include <cmath>
#include <span>
#include <vector>

#include "biasamp/model.hpp"

namespace gradcheck {

using namespace biasamp;

// Minimum |pre-activation| over all hidden units and batch rows, recomputed
// here independently of the library's forward pass.
inline double min_abs_hidden_preactivation(const ModelState& model,
                                           std::span<const double> features, int batch) {
  double best = std::numeric_limits<double>::infinity();
  const int dim = model.arch.input_dim;
  for (int b = 0; b < batch; ++b) {
    std::vector<double> act(features.begin() + static_cast<std::ptrdiff_t>(b) * dim,
                            features.begin() + static_cast<std::ptrdiff_t>(b + 1) * dim);
    for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
      const Layer& layer = model.layers[l];
      std::vector<double> next(static_cast<std::size_t>(layer.out_dim));
      for (int r = 0; r < layer.out_dim; ++r) {
        double z = layer.bias[static_cast<std::size_t>(r)];
        for (int c = 0; c < layer.in_dim; ++c) {
          z += layer.weights[static_cast<std::size_t>(r) * layer.in_dim + c] *
               act[static_cast<std::size_t>(c)];
        }
        best = std::min(best, std::fabs(z));
        next[static_cast<std::size_t>(r)] = z > 0.0 ? z : 0.0;
      }
      act = std::move(next);
    }
  }
  return best;
}

struct GradCheckResult {
  double max_abs_diff = 0.0;
  double scale = 0.0;

  double relative() const { return max_abs_diff / std::max(1.0, scale); }
};

inline GradCheckResult compare_to_central_differences(ModelState& model,
                                                      std::span<const double> x,
                                                      std::span<const std::int8_t> y,
                                                      double lambda, double h = 1e-5) {
  Gradients grads;
  Workspace ws;
  loss_and_grad(model, x, y, lambda, grads, ws);

  std::vector<double*> params;
  std::vector<double> analytic;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    for (std::size_t i = 0; i < model.layers[l].weights.size(); ++i) {
      params.push_back(&model.layers[l].weights[i]);
      analytic.push_back(grads.layers[l].weights[i]);
    }
    for (std::size_t i = 0; i < model.layers[l].bias.size(); ++i) {
      params.push_back(&model.layers[l].bias[i]);
      analytic.push_back(grads.layers[l].bias[i]);
    }
  }

  // FD target: the penalized scalar whose exact derivative the analytic
  // gradient is (mean BCE + lambda/2 * sum w^2).
  const auto scalar = [&]() {
    Gradients g;
    Workspace w;
    double loss = loss_and_grad(model, x, y, 0.0, g, w);
    for (const auto& layer : model.layers) {
      for (double wv : layer.weights) loss += 0.5 * lambda * wv * wv;
    }
    return loss;
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + h;
    const double up = scalar();
    *params[i] = saved - h;
    const double down = scalar();
    *params[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    result.max_abs_diff = std::max(result.max_abs_diff, std::fabs(fd - analytic[i]));
    result.scale = std::max(result.scale, std::fabs(fd) + std::fabs(analytic[i]));
  }
  return result;
}

} // namespace gradcheck
