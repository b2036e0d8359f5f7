#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "biasamp/dataset.hpp"
#include "biasamp/model.hpp"
#include "biasamp/transforms.hpp"

namespace biasamp {

// Which label the model is trained to predict. group_label is used by the
// group-recognizability probe (group b maps to +1).
enum class TargetLabel { class_label, group_label };

inline std::int8_t target_of(const Example& ex, TargetLabel target) {
  if (target == TargetLabel::class_label) return ex.class_label;
  return ex.group == Group::b ? std::int8_t{1} : std::int8_t{-1};
}

namespace detail {

inline void flip_horizontal(std::span<double> img, const ImageShape& shape) {
  const std::size_t w = shape.width;
  for (std::uint32_t c = 0; c < shape.channels; ++c) {
    for (std::uint32_t r = 0; r < shape.height; ++r) {
      double* row = img.data() + (static_cast<std::size_t>(c) * shape.height + r) * w;
      std::reverse(row, row + w);
    }
  }
}

} // namespace detail

// Training-time augmentation: zero-pad by `pad`, take a random crop at the
// original size, then flip horizontally with probability 1/2. pad = 0 makes
// the crop a no-op, which is the 28x28 behaviour.
inline void augment_image(std::span<double> img, const ImageShape& shape, int pad,
                          Rng& rng, std::vector<double>& scratch) {
  const std::size_t h = shape.height;
  const std::size_t w = shape.width;
  const auto row_off = static_cast<std::ptrdiff_t>(rng.uniform_below(2 * pad + 1)) - pad;
  const auto col_off = static_cast<std::ptrdiff_t>(rng.uniform_below(2 * pad + 1)) - pad;
  const bool flip = rng.uniform01() < 0.5;
  if (pad > 0) {
    scratch.assign(img.size(), 0.0);
    for (std::uint32_t c = 0; c < shape.channels; ++c) {
      const std::size_t plane = static_cast<std::size_t>(c) * h * w;
      for (std::size_t r = 0; r < h; ++r) {
        const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r) + row_off;
        if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t col = 0; col < w; ++col) {
          const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(col) + col_off;
          if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(w)) continue;
          scratch[plane + r * w + col] =
              img[plane + static_cast<std::size_t>(sr) * w + static_cast<std::size_t>(sc)];
        }
      }
    }
    std::copy(scratch.begin(), scratch.end(), img.begin());
  }
  if (flip) detail::flip_horizontal(img, shape);
}

// Convenience form taking a seed directly (one image, one draw sequence).
inline void augment_image(std::span<double> img, const ImageShape& shape, int pad,
                          std::uint64_t seed) {
  Rng rng(derive_seed(seed, "augment_image"));
  std::vector<double> scratch;
  augment_image(img, shape, pad, rng, scratch);
}

inline int augmentation_pad(const ImageShape& shape) {
  // 32-pixel images get the 4-pixel zero padding; 28-pixel ones crop in place.
  return shape.height == 32 ? 4 : 0;
}

using EpochHook = std::function<void(int epoch, double lr, const ModelState&)>;

// Full training loop. Deterministic per (arch, cfg, dataset, seed): the
// shuffle and augmentation streams are derived per epoch, so the trajectory
// is reproducible draw for draw.
inline ModelState train_model(ArchConfig arch, const TrainConfig& cfg,
                              const BuiltDataset& ds,
                              std::uint64_t seed,
                              TargetLabel target = TargetLabel::class_label,
                              const EpochHook& hook = {},
                              double epoch_scale_fallback = 1.0) {
  cfg.validate();
  if (ds.train.empty()) throw DataError("train_model: empty training set");
  const int dim = static_cast<int>(ds.shape.size());
  if (arch.input_dim == 0) arch.input_dim = dim;
  if (arch.input_dim != dim) {
    throw ConfigError("arch.input_dim = " + std::to_string(arch.input_dim) +
                      " does not match dataset dimension " + std::to_string(dim));
  }
  ModelState model = init_model(arch, derive_seed(seed, "init"));
  const int effective = cfg.effective_epochs(epoch_scale_fallback);
  const int pad = augmentation_pad(ds.shape);
  const bool augment = cfg.augmentation && ds.image_like;

  std::vector<std::size_t> order(ds.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t batch_cap = static_cast<std::size_t>(cfg.batch_size);
  std::vector<double> batch(batch_cap * static_cast<std::size_t>(dim));
  std::vector<std::int8_t> labels(batch_cap);
  std::vector<double> scratch;
  Gradients grads;
  Workspace ws;

  for (int epoch = 1; epoch <= effective; ++epoch) {
    const double lr = lr_at(cfg, epoch, effective);
    Rng shuffle_rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    Rng augment_rng(derive_seed(seed, "augment", static_cast<std::uint64_t>(epoch)));

    for (std::size_t start = 0; start < order.size(); start += batch_cap) {
      const std::size_t count = std::min(batch_cap, order.size() - start);
      for (std::size_t b = 0; b < count; ++b) {
        const Example& ex = ds.train[order[start + b]];
        double* dst = batch.data() + b * static_cast<std::size_t>(dim);
        std::copy(ex.features.begin(), ex.features.end(), dst);
        std::span<double> view(dst, static_cast<std::size_t>(dim));
        if (augment) augment_image(view, ds.shape, pad, augment_rng, scratch);
        apply_normalization(view, ds.stats, ds.shape);
        labels[b] = target_of(ex, target);
      }
      const double loss = loss_and_grad(
          model, std::span<const double>(batch.data(), count * static_cast<std::size_t>(dim)),
          std::span<const std::int8_t>(labels.data(), count), cfg.weight_decay, grads, ws);
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged: non-finite loss", epoch);
      }
      try {
        sgd_step(model, grads, lr, cfg.momentum);
      } catch (const TrainingError& e) {
        throw TrainingError(e.what(), epoch);
      }
    }
    model.epoch = epoch;
    if (hook) hook(epoch, lr, model);
  }
  return model;
}

// Scores a split with no augmentation. Threshold at probability 0.5, ties
// predicted +1; confidence is max(p, 1-p).
inline std::vector<PredictionRecord> predict(const ModelState& model,
                                             std::span<const Example> examples,
                                             const NormalizationStats& stats,
                                             const ImageShape& shape,
                                             TargetLabel target = TargetLabel::class_label) {
  const int dim = static_cast<int>(shape.size());
  if (model.arch.input_dim != dim) {
    throw ConfigError("predict: model input dimension mismatch");
  }
  Workspace ws;
  ws.prepare(model);
  std::vector<double> buffer(static_cast<std::size_t>(dim));
  std::vector<PredictionRecord> records;
  records.reserve(examples.size());
  for (const auto& ex : examples) {
    std::copy(ex.features.begin(), ex.features.end(), buffer.begin());
    apply_normalization(buffer, stats, shape);
    detail::check_finite_features(buffer);
    const double p = detmath::sigmoid(detail::forward_logit(model, buffer, ws));
    PredictionRecord rec;
    rec.true_class = target_of(ex, target);
    rec.predicted_class = p >= 0.5 ? std::int8_t{1} : std::int8_t{-1};
    rec.confidence = std::max(p, 1.0 - p);
    rec.correct = rec.predicted_class == rec.true_class;
    rec.group = ex.group;
    records.push_back(rec);
  }
  return records;
}

} // namespace biasamp
