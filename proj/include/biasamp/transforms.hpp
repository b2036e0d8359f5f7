#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biasamp/dataset.hpp"
#include "biasamp/rng.hpp"

namespace biasamp {

// Random half/half split of the original class ids onto {-1, +1}.
// Pure function of (class_count, seed); requires an even class count.
inline std::vector<std::int8_t> binarize_labels(std::uint32_t class_count,
                                                std::uint64_t seed) {
  if (class_count == 0 || class_count % 2 != 0) {
    throw ConfigError("binarize_labels requires an even, nonzero class count, got " +
                      std::to_string(class_count));
  }
  std::vector<std::uint32_t> ids(class_count);
  for (std::uint32_t i = 0; i < class_count; ++i) ids[i] = i;
  Rng rng(derive_seed(seed, "binarize_labels"));
  rng.shuffle(ids);
  std::vector<std::int8_t> map(class_count, -1);
  for (std::uint32_t i = 0; i < class_count / 2; ++i) map[ids[i]] = 1;
  return map;
}

namespace detail {

// One independent group draw. Inversion protocol: positives are inverted
// (group b) with rate 1/2 - eps, negatives with rate 1/2 + eps. Mixing
// protocol: positives land in group a with rate 1/2 + eps, negatives with
// rate 1/2 - eps. The two conventions are kept as written rather than
// unified.
inline Group draw_group(Rng& rng, BiasConfig::Convention convention,
                        std::int8_t class_label, double epsilon) {
  const bool positive = class_label > 0;
  if (convention == BiasConfig::Convention::inversion) {
    const double invert_rate = positive ? 0.5 - epsilon : 0.5 + epsilon;
    return rng.uniform01() < invert_rate ? Group::b : Group::a;
  }
  const double a_rate = positive ? 0.5 + epsilon : 0.5 - epsilon;
  return rng.uniform01() < a_rate ? Group::a : Group::b;
}

} // namespace detail

// Draws a group label for every example, independently per the convention's
// rate. Class labels must already be binary.
inline void assign_groups(std::vector<Example>& examples, const BiasConfig& bias,
                          std::uint64_t seed) {
  bias.validate();
  Rng rng(derive_seed(seed, "assign_groups"));
  for (auto& ex : examples) {
    ex.group = detail::draw_group(rng, bias.convention, ex.class_label, bias.epsilon);
  }
}

// Photographic negative, v -> 255 - v. An involution on 8-bit tensors.
inline std::vector<std::uint8_t> invert_image(std::span<const std::uint8_t> img) {
  std::vector<std::uint8_t> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(255 - img[i]);
  }
  return out;
}

// Same formula on the real-valued copy of raw pixels.
inline void invert_real_in_place(std::span<double> img) {
  for (double& v : img) v = 255.0 - v;
}

// I = eta * I_group + (1 - eta) * I_class in real arithmetic; the endpoints
// eta = 0 and eta = 1 reproduce the inputs exactly.
inline std::vector<double> mix_images(std::span<const double> class_img,
                                      std::span<const double> group_img,
                                      double eta) {
  if (class_img.size() != group_img.size()) {
    throw ConfigError("mix_images: shape mismatch (" +
                      std::to_string(class_img.size()) + " vs " +
                      std::to_string(group_img.size()) + ")");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw ConfigError("mix_images: eta = " + std::to_string(eta) +
                      " outside [0, 1]");
  }
  std::vector<double> out(class_img.size());
  const double keep = 1.0 - eta;
  for (std::size_t i = 0; i < class_img.size(); ++i) {
    out[i] = eta * group_img[i] + keep * class_img[i];
  }
  return out;
}

// Keeps round(p * cell_size) examples per (class, group) cell, half-up,
// chosen uniformly without replacement. Output preserves input order.
inline std::vector<Example> stratified_subsample(const std::vector<Example>& examples,
                                                 double p, std::uint64_t seed,
                                                 std::vector<std::string>* warnings = nullptr) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ConfigError("subsample_fraction = " + std::to_string(p) +
                      " outside (0, 1]");
  }
  std::array<std::vector<std::size_t>, 4> cells; // [class_index * 2 + group_index]
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    cells[class_index(ex.class_label) * 2 + group_index(ex.group)].push_back(i);
  }
  Rng rng(derive_seed(seed, "stratified_subsample"));
  std::vector<std::size_t> selected;
  selected.reserve(examples.size());
  for (int c = 0; c < 4; ++c) {
    auto& cell = cells[c];
    if (cell.empty()) continue;
    const auto keep = static_cast<std::size_t>(
        std::floor(p * static_cast<double>(cell.size()) + 0.5));
    if (keep == 0) {
      if (warnings != nullptr) {
        warnings->push_back("stratified_subsample: cell (t=" +
                            std::string(c >= 2 ? "+1" : "-1") + ", group=" +
                            group_name(c % 2 == 0 ? Group::a : Group::b) +
                            ") with " + std::to_string(cell.size()) +
                            " examples rounded to zero at p=" + std::to_string(p));
      }
      continue;
    }
    rng.shuffle(cell);
    selected.insert(selected.end(), cell.begin(), cell.begin() + keep);
  }
  std::sort(selected.begin(), selected.end());
  std::vector<Example> out;
  out.reserve(selected.size());
  for (std::size_t idx : selected) out.push_back(examples[idx]);
  return out;
}

// Per-channel mean and population stddev over the original 8-bit pixels.
// Accumulation is in exact integer arithmetic, so the stats are bit-stable.
inline NormalizationStats compute_normalization(const RawDataset& train) {
  if (train.size() == 0) {
    throw DataError("compute_normalization: empty train split");
  }
  const std::uint32_t channels = train.shape.channels;
  const std::size_t plane = static_cast<std::size_t>(train.shape.height) * train.shape.width;
  std::vector<std::uint64_t> sum(channels, 0), sumsq(channels, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto img = train.image(i);
    for (std::uint32_t c = 0; c < channels; ++c) {
      const std::uint8_t* px = img.data() + c * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        sum[c] += px[k];
        sumsq[c] += static_cast<std::uint64_t>(px[k]) * px[k];
      }
    }
  }
  const double n = static_cast<double>(train.size()) * static_cast<double>(plane);
  NormalizationStats stats;
  stats.mean.resize(channels);
  stats.stddev.resize(channels);
  for (std::uint32_t c = 0; c < channels; ++c) {
    const double mean = static_cast<double>(sum[c]) / n;
    const double var = static_cast<double>(sumsq[c]) / n - mean * mean;
    stats.mean[c] = mean;
    stats.stddev[c] = std::max(std::sqrt(std::max(var, 0.0)), kStdFloor);
  }
  return stats;
}

inline void apply_normalization(std::span<double> features,
                                const NormalizationStats& stats,
                                const ImageShape& shape) {
  const std::size_t plane = static_cast<std::size_t>(shape.height) * shape.width;
  for (std::uint32_t c = 0; c < shape.channels; ++c) {
    const double mean = stats.mean[c];
    const double inv = 1.0 / stats.stddev[c];
    double* px = features.data() + c * plane;
    for (std::size_t k = 0; k < plane; ++k) px[k] = (px[k] - mean) * inv;
  }
}

// x = class_margin * t * e0 + group_margin * g * e1 + sigma * gaussian,
// with g = +1 for group a. Group draws follow the bias convention, so the
// group axis correlates with the positive class at rate 1/2 + eps.
inline BuiltDataset synth_generate(const SynthConfig& cfg, const BiasConfig& bias,
                                   std::uint64_t seed) {
  cfg.validate();
  bias.validate();
  const auto gen_split = [&](std::int32_t count, double eps, std::uint64_t split_seed) {
    Rng rng(split_seed);
    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int32_t i = 0; i < count; ++i) {
      Example ex;
      ex.class_label = rng.uniform01() < 0.5 ? std::int8_t{1} : std::int8_t{-1};
      ex.group = detail::draw_group(rng, bias.convention, ex.class_label, eps);
      ex.features.resize(static_cast<std::size_t>(cfg.dimension));
      for (auto& f : ex.features) f = cfg.noise_sigma * rng.normal();
      ex.features[0] += cfg.class_margin * static_cast<double>(ex.class_label);
      ex.features[1] += cfg.group_margin * (ex.group == Group::a ? 1.0 : -1.0);
      out.push_back(std::move(ex));
    }
    return out;
  };
  BuiltDataset ds;
  ds.train = gen_split(cfg.train_size, bias.epsilon, derive_seed(seed, "synth_train"));
  ds.test = gen_split(cfg.test_size, bias.effective_test_epsilon(),
                      derive_seed(seed, "synth_test"));
  ds.shape = ImageShape{1, 1, static_cast<std::uint32_t>(cfg.dimension)};
  ds.stats = NormalizationStats::identity(1);
  ds.image_like = false;
  ds.synthetic = true;
  return ds;
}

// Inversion protocol over a raw image dataset: binarize the original classes,
// draw group labels, invert the pixels of group b. Normalization stats come
// from the original train split, before any inversion.
inline BuiltDataset build_inversion_dataset(const RawDataset& raw_train,
                                            const RawDataset& raw_test,
                                            const BiasConfig& bias,
                                            std::uint64_t seed) {
  bias.validate();
  if (raw_train.class_count != raw_test.class_count) {
    throw ConfigError("train/test class counts differ");
  }
  if (!(raw_train.shape == raw_test.shape)) {
    throw ConfigError("train/test image shapes differ");
  }
  const auto binmap = binarize_labels(raw_train.class_count, seed);

  const auto build_split = [&](const RawDataset& raw, double eps, std::uint64_t split_seed) {
    std::vector<Example> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out[i].class_label = binmap[static_cast<std::size_t>(raw.labels[i])];
    }
    BiasConfig split_bias = bias;
    split_bias.epsilon = eps;
    split_bias.test_epsilon.reset();
    assign_groups(out, split_bias, split_seed);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto img = raw.image(i);
      auto& feat = out[i].features;
      feat.resize(img.size());
      for (std::size_t k = 0; k < img.size(); ++k) feat[k] = img[k];
      if (out[i].group == Group::b) invert_real_in_place(feat);
    }
    return out;
  };

  BuiltDataset ds;
  ds.stats = compute_normalization(raw_train);
  ds.train = build_split(raw_train, bias.epsilon, derive_seed(seed, "groups_train"));
  ds.test = build_split(raw_test, bias.effective_test_epsilon(),
                        derive_seed(seed, "groups_test"));
  ds.shape = raw_train.shape;
  ds.image_like = true;
  return ds;
}

// Mixing protocol: every example of the two task classes becomes a convex
// blend with a group image sampled (with replacement) from the drawn group's
// source class. The label is the class image's.
inline BuiltDataset build_mixing_dataset(const RawDataset& raw_train,
                                         const RawDataset& raw_test,
                                         const BiasConfig& bias,
                                         const MixConfig& mix,
                                         std::uint64_t seed) {
  bias.validate();
  mix.validate();
  for (std::int32_t id : {mix.group_class_ids[0], mix.group_class_ids[1],
                          mix.task_class_ids[0], mix.task_class_ids[1]}) {
    if (id < 0 || static_cast<std::uint32_t>(id) >= raw_train.class_count) {
      throw ConfigError("mix class id " + std::to_string(id) +
                        " outside [0, " + std::to_string(raw_train.class_count) + ")");
    }
  }

  const auto build_split = [&](const RawDataset& raw, double eps, std::uint64_t split_seed) {
    std::array<std::vector<std::size_t>, 2> group_pool; // [a, b]
    std::vector<std::size_t> task_examples;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const std::int32_t label = raw.labels[i];
      if (label == mix.group_class_ids[0]) group_pool[0].push_back(i);
      if (label == mix.group_class_ids[1]) group_pool[1].push_back(i);
      if (label == mix.task_class_ids[0] || label == mix.task_class_ids[1]) {
        task_examples.push_back(i);
      }
    }
    for (int g = 0; g < 2; ++g) {
      if (group_pool[g].empty()) {
        throw DataError("mixing: group class " +
                        std::to_string(mix.group_class_ids[g]) +
                        " has no examples in the split");
      }
    }
    Rng rng(derive_seed(split_seed, "mix_split"));
    std::vector<Example> out;
    out.reserve(task_examples.size());
    std::vector<double> class_img(raw.shape.size()), group_img(raw.shape.size());
    for (std::size_t idx : task_examples) {
      Example ex;
      ex.class_label = raw.labels[idx] == mix.task_class_ids[0] ? std::int8_t{1}
                                                                : std::int8_t{-1};
      ex.group = detail::draw_group(rng, BiasConfig::Convention::mixing,
                                    ex.class_label, eps);
      const auto& pool = group_pool[group_index(ex.group)];
      const std::size_t gidx = pool[rng.uniform_below(pool.size())];
      const auto cimg = raw.image(idx);
      const auto gimg = raw.image(gidx);
      for (std::size_t k = 0; k < cimg.size(); ++k) {
        class_img[k] = cimg[k];
        group_img[k] = gimg[k];
      }
      ex.features = mix_images(class_img, group_img, mix.eta);
      out.push_back(std::move(ex));
    }
    return out;
  };

  BuiltDataset ds;
  ds.stats = compute_normalization(raw_train);
  ds.train = build_split(raw_train, bias.epsilon, derive_seed(seed, "groups_train"));
  ds.test = build_split(raw_test, bias.effective_test_epsilon(),
                        derive_seed(seed, "groups_test"));
  ds.shape = raw_train.shape;
  ds.image_like = true;
  return ds;
}

// Exchanges the roles of class and group on every example, keeping the
// features untouched: the new class label indicates the old group (so under
// the inversion protocol it marks inverted images), the new group is the old
// class. The group mapping is the inverse of the class mapping, which makes
// a double swap the identity.
inline void swap_example_roles(std::vector<Example>& examples) {
  for (auto& ex : examples) {
    const std::int8_t old_class = ex.class_label;
    ex.class_label = ex.group == Group::b ? std::int8_t{1} : std::int8_t{-1};
    ex.group = old_class > 0 ? Group::b : Group::a;
  }
}

} // namespace biasamp
