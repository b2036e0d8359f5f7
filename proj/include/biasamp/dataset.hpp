#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasamp/error.hpp"
#include "biasamp/types.hpp"

namespace biasamp {

struct ImageShape {
  std::uint32_t channels = 1;
  std::uint32_t height = 1;
  std::uint32_t width = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  bool operator==(const ImageShape&) const = default;
};

// Decoded source dataset: 8-bit pixels plus the original integer class ids.
struct RawDataset {
  Split split = Split::train;
  ImageShape shape;
  std::uint32_t class_count = 0;
  std::vector<std::int32_t> labels;  // one id in [0, class_count) per example
  std::vector<std::uint8_t> pixels;  // labels.size() * shape.size() bytes

  std::size_t size() const { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * shape.size(), shape.size()};
  }
};

// One trainable sample after the bias pipeline: real-valued features on the
// raw pixel scale (normalization happens at batch assembly) plus the binary
// class and group labels.
struct Example {
  std::vector<double> features;
  std::int8_t class_label = -1; // -1 or +1
  Group group = Group::a;
};

struct BiasConfig {
  enum class Convention { inversion, mixing };

  double epsilon = 0.0; // in [0, 1/2]; dataset bias strength is 2*epsilon
  Convention convention = Convention::inversion;
  // Test split bias; defaults to the training epsilon.
  std::optional<double> test_epsilon;

  double effective_test_epsilon() const { return test_epsilon.value_or(epsilon); }

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 0.5)) {
      throw ConfigError("bias.epsilon = " + std::to_string(epsilon) +
                        " outside [0, 0.5]");
    }
    if (test_epsilon && !(*test_epsilon >= 0.0 && *test_epsilon <= 0.5)) {
      throw ConfigError("bias.test_epsilon = " + std::to_string(*test_epsilon) +
                        " outside [0, 0.5]");
    }
  }
};

// Convex image-mixing setup: two source classes supply group images, two
// supply the binary task, eta weights the group image.
struct MixConfig {
  double eta = 0.5; // in [0, 1]
  std::array<std::int32_t, 2> group_class_ids{0, 1};
  std::array<std::int32_t, 2> task_class_ids{2, 3}; // [positive, negative]

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) {
      throw ConfigError("mix.eta = " + std::to_string(eta) + " outside [0, 1]");
    }
    const std::int32_t ids[4] = {group_class_ids[0], group_class_ids[1],
                                 task_class_ids[0], task_class_ids[1]};
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) {
        if (ids[i] == ids[j]) {
          throw ConfigError("mix class ids must be four distinct values");
        }
      }
    }
  }
};

// Synthetic flat-vector generator: class signal on axis 0, group signal on
// axis 1, isotropic gaussian noise elsewhere. The margins play the role of
// relative class/group recognizability.
struct SynthConfig {
  std::int32_t dimension = 2;
  double class_margin = 1.0;
  double group_margin = 1.0;
  double noise_sigma = 0.0;
  std::int32_t train_size = 0;
  std::int32_t test_size = 0;

  void validate() const {
    if (dimension < 2) {
      throw ConfigError("synth.dimension = " + std::to_string(dimension) +
                        " must be >= 2");
    }
    if (!(class_margin >= 0.0) || !std::isfinite(class_margin)) {
      throw ConfigError("synth.class_margin must be finite and >= 0");
    }
    if (!(group_margin >= 0.0) || !std::isfinite(group_margin)) {
      throw ConfigError("synth.group_margin must be finite and >= 0");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      throw ConfigError("synth.noise_sigma must be finite and >= 0");
    }
    if (train_size <= 0 || test_size <= 0) {
      throw ConfigError("synth.train_size and synth.test_size must be positive");
    }
  }
};

inline constexpr double kStdFloor = 1e-8;

struct NormalizationStats {
  std::vector<double> mean;   // one entry per channel
  std::vector<double> stddev; // population stddev, floored at kStdFloor

  static NormalizationStats identity(std::uint32_t channels) {
    NormalizationStats s;
    s.mean.assign(channels, 0.0);
    s.stddev.assign(channels, 1.0);
    return s;
  }
};

// A fully built train/test pair ready for the trainer.
struct BuiltDataset {
  std::vector<Example> train;
  std::vector<Example> test;
  NormalizationStats stats; // identity for synthetic sources
  ImageShape shape;         // flat vectors use {1, 1, d}
  bool image_like = false;  // enables crop/flip augmentation geometry
  bool synthetic = false;   // flagged through to reports
  std::vector<std::string> warnings;
};

} // namespace biasamp
