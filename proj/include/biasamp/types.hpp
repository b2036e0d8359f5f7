#pragma once

#include <cstdint>

namespace biasamp {

enum class Split : std::uint8_t { train = 0, test = 1 };

// Binary group label. Under the inversion protocol, group a keeps the
// original pixels and group b is the photographic negative. Under the mixing
// protocol, a and b name the two group-image source classes.
enum class Group : std::uint8_t { a = 0, b = 1 };

inline const char* group_name(Group g) { return g == Group::a ? "a" : "b"; }
inline int group_index(Group g) { return g == Group::b ? 1 : 0; }

// Class labels are -1 / +1 throughout; index 0 maps to -1 and 1 to +1.
inline int class_index(std::int8_t t) { return t > 0 ? 1 : 0; }
inline std::int8_t class_from_index(int idx) { return idx == 1 ? std::int8_t{1} : std::int8_t{-1}; }

// One scored test example: what the model said about it and where it lives
// in the (class, group) table.
struct PredictionRecord {
  std::int8_t true_class = -1;
  std::int8_t predicted_class = -1;
  double confidence = 0.5; // max(p, 1-p), in [0.5, 1] for model output
  bool correct = false;
  Group group = Group::a;
};

} // namespace biasamp
