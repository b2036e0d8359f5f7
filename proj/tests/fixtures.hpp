#pragma once

#include <vector>

#include "biasamp/types.hpp"

namespace fixtures {

using biasamp::Group;
using biasamp::PredictionRecord;

inline PredictionRecord rec(int true_class, int predicted, double confidence, Group g) {
  PredictionRecord r;
  r.true_class = static_cast<std::int8_t>(true_class);
  r.predicted_class = static_cast<std::int8_t>(predicted);
  r.confidence = confidence;
  r.correct = true_class == predicted;
  r.group = g;
  return r;
}

// 20 records. True labels: group a holds 8 positives / 2 negatives, group b
// 2 positives / 8 negatives. Predictions: 9 predicted positive in group a
// (all 8 true positives plus one negative), 9 predicted negative in group b.
// Enumerating the measure by hand gives delta = +0.1 in every cell after the
// direction flip, so the aggregate is 0.1.
inline std::vector<PredictionRecord> twenty_records() {
  std::vector<PredictionRecord> r;
  for (int i = 0; i < 8; ++i) r.push_back(rec(1, 1, 0.9, Group::a));
  r.push_back(rec(-1, 1, 0.9, Group::a));
  r.push_back(rec(-1, -1, 0.9, Group::a));
  for (int i = 0; i < 8; ++i) r.push_back(rec(-1, -1, 0.9, Group::b));
  r.push_back(rec(1, -1, 0.9, Group::b));
  r.push_back(rec(1, 1, 0.9, Group::b));
  return r;
}

// Four records binned at 0.9 (2 correct) and 0.6 (1 correct, 1 wrong):
// ECE = 0.5*|1 - 0.9| + 0.5*|0.5 - 0.6| = 0.1.
inline std::vector<PredictionRecord> calibration_four() {
  return {rec(1, 1, 0.9, Group::a), rec(-1, -1, 0.9, Group::b),
          rec(1, 1, 0.6, Group::a), rec(1, -1, 0.6, Group::b)};
}

} // namespace fixtures
