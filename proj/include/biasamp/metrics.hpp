#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasamp/error.hpp"
#include "biasamp/stats.hpp"
#include "biasamp/types.hpp"

// Directional bias amplification, calibration error, and disaggregated
// accuracy over prediction records. All rates are formed from integer counts
// and divided once at the end, so exact identities (e.g. zero amplification
// when predictions equal labels) hold bit-for-bit.

namespace biasamp {

struct ConditionalRates {
  // Indexing: [group_index][class_index], class_index 0 = t=-1, 1 = t=+1.
  std::array<std::array<std::int64_t, 2>, 2> label_counts{};
  std::array<std::array<std::int64_t, 2>, 2> pred_counts{};
  std::array<std::int64_t, 2> group_totals{};
  std::array<std::int64_t, 2> class_totals{}; // over true labels
  std::int64_t total = 0;

  double label_rate(Group a, int t_idx) const {
    return static_cast<double>(label_counts[group_index(a)][t_idx]) /
           static_cast<double>(group_totals[group_index(a)]);
  }
  double pred_rate(Group a, int t_idx) const {
    return static_cast<double>(pred_counts[group_index(a)][t_idx]) /
           static_cast<double>(group_totals[group_index(a)]);
  }
};

// Empirical Pr(T_t | A_a) and Pr(T-hat_t | A_a) per cell. Both groups must
// be present.
inline ConditionalRates conditional_rates(std::span<const PredictionRecord> records) {
  ConditionalRates r;
  for (const auto& rec : records) {
    const int g = group_index(rec.group);
    r.label_counts[g][class_index(rec.true_class)] += 1;
    r.pred_counts[g][class_index(rec.predicted_class)] += 1;
    r.group_totals[g] += 1;
    r.class_totals[class_index(rec.true_class)] += 1;
    r.total += 1;
  }
  for (int g = 0; g < 2; ++g) {
    if (r.group_totals[g] == 0) {
      throw DataError(std::string("conditional_rates: group ") +
                      group_name(g == 0 ? Group::a : Group::b) + " has no records");
    }
  }
  return r;
}

// Direction indicator: 1 iff Pr(T_t, A_a) > Pr(T_t) * Pr(A_a), decided on
// exact integer counts (strict inequality; exact independence gives 0).
inline int direction_y(const ConditionalRates& rates, Group a, int t_idx) {
  const int g = group_index(a);
  const std::int64_t joint = rates.label_counts[g][t_idx];
  // joint/N > (class/N)*(group/N)  <=>  joint*N > class*group
  return (joint * rates.total > rates.class_totals[t_idx] * rates.group_totals[g]) ? 1 : 0;
}

inline int direction_y(std::span<const PredictionRecord> records, Group a, int t_idx) {
  return direction_y(conditional_rates(records), a, t_idx);
}

struct BiasAmpCell {
  double dataset_rate = 0.0;    // Pr(T_t = 1 | A_a = 1)
  double prediction_rate = 0.0; // Pr(T-hat_t = 1 | A_a = 1)
  double delta = 0.0;
  int y = 0;
  // True labels give the cell mass but the model never predicted t there.
  bool no_predicted_mass = false;
};

struct BiasAmpBreakdown {
  // [group_index][class_index]
  std::array<std::array<BiasAmpCell, 2>, 2> cells{};
  double aggregate = 0.0;
};

// Directional amplification score: mean over the four (group, class) cells
// of y*delta - (1-y)*delta. Positive = amplification, negative = dampening.
inline BiasAmpBreakdown bias_amp(std::span<const PredictionRecord> records) {
  const ConditionalRates rates = conditional_rates(records);
  for (int t = 0; t < 2; ++t) {
    if (rates.class_totals[t] == 0) {
      throw DataError(std::string("bias_amp: class ") + (t == 1 ? "+1" : "-1") +
                      " absent from true labels");
    }
  }
  BiasAmpBreakdown out;
  double sum = 0.0;
  for (int g = 0; g < 2; ++g) {
    const Group a = g == 0 ? Group::a : Group::b;
    for (int t = 0; t < 2; ++t) {
      BiasAmpCell& cell = out.cells[g][t];
      cell.dataset_rate = rates.label_rate(a, t);
      cell.prediction_rate = rates.pred_rate(a, t);
      cell.delta = cell.prediction_rate - cell.dataset_rate;
      cell.y = direction_y(rates, a, t);
      cell.no_predicted_mass =
          rates.pred_counts[g][t] == 0 && rates.label_counts[g][t] > 0;
      sum += cell.y == 1 ? cell.delta : -cell.delta;
    }
  }
  out.aggregate = sum / 4.0;
  return out;
}

struct CalibrationBin {
  std::int64_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct CalibrationTable {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
};

// Expected calibration error over equal-width confidence bins
// ((k-1)/B, k/B], the first bin closed at 0. ECE is the bin-count weighted
// mean of |accuracy - mean confidence|.
inline CalibrationTable ece(std::span<const PredictionRecord> records,
                            int bin_count = 15) {
  if (bin_count < 1) throw ConfigError("ece: bin_count must be >= 1");
  CalibrationTable table;
  table.bins.resize(static_cast<std::size_t>(bin_count));
  std::vector<double> conf_sum(static_cast<std::size_t>(bin_count), 0.0);
  std::vector<std::int64_t> correct(static_cast<std::size_t>(bin_count), 0);
  for (const auto& rec : records) {
    const double c = rec.confidence;
    int idx = c <= 0.0 ? 0
                       : static_cast<int>(std::ceil(c * static_cast<double>(bin_count))) - 1;
    if (idx < 0) idx = 0;
    if (idx >= bin_count) idx = bin_count - 1;
    table.bins[static_cast<std::size_t>(idx)].count += 1;
    conf_sum[static_cast<std::size_t>(idx)] += c;
    correct[static_cast<std::size_t>(idx)] += rec.correct ? 1 : 0;
  }
  double weighted = 0.0;
  const double n = static_cast<double>(records.size());
  for (int b = 0; b < bin_count; ++b) {
    auto& bin = table.bins[static_cast<std::size_t>(b)];
    if (bin.count == 0) continue;
    bin.mean_confidence = conf_sum[static_cast<std::size_t>(b)] /
                          static_cast<double>(bin.count);
    bin.accuracy = static_cast<double>(correct[static_cast<std::size_t>(b)]) /
                   static_cast<double>(bin.count);
    weighted += static_cast<double>(bin.count) / n *
                std::fabs(bin.accuracy - bin.mean_confidence);
  }
  table.ece = records.empty() ? 0.0 : weighted;
  return table;
}

struct DisaggregatedAccuracy {
  // [group_index][class_index]; empty cells stay unset rather than zero.
  std::array<std::array<std::optional<double>, 2>, 2> cells{};
  std::array<std::array<std::int64_t, 2>, 2> counts{};
};

inline DisaggregatedAccuracy disaggregated_accuracy(
    std::span<const PredictionRecord> records) {
  std::array<std::array<std::int64_t, 2>, 2> correct{};
  DisaggregatedAccuracy out;
  for (const auto& rec : records) {
    const int g = group_index(rec.group);
    const int t = class_index(rec.true_class);
    out.counts[g][t] += 1;
    correct[g][t] += rec.correct ? 1 : 0;
  }
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) {
      if (out.counts[g][t] > 0) {
        out.cells[g][t] = static_cast<double>(correct[g][t]) /
                          static_cast<double>(out.counts[g][t]);
      }
    }
  }
  return out;
}

inline double accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) return 0.0;
  std::int64_t correct = 0;
  for (const auto& rec : records) correct += rec.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

struct IntervalSummary {
  double mean = 0.0;
  std::optional<double> half_width; // unset when n < 2
  double level = 0.95;
  std::int64_t n = 0;

  double low() const { return mean - half_width.value_or(0.0); }
  double high() const { return mean + half_width.value_or(0.0); }
};

// Student-t interval around the mean: half-width =
// t_{(1+level)/2, n-1} * stddev / sqrt(n), with the population stddev.
inline IntervalSummary confidence_interval(std::span<const double> values,
                                           double level = 0.95) {
  if (values.empty()) throw DataError("confidence_interval: no values");
  IntervalSummary s;
  s.level = level;
  s.n = static_cast<std::int64_t>(values.size());
  s.mean = stats::mean(values);
  if (s.n >= 2) {
    const double sd = stats::population_stddev(values);
    const double t = stats::student_t_quantile(0.5 * (1.0 + level),
                                               static_cast<double>(s.n - 1));
    s.half_width = t * sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

} // namespace biasamp
