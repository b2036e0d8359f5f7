#pragma once

#include <atomic>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "biasamp/io.hpp"
#include "biasamp/metrics.hpp"
#include "biasamp/train.hpp"
#include "biasamp/transforms.hpp"
#include "biasamp/version.hpp"

// Trial and sweep orchestration: dataset build -> training with per-epoch
// test-set evaluation -> sealed, replayable run records.

namespace biasamp {

struct DatasetSource {
  enum class Kind { synthetic, ingested };
  Kind kind = Kind::synthetic;
  SynthConfig synth;       // synthetic only
  std::string train_cache; // ingested only: raw cache paths
  std::string test_cache;
};

struct TrialConfig {
  DatasetSource dataset;
  BiasConfig bias;
  std::optional<MixConfig> mix;
  double subsample_fraction = 1.0;
  ArchConfig arch;
  TrainConfig train;
  std::uint64_t seed = 1;
  bool role_swap = false;

  void validate() const {
    if (dataset.kind == DatasetSource::Kind::synthetic) {
      dataset.synth.validate();
      if (mix) {
        throw ConfigError("mix applies only to ingested mixing-protocol datasets");
      }
    } else {
      if (dataset.train_cache.empty() || dataset.test_cache.empty()) {
        throw ConfigError("dataset.train_cache and dataset.test_cache are required");
      }
      if (bias.convention == BiasConfig::Convention::mixing && !mix) {
        throw ConfigError("mixing convention requires a mix config");
      }
      if (mix && bias.convention != BiasConfig::Convention::mixing) {
        throw ConfigError("mix config requires bias.convention = \"mixing\"");
      }
    }
    bias.validate();
    if (mix) mix->validate();
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
      throw ConfigError("subsample_fraction = " + std::to_string(subsample_fraction) +
                        " outside (0, 1]");
    }
    arch.validate();
    train.validate();
    if (role_swap && bias.convention == BiasConfig::Convention::mixing) {
      throw ConfigError("role swap is only defined for the inversion protocol");
    }
  }
};

// Role-swap toggle on the config; building the dataset applies the actual
// label exchange. Applying it twice restores the original config.
inline TrialConfig swap_roles(TrialConfig cfg) {
  if (cfg.bias.convention == BiasConfig::Convention::mixing) {
    throw ConfigError("swap_roles: unsupported for the mixing protocol");
  }
  cfg.role_swap = !cfg.role_swap;
  return cfg;
}

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double bias_amp = 0.0;
  double acc = 0.0;
  double ece = 0.0;
  // [group_index][class_index]; empty cells stay unset.
  std::array<std::array<std::optional<double>, 2>, 2> acc_cells{};
};

inline EpochMetrics compute_epoch_metrics(int epoch, double lr,
                                          std::span<const PredictionRecord> records) {
  EpochMetrics m;
  m.epoch = epoch;
  m.lr = lr;
  m.bias_amp = bias_amp(records).aggregate;
  m.acc = accuracy(records);
  m.ece = ece(records).ece;
  m.acc_cells = disaggregated_accuracy(records).cells;
  return m;
}

struct RunRecord {
  TrialConfig config;
  std::string point_key; // set by sweeps: "<axis>=<value>/seed=<index>"
  std::map<std::string, std::uint64_t> substreams;
  std::vector<EpochMetrics> trajectory; // one entry per effective epoch
  EpochMetrics final_metrics;
  std::vector<std::string> warnings;
  double wall_time_s = 0.0;
  std::string tool_version = kToolVersion;
  int schema_version = kRunRecordSchemaVersion;
};

inline bool bias_uses_mixing(const TrialConfig& cfg) {
  return cfg.bias.convention == BiasConfig::Convention::mixing && cfg.mix.has_value();
}

// Dataset assembly for one trial: generate or load, apply the protocol,
// subsample, then optionally exchange the class/group roles.
inline BuiltDataset build_trial_dataset(const TrialConfig& cfg,
                                        std::map<std::string, std::uint64_t>* substreams = nullptr) {
  const auto note = [&](const char* tag, std::uint64_t value) {
    if (substreams != nullptr) (*substreams)[tag] = value;
  };
  BuiltDataset ds;
  if (cfg.dataset.kind == DatasetSource::Kind::synthetic) {
    const std::uint64_t s = derive_seed(cfg.seed, "dataset");
    note("dataset", s);
    ds = synth_generate(cfg.dataset.synth, cfg.bias, s);
  } else {
    const RawDataset raw_train = read_raw_cache(cfg.dataset.train_cache);
    const RawDataset raw_test = read_raw_cache(cfg.dataset.test_cache);
    const std::uint64_t s = derive_seed(cfg.seed, "dataset");
    note("dataset", s);
    if (bias_uses_mixing(cfg)) {
      ds = build_mixing_dataset(raw_train, raw_test, cfg.bias, *cfg.mix, s);
    } else {
      ds = build_inversion_dataset(raw_train, raw_test, cfg.bias, s);
    }
  }
  if (cfg.subsample_fraction < 1.0) {
    const std::uint64_t s = derive_seed(cfg.seed, "subsample");
    note("subsample", s);
    ds.train = stratified_subsample(ds.train, cfg.subsample_fraction, s, &ds.warnings);
  }
  if (cfg.role_swap) {
    swap_example_roles(ds.train);
    swap_example_roles(ds.test);
  }
  return ds;
}

struct TrialResult {
  RunRecord record;
  ModelState model;
  BuiltDataset dataset;
};

// One full trial: build, train with per-epoch test evaluation, recompute the
// final metrics, seal the record.
inline TrialResult run_trial_full(const TrialConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrialResult result;
  RunRecord& record = result.record;
  record.config = cfg;
  record.substreams["train"] = derive_seed(cfg.seed, "train");
  result.dataset = build_trial_dataset(cfg, &record.substreams);
  record.warnings = result.dataset.warnings;

  ArchConfig arch = cfg.arch;
  if (arch.input_dim == 0) arch.input_dim = static_cast<int>(result.dataset.shape.size());

  const BuiltDataset& ds = result.dataset;
  const auto hook = [&](int epoch, double lr, const ModelState& model) {
    const auto records = predict(model, ds.test, ds.stats, ds.shape);
    record.trajectory.push_back(compute_epoch_metrics(epoch, lr, records));
  };
  result.model = train_model(arch, cfg.train, ds, record.substreams["train"],
                             TargetLabel::class_label, hook, cfg.subsample_fraction);

  const auto final_records = predict(result.model, ds.test, ds.stats, ds.shape);
  const int last_epoch = record.trajectory.empty() ? 0 : record.trajectory.back().epoch;
  record.final_metrics = compute_epoch_metrics(
      last_epoch, record.trajectory.empty() ? 0.0 : record.trajectory.back().lr,
      final_records);
  record.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline RunRecord run_trial(const TrialConfig& cfg) {
  return run_trial_full(cfg).record;
}

// Trains a fresh model to predict the group label and returns its test
// accuracy.
inline double probe_group_recognizability(const BuiltDataset& ds, const ArchConfig& arch,
                                          const TrainConfig& cfg, std::uint64_t seed) {
  ArchConfig probe_arch = arch;
  if (probe_arch.input_dim == 0) probe_arch.input_dim = static_cast<int>(ds.shape.size());
  const ModelState model =
      train_model(probe_arch, cfg, ds, derive_seed(seed, "probe"), TargetLabel::group_label);
  const auto records =
      predict(model, ds.test, ds.stats, ds.shape, TargetLabel::group_label);
  return accuracy(records);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepGrid {
  enum class Axis { epsilon, eta, depth, width, weight_decay, train_fraction };

  std::string name = "sweep";
  Axis axis = Axis::epsilon;
  std::vector<double> values;
  int seeds_per_point = 20;

  void validate() const {
    if (name.empty()) throw ConfigError("sweep.name must be nonempty");
    if (values.empty()) throw ConfigError("sweep.values must be nonempty");
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (!(values[i] > values[i - 1])) {
        throw ConfigError("sweep.values must be strictly increasing");
      }
    }
    if (seeds_per_point < 1) throw ConfigError("sweep.seeds_per_point must be >= 1");
  }
};

inline const char* axis_name(SweepGrid::Axis axis) {
  switch (axis) {
    case SweepGrid::Axis::epsilon: return "epsilon";
    case SweepGrid::Axis::eta: return "eta";
    case SweepGrid::Axis::depth: return "depth";
    case SweepGrid::Axis::width: return "width";
    case SweepGrid::Axis::weight_decay: return "weight_decay";
    case SweepGrid::Axis::train_fraction: return "train_fraction";
  }
  return "?";
}

inline SweepGrid::Axis axis_from_name(const std::string& name) {
  for (auto axis : {SweepGrid::Axis::epsilon, SweepGrid::Axis::eta, SweepGrid::Axis::depth,
                    SweepGrid::Axis::width, SweepGrid::Axis::weight_decay,
                    SweepGrid::Axis::train_fraction}) {
    if (name == axis_name(axis)) return axis;
  }
  throw ConfigError("sweep.axis \"" + name +
                    "\" is not one of epsilon|eta|depth|width|weight_decay|train_fraction");
}

namespace detail {

inline int integral_axis_value(double v, const char* what) {
  const double r = std::floor(v + 0.5);
  if (std::fabs(v - r) > 1e-9) {
    throw ConfigError(std::string(what) + " axis values must be integers, got " +
                      std::to_string(v));
  }
  return static_cast<int>(r);
}

} // namespace detail

// Writes one axis value into a copy of the base config. The eta axis is the
// relative-difficulty knob: it sets mix.eta for mixing datasets and the
// group margin for synthetic ones.
inline TrialConfig apply_axis(TrialConfig cfg, SweepGrid::Axis axis, double value) {
  switch (axis) {
    case SweepGrid::Axis::epsilon:
      cfg.bias.epsilon = value;
      if (cfg.bias.test_epsilon) cfg.bias.test_epsilon = value;
      break;
    case SweepGrid::Axis::eta:
      if (cfg.dataset.kind == DatasetSource::Kind::synthetic) {
        cfg.dataset.synth.group_margin = value;
      } else if (cfg.mix) {
        cfg.mix->eta = value;
      } else {
        throw ConfigError("eta axis needs a synthetic or mixing-protocol base config");
      }
      break;
    case SweepGrid::Axis::depth:
      cfg.arch.depth = detail::integral_axis_value(value, "depth");
      break;
    case SweepGrid::Axis::width:
      cfg.arch.width = detail::integral_axis_value(value, "width");
      break;
    case SweepGrid::Axis::weight_decay:
      cfg.train.weight_decay = value;
      break;
    case SweepGrid::Axis::train_fraction:
      cfg.subsample_fraction = value;
      break;
  }
  cfg.validate();
  return cfg;
}

inline double axis_value_of(const TrialConfig& cfg, SweepGrid::Axis axis) {
  switch (axis) {
    case SweepGrid::Axis::epsilon: return cfg.bias.epsilon;
    case SweepGrid::Axis::eta:
      return cfg.dataset.kind == DatasetSource::Kind::synthetic
                 ? cfg.dataset.synth.group_margin
                 : (cfg.mix ? cfg.mix->eta : 0.0);
    case SweepGrid::Axis::depth: return cfg.arch.depth;
    case SweepGrid::Axis::width: return cfg.arch.width;
    case SweepGrid::Axis::weight_decay: return cfg.train.weight_decay;
    case SweepGrid::Axis::train_fraction: return cfg.subsample_fraction;
  }
  return 0.0;
}

inline std::string format_axis_value(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

inline std::string point_key(SweepGrid::Axis axis, double value, int seed_index) {
  return std::string(axis_name(axis)) + "=" + format_axis_value(value) +
         "/seed=" + std::to_string(seed_index);
}

// Each trial's seed mixes the base seed with the axis value bits and the
// seed index, so points own disjoint substreams no matter the run order.
inline std::uint64_t trial_seed(std::uint64_t base_seed, SweepGrid::Axis axis,
                                double value, int seed_index) {
  std::uint64_t s = derive_seed(base_seed, axis_name(axis)) ^ std::bit_cast<std::uint64_t>(value);
  s = splitmix64_next(s);
  return derive_seed(s, "trial", static_cast<std::uint64_t>(seed_index));
}

struct SweepOptions {
  int jobs = 1;
  // Resume hook: return true to skip an already-finished point key.
  std::function<bool(const std::string& point_key)> skip;
  // Called under a lock as each trial completes.
  std::function<void(const RunRecord&)> on_record;
  std::function<void(const std::string& point_key, const std::string& message)> on_failure;
};

// |values| x seeds_per_point trials. One failed trial is reported and the
// sweep continues. Records come back in (value, seed) order regardless of
// scheduling.
inline std::vector<RunRecord> sweep(const SweepGrid& grid, const TrialConfig& base,
                                    const SweepOptions& opts = {}) {
  grid.validate();
  struct Task {
    TrialConfig cfg;
    std::string key;
  };
  std::vector<Task> tasks;
  for (std::size_t vi = 0; vi < grid.values.size(); ++vi) {
    for (int si = 0; si < grid.seeds_per_point; ++si) {
      // Validates every composed config up front, before any training runs.
      TrialConfig cfg = apply_axis(base, grid.axis, grid.values[vi]);
      cfg.seed = trial_seed(base.seed, grid.axis, grid.values[vi], si);
      std::string key = point_key(grid.axis, grid.values[vi], si);
      if (opts.skip && opts.skip(key)) continue;
      tasks.push_back(Task{std::move(cfg), std::move(key)});
    }
  }

  std::vector<std::optional<RunRecord>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(tasks.size())));

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        RunRecord record = run_trial(tasks[i].cfg);
        record.point_key = tasks[i].key;
        std::lock_guard<std::mutex> lock(mutex);
        if (opts.on_record) opts.on_record(record);
        results[i] = std::move(record);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mutex);
        if (opts.on_failure) opts.on_failure(tasks[i].key, e.what());
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::vector<RunRecord> records;
  records.reserve(tasks.size());
  for (auto& r : results) {
    if (r) records.push_back(std::move(*r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

inline const char* cell_metric_name(int group_idx, int class_idx) {
  static const char* names[2][2] = {{"acc_neg_a", "acc_pos_a"},
                                    {"acc_neg_b", "acc_pos_b"}};
  return names[group_idx][class_idx];
}

struct PointSummary {
  double axis_value = 0.0;
  // Keyed by metric name: bias_amp, acc, ece, acc_{pos,neg}_{a,b}.
  std::map<std::string, IntervalSummary> metrics;
};

namespace detail {

inline void collect_metric(std::map<std::string, std::vector<double>>& into,
                           const EpochMetrics& m) {
  into["bias_amp"].push_back(m.bias_amp);
  into["acc"].push_back(m.acc);
  into["ece"].push_back(m.ece);
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) {
      if (m.acc_cells[g][t]) into[cell_metric_name(g, t)].push_back(*m.acc_cells[g][t]);
    }
  }
}

inline std::map<std::string, IntervalSummary> summarize(
    const std::map<std::string, std::vector<double>>& samples, double level) {
  std::map<std::string, IntervalSummary> out;
  for (const auto& [metric, values] : samples) {
    out[metric] = confidence_interval(values, level);
  }
  return out;
}

} // namespace detail

// Mean and 95% interval of every final metric, per axis value. Points come
// back in ascending axis order; record order does not matter.
inline std::vector<PointSummary> aggregate(std::span<const RunRecord> records,
                                           SweepGrid::Axis axis, double level = 0.95) {
  std::map<double, std::map<std::string, std::vector<double>>> buckets;
  for (const auto& record : records) {
    detail::collect_metric(buckets[axis_value_of(record.config, axis)],
                           record.final_metrics);
  }
  std::vector<PointSummary> out;
  out.reserve(buckets.size());
  for (const auto& [value, samples] : buckets) {
    PointSummary p;
    p.axis_value = value;
    p.metrics = detail::summarize(samples, level);
    out.push_back(std::move(p));
  }
  return out;
}

struct TrajectoryPoint {
  int epoch = 0;
  std::map<std::string, IntervalSummary> metrics;
};

// Per-epoch aggregation across records (all must share a trajectory length).
inline std::vector<TrajectoryPoint> aggregate_trajectory(std::span<const RunRecord> records,
                                                         double level = 0.95) {
  if (records.empty()) throw DataError("aggregate_trajectory: no records");
  const std::size_t epochs = records.front().trajectory.size();
  for (const auto& record : records) {
    if (record.trajectory.size() != epochs) {
      throw DataError("aggregate_trajectory: trajectory lengths differ");
    }
  }
  std::vector<TrajectoryPoint> out(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::map<std::string, std::vector<double>> samples;
    for (const auto& record : records) {
      detail::collect_metric(samples, record.trajectory[e]);
    }
    out[e].epoch = records.front().trajectory[e].epoch;
    out[e].metrics = detail::summarize(samples, level);
  }
  return out;
}

} // namespace biasamp
