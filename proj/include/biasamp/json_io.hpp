#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "biasamp/experiment.hpp"

// JSON schemas for configs, run records, and prediction logs. Config parsing
// is strict: unknown fields and bound violations are reported with the full
// field path before any work starts.

namespace biasamp::jsonio {

using nlohmann::json;

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ConfigError("missing field '" + path + "." + key + "'");
  }
  return *it;
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& path) {
  if (!j.is_object()) throw ConfigError("'" + path + "' must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown field '" + path + "." + item.key() + "'");
  }
}

inline double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError("'" + path + "' must be a number");
  return j.get<double>();
}

inline int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError("'" + path + "' must be an integer");
  return j.get<int>();
}

inline std::uint64_t as_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    const std::int64_t v = j.get<std::int64_t>();
    if (v >= 0) return static_cast<std::uint64_t>(v);
  }
  throw ConfigError("'" + path + "' must be a nonnegative integer");
}

inline bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError("'" + path + "' must be a boolean");
  return j.get<bool>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError("'" + path + "' must be a string");
  return j.get<std::string>();
}

} // namespace detail

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

inline SynthConfig synth_from_json(const json& j, const std::string& path) {
  detail::check_keys(j,
                     {"dimension", "class_margin", "group_margin", "noise_sigma",
                      "train_size", "test_size"},
                     path);
  SynthConfig cfg;
  cfg.dimension = detail::as_int(detail::require(j, "dimension", path), path + ".dimension");
  cfg.class_margin =
      detail::as_double(detail::require(j, "class_margin", path), path + ".class_margin");
  cfg.group_margin =
      detail::as_double(detail::require(j, "group_margin", path), path + ".group_margin");
  cfg.noise_sigma =
      detail::as_double(detail::require(j, "noise_sigma", path), path + ".noise_sigma");
  cfg.train_size = detail::as_int(detail::require(j, "train_size", path), path + ".train_size");
  cfg.test_size = detail::as_int(detail::require(j, "test_size", path), path + ".test_size");
  cfg.validate();
  return cfg;
}

inline json synth_to_json(const SynthConfig& cfg) {
  return json{{"dimension", cfg.dimension},     {"class_margin", cfg.class_margin},
              {"group_margin", cfg.group_margin}, {"noise_sigma", cfg.noise_sigma},
              {"train_size", cfg.train_size},   {"test_size", cfg.test_size}};
}

inline BiasConfig bias_from_json(const json& j, const std::string& path) {
  detail::check_keys(j, {"epsilon", "convention", "test_epsilon"}, path);
  BiasConfig cfg;
  cfg.epsilon = detail::as_double(detail::require(j, "epsilon", path), path + ".epsilon");
  if (j.contains("convention")) {
    const std::string c = detail::as_string(j["convention"], path + ".convention");
    if (c == "inversion") {
      cfg.convention = BiasConfig::Convention::inversion;
    } else if (c == "mixing") {
      cfg.convention = BiasConfig::Convention::mixing;
    } else {
      throw ConfigError("'" + path + ".convention' must be \"inversion\" or \"mixing\"");
    }
  }
  if (j.contains("test_epsilon") && !j["test_epsilon"].is_null()) {
    cfg.test_epsilon = detail::as_double(j["test_epsilon"], path + ".test_epsilon");
  }
  cfg.validate();
  return cfg;
}

inline json bias_to_json(const BiasConfig& cfg) {
  json j{{"epsilon", cfg.epsilon},
         {"convention",
          cfg.convention == BiasConfig::Convention::inversion ? "inversion" : "mixing"}};
  if (cfg.test_epsilon) j["test_epsilon"] = *cfg.test_epsilon;
  return j;
}

inline MixConfig mix_from_json(const json& j, const std::string& path) {
  detail::check_keys(j, {"eta", "group_class_ids", "task_class_ids"}, path);
  MixConfig cfg;
  cfg.eta = detail::as_double(detail::require(j, "eta", path), path + ".eta");
  const auto read_pair = [&](const char* key, std::array<std::int32_t, 2>& out) {
    const json& arr = detail::require(j, key, path);
    if (!arr.is_array() || arr.size() != 2) {
      throw ConfigError("'" + path + "." + key + "' must be an array of two class ids");
    }
    out[0] = detail::as_int(arr[0], path + "." + key + "[0]");
    out[1] = detail::as_int(arr[1], path + "." + key + "[1]");
  };
  read_pair("group_class_ids", cfg.group_class_ids);
  read_pair("task_class_ids", cfg.task_class_ids);
  cfg.validate();
  return cfg;
}

inline json mix_to_json(const MixConfig& cfg) {
  return json{{"eta", cfg.eta},
              {"group_class_ids", {cfg.group_class_ids[0], cfg.group_class_ids[1]}},
              {"task_class_ids", {cfg.task_class_ids[0], cfg.task_class_ids[1]}}};
}

inline ArchConfig arch_from_json(const json& j, const std::string& path) {
  detail::check_keys(j, {"family", "depth", "width", "input_dim"}, path);
  ArchConfig cfg;
  const std::string family =
      detail::as_string(detail::require(j, "family", path), path + ".family");
  if (family == "linear") {
    cfg.family = ModelFamily::linear;
    cfg.depth = 0;
  } else if (family == "mlp") {
    cfg.family = ModelFamily::mlp;
    cfg.depth = 1;
  } else {
    throw ConfigError("'" + path + ".family' must be \"linear\" or \"mlp\"");
  }
  if (j.contains("depth")) cfg.depth = detail::as_int(j["depth"], path + ".depth");
  if (j.contains("width")) cfg.width = detail::as_int(j["width"], path + ".width");
  if (j.contains("input_dim")) cfg.input_dim = detail::as_int(j["input_dim"], path + ".input_dim");
  cfg.validate();
  return cfg;
}

inline json arch_to_json(const ArchConfig& cfg) {
  json j{{"family", cfg.family == ModelFamily::linear ? "linear" : "mlp"},
         {"depth", cfg.depth},
         {"width", cfg.width}};
  if (cfg.input_dim != 0) j["input_dim"] = cfg.input_dim;
  return j;
}

inline TrainConfig train_from_json(const json& j, const std::string& path) {
  detail::check_keys(j,
                     {"epochs", "batch_size", "base_lr", "warmup_lr",
                      "decay_milestone_fractions", "decay_factor", "momentum",
                      "weight_decay", "augmentation", "epoch_scaling"},
                     path);
  TrainConfig cfg;
  if (j.contains("epochs")) cfg.epochs = detail::as_int(j["epochs"], path + ".epochs");
  if (j.contains("batch_size")) {
    cfg.batch_size = detail::as_int(j["batch_size"], path + ".batch_size");
  }
  if (j.contains("base_lr")) cfg.base_lr = detail::as_double(j["base_lr"], path + ".base_lr");
  if (j.contains("warmup_lr")) {
    cfg.warmup_lr = detail::as_double(j["warmup_lr"], path + ".warmup_lr");
  }
  if (j.contains("decay_milestone_fractions")) {
    const json& arr = j["decay_milestone_fractions"];
    if (!arr.is_array()) {
      throw ConfigError("'" + path + ".decay_milestone_fractions' must be an array");
    }
    cfg.decay_milestone_fractions.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.decay_milestone_fractions.push_back(detail::as_double(
          arr[i], path + ".decay_milestone_fractions[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("decay_factor")) {
    cfg.decay_factor = detail::as_double(j["decay_factor"], path + ".decay_factor");
  }
  if (j.contains("momentum")) cfg.momentum = detail::as_double(j["momentum"], path + ".momentum");
  if (j.contains("weight_decay")) {
    cfg.weight_decay = detail::as_double(j["weight_decay"], path + ".weight_decay");
  }
  if (j.contains("augmentation")) {
    cfg.augmentation = detail::as_bool(j["augmentation"], path + ".augmentation");
  }
  if (j.contains("epoch_scaling") && !j["epoch_scaling"].is_null()) {
    cfg.epoch_scaling = detail::as_double(j["epoch_scaling"], path + ".epoch_scaling");
  }
  cfg.validate();
  return cfg;
}

inline json train_to_json(const TrainConfig& cfg) {
  json j{{"epochs", cfg.epochs},
         {"batch_size", cfg.batch_size},
         {"base_lr", cfg.base_lr},
         {"warmup_lr", cfg.warmup_lr},
         {"decay_milestone_fractions", cfg.decay_milestone_fractions},
         {"decay_factor", cfg.decay_factor},
         {"momentum", cfg.momentum},
         {"weight_decay", cfg.weight_decay},
         {"augmentation", cfg.augmentation}};
  if (cfg.epoch_scaling) j["epoch_scaling"] = *cfg.epoch_scaling;
  return j;
}

inline TrialConfig trial_config_from_json(const json& j, const std::string& path = "config") {
  detail::check_keys(j,
                     {"dataset", "bias", "mix", "subsample_fraction", "arch", "train",
                      "seed", "role_swap"},
                     path);
  TrialConfig cfg;
  const json& ds = detail::require(j, "dataset", path);
  detail::check_keys(ds, {"source", "synth", "train_cache", "test_cache"}, path + ".dataset");
  const std::string source =
      detail::as_string(detail::require(ds, "source", path + ".dataset"),
                        path + ".dataset.source");
  if (source == "synthetic") {
    cfg.dataset.kind = DatasetSource::Kind::synthetic;
    cfg.dataset.synth = synth_from_json(detail::require(ds, "synth", path + ".dataset"),
                                        path + ".dataset.synth");
  } else if (source == "ingested") {
    cfg.dataset.kind = DatasetSource::Kind::ingested;
    cfg.dataset.train_cache =
        detail::as_string(detail::require(ds, "train_cache", path + ".dataset"),
                          path + ".dataset.train_cache");
    cfg.dataset.test_cache =
        detail::as_string(detail::require(ds, "test_cache", path + ".dataset"),
                          path + ".dataset.test_cache");
  } else {
    throw ConfigError("'" + path + ".dataset.source' must be \"synthetic\" or \"ingested\"");
  }
  cfg.bias = bias_from_json(detail::require(j, "bias", path), path + ".bias");
  if (j.contains("mix") && !j["mix"].is_null()) {
    cfg.mix = mix_from_json(j["mix"], path + ".mix");
  }
  if (j.contains("subsample_fraction")) {
    cfg.subsample_fraction =
        detail::as_double(j["subsample_fraction"], path + ".subsample_fraction");
  }
  cfg.arch = arch_from_json(detail::require(j, "arch", path), path + ".arch");
  cfg.train = train_from_json(detail::require(j, "train", path), path + ".train");
  cfg.seed = detail::as_u64(detail::require(j, "seed", path), path + ".seed");
  if (j.contains("role_swap")) {
    cfg.role_swap = detail::as_bool(j["role_swap"], path + ".role_swap");
  }
  cfg.validate();
  return cfg;
}

inline json trial_config_to_json(const TrialConfig& cfg) {
  json ds;
  if (cfg.dataset.kind == DatasetSource::Kind::synthetic) {
    ds = json{{"source", "synthetic"}, {"synth", synth_to_json(cfg.dataset.synth)}};
  } else {
    ds = json{{"source", "ingested"},
              {"train_cache", cfg.dataset.train_cache},
              {"test_cache", cfg.dataset.test_cache}};
  }
  json j{{"dataset", ds},
         {"bias", bias_to_json(cfg.bias)},
         {"subsample_fraction", cfg.subsample_fraction},
         {"arch", arch_to_json(cfg.arch)},
         {"train", train_to_json(cfg.train)},
         {"seed", cfg.seed},
         {"role_swap", cfg.role_swap}};
  if (cfg.mix) j["mix"] = mix_to_json(*cfg.mix);
  return j;
}

struct SweepConfig {
  SweepGrid grid;
  TrialConfig base;
};

inline SweepConfig sweep_config_from_json(const json& j, const std::string& path = "config") {
  detail::check_keys(j, {"name", "axis", "values", "seeds_per_point", "base"}, path);
  SweepConfig cfg;
  cfg.grid.name = detail::as_string(detail::require(j, "name", path), path + ".name");
  cfg.grid.axis = axis_from_name(
      detail::as_string(detail::require(j, "axis", path), path + ".axis"));
  const json& values = detail::require(j, "values", path);
  if (!values.is_array() || values.empty()) {
    throw ConfigError("'" + path + ".values' must be a nonempty array");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    cfg.grid.values.push_back(
        detail::as_double(values[i], path + ".values[" + std::to_string(i) + "]"));
  }
  if (j.contains("seeds_per_point")) {
    cfg.grid.seeds_per_point = detail::as_int(j["seeds_per_point"], path + ".seeds_per_point");
  }
  cfg.grid.validate();
  cfg.base = trial_config_from_json(detail::require(j, "base", path), path + ".base");
  return cfg;
}

inline json sweep_config_to_json(const SweepConfig& cfg) {
  return json{{"name", cfg.grid.name},
              {"axis", axis_name(cfg.grid.axis)},
              {"values", cfg.grid.values},
              {"seeds_per_point", cfg.grid.seeds_per_point},
              {"base", trial_config_to_json(cfg.base)}};
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

inline json epoch_metrics_to_json(const EpochMetrics& m) {
  json cells;
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) {
      const char* name = cell_metric_name(g, t);
      // strip the leading "acc_" for the cells object
      const std::string key = std::string(name).substr(4);
      if (m.acc_cells[g][t]) {
        cells[key] = *m.acc_cells[g][t];
      } else {
        cells[key] = nullptr;
      }
    }
  }
  return json{{"epoch", m.epoch}, {"lr", m.lr},   {"bias_amp", m.bias_amp},
              {"acc", m.acc},     {"ece", m.ece}, {"acc_cells", cells}};
}

inline EpochMetrics epoch_metrics_from_json(const json& j, const std::string& path) {
  EpochMetrics m;
  m.epoch = detail::as_int(detail::require(j, "epoch", path), path + ".epoch");
  m.lr = detail::as_double(detail::require(j, "lr", path), path + ".lr");
  m.bias_amp = detail::as_double(detail::require(j, "bias_amp", path), path + ".bias_amp");
  m.acc = detail::as_double(detail::require(j, "acc", path), path + ".acc");
  m.ece = detail::as_double(detail::require(j, "ece", path), path + ".ece");
  const json& cells = detail::require(j, "acc_cells", path);
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) {
      const std::string key = std::string(cell_metric_name(g, t)).substr(4);
      const json& cell = detail::require(cells, key.c_str(), path + ".acc_cells");
      if (!cell.is_null()) {
        m.acc_cells[g][t] = detail::as_double(cell, path + ".acc_cells." + key);
      }
    }
  }
  return m;
}

inline json run_record_to_json(const RunRecord& record, bool include_wall_time = true) {
  json traj = json::array();
  for (const auto& m : record.trajectory) traj.push_back(epoch_metrics_to_json(m));
  json streams;
  for (const auto& [tag, value] : record.substreams) streams[tag] = value;
  json j{{"schema_version", record.schema_version},
         {"tool_version", record.tool_version},
         {"config", trial_config_to_json(record.config)},
         {"substreams", streams},
         {"trajectory", traj},
         {"final", epoch_metrics_to_json(record.final_metrics)},
         {"warnings", record.warnings}};
  if (!record.point_key.empty()) j["point_key"] = record.point_key;
  if (include_wall_time) j["wall_time_s"] = record.wall_time_s;
  return j;
}

inline RunRecord run_record_from_json(const json& j, const std::string& path = "record") {
  RunRecord record;
  record.schema_version =
      detail::as_int(detail::require(j, "schema_version", path), path + ".schema_version");
  if (record.schema_version != kRunRecordSchemaVersion) {
    throw FormatError("unsupported run-record schema version " +
                      std::to_string(record.schema_version));
  }
  record.tool_version =
      detail::as_string(detail::require(j, "tool_version", path), path + ".tool_version");
  record.config = trial_config_from_json(detail::require(j, "config", path), path + ".config");
  if (j.contains("point_key")) {
    record.point_key = detail::as_string(j["point_key"], path + ".point_key");
  }
  if (j.contains("substreams")) {
    for (const auto& item : j["substreams"].items()) {
      record.substreams[item.key()] =
          detail::as_u64(item.value(), path + ".substreams." + item.key());
    }
  }
  const json& traj = detail::require(j, "trajectory", path);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    record.trajectory.push_back(epoch_metrics_from_json(
        traj[i], path + ".trajectory[" + std::to_string(i) + "]"));
  }
  record.final_metrics =
      epoch_metrics_from_json(detail::require(j, "final", path), path + ".final");
  if (j.contains("warnings")) {
    for (const auto& w : j["warnings"]) {
      record.warnings.push_back(w.get<std::string>());
    }
  }
  if (j.contains("wall_time_s")) {
    record.wall_time_s = detail::as_double(j["wall_time_s"], path + ".wall_time_s");
  }
  return record;
}

inline void append_run_record(std::ostream& out, const RunRecord& record) {
  out << run_record_to_json(record).dump() << "\n";
}

inline std::vector<RunRecord> read_run_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<RunRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(run_record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw FormatError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

inline std::set<std::string> read_finished_point_keys(const std::string& path) {
  std::set<std::string> keys;
  std::ifstream in(path);
  if (!in) return keys;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("point_key")) keys.insert(j["point_key"].get<std::string>());
    } catch (const json::parse_error&) {
      // a torn trailing line from an interrupted run is re-run, not fatal
      continue;
    }
  }
  return keys;
}

// ---------------------------------------------------------------------------
// Prediction logs (JSONL, one record per line)
// ---------------------------------------------------------------------------

inline json prediction_to_json(const PredictionRecord& rec) {
  return json{{"true_class", static_cast<int>(rec.true_class)},
              {"predicted_class", static_cast<int>(rec.predicted_class)},
              {"confidence", rec.confidence},
              {"group", group_name(rec.group)}};
}

inline std::vector<PredictionRecord> read_prediction_jsonl(std::istream& in,
                                                           const std::string& name) {
  std::vector<PredictionRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = name + " line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where + ": " + e.what());
    }
    for (const char* key : {"true_class", "predicted_class", "confidence", "group"}) {
      if (!j.contains(key)) {
        throw FormatError(where + ": missing field '" + key + "'");
      }
    }
    PredictionRecord rec;
    const auto read_class = [&](const char* key) {
      if (!j[key].is_number_integer()) {
        throw FormatError(where + ": '" + std::string(key) + "' must be -1 or 1");
      }
      const int v = j[key].get<int>();
      if (v != -1 && v != 1) {
        throw FormatError(where + ": '" + std::string(key) + "' must be -1 or 1");
      }
      return static_cast<std::int8_t>(v);
    };
    rec.true_class = read_class("true_class");
    rec.predicted_class = read_class("predicted_class");
    if (!j["confidence"].is_number()) {
      throw FormatError(where + ": 'confidence' must be a number");
    }
    rec.confidence = j["confidence"].get<double>();
    if (!(rec.confidence >= 0.0 && rec.confidence <= 1.0)) {
      throw FormatError(where + ": 'confidence' outside [0, 1]");
    }
    const std::string g = j["group"].is_string() ? j["group"].get<std::string>() : "";
    if (g == "a") {
      rec.group = Group::a;
    } else if (g == "b") {
      rec.group = Group::b;
    } else {
      throw FormatError(where + ": 'group' must be \"a\" or \"b\"");
    }
    rec.correct = rec.true_class == rec.predicted_class;
    records.push_back(rec);
  }
  return records;
}

inline std::vector<PredictionRecord> read_prediction_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_prediction_jsonl(in, path);
}

} // namespace biasamp::jsonio
