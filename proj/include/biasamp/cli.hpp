#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biasamp/json_io.hpp"
#include "biasamp/report.hpp"

// Command-line surface. Exit codes are a stable contract:
//   0 success, 1 runtime failure, 2 usage or config error.

namespace biasamp::cli {

namespace detail {

using reportfmt::f6;

inline jsonio::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return jsonio::json::parse(in);
  } catch (const jsonio::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void print_measures(std::ostream& out, std::span<const PredictionRecord> records) {
  const BiasAmpBreakdown amp = bias_amp(records);
  const CalibrationTable table = ece(records);
  const DisaggregatedAccuracy dis = disaggregated_accuracy(records);

  out << "records " << records.size() << "\n";
  out << "bias_amp " << f6(amp.aggregate) << "\n";
  for (int g = 0; g < 2; ++g) {
    for (int t : {1, 0}) {
      const BiasAmpCell& cell = amp.cells[g][t];
      out << "  group=" << (g == 0 ? "a" : "b") << " t=" << (t == 1 ? "+1" : "-1")
          << ": dataset_rate " << f6(cell.dataset_rate) << " pred_rate "
          << f6(cell.prediction_rate) << " delta " << f6(cell.delta) << " y " << cell.y
          << (cell.no_predicted_mass ? " [no predicted mass]" : "") << "\n";
    }
  }
  out << "ece " << f6(table.ece) << " (" << table.bins.size() << " bins)\n";
  const double bin_width = 1.0 / static_cast<double>(table.bins.size());
  for (std::size_t b = 0; b < table.bins.size(); ++b) {
    if (table.bins[b].count == 0) continue;
    out << "  bin " << b << " (" << f6(bin_width * static_cast<double>(b)) << ", "
        << f6(bin_width * static_cast<double>(b + 1)) << "]: count " << table.bins[b].count
        << " mean_conf " << f6(table.bins[b].mean_confidence) << " acc "
        << f6(table.bins[b].accuracy) << "\n";
  }
  out << "acc " << f6(accuracy(records)) << "\n";
  for (int g = 0; g < 2; ++g) {
    for (int t : {1, 0}) {
      out << "  cell group=" << (g == 0 ? "a" : "b") << " t=" << (t == 1 ? "+1" : "-1")
          << ": ";
      if (dis.cells[g][t]) {
        out << "acc " << f6(*dis.cells[g][t]);
      } else {
        out << "acc undefined";
      }
      out << " n " << dis.counts[g][t] << "\n";
    }
  }
}

inline void print_final_metrics(std::ostream& out, const RunRecord& record) {
  const EpochMetrics& m = record.final_metrics;
  out << "epochs " << record.trajectory.size() << "\n";
  out << "bias_amp " << f6(m.bias_amp) << "\n";
  out << "acc " << f6(m.acc) << "\n";
  out << "ece " << f6(m.ece) << "\n";
  for (const auto& w : record.warnings) out << "warning: " << w << "\n";
}

struct SweepFileSink {
  std::ofstream runs;
  std::ofstream failures;
  std::string failures_path;

  SweepFileSink(const std::filesystem::path& dir) {
    runs.open(dir / "runs.jsonl", std::ios::app);
    if (!runs) throw FormatError("cannot open " + (dir / "runs.jsonl").string());
    failures_path = (dir / "failures.jsonl").string();
  }

  void record(const RunRecord& r) {
    jsonio::append_run_record(runs, r);
    runs.flush();
  }

  void failure(const std::string& key, const std::string& message) {
    if (!failures.is_open()) {
      failures.open(failures_path, std::ios::app);
    }
    failures << jsonio::json{{"point_key", key}, {"error", message}}.dump() << "\n";
    failures.flush();
  }
};

inline void emit_sweep_report(const std::string& out_dir, const jsonio::SweepConfig& cfg,
                              const std::vector<RunRecord>& records, bool trajectories) {
  const auto points = aggregate(records, cfg.grid.axis);
  std::vector<std::pair<double, std::vector<TrajectoryPoint>>> trajs;
  if (trajectories) {
    std::map<double, std::vector<RunRecord>> by_value;
    for (const auto& record : records) {
      by_value[axis_value_of(record.config, cfg.grid.axis)].push_back(record);
    }
    for (const auto& [value, group] : by_value) {
      trajs.emplace_back(value, aggregate_trajectory(group));
    }
  }
  emit_report(out_dir, cfg.grid.name, axis_name(cfg.grid.axis), points, trajs);
}

} // namespace detail

inline int run_cli(int argc, const char* const argv[], std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"controlled bias-amplification experiments"};
  app.set_version_flag("--version",
                       std::string("biasamp ") + kToolVersion + " (run-record schema " +
                           std::to_string(kRunRecordSchemaVersion) + ", cache format " +
                           std::to_string(kDatasetCacheVersion) + ", checkpoint format " +
                           std::to_string(kCheckpointVersion) + ")");
  app.require_subcommand(1);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "progress logging to stderr");

  std::string out_dir;
  const char* env_out = std::getenv("BIASAMP_OUT_DIR");
  if (env_out != nullptr) out_dir = env_out;

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "decode a source dataset into the cache format");
  std::string ingest_format, ingest_images, ingest_labels, ingest_split = "train", ingest_out;
  std::vector<std::string> ingest_inputs;
  ingest_cmd->add_option("--format", ingest_format, "idx|cifar10|cifar100")->required();
  ingest_cmd->add_option("--images", ingest_images, "idx image file");
  ingest_cmd->add_option("--labels", ingest_labels, "idx label file");
  ingest_cmd->add_option("--input", ingest_inputs, "cifar batch file(s)");
  ingest_cmd->add_option("--split", ingest_split, "train|test");
  ingest_cmd->add_option("--out", ingest_out, "output cache path")->required();

  // generate
  auto* generate_cmd = app.add_subcommand("generate", "build a synthetic dataset cache");
  std::string generate_config, generate_out;
  generate_cmd->add_option("--config", generate_config, "generator config JSON")->required();
  generate_cmd->add_option("--out", generate_out, "output cache path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "run one trial and save its record");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "trial config JSON")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->envname("BIASAMP_OUT_DIR");

  // measure
  auto* measure_cmd = app.add_subcommand("measure", "metrics over a prediction JSONL file");
  std::string measure_input;
  measure_cmd->add_option("--input", measure_input, "prediction records, one JSON per line")
      ->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run a one-axis sweep with resume");
  std::string sweep_config;
  int sweep_jobs = 1;
  bool sweep_traj = false;
  sweep_cmd->add_option("--config", sweep_config, "sweep config JSON")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory")->envname("BIASAMP_OUT_DIR");
  sweep_cmd->add_option("--jobs", sweep_jobs, "concurrent trials");
  sweep_cmd->add_flag("--trajectories", sweep_traj, "emit per-epoch aggregates");

  // report
  auto* report_cmd = app.add_subcommand("report", "re-aggregate a run store into CSV/SVG");
  std::string report_config, report_runs;
  bool report_traj = false;
  report_cmd->add_option("--config", report_config, "sweep config JSON")->required();
  report_cmd->add_option("--runs", report_runs, "runs.jsonl path")->required();
  report_cmd->add_option("--out", out_dir, "output directory")->envname("BIASAMP_OUT_DIR");
  report_cmd->add_flag("--trajectories", report_traj, "emit per-epoch aggregates");

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "group-recognizability probe accuracy");
  std::string probe_config;
  probe_cmd->add_option("--config", probe_config, "trial config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*ingest_cmd) {
      IngestFormat format;
      std::vector<std::string> paths;
      if (ingest_format == "idx") {
        format = IngestFormat::idx;
        if (ingest_images.empty() || ingest_labels.empty()) {
          throw ConfigError("idx ingestion needs --images and --labels");
        }
        paths = {ingest_images, ingest_labels};
      } else if (ingest_format == "cifar10" || ingest_format == "cifar100") {
        format = ingest_format == "cifar10" ? IngestFormat::cifar10 : IngestFormat::cifar100;
        if (ingest_inputs.empty()) throw ConfigError("cifar ingestion needs --input file(s)");
        paths = ingest_inputs;
      } else {
        throw ConfigError("--format must be idx|cifar10|cifar100");
      }
      Split split;
      if (ingest_split == "train") {
        split = Split::train;
      } else if (ingest_split == "test") {
        split = Split::test;
      } else {
        throw ConfigError("--split must be train|test");
      }
      const RawDataset ds = ingest(paths, format, split);
      write_raw_cache(ingest_out, ds);
      out << "ingested " << ds.size() << " examples (" << ds.shape.channels << "x"
          << ds.shape.height << "x" << ds.shape.width << ", " << ds.class_count
          << " classes) -> " << ingest_out << "\n";
      return 0;
    }

    if (*generate_cmd) {
      const auto j = detail::load_json_file(generate_config);
      jsonio::detail::check_keys(j, {"synth", "bias", "seed"}, "config");
      const SynthConfig synth =
          jsonio::synth_from_json(jsonio::detail::require(j, "synth", "config"), "config.synth");
      const BiasConfig bias =
          jsonio::bias_from_json(jsonio::detail::require(j, "bias", "config"), "config.bias");
      const std::uint64_t seed =
          jsonio::detail::as_u64(jsonio::detail::require(j, "seed", "config"), "config.seed");
      const BuiltDataset ds = synth_generate(synth, bias, seed);
      write_built_cache(generate_out, ds);
      out << "generated " << ds.train.size() << " train / " << ds.test.size()
          << " test synthetic examples -> " << generate_out << "\n";
      return 0;
    }

    if (*train_cmd) {
      const TrialConfig cfg = jsonio::trial_config_from_json(detail::load_json_file(train_config));
      if (out_dir.empty()) throw ConfigError("train needs --out (or BIASAMP_OUT_DIR)");
      std::filesystem::create_directories(out_dir);
      const TrialResult result = run_trial_full(cfg);
      {
        std::ofstream f(std::filesystem::path(out_dir) / "run.json",
                        std::ios::binary | std::ios::trunc);
        f << jsonio::run_record_to_json(result.record).dump(2) << "\n";
      }
      save_checkpoint((std::filesystem::path(out_dir) / "checkpoint.bampckpt").string(),
                      result.model);
      detail::print_final_metrics(out, result.record);
      return 0;
    }

    if (*measure_cmd) {
      const auto records = jsonio::read_prediction_jsonl(measure_input);
      if (records.empty()) throw DataError(measure_input + ": no records");
      detail::print_measures(out, records);
      return 0;
    }

    if (*sweep_cmd) {
      const jsonio::SweepConfig cfg =
          jsonio::sweep_config_from_json(detail::load_json_file(sweep_config));
      if (out_dir.empty()) throw ConfigError("sweep needs --out (or BIASAMP_OUT_DIR)");
      const std::filesystem::path dir = std::filesystem::path(out_dir) / cfg.grid.name;
      std::filesystem::create_directories(dir);
      biasamp::detail::write_text(dir / "sweep.json",
                                  jsonio::sweep_config_to_json(cfg).dump(2) + "\n");
      const auto finished = jsonio::read_finished_point_keys((dir / "runs.jsonl").string());
      if (verbosity > 0 && !finished.empty()) {
        err << "resuming: " << finished.size() << " trials already recorded\n";
      }
      detail::SweepFileSink sink(dir);
      int done = 0;
      SweepOptions opts;
      opts.jobs = sweep_jobs;
      opts.skip = [&](const std::string& key) { return finished.count(key) > 0; };
      opts.on_record = [&](const RunRecord& record) {
        sink.record(record);
        ++done;
        if (verbosity > 0) err << "done " << record.point_key << "\n";
      };
      opts.on_failure = [&](const std::string& key, const std::string& message) {
        sink.failure(key, message);
        err << "trial failed: " << key << ": " << message << "\n";
      };
      sweep(cfg.grid, cfg.base, opts);
      const auto all = jsonio::read_run_records((dir / "runs.jsonl").string());
      if (all.empty()) throw DataError("sweep produced no records");
      detail::emit_sweep_report(out_dir, cfg, all, sweep_traj);
      out << "sweep " << cfg.grid.name << ": " << all.size() << " records ("
          << done << " new) -> " << dir.string() << "\n";
      return 0;
    }

    if (*report_cmd) {
      const jsonio::SweepConfig cfg =
          jsonio::sweep_config_from_json(detail::load_json_file(report_config));
      if (out_dir.empty()) throw ConfigError("report needs --out (or BIASAMP_OUT_DIR)");
      const auto records = jsonio::read_run_records(report_runs);
      if (records.empty()) throw DataError(report_runs + ": no records");
      detail::emit_sweep_report(out_dir, cfg, records, report_traj);
      out << "report " << cfg.grid.name << ": " << records.size() << " records -> "
          << (std::filesystem::path(out_dir) / cfg.grid.name).string() << "\n";
      return 0;
    }

    if (*probe_cmd) {
      const TrialConfig cfg = jsonio::trial_config_from_json(detail::load_json_file(probe_config));
      const BuiltDataset ds = build_trial_dataset(cfg);
      const double acc = probe_group_recognizability(ds, cfg.arch, cfg.train, cfg.seed);
      out << "probe_accuracy " << detail::f6(acc) << "\n";
      return 0;
    }

    throw ConfigError("no subcommand");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace biasamp::cli
