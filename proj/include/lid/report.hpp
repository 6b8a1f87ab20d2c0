// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lid/data.hpp"
#include "lid/engine.hpp"
#include "lid/json_io.hpp"

namespace lid {

/// Where the benchmark schedule of a run comes from.
struct ScheduleSource {
  enum class Kind { Synthetic, Jsonl, Manifest };
  Kind kind = Kind::Synthetic;
  std::string path;    // dataset file (Jsonl) or schedule directory (Manifest)
  std::string preset;  // optional slicing preset name
  SynthConfig synth;
  ScheduleParams params;

  friend bool operator==(const ScheduleSource&, const ScheduleSource&) = default;
};

/// Default schedule parameters for the synthetic preset (10 classes, 2 per step).
ScheduleSource synthetic_source(std::uint64_t seed);

/// Everything needed to reproduce a run exactly.
struct RunConfig {
  ScheduleSource source = synthetic_source(1);
  Strategy strategy = Strategy::preset("msr");
  HyperParams hyperparams;
  std::uint64_t seed = 1;
  std::string out_dir = "runs";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Applies a named preset's classes_per_step and top_k to `params`.
void apply_preset(ScheduleParams& params, const std::string& preset);

BenchmarkSchedule materialize_schedule(const ScheduleSource& source);

json to_json(const Strategy& s);
Strategy strategy_from_json(const json& j);
json to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const json& j);
json to_json(const ScheduleSource& s);
ScheduleSource schedule_source_from_json(const json& j);
json to_json(const RunConfig& c);
/// Accepts either a RunConfig object or a report carrying one under "config".
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Report JSON. Wall-clock timings are left out so that identical runs
/// serialise to identical bytes.
json report_to_json(const RunReport& report, const json& config);
std::string report_json_string(const RunReport& report, const json& config);
/// Per-step wall-clock seconds.
json timings_to_json(const RunReport& report);

/// Columns: step, classes_seen, acc, strategy, seed.
std::string curve_csv(const RunReport& report);

/// The subset of a report the report command needs.
struct ReportSummary {
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<std::size_t> classes_seen;
  std::vector<double> accs;
  double average_acc = 0.0;
  double whole_acc = 0.0;
};

ReportSummary summary_from_json(const json& report);
ReportSummary load_report_summary(const std::filesystem::path& path);

/// Format a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace lid
