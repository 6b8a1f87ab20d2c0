// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lid/report.hpp"

namespace lid::cli {

/// Exit codes of the `lid` tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Parses and dispatches `args` (args[0] is the program name).
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes the schedule (manifest + split files) to `dir` and prints one line per step.
BenchmarkSchedule prepare(const ScheduleSource& source, const std::filesystem::path& dir, std::ostream& out);

/// Runs one experiment and writes report.json, curve.csv, timings.json and
/// memory/step_XX.json under config.out_dir.
RunReport run(const RunConfig& config, std::ostream& out);

struct AblationRow {
  std::string variant;  // table label, e.g. -ICML
  std::string strategy; // preset key
  std::vector<std::uint64_t> seeds;
  std::vector<double> average_acc, whole_acc;  // one per seed
  double mean_average = 0.0;
  double mean_whole = 0.0;
};

/// Accepts table labels (-CN) or preset keys (msr-no-cn). Throws ConfigError
/// listing the valid names.
const AblationVariant& resolve_variant(const std::string& name);

/// Runs every variant for every seed under base.out_dir/<strategy>/seed_<n>
/// and writes base.out_dir/ablation.csv.
std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<std::string>& variants,
                                const std::vector<std::uint64_t>& seeds, std::ostream& out);
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Long format: strategy,seed,step,acc. Throws ConfigError when the reports
/// differ in step count.
std::string merged_curves_csv(const std::vector<ReportSummary>& reports);
std::string report_table(const std::vector<ReportSummary>& reports);

/// Seeds the synthetic generator, the schedule and the run from one value.
/// Manifest sources keep their stored schedule.
void apply_seed(RunConfig& config, std::uint64_t seed);

}  // namespace lid::cli
