// SPDX-License-Identifier: Apache-2.0
#include "lid/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "lid/error.hpp"

namespace fs = std::filesystem;

namespace lid::cli {

void apply_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  if (config.source.kind != ScheduleSource::Kind::Manifest) {
    config.source.synth.seed = seed;
    config.source.params.seed = seed;
  }
}

BenchmarkSchedule prepare(const ScheduleSource& source, const fs::path& dir, std::ostream& out) {
  BenchmarkSchedule sched = materialize_schedule(source);
  save_schedule(sched, dir);
  for (std::size_t i = 0; i < sched.steps.size(); ++i) {
    const Step& s = sched.steps[i];
    out << "step " << (i + 1) << ":";
    for (ClassId c : s.classes) out << ' ' << sched.class_names[c];
    out << "  (train " << s.train.size() << ", valid " << s.valid.size() << ", test " << s.test.size()
        << ")\n";
  }
  out << "wrote " << sched.steps.size() << " steps to " << dir.string() << '\n';
  return sched;
}

namespace {

std::string step_file(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%02zu.json", step);
  return buf;
}

std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

RunReport run(const RunConfig& config, std::ostream& out) {
  config.hyperparams.validate();
  const BenchmarkSchedule sched = materialize_schedule(config.source);
  const fs::path dir = config.out_dir;
  fs::create_directories(dir / "memory");
  RunReport report = run_benchmark(
      sched, config.strategy, config.hyperparams, config.seed,
      [&](const StepResult& r, const LearnerState& state, const std::optional<ModelState>&) {
        write_text_file(dir / "memory" / step_file(r.step), state.memory.to_json_string() + "\n");
        out << "step " << r.step << ": classes " << r.classes_seen << ", acc " << fixed4(r.acc) << '\n';
      });
  write_text_file(dir / "report.json", report_json_string(report, to_json(config)));
  write_text_file(dir / "curve.csv", curve_csv(report));
  write_text_file(dir / "timings.json", timings_to_json(report).dump(2) + "\n");
  out << config.strategy.name << " seed " << config.seed << ": AverageAcc " << fixed4(report.average_acc)
      << " WholeAcc " << fixed4(report.whole_acc) << '\n';
  return report;
}

const AblationVariant& resolve_variant(const std::string& name) {
  for (const auto& v : ablation_variants()) {
    if (v.name == name || v.preset == name) return v;
  }
  return find_ablation_variant(name);
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<std::string>& variants,
                                const std::vector<std::uint64_t>& seeds, std::ostream& out) {
  if (seeds.empty()) throw ConfigError("ablate needs at least one seed");
  std::vector<const AblationVariant*> chosen;
  if (variants.empty()) {
    for (const auto& v : ablation_variants()) chosen.push_back(&v);
  } else {
    for (const auto& name : variants) chosen.push_back(&resolve_variant(name));
  }
  base.hyperparams.validate();

  std::vector<AblationRow> rows;
  for (const AblationVariant* v : chosen) {
    AblationRow row;
    row.variant = v->name;
    row.strategy = v->preset;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.strategy = Strategy::preset(v->preset);
      apply_seed(cfg, seed);
      cfg.out_dir = (fs::path(base.out_dir) / v->preset / ("seed_" + std::to_string(seed))).string();
      std::ostringstream quiet;
      const RunReport r = run(cfg, quiet);
      row.seeds.push_back(seed);
      row.average_acc.push_back(r.average_acc);
      row.whole_acc.push_back(r.whole_acc);
      out << v->name << " seed " << seed << ": AverageAcc " << fixed4(r.average_acc) << " WholeAcc "
          << fixed4(r.whole_acc) << '\n';
    }
    row.mean_average = mean(row.average_acc);
    row.mean_whole = mean(row.whole_acc);
    rows.push_back(std::move(row));
  }
  write_text_file(fs::path(base.out_dir) / "ablation.csv", ablation_csv(rows));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,strategy,seeds,average_acc,whole_acc\n";
  for (const auto& r : rows) {
    os << r.variant << ',' << r.strategy << ',' << r.seeds.size() << ',' << format_double(r.mean_average)
       << ',' << format_double(r.mean_whole) << '\n';
  }
  return os.str();
}

namespace {

void require_same_steps(const std::vector<ReportSummary>& reports) {
  if (reports.empty()) throw ConfigError("no reports given");
  for (const auto& r : reports) {
    if (r.accs.size() != reports.front().accs.size()) {
      throw ConfigError("reports come from incompatible schedules (" + std::to_string(reports.front().accs.size()) +
                        " vs " + std::to_string(r.accs.size()) + " steps)");
    }
  }
}

}  // namespace

std::string merged_curves_csv(const std::vector<ReportSummary>& reports) {
  require_same_steps(reports);
  std::ostringstream os;
  os << "strategy,seed,step,acc\n";
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.accs.size(); ++i) {
      os << r.strategy << ',' << r.seed << ',' << (i + 1) << ',' << format_double(r.accs[i]) << '\n';
    }
  }
  return os.str();
}

std::string report_table(const std::vector<ReportSummary>& reports) {
  require_same_steps(reports);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"strategy", "seed"};
  for (std::size_t i = 0; i < reports.front().accs.size(); ++i) header.push_back("acc_" + std::to_string(i + 1));
  header.push_back("AverageAcc");
  header.push_back("WholeAcc");
  cells.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.strategy, std::to_string(r.seed)};
    for (double a : r.accs) row.push_back(fixed4(a));
    row.push_back(fixed4(r.average_acc));
    row.push_back(fixed4(r.whole_acc));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) os << "  ";
      if (c < 2) {
        os << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    os << '\n';
  }
  return os.str();
}

namespace {

// Flag values collected during parsing and applied on top of --config.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  bool synthetic = false;
  std::optional<std::string> data, schedule, preset;
  std::optional<std::size_t> classes, per_step, top_k;
  std::optional<double> overlap;

  std::optional<std::string> strategy;
  bool no_cn = false, no_fkd = false, no_pkd = false, no_icml = false;

  std::optional<double> tau, temp, alpha, beta1, beta2, beta3, lr, momentum;
  std::optional<std::size_t> memory, epochs, batch;

  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants;
  std::vector<std::string> reports;
};

template <typename T>
void opt(CLI::App* app, const std::string& name, std::optional<T>& into, const std::string& help) {
  app->add_option_function<T>(name, [&into](const T& v) { into = v; }, help);
}

void add_source_options(CLI::App* app, Overrides& o) {
  app->add_flag("--synthetic", o.synthetic, "use the built-in synthetic intent generator");
  opt(app, "--data", o.data, "JSONL dataset (text, label, optional split)");
  opt(app, "--preset", o.preset, "benchmark slicing preset (atis, snips, hwu64, clinc150, synthetic)");
  opt(app, "--classes", o.classes, "synthetic: number of classes");
  opt(app, "--per-step", o.per_step, "classes per step");
  opt(app, "--top-k", o.top_k, "keep only the k most frequent classes");
  opt(app, "--overlap", o.overlap, "synthetic: shared-word fraction");
}

void add_common_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "run config or report JSON to start from");
  opt(app, "--seed", o.seed, "seed for data, schedule and training");
  opt(app, "--out", o.out, "output directory");
}

void add_run_options(CLI::App* app, Overrides& o) {
  opt(app, "--schedule", o.schedule, "schedule directory written by prepare");
  add_source_options(app, o);
  app->add_flag("--no-cn", o.no_cn, "dot-product head instead of cosine");
  app->add_flag("--no-fkd", o.no_fkd, "drop feature-level distillation");
  app->add_flag("--no-pkd", o.no_pkd, "drop prediction-level distillation");
  app->add_flag("--no-icml", o.no_icml, "drop the inter-class margin");
  opt(app, "--tau", o.tau, "cosine logit scale");
  opt(app, "--temp", o.temp, "distillation temperature");
  opt(app, "--alpha", o.alpha, "margin");
  opt(app, "--beta1", o.beta1, "weight of prediction distillation");
  opt(app, "--beta2", o.beta2, "weight of feature distillation");
  opt(app, "--beta3", o.beta3, "weight of the margin loss");
  opt(app, "--memory", o.memory, "replay budget B");
  opt(app, "--epochs", o.epochs, "epochs per step");
  opt(app, "--batch", o.batch, "batch size");
  opt(app, "--lr", o.lr, "learning rate");
  opt(app, "--momentum", o.momentum, "SGD momentum");
}

bool source_flag_given(const Overrides& o) { return o.synthetic || o.data || o.schedule; }

RunConfig build_config(const Overrides& o) {
  RunConfig c;
  if (!o.config.empty()) c = load_run_config(o.config);
  const int sources = int(o.synthetic) + int(o.data.has_value()) + int(o.schedule.has_value());
  if (sources > 1) throw ConfigError("choose one of --synthetic, --data, --schedule");
  if (source_flag_given(o)) {
    const std::uint64_t seed = c.seed;
    if (o.synthetic) {
      c.source = synthetic_source(seed);
    } else if (o.data) {
      c.source = ScheduleSource{};
      c.source.kind = ScheduleSource::Kind::Jsonl;
      c.source.path = *o.data;
      c.source.preset.clear();
    } else {
      c.source = ScheduleSource{};
      c.source.kind = ScheduleSource::Kind::Manifest;
      c.source.path = *o.schedule;
      c.source.preset.clear();
    }
    apply_seed(c, seed);
  }
  ScheduleSource& src = c.source;
  if (o.preset) {
    apply_preset(src.params, *o.preset);
    src.preset = *o.preset;
  }
  if (o.classes || o.overlap) {
    if (src.kind != ScheduleSource::Kind::Synthetic) throw ConfigError("--classes/--overlap apply to synthetic data only");
    if (o.classes) src.synth.n_classes = *o.classes;
    if (o.overlap) src.synth.overlap_fraction = *o.overlap;
  }
  if (o.per_step) src.params.classes_per_step = *o.per_step;
  if (o.top_k) src.params.top_k = *o.top_k;
  if ((o.per_step || o.top_k || o.preset) && src.kind == ScheduleSource::Kind::Manifest) {
    throw ConfigError("a prepared schedule cannot be re-sliced; rerun prepare instead");
  }
  if (o.seed) apply_seed(c, *o.seed);

  if (o.strategy) c.strategy = Strategy::preset(*o.strategy);
  Strategy& s = c.strategy;
  if (o.no_cn && s.head != Head::Dot) {
    s.head = Head::Dot;
    s.name += "-no-cn";
  }
  if (o.no_fkd && s.use_fkd) {
    s.use_fkd = false;
    s.name += "-no-fkd";
  }
  if (o.no_pkd && s.use_pkd) {
    s.use_pkd = false;
    s.name += "-no-pkd";
  }
  if (o.no_icml && s.use_icml) {
    s.use_icml = false;
    s.name += "-no-icml";
  }

  HyperParams& hp = c.hyperparams;
  if (o.tau) hp.weights.tau = *o.tau;
  if (o.temp) hp.weights.temperature = *o.temp;
  if (o.alpha) hp.weights.alpha = *o.alpha;
  if (o.beta1) hp.weights.beta1 = *o.beta1;
  if (o.beta2) hp.weights.beta2 = *o.beta2;
  if (o.beta3) hp.weights.beta3 = *o.beta3;
  if (o.lr) hp.lr = *o.lr;
  if (o.momentum) hp.momentum = *o.momentum;
  if (o.memory) hp.memory_budget = *o.memory;
  if (o.epochs) hp.epochs = *o.epochs;
  if (o.batch) hp.batch_size = *o.batch;
  hp.validate();
  return c;
}

std::vector<ReportSummary> load_reports(const std::vector<std::string>& paths) {
  std::vector<ReportSummary> out;
  for (const auto& p : paths) {
    fs::path path = p;
    if (fs::is_directory(path)) path /= "report.json";
    if (!fs::exists(path)) throw ConfigError("report not found: " + path.string());
    out.push_back(load_report_summary(path));
  }
  return out;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Class-incremental intent detection experiments", args.empty() ? "lid" : args.front()};
  app.require_subcommand(1);
  Overrides o;

  CLI::App* prep = app.add_subcommand("prepare", "build a step schedule and write it to disk");
  add_common_options(prep, o);
  add_source_options(prep, o);

  CLI::App* run_cmd = app.add_subcommand("run", "train one strategy over all steps");
  add_common_options(run_cmd, o);
  add_run_options(run_cmd, o);
  opt(run_cmd, "--strategy", o.strategy, "finetune, lwf, emr, icarl, msr, upperbound or an ablation preset");

  CLI::App* abl = app.add_subcommand("ablate", "run the ablation grid");
  add_common_options(abl, o);
  add_run_options(abl, o);
  abl->add_option("--seeds", o.seeds, "comma-separated seeds")->delimiter(',');
  abl->add_option("--variants", o.variants, "comma-separated variants (default: all)")->delimiter(',');

  CLI::App* rep = app.add_subcommand("report", "merge report curves and print a table");
  opt(rep, "--out", o.out, "output directory");
  rep->add_option("reports", o.reports, "report.json files or run directories")->required();

  try {
    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rest.begin(), rest.end());
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (prep->parsed()) {
      RunConfig c = build_config(o);
      prepare(c.source, o.out.value_or("schedule"), out);
    } else if (run_cmd->parsed()) {
      RunConfig c = build_config(o);
      c.out_dir = o.out.value_or("runs/" + c.strategy.name + "-seed" + std::to_string(c.seed));
      run(c, out);
    } else if (abl->parsed()) {
      RunConfig c = build_config(o);
      c.out_dir = o.out.value_or("ablation");
      std::vector<std::uint64_t> seeds = o.seeds.empty() ? std::vector<std::uint64_t>{c.seed} : o.seeds;
      const auto rows = ablate(c, o.variants, seeds, out);
      out << ablation_csv(rows);
    } else if (rep->parsed()) {
      const auto reports = load_reports(o.reports);
      const std::string table = report_table(reports);
      const fs::path dir = o.out.value_or("report");
      write_text_file(dir / "curves.csv", merged_curves_csv(reports));
      write_text_file(dir / "table.txt", table);
      out << table;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace lid::cli
