// SPDX-License-Identifier: Apache-2.0
#include "lid/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lid/error.hpp"

namespace lid {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << contents;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScheduleSource synthetic_source(std::uint64_t seed) {
  ScheduleSource s;
  s.kind = ScheduleSource::Kind::Synthetic;
  s.preset = "synthetic";
  s.synth.seed = seed;
  s.params.seed = seed;
  apply_preset(s.params, "synthetic");
  return s;
}

void apply_preset(ScheduleParams& params, const std::string& preset) {
  const PresetSpec& p = find_preset(preset);
  params.classes_per_step = p.classes_per_step;
  params.top_k = p.top_k;
}

BenchmarkSchedule materialize_schedule(const ScheduleSource& source) {
  switch (source.kind) {
    case ScheduleSource::Kind::Synthetic:
      return build_schedule(synth_dataset(source.synth), source.params);
    case ScheduleSource::Kind::Jsonl:
      return build_schedule(load_jsonl(source.path), source.params);
    case ScheduleSource::Kind::Manifest:
      return load_schedule(source.path);
  }
  throw ConfigError("unknown schedule source");
}

namespace {

const char* kind_name(ScheduleSource::Kind k) {
  switch (k) {
    case ScheduleSource::Kind::Synthetic: return "synthetic";
    case ScheduleSource::Kind::Jsonl: return "jsonl";
    case ScheduleSource::Kind::Manifest: return "manifest";
  }
  return "?";
}

ScheduleSource::Kind parse_kind(const std::string& s) {
  if (s == "synthetic") return ScheduleSource::Kind::Synthetic;
  if (s == "jsonl") return ScheduleSource::Kind::Jsonl;
  if (s == "manifest") return ScheduleSource::Kind::Manifest;
  throw ConfigError("unknown schedule source kind '" + s + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& into) {
  if (j.contains(key)) j.at(key).get_to(into);
}

json synth_to_json(const SynthConfig& c) {
  return json{{"n_classes", c.n_classes},
              {"train_per_class", c.train_per_class},
              {"valid_per_class", c.valid_per_class},
              {"test_per_class", c.test_per_class},
              {"vocab_per_class", c.vocab_per_class},
              {"shared_vocab", c.shared_vocab},
              {"overlap_fraction", c.overlap_fraction},
              {"min_length", c.min_length},
              {"max_length", c.max_length},
              {"seed", c.seed}};
}

SynthConfig synth_from_json(const json& j) {
  SynthConfig c;
  read_opt(j, "n_classes", c.n_classes);
  read_opt(j, "train_per_class", c.train_per_class);
  read_opt(j, "valid_per_class", c.valid_per_class);
  read_opt(j, "test_per_class", c.test_per_class);
  read_opt(j, "vocab_per_class", c.vocab_per_class);
  read_opt(j, "shared_vocab", c.shared_vocab);
  read_opt(j, "overlap_fraction", c.overlap_fraction);
  read_opt(j, "min_length", c.min_length);
  read_opt(j, "max_length", c.max_length);
  read_opt(j, "seed", c.seed);
  return c;
}

json params_to_json(const ScheduleParams& p) {
  return json{{"seed", p.seed},
              {"classes_per_step", p.classes_per_step},
              {"top_k", p.top_k ? json(*p.top_k) : json(nullptr)},
              {"train_ratio", p.train_ratio},
              {"valid_ratio", p.valid_ratio},
              {"test_ratio", p.test_ratio}};
}

ScheduleParams params_from_json(const json& j) {
  ScheduleParams p;
  read_opt(j, "seed", p.seed);
  read_opt(j, "classes_per_step", p.classes_per_step);
  if (j.contains("top_k") && !j.at("top_k").is_null()) p.top_k = j.at("top_k").get<std::size_t>();
  read_opt(j, "train_ratio", p.train_ratio);
  read_opt(j, "valid_ratio", p.valid_ratio);
  read_opt(j, "test_ratio", p.test_ratio);
  return p;
}

}  // namespace

json to_json(const Strategy& s) {
  return json{{"name", s.name},
              {"use_memory", s.use_memory},
              {"memory_selection", selection_name(s.memory_selection)},
              {"head", head_name(s.head)},
              {"use_pkd", s.use_pkd},
              {"use_fkd", s.use_fkd},
              {"use_icml", s.use_icml},
              {"freeze_old_embeddings", s.freeze_old_embeddings},
              {"upper_bound_mode", s.upper_bound_mode}};
}

Strategy strategy_from_json(const json& j) {
  if (j.is_string()) return Strategy::preset(j.get<std::string>());
  Strategy s;
  read_opt(j, "name", s.name);
  read_opt(j, "use_memory", s.use_memory);
  if (j.contains("memory_selection")) s.memory_selection = parse_selection(j.at("memory_selection").get<std::string>());
  if (j.contains("head")) s.head = parse_head(j.at("head").get<std::string>());
  read_opt(j, "use_pkd", s.use_pkd);
  read_opt(j, "use_fkd", s.use_fkd);
  read_opt(j, "use_icml", s.use_icml);
  read_opt(j, "freeze_old_embeddings", s.freeze_old_embeddings);
  read_opt(j, "upper_bound_mode", s.upper_bound_mode);
  return s;
}

json to_json(const HyperParams& hp) {
  return json{{"tau", hp.weights.tau},
              {"temperature", hp.weights.temperature},
              {"alpha", hp.weights.alpha},
              {"beta1", hp.weights.beta1},
              {"beta2", hp.weights.beta2},
              {"beta3", hp.weights.beta3},
              {"memory", hp.memory_budget},
              {"lr", hp.lr},
              {"momentum", hp.momentum},
              {"epochs", hp.epochs},
              {"batch", hp.batch_size},
              {"d_emb", hp.d_emb},
              {"d", hp.d},
              {"min_freq", hp.min_freq},
              {"grad_clip", hp.grad_clip},
              {"memory_distance", distance_name(hp.memory_distance)},
              {"icml_new_new", hp.icml_new_new},
              {"sphere_embeddings", hp.sphere_embeddings}};
}

HyperParams hyperparams_from_json(const json& j) {
  HyperParams hp;
  read_opt(j, "tau", hp.weights.tau);
  read_opt(j, "temperature", hp.weights.temperature);
  read_opt(j, "alpha", hp.weights.alpha);
  read_opt(j, "beta1", hp.weights.beta1);
  read_opt(j, "beta2", hp.weights.beta2);
  read_opt(j, "beta3", hp.weights.beta3);
  read_opt(j, "memory", hp.memory_budget);
  read_opt(j, "lr", hp.lr);
  read_opt(j, "momentum", hp.momentum);
  read_opt(j, "epochs", hp.epochs);
  read_opt(j, "batch", hp.batch_size);
  read_opt(j, "d_emb", hp.d_emb);
  read_opt(j, "d", hp.d);
  read_opt(j, "min_freq", hp.min_freq);
  read_opt(j, "grad_clip", hp.grad_clip);
  if (j.contains("memory_distance")) hp.memory_distance = parse_distance(j.at("memory_distance").get<std::string>());
  read_opt(j, "icml_new_new", hp.icml_new_new);
  read_opt(j, "sphere_embeddings", hp.sphere_embeddings);
  return hp;
}

json to_json(const ScheduleSource& s) {
  json j{{"kind", kind_name(s.kind)}, {"path", s.path}, {"preset", s.preset}};
  if (s.kind == ScheduleSource::Kind::Synthetic) j["synthetic"] = synth_to_json(s.synth);
  j["schedule"] = params_to_json(s.params);
  return j;
}

ScheduleSource schedule_source_from_json(const json& j) {
  ScheduleSource s;
  if (j.contains("kind")) s.kind = parse_kind(j.at("kind").get<std::string>());
  read_opt(j, "path", s.path);
  read_opt(j, "preset", s.preset);
  if (j.contains("synthetic")) s.synth = synth_from_json(j.at("synthetic"));
  if (j.contains("schedule")) s.params = params_from_json(j.at("schedule"));
  return s;
}

json to_json(const RunConfig& c) {
  return json{{"source", to_json(c.source)},
              {"strategy", to_json(c.strategy)},
              {"hyperparams", to_json(c.hyperparams)},
              {"seed", c.seed}};
}

RunConfig run_config_from_json(const json& input) {
  try {
    const json& j = input.contains("config") ? input.at("config") : input;
    RunConfig c;
    read_opt(j, "seed", c.seed);
    c.source = j.contains("source") ? schedule_source_from_json(j.at("source")) : synthetic_source(c.seed);
    if (j.contains("strategy")) c.strategy = strategy_from_json(j.at("strategy"));
    if (j.contains("hyperparams")) c.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    read_opt(j, "out_dir", c.out_dir);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return run_config_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

json report_to_json(const RunReport& report, const json& config) {
  json j;
  j["format"] = "lidmsr-report/1";
  j["config"] = config;
  j["strategy"] = to_json(report.strategy);
  j["seed"] = report.seed;
  j["class_names"] = report.class_names;
  json steps = json::array();
  for (const auto& s : report.steps) {
    json per_class = json::object();
    for (const auto& [c, a] : s.per_class) {
      const std::string key = static_cast<std::size_t>(c) < report.class_names.size()
                                  ? report.class_names[c]
                                  : std::to_string(c);
      per_class[key] = a;
    }
    steps.push_back({{"step", s.step},
                     {"classes_seen", s.classes_seen},
                     {"acc", s.acc},
                     {"per_class", std::move(per_class)},
                     {"valid_curve", s.valid_curve},
                     {"loss_curve", s.loss_curve},
                     {"train_pool", s.train_pool},
                     {"memory_size", s.memory_size}});
  }
  j["steps"] = std::move(steps);
  j["acc"] = report.accs();
  j["average_acc"] = report.average_acc;
  j["whole_acc"] = report.whole_acc;
  return j;
}

std::string report_json_string(const RunReport& report, const json& config) {
  return report_to_json(report, config).dump(2) + "\n";
}

json timings_to_json(const RunReport& report) {
  json j = json::array();
  for (const auto& s : report.steps) j.push_back({{"step", s.step}, {"seconds", s.seconds}});
  return j;
}

std::string curve_csv(const RunReport& report) {
  std::ostringstream os;
  os << "step,classes_seen,acc,strategy,seed\n";
  for (const auto& s : report.steps) {
    os << s.step << ',' << s.classes_seen << ',' << format_double(s.acc) << ',' << report.strategy.name
       << ',' << report.seed << '\n';
  }
  return os.str();
}

ReportSummary summary_from_json(const json& j) {
  try {
    ReportSummary r;
    r.strategy = j.at("strategy").at("name").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("steps")) {
      r.classes_seen.push_back(s.at("classes_seen").get<std::size_t>());
      r.accs.push_back(s.at("acc").get<double>());
    }
    r.average_acc = j.at("average_acc").get<double>();
    r.whole_acc = j.at("whole_acc").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

ReportSummary load_report_summary(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return summary_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ConfigError("report " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace lid
