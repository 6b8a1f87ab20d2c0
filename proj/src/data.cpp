// SPDX-License-Identifier: Apache-2.0
#include "lid/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "lid/error.hpp"
#include "lid/json_io.hpp"
#include "lid/rng.hpp"

namespace lid {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

namespace {

std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid" || s == "validation" || s == "dev") return Split::Valid;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Dataset parse_jsonl(std::istream& in, const std::string& source_name) {
  Dataset data;
  data.provenance = source_name;
  std::map<std::string, ClassId> registry;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto fail = [&](const std::string& why) {
      return ConfigError(source_name + ":" + std::to_string(line_no) + ": " + why);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw fail("not a JSON object");
    }
    if (!j.is_object()) throw fail("not a JSON object");
    if (!j.contains("text") || !j["text"].is_string()) throw fail("missing string field \"text\"");
    if (!j.contains("label") || !j["label"].is_string()) throw fail("missing string field \"label\"");
    std::optional<Split> split;
    if (j.contains("split")) {
      if (!j["split"].is_string()) throw fail("field \"split\" must be a string");
      split = parse_split(j["split"].get<std::string>());
      if (!split) throw fail("unknown split '" + j["split"].get<std::string>() + "'");
    }
    const auto name = j["label"].get<std::string>();
    auto [it, fresh] = registry.emplace(name, static_cast<ClassId>(data.class_names.size()));
    if (fresh) data.class_names.push_back(name);
    data.samples.push_back(Sample{j["text"].get<std::string>(), it->second, data.samples.size()});
    data.splits.push_back(split);
  }
  if (data.samples.empty()) throw ConfigError(source_name + ": no samples");
  return data;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path.string());
  return parse_jsonl(in, path.string());
}

BenchmarkSchedule build_schedule(const Dataset& data, const ScheduleParams& params) {
  if (params.classes_per_step < 1) throw ConfigError("classes_per_step must be >= 1");
  for (double r : {params.train_ratio, params.valid_ratio, params.test_ratio}) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
  }
  const double ratio_sum = params.train_ratio + params.valid_ratio + params.test_ratio;
  if (!(ratio_sum > 0.0)) throw ConfigError("split ratios must not all be zero");
  if (data.splits.size() != data.samples.size()) throw ShapeError("dataset splits not aligned with samples");

  const std::size_t n_classes = data.class_names.size();
  std::vector<std::size_t> freq(n_classes, 0);
  for (const Sample& s : data.samples) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= n_classes) {
      throw DomainError("sample label " + std::to_string(s.label) + " has no registered class");
    }
    ++freq[s.label];
  }

  std::vector<ClassId> present;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (freq[c] > 0) present.push_back(static_cast<ClassId>(c));
  }
  if (params.top_k) {
    if (*params.top_k > present.size()) {
      throw ConfigError("top_k " + std::to_string(*params.top_k) + " exceeds the " +
                        std::to_string(present.size()) + " available classes");
    }
    std::sort(present.begin(), present.end(), [&](ClassId a, ClassId b) {
      if (freq[a] != freq[b]) return freq[a] > freq[b];
      return data.class_names[a] < data.class_names[b];
    });
    present.resize(*params.top_k);
  }

  // Name order first so the permutation does not depend on file order.
  std::sort(present.begin(), present.end(),
            [&](ClassId a, ClassId b) { return data.class_names[a] < data.class_names[b]; });
  Rng order_rng = make_rng(params.seed, 0x6f72646572ull);
  std::shuffle(present.begin(), present.end(), order_rng);

  std::vector<ClassId> remap(n_classes, -1);
  BenchmarkSchedule sched;
  sched.params = params;
  sched.provenance = data.provenance;
  for (std::size_t i = 0; i < present.size(); ++i) {
    remap[present[i]] = static_cast<ClassId>(i);
    sched.class_names.push_back(data.class_names[present[i]]);
  }

  std::vector<std::vector<std::size_t>> by_class(present.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const ClassId c = remap[data.samples[i].label];
    if (c >= 0) by_class[c].push_back(i);
  }

  std::size_t step_index = 0;
  for (std::size_t first = 0; first < present.size(); first += params.classes_per_step, ++step_index) {
    Step step;
    const std::size_t last = std::min(present.size(), first + params.classes_per_step);
    for (std::size_t c = first; c < last; ++c) {
      const ClassId id = static_cast<ClassId>(c);
      step.classes.push_back(id);
      std::vector<Sample> train, valid, test, unsplit;
      for (std::size_t idx : by_class[c]) {
        Sample s = data.samples[idx];
        s.label = id;
        const auto& split = data.splits[idx];
        if (!split) {
          unsplit.push_back(std::move(s));
        } else if (*split == Split::Train) {
          train.push_back(std::move(s));
        } else if (*split == Split::Valid) {
          valid.push_back(std::move(s));
        } else {
          test.push_back(std::move(s));
        }
      }
      if (!unsplit.empty()) {
        Rng rng = make_rng(params.seed, 0x73706c6974ull + c);
        std::shuffle(unsplit.begin(), unsplit.end(), rng);
        const double n = static_cast<double>(unsplit.size());
        std::size_t n_test = static_cast<std::size_t>(std::llround(n * params.test_ratio / ratio_sum));
        std::size_t n_valid = static_cast<std::size_t>(std::llround(n * params.valid_ratio / ratio_sum));
        if (params.test_ratio > 0.0 && n_test == 0 && test.empty()) n_test = 1;
        n_test = std::min(n_test, unsplit.size());
        n_valid = std::min(n_valid, unsplit.size() - n_test);
        for (std::size_t k = 0; k < unsplit.size(); ++k) {
          auto& dst = k < n_test ? test : (k < n_test + n_valid ? valid : train);
          dst.push_back(std::move(unsplit[k]));
        }
      }
      if (test.empty() || train.empty()) {
        throw ConfigError("class '" + sched.class_names[c] + "' has " + std::to_string(train.size()) +
                          " training and " + std::to_string(test.size()) +
                          " test samples; each class needs at least one of both");
      }
      auto by_source = [](const Sample& a, const Sample& b) { return a.source_index < b.source_index; };
      for (auto* part : {&train, &valid, &test}) std::sort(part->begin(), part->end(), by_source);
      step.train.insert(step.train.end(), train.begin(), train.end());
      step.valid.insert(step.valid.end(), valid.begin(), valid.end());
      step.test.insert(step.test.end(), test.begin(), test.end());
    }
    sched.steps.push_back(std::move(step));
  }
  if (sched.steps.empty()) throw ConfigError("schedule has no classes");
  return sched;
}

namespace {

json manifest_object(const BenchmarkSchedule& s) {
  json m;
  m["provenance"] = s.provenance;
  m["seed"] = s.params.seed;
  m["classes_per_step"] = s.params.classes_per_step;
  m["top_k"] = s.params.top_k ? json(*s.params.top_k) : json(nullptr);
  m["ratios"] = {s.params.train_ratio, s.params.valid_ratio, s.params.test_ratio};
  m["class_names"] = s.class_names;
  json steps = json::array();
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    const Step& st = s.steps[i];
    json classes = json::array();
    for (ClassId c : st.classes) {
      auto count = [c](const std::vector<Sample>& v) {
        return std::count_if(v.begin(), v.end(), [c](const Sample& x) { return x.label == c; });
      };
      classes.push_back({{"id", c},
                         {"name", s.class_names[c]},
                         {"train", count(st.train)},
                         {"valid", count(st.valid)},
                         {"test", count(st.test)}});
    }
    steps.push_back({{"step", i + 1}, {"classes", std::move(classes)}});
  }
  m["steps"] = std::move(steps);
  return m;
}

std::string step_dir_name(std::size_t i) {
  std::ostringstream os;
  os << "step_" << std::setw(2) << std::setfill('0') << (i + 1);
  return os.str();
}

void write_split(const std::filesystem::path& path, const std::vector<Sample>& samples,
                 const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const Sample& s : samples) {
    json j{{"text", s.text}, {"label", names[s.label]}, {"class_id", s.label}, {"source_index", s.source_index}};
    out << j.dump() << '\n';
  }
}

std::vector<Sample> read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read split file " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      const json j = json::parse(line);
      out.push_back(Sample{j.at("text").get<std::string>(), j.at("class_id").get<ClassId>(),
                           j.at("source_index").get<std::size_t>()});
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::string schedule_manifest_json(const BenchmarkSchedule& schedule) {
  return manifest_object(schedule).dump(2);
}

void save_schedule(const BenchmarkSchedule& schedule, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error("cannot write manifest in " + dir.string());
    out << schedule_manifest_json(schedule) << '\n';
  }
  for (std::size_t i = 0; i < schedule.steps.size(); ++i) {
    const auto sub = dir / step_dir_name(i);
    std::filesystem::create_directories(sub);
    write_split(sub / "train.jsonl", schedule.steps[i].train, schedule.class_names);
    write_split(sub / "valid.jsonl", schedule.steps[i].valid, schedule.class_names);
    write_split(sub / "test.jsonl", schedule.steps[i].test, schedule.class_names);
  }
}

BenchmarkSchedule load_schedule(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot read schedule manifest " + manifest_path.string());
  BenchmarkSchedule s;
  try {
    const json m = json::parse(in);
    s.provenance = m.at("provenance").get<std::string>();
    s.params.seed = m.at("seed").get<std::uint64_t>();
    s.params.classes_per_step = m.at("classes_per_step").get<std::size_t>();
    if (!m.at("top_k").is_null()) s.params.top_k = m.at("top_k").get<std::size_t>();
    const auto ratios = m.at("ratios").get<std::vector<double>>();
    if (ratios.size() != 3) throw ConfigError("manifest ratios must have three entries");
    s.params.train_ratio = ratios[0];
    s.params.valid_ratio = ratios[1];
    s.params.test_ratio = ratios[2];
    s.class_names = m.at("class_names").get<std::vector<std::string>>();
    const auto& steps = m.at("steps");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      Step st;
      for (const auto& c : steps[i].at("classes")) st.classes.push_back(c.at("id").get<ClassId>());
      const auto sub = dir / step_dir_name(i);
      st.train = read_split(sub / "train.jsonl");
      st.valid = read_split(sub / "valid.jsonl");
      st.test = read_split(sub / "test.jsonl");
      s.steps.push_back(std::move(st));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  for (const Step& st : s.steps) {
    for (const auto* part : {&st.train, &st.valid, &st.test}) {
      for (const Sample& x : *part) {
        if (std::find(st.classes.begin(), st.classes.end(), x.label) == st.classes.end()) {
          throw ConfigError("split file sample labelled " + std::to_string(x.label) +
                            " outside its step's classes");
        }
      }
    }
  }
  if (s.steps.empty()) throw ConfigError("schedule manifest has no steps");
  return s;
}

namespace {

constexpr const char* kSyllables[] = {"ba", "ko", "mi", "tu", "re", "sa", "lo", "ne",
                                      "pi", "da", "gu", "fe", "zo", "ka", "vi", "mu",
                                      "te", "ro", "si", "na", "pe", "lu", "ga", "di"};
constexpr std::size_t kSyllableCount = std::size(kSyllables);
constexpr std::size_t kLexiconSize = kSyllableCount * kSyllableCount * kSyllableCount;

std::string lexicon_word(std::size_t index) {
  std::string w = kSyllables[index % kSyllableCount];
  w += kSyllables[(index / kSyllableCount) % kSyllableCount];
  w += kSyllables[index / (kSyllableCount * kSyllableCount)];
  return w;
}

}  // namespace

Dataset synth_dataset(const SynthConfig& cfg) {
  if (cfg.n_classes < 2) throw ConfigError("synthetic generator needs at least 2 classes");
  if (!(cfg.overlap_fraction >= 0.0 && cfg.overlap_fraction < 1.0)) {
    throw ConfigError("overlap_fraction must lie in [0, 1)");
  }
  if (cfg.vocab_per_class == 0) throw ConfigError("vocab_per_class must be positive");
  if (cfg.overlap_fraction > 0.0 && cfg.shared_vocab == 0) {
    throw ConfigError("overlap_fraction > 0 needs a non-empty shared vocabulary");
  }
  if (cfg.min_length == 0 || cfg.min_length > cfg.max_length) throw ConfigError("invalid utterance length range");
  const std::size_t needed = cfg.n_classes * cfg.vocab_per_class + cfg.shared_vocab;
  if (needed > kLexiconSize) {
    throw ConfigError("synthetic vocabulary needs " + std::to_string(needed) + " distinct words but the lexicon has " +
                      std::to_string(kLexiconSize));
  }

  Rng rng = make_rng(cfg.seed, 0x73796e7468ull);
  std::vector<std::size_t> words(kLexiconSize);
  std::iota(words.begin(), words.end(), 0);
  std::shuffle(words.begin(), words.end(), rng);

  Dataset data;
  data.provenance = "synthetic";
  auto class_word = [&](std::size_t c, std::size_t k) { return lexicon_word(words[c * cfg.vocab_per_class + k]); };
  auto shared_word = [&](std::size_t k) { return lexicon_word(words[cfg.n_classes * cfg.vocab_per_class + k]); };

  std::uniform_int_distribution<std::size_t> length(cfg.min_length, cfg.max_length);
  std::uniform_int_distribution<std::size_t> pick_class(0, cfg.vocab_per_class - 1);
  std::uniform_int_distribution<std::size_t> pick_shared(0, cfg.shared_vocab == 0 ? 0 : cfg.shared_vocab - 1);
  std::bernoulli_distribution shared(cfg.overlap_fraction);

  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    std::ostringstream name;
    name << "intent_" << std::setw(2) << std::setfill('0') << c;
    data.class_names.push_back(name.str());
    for (std::size_t i = 0; i < cfg.samples_per_class(); ++i) {
      const std::size_t len = length(rng);
      std::string text;
      for (std::size_t t = 0; t < len; ++t) {
        if (t) text += ' ';
        text += (cfg.overlap_fraction > 0.0 && shared(rng)) ? shared_word(pick_shared(rng))
                                                            : class_word(c, pick_class(rng));
      }
      data.samples.push_back(Sample{std::move(text), static_cast<ClassId>(c), data.samples.size()});
      Split split = Split::Test;
      if (i < cfg.train_per_class) {
        split = Split::Train;
      } else if (i < cfg.train_per_class + cfg.valid_per_class) {
        split = Split::Valid;
      }
      data.splits.push_back(split);
    }
  }
  return data;
}

std::vector<Sample> synth_generate(std::size_t n_classes, std::size_t samples_per_class,
                                   std::size_t vocab_per_class, double overlap_fraction,
                                   std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_classes = n_classes;
  cfg.train_per_class = samples_per_class;
  cfg.valid_per_class = 0;
  cfg.test_per_class = 0;
  cfg.vocab_per_class = vocab_per_class;
  cfg.shared_vocab = 2 * vocab_per_class;
  cfg.overlap_fraction = overlap_fraction;
  cfg.seed = seed;
  return synth_dataset(cfg).samples;
}

const std::vector<PresetSpec>& presets() {
  static const std::vector<PresetSpec> table = {
      {"atis", 1, 10, 4384, 490, 817, 10, 10},
      {"snips", 1, std::nullopt, 13084, 700, 700, 7, 7},
      {"hwu64", 5, 50, 14465, 4827, 4845, 50, 10},
      {"clinc150", 15, std::nullopt, 15000, 3000, 3000, 150, 10},
      {"synthetic", 2, std::nullopt, 1000, 100, 200, 10, 5},
  };
  return table;
}

const PresetSpec& find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  std::string valid;
  for (const auto& p : presets()) valid += (valid.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + name + "' (valid: " + valid + ")");
}

}  // namespace lid
