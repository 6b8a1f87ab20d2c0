// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lid/sample.hpp"

namespace lid {

enum class Split { Train, Valid, Test };

const char* split_name(Split s);

/// Samples with class ids indexing `class_names` (first-appearance order).
struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::optional<Split>> splits;  // aligned with samples
  std::vector<std::string> class_names;
  std::string provenance;
};

/// One JSON object per line with string fields "text" and "label" and an
/// optional "split" in {train, valid, test}. Blank lines are skipped.
Dataset load_jsonl(const std::filesystem::path& path);
Dataset parse_jsonl(std::istream& in, const std::string& source_name);

struct ScheduleParams {
  std::uint64_t seed = 0;
  std::size_t classes_per_step = 1;
  std::optional<std::size_t> top_k;  // keep the k most frequent classes
  double train_ratio = 0.8;
  double valid_ratio = 0.1;
  double test_ratio = 0.1;

  friend bool operator==(const ScheduleParams&, const ScheduleParams&) = default;
};

struct Step {
  std::vector<ClassId> classes;
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::vector<Sample> test;

  friend bool operator==(const Step&, const Step&) = default;
};

/// Ordered class-incremental steps. Class ids are renumbered so that they
/// increase with the step in which a class first appears.
struct BenchmarkSchedule {
  std::vector<Step> steps;
  std::vector<std::string> class_names;  // indexed by renumbered class id
  ScheduleParams params;
  std::string provenance;

  std::size_t class_count() const { return class_names.size(); }

  friend bool operator==(const BenchmarkSchedule&, const BenchmarkSchedule&) = default;
};

/// Filters to the top_k classes (frequency desc, name asc), shuffles the class
/// order with `seed`, groups classes_per_step at a time and splits each class
/// into train/valid/test (explicit split fields win; the rest are split by the
/// ratios, stratified per class). Every class must keep at least one training
/// and one test sample.
BenchmarkSchedule build_schedule(const Dataset& data, const ScheduleParams& params);

/// Manifest JSON plus per-step split files (step_XX/{train,valid,test}.jsonl).
void save_schedule(const BenchmarkSchedule& schedule, const std::filesystem::path& dir);
BenchmarkSchedule load_schedule(const std::filesystem::path& dir);
/// Manifest only: step -> class names -> sample counts.
std::string schedule_manifest_json(const BenchmarkSchedule& schedule);

struct SynthConfig {
  std::size_t n_classes = 10;
  std::size_t train_per_class = 100;
  std::size_t valid_per_class = 10;
  std::size_t test_per_class = 20;
  std::size_t vocab_per_class = 12;
  std::size_t shared_vocab = 24;
  double overlap_fraction = 0.2;
  std::size_t min_length = 4;
  std::size_t max_length = 10;
  std::uint64_t seed = 0;

  std::size_t samples_per_class() const { return train_per_class + valid_per_class + test_per_class; }
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Synthetic intents: each class owns a private word set, and each token is
/// drawn from a shared pool with probability overlap_fraction. Samples carry
/// explicit splits in per-class order train, valid, test.
Dataset synth_dataset(const SynthConfig& config);

/// Unsplit corpus of n_classes x samples_per_class utterances.
std::vector<Sample> synth_generate(std::size_t n_classes, std::size_t samples_per_class,
                                   std::size_t vocab_per_class, double overlap_fraction,
                                   std::uint64_t seed);

/// Reference statistics of a public benchmark, used for slicing and audit.
struct PresetSpec {
  std::string name;
  std::size_t classes_per_step = 1;
  std::optional<std::size_t> top_k;
  std::size_t train = 0, valid = 0, test = 0, classes = 0, steps = 0;
};

const std::vector<PresetSpec>& presets();
const PresetSpec& find_preset(const std::string& name);

}  // namespace lid
