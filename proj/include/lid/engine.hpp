// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lid/data.hpp"
#include "lid/encoder.hpp"
#include "lid/losses.hpp"
#include "lid/memory.hpp"
#include "lid/strategy.hpp"

namespace lid {

/// Margin weight for SGD at lr 0.05. The reference weight 1e4 goes with a
/// learning rate of 5e-5; this keeps the product lr * beta3 at 0.5.
inline constexpr double kSgdMarginWeight = 10.0;

inline LossWeights sgd_loss_weights() {
  LossWeights w;
  w.beta3 = kSgdMarginWeight;
  return w;
}

struct HyperParams {
  LossWeights weights = sgd_loss_weights();
  std::size_t memory_budget = 200;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  std::size_t d_emb = 64;
  std::size_t d = 64;
  int min_freq = 1;
  double grad_clip = 0.0;  // global gradient-norm clip; 0 disables
  Distance memory_distance = Distance::Euclidean;
  bool icml_new_new = true;      // margin also separates the step's new classes
  bool sphere_embeddings = true; // cosine head: keep trainable class rows unit-norm

  void validate() const;
  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Encoder, class embeddings and vocabulary. Copies are deep, so a copy taken
/// before training serves as the frozen previous model.
struct ModelState {
  Vocab vocab;
  EncoderParams encoder;
  ClassEmbeddings theta;
  std::size_t step = 0;

  std::vector<std::vector<int>> tokenize(const std::vector<Sample>& samples) const;
  Tensor features(const std::vector<Sample>& samples) const;
  /// Pre-softmax scores for every known class, one row per feature row.
  Tensor scores(const Tensor& features, Head head, double tau) const;
};

/// Appends one embedding row per new class: the unit-normalised mean feature of
/// its training samples, or a seeded random unit vector if it has none.
void init_new_classes(ModelState& model, const std::vector<Sample>& step_train,
                      const std::vector<ClassId>& new_classes, std::uint64_t seed);

struct EvalResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::map<ClassId, double> per_class;
};

/// Argmax over every known class (ties go to the smallest class id).
EvalResult evaluate(const ModelState& model, const std::vector<Sample>& samples, Head head, double tau);

/// Predicted class per sample.
std::vector<ClassId> predict(const ModelState& model, const std::vector<Sample>& samples, Head head,
                             double tau);

/// Everything carried from one step to the next.
struct LearnerState {
  ModelState model;
  ReplayMemory memory;
  std::vector<Sample> seen_train;
  std::vector<Sample> seen_valid;
  std::vector<Sample> seen_test;
  std::size_t step = 0;
  bool initialised = false;
};

struct StepResult {
  std::size_t step = 0;
  std::size_t classes_seen = 0;
  double acc = 0.0;
  std::map<ClassId, double> per_class;
  std::vector<double> valid_curve;  // cumulative validation accuracy per epoch
  std::vector<double> loss_curve;   // mean training loss per epoch
  std::size_t train_pool = 0;
  std::size_t memory_size = 0;
  double seconds = 0.0;
};

/// Observer invoked after each step with the snapshot used (if any).
using StepObserver =
    std::function<void(const StepResult&, const LearnerState&, const std::optional<ModelState>& snapshot)>;

/// One class-incremental step: snapshot, new-class init, training on new data
/// plus replay, memory update and cumulative evaluation.
StepResult run_step(LearnerState& state, const Step& step, const Strategy& strategy,
                    const HyperParams& hp, std::uint64_t seed,
                    std::optional<ModelState>* snapshot_out = nullptr);

struct RunReport {
  Strategy strategy;
  HyperParams hyperparams;
  std::uint64_t seed = 0;
  std::vector<StepResult> steps;
  std::vector<std::string> class_names;
  double average_acc = 0.0;
  double whole_acc = 0.0;

  std::vector<double> accs() const;
};

/// AverageAcc = mean of acc_i; WholeAcc = acc_K.
void finalize_metrics(RunReport& report);

RunReport run_benchmark(const BenchmarkSchedule& schedule, const Strategy& strategy,
                        const HyperParams& hp, std::uint64_t seed,
                        const StepObserver& observer = {});

}  // namespace lid
