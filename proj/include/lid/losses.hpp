// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "lid/graph.hpp"
#include "lid/sample.hpp"
#include "lid/tensor.hpp"

namespace lid {

enum class Head { Cosine, Dot };

const char* head_name(Head head);
Head parse_head(const std::string& name);

/// Scale factors and margins of the combined objective.
struct LossWeights {
  double tau = 50.0;          // cosine logit scale
  double temperature = 2.0;   // distillation temperature
  double alpha = -0.1;        // inter-class cosine margin
  double beta1 = 0.001;       // prediction-level distillation
  double beta2 = 0.002;       // feature-level distillation
  double beta3 = 10000.0;     // inter-class margin

  /// Throws ConfigError unless tau > 0, temperature > 0 and alpha in [-1, 1].
  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Class-embedding matrix with one row per observed class. Rows are only
/// appended; frozen rows are skipped by the optimiser.
class ClassEmbeddings {
 public:
  explicit ClassEmbeddings(std::size_t dim = 0) : matrix_(Tensor::matrix(0, dim)) {}

  void append(ClassId id, std::span<const double> row);
  std::size_t size() const { return classes_.size(); }
  std::size_t dim() const { return matrix_.cols(); }
  bool contains(ClassId id) const { return row_of_.contains(id); }
  std::size_t row_of(ClassId id) const;
  ClassId class_at(std::size_t row) const { return classes_.at(row); }
  const std::vector<ClassId>& classes() const { return classes_; }

  bool frozen(std::size_t row) const { return frozen_.at(row); }
  void set_frozen(std::size_t row, bool value) { frozen_.at(row) = value; }

  const Tensor& matrix() const { return matrix_; }
  Tensor& matrix() { return matrix_; }

  friend bool operator==(const ClassEmbeddings&, const ClassEmbeddings&) = default;

 private:
  Tensor matrix_;
  std::vector<ClassId> classes_;
  std::vector<bool> frozen_;
  std::unordered_map<ClassId, std::size_t> row_of_;
};

// Value-level operations. Each evaluates the same graph ops the trainer uses.

/// s_i = f . theta_i
std::vector<double> dot_scores(std::span<const double> f, const Tensor& theta);
/// softmax over tau * cos(f, theta_i); zero-norm f or rows throw DomainError.
std::vector<double> cosine_probs(std::span<const double> f, const Tensor& theta, double tau);
/// -sum y_i log max(p_i, 1e-12); y must be one-hot.
double cross_entropy(std::span<const double> p, std::span<const double> y);
/// -sum_i softmax(s*/T)_i log softmax(s/T)_i over the old classes.
double kd_loss(std::span<const double> s_star, std::span<const double> s, double temperature);
/// 1 - cos(f, f*)
double fkd_loss(std::span<const double> f, std::span<const double> f_star);
/// sum over new x old rows of max(cos(new_i, old_j) - alpha, 0).
double icml_loss(const Tensor& theta_new, const Tensor& theta_old, double alpha);

// Graph builders used for training.

/// Pre-softmax scores: tau * cos(f, theta) for the cosine head, f . theta for dot.
NodeId add_scores(Graph& g, NodeId features, NodeId theta, Head head, double tau);

struct LossToggles {
  Head head = Head::Cosine;
  bool pkd = true;
  bool fkd = true;
  bool icml = true;
  bool icml_new_new = false;  // also separate new classes from each other
};

struct LossInputs {
  NodeId features = 0;                    // batch x d
  NodeId theta = 0;                       // classes x d
  std::vector<std::size_t> target_rows;   // per-sample target row in theta
  std::size_t old_rows = 0;               // rows [0, old_rows) are old classes
  std::vector<std::size_t> new_rows;      // rows of the classes introduced this step
  const Tensor* teacher_features = nullptr;  // f*(x) from the frozen snapshot
  const Tensor* teacher_scores = nullptr;    // s* over old classes from the snapshot
};

struct LossNodes {
  NodeId total = 0;
  NodeId scores = 0;
  NodeId ce = 0;
  std::optional<NodeId> kd;
  std::optional<NodeId> fkd;
  std::optional<NodeId> icml;
};

/// L = L_ce + beta1 L_kd + beta2 L_fkd + beta3 L_icml. L_ce, L_kd and L_fkd are
/// batch means; L_icml sums over class pairs. Distillation terms are present only
/// when teacher outputs are supplied and old classes exist; the margin term only
/// when old classes exist.
LossNodes add_total_loss(Graph& g, const LossInputs& in, const LossWeights& w,
                         const LossToggles& toggles);

}  // namespace lid
