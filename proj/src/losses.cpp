// SPDX-License-Identifier: Apache-2.0
#include "lid/losses.hpp"

#include <cmath>

#include "lid/error.hpp"

namespace lid {

const char* head_name(Head head) { return head == Head::Cosine ? "cosine" : "dot"; }

Head parse_head(const std::string& name) {
  if (name == "cosine") return Head::Cosine;
  if (name == "dot") return Head::Dot;
  throw ConfigError("unknown head '" + name + "' (expected cosine or dot)");
}

void LossWeights::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(alpha >= -1.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [-1, 1]");
  for (double b : {beta1, beta2, beta3}) {
    if (!std::isfinite(b)) throw ConfigError("loss weights must be finite");
  }
}

void ClassEmbeddings::append(ClassId id, std::span<const double> row) {
  if (row_of_.contains(id)) throw DomainError("class " + std::to_string(id) + " already has an embedding");
  if (classes_.empty() && matrix_.cols() == 0 && matrix_.rows() == 0) {
    matrix_ = Tensor::matrix(0, row.size());
  }
  if (row.size() != matrix_.cols()) {
    throw ShapeError("class embedding of size " + std::to_string(row.size()) +
                     " does not match dimension " + std::to_string(matrix_.cols()));
  }
  const std::size_t cols = matrix_.cols();
  std::vector<double> values = std::move(matrix_.values());
  values.insert(values.end(), row.begin(), row.end());
  matrix_ = Tensor::matrix(classes_.size() + 1, cols, std::move(values));
  row_of_.emplace(id, classes_.size());
  classes_.push_back(id);
  frozen_.push_back(false);
}

std::size_t ClassEmbeddings::row_of(ClassId id) const {
  auto it = row_of_.find(id);
  if (it == row_of_.end()) throw DomainError("unknown class id " + std::to_string(id));
  return it->second;
}

namespace {

Tensor as_row(std::span<const double> v) { return Tensor::row({v.begin(), v.end()}); }

std::vector<double> first_row(const Tensor& t) { return t.row_vector(0); }

}  // namespace

std::vector<double> dot_scores(std::span<const double> f, const Tensor& theta) {
  Graph g;
  const NodeId s = g.matmul_nt(g.constant(as_row(f), "f"), g.constant(theta, "theta"));
  g.forward(g.sum(s));
  return first_row(g.value(s));
}

std::vector<double> cosine_probs(std::span<const double> f, const Tensor& theta, double tau) {
  if (!(tau > 0.0)) throw DomainError("cosine_probs: tau must be positive");
  Graph g;
  const NodeId s = add_scores(g, g.constant(as_row(f), "f"), g.constant(theta, "theta"),
                              Head::Cosine, tau);
  const NodeId p = g.softmax(s);
  g.forward(g.sum(p));
  return first_row(g.value(p));
}

double cross_entropy(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size()) throw ShapeError("cross_entropy: p and y differ in length");
  int ones = 0;
  for (double v : y) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      ones = -1;
      break;
    }
  }
  if (ones != 1) throw DomainError("cross_entropy: target is not one-hot");
  Graph g;
  const NodeId prod = g.mul(g.constant(as_row(y), "y"), g.log(g.constant(as_row(p), "p")));
  return g.forward(g.scale(g.sum(prod), -1.0));
}

double kd_loss(std::span<const double> s_star, std::span<const double> s, double temperature) {
  if (s_star.empty() || s.empty()) throw DomainError("kd_loss: no old classes");
  if (s_star.size() != s.size()) throw ShapeError("kd_loss: score vectors differ in length");
  Graph g;
  const NodeId target = g.softmax(g.constant(as_row(s_star), "s_star"), temperature);
  const NodeId logp = g.log_softmax(g.constant(as_row(s), "s"), temperature);
  return g.forward(g.scale(g.sum(g.mul(target, logp)), -1.0));
}

double fkd_loss(std::span<const double> f, std::span<const double> f_star) {
  if (f.size() != f_star.size()) throw ShapeError("fkd_loss: feature vectors differ in length");
  Graph g;
  const NodeId c = g.cosine_paired(g.constant(as_row(f), "f"), g.constant(as_row(f_star), "f_star"));
  return g.forward(g.add_scalar(g.scale(g.sum(c), -1.0), 1.0));
}

double icml_loss(const Tensor& theta_new, const Tensor& theta_old, double alpha) {
  if (theta_old.rows() == 0) throw DomainError("icml_loss: no old classes");
  Graph g;
  const NodeId c = g.cosine(g.constant(theta_new, "theta_new"), g.constant(theta_old, "theta_old"));
  return g.forward(g.sum(g.relu(g.add_scalar(c, -alpha))));
}

NodeId add_scores(Graph& g, NodeId features, NodeId theta, Head head, double tau) {
  if (head == Head::Dot) return g.matmul_nt(features, theta);
  return g.scale(g.cosine(features, theta), tau);
}

LossNodes add_total_loss(Graph& g, const LossInputs& in, const LossWeights& w,
                         const LossToggles& toggles) {
  // Copy: adding nodes may reallocate the graph's storage.
  const Tensor theta = g.value(in.theta);
  const std::size_t classes = theta.rows();
  const std::size_t batch = in.target_rows.size();
  if (batch == 0) throw DomainError("total loss over an empty batch");

  LossNodes out;
  out.scores = add_scores(g, in.features, in.theta, toggles.head, w.tau);

  Tensor onehot = Tensor::matrix(batch, classes);
  for (std::size_t i = 0; i < batch; ++i) {
    if (in.target_rows[i] >= classes) throw DomainError("target row outside class embeddings");
    onehot.at(i, in.target_rows[i]) = 1.0;
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const NodeId logp = g.log_softmax(out.scores);
  out.ce = g.scale(g.sum(g.mul(g.constant(std::move(onehot), "onehot"), logp)), -inv_batch);
  NodeId total = out.ce;

  const bool has_old = in.old_rows > 0;
  if (toggles.pkd && has_old && in.teacher_scores != nullptr) {
    const Tensor& s_star = *in.teacher_scores;
    if (s_star.rows() != batch || s_star.cols() != in.old_rows) {
      throw ShapeError("teacher scores " + s_star.shape_string() + " do not cover the old classes");
    }
    const NodeId target = g.softmax(g.constant(s_star, "s_star"), w.temperature);
    const NodeId student = g.log_softmax(g.slice_cols(out.scores, 0, in.old_rows), w.temperature);
    out.kd = g.scale(g.sum(g.mul(target, student)), -inv_batch);
    total = g.add(total, g.scale(*out.kd, w.beta1));
  }
  if (toggles.fkd && has_old && in.teacher_features != nullptr) {
    const NodeId teacher = g.constant(*in.teacher_features, "f_star");
    const NodeId c = g.cosine_paired(in.features, teacher);
    out.fkd = g.add_scalar(g.scale(g.mean(c), -1.0), 1.0);
    total = g.add(total, g.scale(*out.fkd, w.beta2));
  }
  if (toggles.icml && has_old && !in.new_rows.empty()) {
    // Old rows enter as constants: the margin moves new embeddings only.
    std::vector<double> old_values(theta.values().begin(),
                                   theta.values().begin() + in.old_rows * theta.cols());
    const NodeId old_theta =
        g.constant(Tensor::matrix(in.old_rows, theta.cols(), std::move(old_values)), "theta_old");
    const NodeId new_theta = g.gather_rows(in.theta, in.new_rows);
    NodeId icml = g.sum(g.relu(g.add_scalar(g.cosine(new_theta, old_theta), -w.alpha)));
    if (toggles.icml_new_new && in.new_rows.size() > 1) {
      const std::size_t k = in.new_rows.size();
      Tensor upper = Tensor::matrix(k, k);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) upper.at(i, j) = 1.0;
      }
      const NodeId hinge = g.relu(g.add_scalar(g.cosine(new_theta, new_theta), -w.alpha));
      icml = g.add(icml, g.sum(g.mul(hinge, g.constant(std::move(upper), "upper"))));
    }
    out.icml = icml;
    total = g.add(total, g.scale(icml, w.beta3));
  }
  out.total = total;
  return out;
}

}  // namespace lid
