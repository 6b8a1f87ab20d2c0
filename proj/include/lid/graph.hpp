// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "lid/tensor.hpp"

namespace lid {

using NodeId = std::size_t;

enum class OpKind {
  Leaf,
  MatMul,        // A[m,k] * B[k,n]
  MatMulNT,      // A[m,k] * B[n,k]^T
  Add,           // same shape
  AddRow,        // A[m,n] + b[1,n] broadcast over rows
  AddScalar,
  Mul,           // elementwise
  Scale,
  Tanh,
  Log,           // log(max(x, 1e-12))
  Relu,          // max(x, 0), subgradient 0 at 0
  Softmax,       // row-wise softmax(x / T)
  LogSoftmax,    // row-wise log softmax(x / T)
  RowNorm,       // [m,n] -> [m,1] Euclidean norms
  NormalizeRows, // x_i / |x_i|
  Cosine,        // [m,d] x [n,d] -> [m,n] pairwise cosine
  CosinePaired,  // [m,d] x [m,d] -> [m,1] row-aligned cosine
  Sum,           // -> [1,1]
  Mean,          // -> [1,1]
  SliceCols,     // columns [begin, end)
  GatherRows,
  EmbeddingBag,  // mean of table rows per bag; empty bag -> zero row
};

const char* op_name(OpKind kind);

/// Values below this norm are treated as degenerate geometry.
inline constexpr double kNormFloor = 1e-12;
/// Lower clamp applied inside Log.
inline constexpr double kLogFloor = 1e-12;

/// Tape of tensor operations with reverse-mode differentiation.
///
/// Nodes are appended in construction order, which is always a valid
/// topological order. Leaves carry their values from creation; interior
/// values are produced by forward(). A graph owns all of its state, so
/// distinct graphs can be evaluated from different threads.
class Graph {
 public:
  NodeId constant(Tensor value, std::string label = {});
  NodeId parameter(Tensor value, std::string label = {});

  /// Replaces a leaf value and invalidates cached forward results.
  void set_value(NodeId leaf, Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId add_row(NodeId a, NodeId row);
  NodeId add_scalar(NodeId a, double s);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId tanh(NodeId a);
  NodeId log(NodeId a);
  NodeId relu(NodeId a);
  NodeId softmax(NodeId a, double temperature = 1.0);
  NodeId log_softmax(NodeId a, double temperature = 1.0);
  NodeId row_norm(NodeId a);
  NodeId normalize_rows(NodeId a);
  NodeId cosine(NodeId a, NodeId b);
  NodeId cosine_paired(NodeId a, NodeId b);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId slice_cols(NodeId a, std::size_t begin, std::size_t end);
  NodeId gather_rows(NodeId a, std::vector<std::size_t> rows);
  /// Token ids at or beyond the table's row count read row 0 (unknown).
  NodeId embedding_bag(NodeId table, std::vector<std::vector<int>> bags);

  /// Evaluates every ancestor of `loss` and returns its scalar value.
  double forward(NodeId loss);

  /// Gradients of `loss` with respect to every trainable leaf. Parameters the
  /// loss does not depend on receive all-zero gradients.
  std::map<NodeId, Tensor> backward(NodeId loss);

  const Tensor& value(NodeId id) const;
  const std::string& label(NodeId id) const;
  OpKind kind(NodeId id) const;
  std::vector<NodeId> parameters() const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<NodeId> inputs;
    double scalar = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<std::size_t> rows;
    std::vector<std::vector<int>> bags;
    Tensor value;
    bool trainable = false;
    bool evaluated = false;
    std::string label;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  void evaluate(Node& n);
  void propagate(const Node& n, const Tensor& grad, std::vector<Tensor>& grads) const;
  std::vector<bool> ancestors(NodeId root) const;
  std::string describe(NodeId id) const;

  std::vector<Node> nodes_;
  NodeId forwarded_for_ = static_cast<NodeId>(-1);
};

/// Compares backward() against central differences (L(w+e) - L(w-e)) / 2e for
/// every coordinate of every parameter. Returns the worst relative error using
/// denominator max(|analytic|, |numeric|, 1e-8). Leaf values are restored.
double finite_diff_check(Graph& graph, NodeId loss, double epsilon = 1e-5);

}  // namespace lid
