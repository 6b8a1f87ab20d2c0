// SPDX-License-Identifier: Apache-2.0
#include "lid/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lid/error.hpp"

namespace lid {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::MatMulNT: return "matmul_nt";
    case OpKind::Add: return "add";
    case OpKind::AddRow: return "add_row";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Tanh: return "tanh";
    case OpKind::Log: return "log";
    case OpKind::Relu: return "relu";
    case OpKind::Softmax: return "softmax";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::RowNorm: return "row_norm";
    case OpKind::NormalizeRows: return "normalize_rows";
    case OpKind::Cosine: return "cosine";
    case OpKind::CosinePaired: return "cosine_paired";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::SliceCols: return "slice_cols";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::EmbeddingBag: return "embedding_bag";
  }
  return "?";
}

namespace {

double row_norm_of(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void accumulate(Tensor& into, const Tensor& g) {
  if (into.size() == 0) {
    into = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) into[i] += g[i];
}

// Rows scaled to unit length; throws on degenerate rows.
Tensor unit_rows(const Tensor& x, std::vector<double>& norms, const char* what) {
  Tensor u = x;
  norms.assign(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double n = row_norm_of(x.row_span(r));
    if (!(n >= kNormFloor)) {
      throw DomainError(std::string(what) + ": row " + std::to_string(r) +
                        " has zero norm");
    }
    norms[r] = n;
    for (double& v : u.row_span(r)) v /= n;
  }
  return u;
}

}  // namespace

NodeId Graph::push(Node node) {
  for (NodeId in : node.inputs) {
    if (in >= nodes_.size()) throw StateError("graph input node " + std::to_string(in) + " does not exist");
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id >= nodes_.size()) throw StateError("graph node " + std::to_string(id) + " does not exist");
  return nodes_[id];
}

NodeId Graph::constant(Tensor value, std::string label) {
  Node n;
  n.value = std::move(value);
  n.evaluated = true;
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::parameter(Tensor value, std::string label) {
  Node n;
  n.value = std::move(value);
  n.evaluated = true;
  n.trainable = true;
  n.label = std::move(label);
  return push(std::move(n));
}

void Graph::set_value(NodeId leaf, Tensor value) {
  if (node(leaf).kind != OpKind::Leaf) throw StateError("set_value on non-leaf node " + describe(leaf));
  nodes_[leaf].value = std::move(value);
  forwarded_for_ = static_cast<NodeId>(-1);
}

#define LID_UNARY(fn, kind_)          \
  NodeId Graph::fn(NodeId a) {        \
    Node n;                           \
    n.kind = OpKind::kind_;           \
    n.inputs = {a};                   \
    return push(std::move(n));        \
  }
#define LID_BINARY(fn, kind_)            \
  NodeId Graph::fn(NodeId a, NodeId b) { \
    Node n;                              \
    n.kind = OpKind::kind_;              \
    n.inputs = {a, b};                   \
    return push(std::move(n));           \
  }

LID_BINARY(matmul, MatMul)
LID_BINARY(matmul_nt, MatMulNT)
LID_BINARY(add, Add)
LID_BINARY(add_row, AddRow)
LID_BINARY(mul, Mul)
LID_BINARY(cosine, Cosine)
LID_BINARY(cosine_paired, CosinePaired)
LID_UNARY(tanh, Tanh)
LID_UNARY(log, Log)
LID_UNARY(relu, Relu)
LID_UNARY(row_norm, RowNorm)
LID_UNARY(normalize_rows, NormalizeRows)
LID_UNARY(sum, Sum)
LID_UNARY(mean, Mean)

#undef LID_UNARY
#undef LID_BINARY

NodeId Graph::add_scalar(NodeId a, double s) {
  Node n;
  n.kind = OpKind::AddScalar;
  n.inputs = {a};
  n.scalar = s;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double s) {
  Node n;
  n.kind = OpKind::Scale;
  n.inputs = {a};
  n.scalar = s;
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId a, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("softmax temperature must be positive");
  Node n;
  n.kind = OpKind::Softmax;
  n.inputs = {a};
  n.scalar = temperature;
  return push(std::move(n));
}

NodeId Graph::log_softmax(NodeId a, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("log_softmax temperature must be positive");
  Node n;
  n.kind = OpKind::LogSoftmax;
  n.inputs = {a};
  n.scalar = temperature;
  return push(std::move(n));
}

NodeId Graph::slice_cols(NodeId a, std::size_t begin, std::size_t end) {
  if (begin > end) throw ShapeError("slice_cols: begin > end");
  Node n;
  n.kind = OpKind::SliceCols;
  n.inputs = {a};
  n.begin = begin;
  n.end = end;
  return push(std::move(n));
}

NodeId Graph::gather_rows(NodeId a, std::vector<std::size_t> rows) {
  Node n;
  n.kind = OpKind::GatherRows;
  n.inputs = {a};
  n.rows = std::move(rows);
  return push(std::move(n));
}

NodeId Graph::embedding_bag(NodeId table, std::vector<std::vector<int>> bags) {
  Node n;
  n.kind = OpKind::EmbeddingBag;
  n.inputs = {table};
  n.bags = std::move(bags);
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = node(id);
  if (!n.evaluated) throw StateError("node " + describe(id) + " has not been evaluated");
  return n.value;
}

const std::string& Graph::label(NodeId id) const { return node(id).label; }

OpKind Graph::kind(NodeId id) const { return node(id).kind; }

std::vector<NodeId> Graph::parameters() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].trainable) out.push_back(i);
  }
  return out;
}

std::string Graph::describe(NodeId id) const {
  std::ostringstream os;
  os << "#" << id;
  if (id < nodes_.size()) {
    const Node& n = nodes_[id];
    os << " (" << op_name(n.kind);
    if (!n.label.empty()) os << " '" << n.label << "'";
    if (n.evaluated) os << " " << n.value.shape_string();
    os << ")";
  }
  return os.str();
}

std::vector<bool> Graph::ancestors(NodeId root) const {
  std::vector<bool> mark(root + 1, false);
  mark[root] = true;
  for (NodeId i = root + 1; i-- > 0;) {
    if (!mark[i]) continue;
    for (NodeId in : nodes_[i].inputs) mark[in] = true;
  }
  return mark;
}

double Graph::forward(NodeId loss) {
  node(loss);
  const auto mark = ancestors(loss);
  for (NodeId i = 0; i <= loss; ++i) {
    if (nodes_[i].kind != OpKind::Leaf) nodes_[i].evaluated = false;
  }
  for (NodeId i = 0; i <= loss; ++i) {
    if (mark[i] && nodes_[i].kind != OpKind::Leaf) evaluate(nodes_[i]);
  }
  const Tensor& out = nodes_[loss].value;
  if (out.size() != 1) {
    throw ShapeError("forward: loss node " + describe(loss) + " is not a scalar");
  }
  forwarded_for_ = loss;
  return out[0];
}

void Graph::evaluate(Node& n) {
  const NodeId self = static_cast<NodeId>(&n - nodes_.data());
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };
  auto mismatch = [&](const char* why) {
    return ShapeError(std::string(op_name(n.kind)) + " at " + describe(self) + ": " + why +
                      "; operands " + describe(n.inputs[0]) + " and " +
                      describe(n.inputs[1]));
  };

  switch (n.kind) {
    case OpKind::Leaf:
      break;
    case OpKind::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.rows()) throw mismatch("inner dimensions differ");
      const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
      Tensor c = Tensor::matrix(m, p);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
          const double av = a.at(i, t);
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < p; ++j) c.at(i, j) += av * b.at(t, j);
        }
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::MatMulNT: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.cols()) throw mismatch("row lengths differ");
      Tensor c = Tensor::matrix(a.rows(), b.rows());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) c.at(i, j) = dot(a.row_span(i), b.row_span(j));
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::Add:
    case OpKind::Mul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (!a.same_shape(b)) throw mismatch("shapes differ");
      Tensor c = Tensor::matrix(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) {
        c[i] = n.kind == OpKind::Add ? a[i] + b[i] : a[i] * b[i];
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::AddRow: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (b.rows() != 1 || b.cols() != a.cols()) throw mismatch("bias row does not match columns");
      Tensor c = Tensor::matrix(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) c.at(i, j) = a.at(i, j) + b[j];
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::AddScalar:
    case OpKind::Scale:
    case OpKind::Tanh:
    case OpKind::Log:
    case OpKind::Relu: {
      const Tensor& a = in(0);
      Tensor c = Tensor::matrix(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        switch (n.kind) {
          case OpKind::AddScalar: c[i] = x + n.scalar; break;
          case OpKind::Scale: c[i] = x * n.scalar; break;
          case OpKind::Tanh: c[i] = std::tanh(x); break;
          case OpKind::Log: c[i] = std::log(std::max(x, kLogFloor)); break;
          default: c[i] = x > 0.0 ? x : 0.0; break;
        }
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::Softmax:
    case OpKind::LogSoftmax: {
      const Tensor& a = in(0);
      Tensor c = Tensor::matrix(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        auto x = a.row_span(r);
        auto y = c.row_span(r);
        if (x.empty()) continue;
        double mx = x[0] / n.scalar;
        for (double v : x) mx = std::max(mx, v / n.scalar);
        double z = 0.0;
        for (double v : x) z += std::exp(v / n.scalar - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < x.size(); ++j) {
          const double ly = x[j] / n.scalar - lse;
          y[j] = n.kind == OpKind::Softmax ? std::exp(ly) : ly;
        }
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::RowNorm: {
      const Tensor& a = in(0);
      Tensor c = Tensor::matrix(a.rows(), 1);
      for (std::size_t r = 0; r < a.rows(); ++r) c[r] = row_norm_of(a.row_span(r));
      n.value = std::move(c);
      break;
    }
    case OpKind::NormalizeRows: {
      std::vector<double> norms;
      n.value = unit_rows(in(0), norms, "normalize_rows");
      break;
    }
    case OpKind::Cosine: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.cols()) throw mismatch("vector dimensions differ");
      std::vector<double> na, nb;
      const Tensor ua = unit_rows(a, na, "cosine");
      const Tensor ub = unit_rows(b, nb, "cosine");
      Tensor c = Tensor::matrix(a.rows(), b.rows());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) c.at(i, j) = dot(ua.row_span(i), ub.row_span(j));
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::CosinePaired: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (!a.same_shape(b)) throw mismatch("shapes differ");
      std::vector<double> na, nb;
      const Tensor ua = unit_rows(a, na, "cosine_paired");
      const Tensor ub = unit_rows(b, nb, "cosine_paired");
      Tensor c = Tensor::matrix(a.rows(), 1);
      for (std::size_t i = 0; i < a.rows(); ++i) c[i] = dot(ua.row_span(i), ub.row_span(i));
      n.value = std::move(c);
      break;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      const Tensor& a = in(0);
      if (n.kind == OpKind::Mean && a.size() == 0) {
        throw DomainError("mean of empty tensor at " + describe(self));
      }
      double s = 0.0;
      for (double v : a.values()) s += v;
      if (n.kind == OpKind::Mean) s /= static_cast<double>(a.size());
      n.value = Tensor::scalar(s);
      break;
    }
    case OpKind::SliceCols: {
      const Tensor& a = in(0);
      if (n.end > a.cols()) {
        throw ShapeError("slice_cols at " + describe(self) + ": range exceeds " +
                         describe(n.inputs[0]));
      }
      Tensor c = Tensor::matrix(a.rows(), n.end - n.begin);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t j = n.begin; j < n.end; ++j) c.at(r, j - n.begin) = a.at(r, j);
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::GatherRows: {
      const Tensor& a = in(0);
      Tensor c = Tensor::matrix(n.rows.size(), a.cols());
      for (std::size_t k = 0; k < n.rows.size(); ++k) {
        if (n.rows[k] >= a.rows()) {
          throw ShapeError("gather_rows at " + describe(self) + ": row index out of range for " +
                           describe(n.inputs[0]));
        }
        auto src = a.row_span(n.rows[k]);
        std::copy(src.begin(), src.end(), c.row_span(k).begin());
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::EmbeddingBag: {
      const Tensor& table = in(0);
      if (table.rows() == 0) throw ShapeError("embedding_bag: empty table");
      Tensor c = Tensor::matrix(n.bags.size(), table.cols());
      for (std::size_t i = 0; i < n.bags.size(); ++i) {
        const auto& bag = n.bags[i];
        if (bag.empty()) continue;
        auto out = c.row_span(i);
        for (int id : bag) {
          const std::size_t row = (id < 0 || static_cast<std::size_t>(id) >= table.rows()) ? 0 : id;
          auto src = table.row_span(row);
          for (std::size_t j = 0; j < out.size(); ++j) out[j] += src[j];
        }
        const double inv = 1.0 / static_cast<double>(bag.size());
        for (double& v : out) v *= inv;
      }
      n.value = std::move(c);
      break;
    }
  }
  n.evaluated = true;
}

std::map<NodeId, Tensor> Graph::backward(NodeId loss) {
  node(loss);
  if (forwarded_for_ != loss) throw StateError("backward called before forward for node " + describe(loss));

  const auto mark = ancestors(loss);
  std::vector<bool> needs(loss + 1, false);
  for (NodeId i = 0; i <= loss; ++i) {
    const Node& n = nodes_[i];
    needs[i] = n.trainable;
    for (NodeId in : n.inputs) needs[i] = needs[i] || needs[in];
  }

  std::vector<Tensor> grads(loss + 1);
  grads[loss] = Tensor::matrix(nodes_[loss].value.rows(), nodes_[loss].value.cols(), 1.0);
  for (NodeId i = loss + 1; i-- > 0;) {
    if (!mark[i] || !needs[i] || grads[i].size() == 0) continue;
    const Node& n = nodes_[i];
    if (n.kind == OpKind::Leaf) continue;
    propagate(n, grads[i], grads);
  }

  std::map<NodeId, Tensor> out;
  for (NodeId p : parameters()) {
    const Tensor& v = nodes_[p].value;
    if (p <= loss && grads[p].size() == v.size()) {
      out.emplace(p, Tensor(v.shape(), grads[p].values()));
    } else {
      out.emplace(p, Tensor(v.shape(), 0.0));
    }
  }
  return out;
}

void Graph::propagate(const Node& n, const Tensor& g, std::vector<Tensor>& grads) const {
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };
  auto send = [&](std::size_t k, const Tensor& d) { accumulate(grads[n.inputs[k]], d); };
  const Tensor& y = n.value;

  switch (n.kind) {
    case OpKind::Leaf:
      break;
    case OpKind::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
      Tensor da = Tensor::matrix(m, k);
      Tensor db = Tensor::matrix(k, p);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
          double s = 0.0;
          const double av = a.at(i, t);
          for (std::size_t j = 0; j < p; ++j) {
            const double gv = g.at(i, j);
            s += gv * b.at(t, j);
            db.at(t, j) += av * gv;
          }
          da.at(i, t) = s;
        }
      }
      send(0, da);
      send(1, db);
      break;
    }
    case OpKind::MatMulNT: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor da = Tensor::matrix(a.rows(), a.cols());
      Tensor db = Tensor::matrix(b.rows(), b.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
          const double gv = g.at(i, j);
          if (gv == 0.0) continue;
          for (std::size_t t = 0; t < a.cols(); ++t) {
            da.at(i, t) += gv * b.at(j, t);
            db.at(j, t) += gv * a.at(i, t);
          }
        }
      }
      send(0, da);
      send(1, db);
      break;
    }
    case OpKind::Add:
      send(0, g);
      send(1, g);
      break;
    case OpKind::AddRow: {
      send(0, g);
      Tensor db = Tensor::matrix(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t j = 0; j < g.cols(); ++j) db[j] += g.at(r, j);
      }
      send(1, db);
      break;
    }
    case OpKind::AddScalar:
      send(0, g);
      break;
    case OpKind::Mul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor da = g, db = g;
      for (std::size_t i = 0; i < g.size(); ++i) {
        da[i] *= b[i];
        db[i] *= a[i];
      }
      send(0, da);
      send(1, db);
      break;
    }
    case OpKind::Scale: {
      Tensor d = g;
      for (double& v : d.values()) v *= n.scalar;
      send(0, d);
      break;
    }
    case OpKind::Tanh: {
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - y[i] * y[i];
      send(0, d);
      break;
    }
    case OpKind::Log: {
      const Tensor& a = in(0);
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] > kLogFloor ? d[i] / a[i] : 0.0;
      send(0, d);
      break;
    }
    case OpKind::Relu: {
      const Tensor& a = in(0);
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(a[i] > 0.0)) d[i] = 0.0;
      }
      send(0, d);
      break;
    }
    case OpKind::Softmax: {
      Tensor d = Tensor::matrix(g.rows(), g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const double gy = dot(g.row_span(r), y.row_span(r));
        for (std::size_t j = 0; j < g.cols(); ++j) {
          d.at(r, j) = y.at(r, j) * (g.at(r, j) - gy) / n.scalar;
        }
      }
      send(0, d);
      break;
    }
    case OpKind::LogSoftmax: {
      Tensor d = Tensor::matrix(g.rows(), g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double gs = 0.0;
        for (double v : g.row_span(r)) gs += v;
        for (std::size_t j = 0; j < g.cols(); ++j) {
          d.at(r, j) = (g.at(r, j) - std::exp(y.at(r, j)) * gs) / n.scalar;
        }
      }
      send(0, d);
      break;
    }
    case OpKind::RowNorm: {
      const Tensor& a = in(0);
      Tensor d = Tensor::matrix(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        if (!(y[r] > 0.0)) continue;
        for (std::size_t j = 0; j < a.cols(); ++j) d.at(r, j) = g[r] * a.at(r, j) / y[r];
      }
      send(0, d);
      break;
    }
    case OpKind::NormalizeRows: {
      const Tensor& a = in(0);
      Tensor d = Tensor::matrix(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        const double norm = row_norm_of(a.row_span(r));
        const double gy = dot(g.row_span(r), y.row_span(r));
        for (std::size_t j = 0; j < a.cols(); ++j) {
          d.at(r, j) = (g.at(r, j) - gy * y.at(r, j)) / norm;
        }
      }
      send(0, d);
      break;
    }
    case OpKind::Cosine: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      std::vector<double> na, nb;
      const Tensor ua = unit_rows(a, na, "cosine");
      const Tensor ub = unit_rows(b, nb, "cosine");
      Tensor da = Tensor::matrix(a.rows(), a.cols());
      Tensor db = Tensor::matrix(b.rows(), b.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
          const double gv = g.at(i, j);
          if (gv == 0.0) continue;
          const double c = y.at(i, j);
          const double sa = gv / na[i];
          const double sb = gv / nb[j];
          for (std::size_t t = 0; t < a.cols(); ++t) {
            da.at(i, t) += sa * (ub.at(j, t) - c * ua.at(i, t));
            db.at(j, t) += sb * (ua.at(i, t) - c * ub.at(j, t));
          }
        }
      }
      send(0, da);
      send(1, db);
      break;
    }
    case OpKind::CosinePaired: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      std::vector<double> na, nb;
      const Tensor ua = unit_rows(a, na, "cosine_paired");
      const Tensor ub = unit_rows(b, nb, "cosine_paired");
      Tensor da = Tensor::matrix(a.rows(), a.cols());
      Tensor db = Tensor::matrix(b.rows(), b.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        const double c = y[i];
        for (std::size_t t = 0; t < a.cols(); ++t) {
          da.at(i, t) = g[i] / na[i] * (ub.at(i, t) - c * ua.at(i, t));
          db.at(i, t) = g[i] / nb[i] * (ua.at(i, t) - c * ub.at(i, t));
        }
      }
      send(0, da);
      send(1, db);
      break;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      const Tensor& a = in(0);
      double v = g[0];
      if (n.kind == OpKind::Mean) v /= static_cast<double>(a.size());
      send(0, Tensor::matrix(a.rows(), a.cols(), v));
      break;
    }
    case OpKind::SliceCols: {
      const Tensor& a = in(0);
      Tensor d = Tensor::matrix(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t j = n.begin; j < n.end; ++j) d.at(r, j) = g.at(r, j - n.begin);
      }
      send(0, d);
      break;
    }
    case OpKind::GatherRows: {
      const Tensor& a = in(0);
      Tensor d = Tensor::matrix(a.rows(), a.cols());
      for (std::size_t k = 0; k < n.rows.size(); ++k) {
        auto dst = d.row_span(n.rows[k]);
        auto src = g.row_span(k);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
      send(0, d);
      break;
    }
    case OpKind::EmbeddingBag: {
      const Tensor& table = in(0);
      Tensor d = Tensor::matrix(table.rows(), table.cols());
      for (std::size_t i = 0; i < n.bags.size(); ++i) {
        const auto& bag = n.bags[i];
        if (bag.empty()) continue;
        const double inv = 1.0 / static_cast<double>(bag.size());
        auto src = g.row_span(i);
        for (int id : bag) {
          const std::size_t row = (id < 0 || static_cast<std::size_t>(id) >= table.rows()) ? 0 : id;
          auto dst = d.row_span(row);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j] * inv;
        }
      }
      send(0, d);
      break;
    }
  }
}

double finite_diff_check(Graph& graph, NodeId loss, double epsilon) {
  graph.forward(loss);
  const auto analytic = graph.backward(loss);
  double worst = 0.0;
  for (const auto& [param, grad] : analytic) {
    Tensor base = graph.value(param);
    for (std::size_t i = 0; i < base.size(); ++i) {
      Tensor probe = base;
      probe[i] = base[i] + epsilon;
      graph.set_value(param, probe);
      const double up = graph.forward(loss);
      probe[i] = base[i] - epsilon;
      graph.set_value(param, probe);
      const double down = graph.forward(loss);
      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
    }
    graph.set_value(param, base);
  }
  graph.forward(loss);
  return worst;
}

}  // namespace lid
