#include "semtest/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "semtest/error.hpp"

namespace semtest::ad {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::AddBias: return "add_bias";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softplus: return "softplus";
    case OpKind::Softmax: return "softmax";
    case OpKind::Reshape: return "reshape";
    case OpKind::Concat: return "concat";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::MaxLast: return "max_last";
    case OpKind::Gather: return "gather";
    case OpKind::MaxExcept: return "max_except";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!graph_) throw InvalidArgument("value of an unbound Var");
  return graph_->value(*this);
}

const Shape& Var::shape() const { return value().shape(); }

namespace {

struct RowView {
  std::size_t rows;
  std::size_t cols;
};

RowView row_view(const Shape& shape) {
  const std::size_t cols = shape.back();
  return {shape_numel(shape) / cols, cols};
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// c[m,p] = a[m,n] * b[n,p]
void matmul_kernel(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t p) {
  std::fill(c, c + m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * p;
    const double* arow = a + i * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b + k * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
    }
  }
}

// da[m,n] += g[m,p] * b[n,p]^T
void matmul_grad_lhs(const double* g, const double* b, double* da, std::size_t m, std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * p;
    double* darow = da + i * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double* brow = b + k * p;
      double acc = 0.0;
      for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
      darow[k] += acc;
    }
  }
}

// db[n,p] += a[m,n]^T * g[m,p]
void matmul_grad_rhs(const double* a, const double* g, double* db, std::size_t m, std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    const double* grow = g + i * p;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      double* dbrow = db + k * p;
      for (std::size_t j = 0; j < p; ++j) dbrow[j] += aik * grow[j];
    }
  }
}

std::size_t argmax_row(const double* row, std::size_t cols, std::size_t skip) {
  std::size_t best = cols;
  for (std::size_t j = 0; j < cols; ++j) {
    if (j == skip) continue;
    if (best == cols || row[j] > row[best]) best = j;
  }
  return best;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, shape_string(a.shape()), shape_string(b.shape()));
}

void accumulate(std::optional<Tensor>& slot, const Tensor& grad) {
  if (!slot) {
    slot = grad;
    return;
  }
  auto dst = slot->data();
  auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor softmax_values(const Tensor& logits) {
  const auto [rows, cols] = row_view(logits.shape());
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = logits.data().data() + r * cols;
    double* o = out.data().data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= total;
  }
  return out;
}

Var Graph::push(Node n) {
  n.value = std::make_shared<const Tensor>(evaluate(n));
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Graph::Node& Graph::node(Var v, const char* where) const {
  if (v.graph() != this || v.id() >= nodes_.size()) {
    throw InvalidArgument(std::string(where) + ": variable does not belong to this graph");
  }
  return nodes_[v.id()];
}

Var Graph::leaf(Tensor value) { return leaf(std::make_shared<const Tensor>(std::move(value))); }

Var Graph::leaf(std::shared_ptr<const Tensor> value) {
  if (!value || value->empty()) throw InvalidArgument("leaf: empty tensor");
  Node n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::set_value(Var v, Tensor value) {
  const Node& n = node(v, "set_value");
  if (n.kind != OpKind::Leaf) throw InvalidArgument("set_value: node is not a leaf");
  require_same_shape("set_value", *n.value, value);
  nodes_[v.id()].value = std::make_shared<const Tensor>(std::move(value));
}

const Tensor& Graph::value(Var v) const { return *node(v, "value").value; }

OpKind Graph::kind(Var v) const { return node(v, "kind").kind; }

const Tensor& Graph::forward(Var root) {
  node(root, "forward");
  for (std::size_t i = 0; i <= root.id(); ++i) {
    Node& n = nodes_[i];
    if (n.kind == OpKind::Leaf) continue;
    n.value = std::make_shared<const Tensor>(evaluate(n));
  }
  return *nodes_[root.id()].value;
}

const Tensor* Graph::adjoint(Var v) const {
  node(v, "adjoint");
  if (v.id() >= adjoints_.size() || !adjoints_[v.id()]) return nullptr;
  return &*adjoints_[v.id()];
}

Tensor Graph::evaluate(const Node& n) const {
  auto in = [&](std::size_t k) -> const Tensor& { return *nodes_[n.inputs[k]].value; };
  switch (n.kind) {
    case OpKind::Leaf:
      return *n.value;
    case OpKind::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul", shape_string(a.shape()), shape_string(b.shape()));
      }
      const std::size_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
      Tensor out({m, p});
      matmul_kernel(a.data().data(), b.data().data(), out.data().data(), m, k, p);
      return out;
    }
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_same_shape(op_name(n.kind), a, b);
      Tensor out(a.shape());
      for (std::size_t i = 0; i < a.numel(); ++i) {
        out[i] = n.kind == OpKind::Add ? a[i] + b[i] : n.kind == OpKind::Sub ? a[i] - b[i] : a[i] * b[i];
      }
      return out;
    }
    case OpKind::AddBias: {
      const Tensor& x = in(0);
      const Tensor& b = in(1);
      if (b.rank() != 1 || b.numel() != x.shape().back()) {
        throw ShapeError("add_bias", shape_string(x.shape()), shape_string(b.shape()));
      }
      Tensor out = x;
      const std::size_t cols = b.numel();
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i % cols];
      return out;
    }
    case OpKind::Scale:
    case OpKind::AddScalar: {
      Tensor out = in(0);
      for (double& v : out.data()) v = n.kind == OpKind::Scale ? v * n.scalar : v + n.scalar;
      return out;
    }
    case OpKind::Relu:
    case OpKind::Tanh:
    case OpKind::Sigmoid:
    case OpKind::Softplus: {
      Tensor out = in(0);
      for (double& v : out.data()) {
        switch (n.kind) {
          case OpKind::Relu: v = v > 0.0 ? v : 0.0; break;
          case OpKind::Tanh: v = std::tanh(v); break;
          case OpKind::Sigmoid: v = sigmoid_scalar(v); break;
          default: v = softplus_scalar(v); break;
        }
      }
      return out;
    }
    case OpKind::Softmax:
      return softmax_values(in(0));
    case OpKind::Reshape: {
      const Tensor& a = in(0);
      if (shape_numel(n.shape) != a.numel()) throw ShapeError("reshape", shape_string(a.shape()), shape_string(n.shape));
      return a.reshaped(n.shape);
    }
    case OpKind::Concat: {
      const Tensor& first = in(0);
      Shape lead(first.shape().begin(), first.shape().end() - 1);
      std::size_t total_cols = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Tensor& part = in(k);
        Shape part_lead(part.shape().begin(), part.shape().end() - 1);
        if (part_lead != lead) throw ShapeError("concat", shape_string(first.shape()), shape_string(part.shape()));
        total_cols += part.shape().back();
      }
      Shape out_shape = lead;
      out_shape.push_back(total_cols);
      Tensor out(out_shape);
      const std::size_t rows = shape_numel(out_shape) / total_cols;
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Tensor& part = in(k);
        const std::size_t cols = part.shape().back();
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(part.data().data() + r * cols, cols, out.data().data() + r * total_cols + offset);
        }
        offset += cols;
      }
      return out;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      const Tensor& a = in(0);
      double total = 0.0;
      for (double v : a.data()) total += v;
      if (n.kind == OpKind::Mean) total /= static_cast<double>(a.numel());
      return Tensor::scalar(total);
    }
    case OpKind::MaxLast:
    case OpKind::Gather:
    case OpKind::MaxExcept: {
      const Tensor& a = in(0);
      const auto [rows, cols] = row_view(a.shape());
      if (n.kind != OpKind::MaxLast) {
        if (n.index.size() != rows) {
          throw ShapeError(op_name(n.kind), shape_string(a.shape()), "[" + std::to_string(n.index.size()) + " indices]");
        }
        for (std::size_t idx : n.index) {
          if (idx >= cols) throw InvalidArgument(std::string(op_name(n.kind)) + ": index out of range");
        }
        if (n.kind == OpKind::MaxExcept && cols < 2) {
          throw ShapeError("max_except", shape_string(a.shape()), "[>=2 columns]");
        }
      }
      Tensor out({rows});
      for (std::size_t r = 0; r < rows; ++r) {
        const double* row = a.data().data() + r * cols;
        switch (n.kind) {
          case OpKind::MaxLast: out[r] = row[argmax_row(row, cols, cols)]; break;
          case OpKind::Gather: out[r] = row[n.index[r]]; break;
          default: out[r] = row[argmax_row(row, cols, n.index[r])]; break;
        }
      }
      return out;
    }
    case OpKind::SoftmaxCrossEntropy: {
      const Tensor& logits = in(0);
      const auto [rows, cols] = row_view(logits.shape());
      if (n.index.size() != rows) {
        throw ShapeError("softmax_cross_entropy", shape_string(logits.shape()),
                         "[" + std::to_string(n.index.size()) + " labels]");
      }
      double total = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        if (n.index[r] >= cols) throw InvalidArgument("softmax_cross_entropy: label out of range");
        const double* row = logits.data().data() + r * cols;
        const double mx = *std::max_element(row, row + cols);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) z += std::exp(row[j] - mx);
        total += std::log(z) + mx - row[n.index[r]];
      }
      return Tensor::scalar(total / static_cast<double>(rows));
    }
  }
  throw InvalidArgument("evaluate: unknown operation");
}

std::vector<Tensor> Graph::backward(Var root, std::span<const Var> wrt) {
  const Node& root_node = node(root, "backward");
  if (root_node.value->numel() != 1) {
    throw ShapeError("backward", shape_string(root_node.value->shape()), "[1] (scalar root required)");
  }
  for (const Var& w : wrt) {
    if (w.graph() != this || w.id() >= nodes_.size()) {
      throw InvalidArgument("backward: requested leaf is not in this graph");
    }
    if (nodes_[w.id()].kind != OpKind::Leaf) throw InvalidArgument("backward: requested node is not a leaf");
  }

  const std::size_t count = root.id() + 1;
  std::vector<char> needs(count, 0);
  for (const Var& w : wrt) {
    if (w.id() < count) needs[w.id()] = 1;
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (nodes_[i].kind == OpKind::Leaf) continue;
    for (std::size_t j : nodes_[i].inputs) {
      if (needs[j]) {
        needs[i] = 1;
        break;
      }
    }
  }

  adjoints_.assign(count, std::nullopt);
  adjoints_[root.id()] = Tensor(root_node.value->shape(), 1.0);
  for (std::size_t i = count; i-- > 0;) {
    if (!needs[i] || !adjoints_[i] || nodes_[i].kind == OpKind::Leaf) continue;
    propagate(nodes_[i], *adjoints_[i], needs, adjoints_);
  }

  std::vector<Tensor> grads;
  grads.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() < count && adjoints_[w.id()]) {
      grads.push_back(*adjoints_[w.id()]);
    } else {
      grads.push_back(Tensor::zeros(nodes_[w.id()].value->shape()));
    }
  }
  return grads;
}

void Graph::propagate(const Node& n, const Tensor& grad, const std::vector<char>& needs,
                      std::vector<std::optional<Tensor>>& adj) const {
  auto in = [&](std::size_t k) -> const Tensor& { return *nodes_[n.inputs[k]].value; };
  auto wants = [&](std::size_t k) { return needs[n.inputs[k]] != 0; };
  auto slot = [&](std::size_t k) -> std::optional<Tensor>& { return adj[n.inputs[k]]; };
  const Tensor& out = *n.value;

  switch (n.kind) {
    case OpKind::Leaf:
      return;
    case OpKind::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
      if (wants(0)) {
        Tensor da(a.shape());
        matmul_grad_lhs(grad.data().data(), b.data().data(), da.data().data(), m, k, p);
        accumulate(slot(0), da);
      }
      if (wants(1)) {
        Tensor db(b.shape());
        matmul_grad_rhs(a.data().data(), grad.data().data(), db.data().data(), m, k, p);
        accumulate(slot(1), db);
      }
      return;
    }
    case OpKind::Add:
      if (wants(0)) accumulate(slot(0), grad);
      if (wants(1)) accumulate(slot(1), grad);
      return;
    case OpKind::Sub:
      if (wants(0)) accumulate(slot(0), grad);
      if (wants(1)) {
        Tensor g = grad;
        for (double& v : g.data()) v = -v;
        accumulate(slot(1), g);
      }
      return;
    case OpKind::Mul:
      for (std::size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        const Tensor& other = in(1 - k);
        Tensor g = grad;
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= other[i];
        accumulate(slot(k), g);
      }
      return;
    case OpKind::AddBias:
      if (wants(0)) accumulate(slot(0), grad);
      if (wants(1)) {
        const std::size_t cols = in(1).numel();
        Tensor g(in(1).shape());
        for (std::size_t i = 0; i < grad.numel(); ++i) g[i % cols] += grad[i];
        accumulate(slot(1), g);
      }
      return;
    case OpKind::Scale: {
      Tensor g = grad;
      for (double& v : g.data()) v *= n.scalar;
      accumulate(slot(0), g);
      return;
    }
    case OpKind::AddScalar:
    case OpKind::Reshape: {
      accumulate(slot(0), grad.reshaped(in(0).shape()));
      return;
    }
    case OpKind::Relu:
    case OpKind::Tanh:
    case OpKind::Sigmoid:
    case OpKind::Softplus: {
      const Tensor& x = in(0);
      Tensor g = grad;
      for (std::size_t i = 0; i < g.numel(); ++i) {
        switch (n.kind) {
          case OpKind::Relu: g[i] = x[i] > 0.0 ? g[i] : 0.0; break;
          case OpKind::Tanh: g[i] *= 1.0 - out[i] * out[i]; break;
          case OpKind::Sigmoid: g[i] *= out[i] * (1.0 - out[i]); break;
          default: g[i] *= sigmoid_scalar(x[i]); break;
        }
      }
      accumulate(slot(0), g);
      return;
    }
    case OpKind::Softmax: {
      const auto [rows, cols] = row_view(out.shape());
      Tensor g(out.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* s = out.data().data() + r * cols;
        const double* gr = grad.data().data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * s[j];
        for (std::size_t j = 0; j < cols; ++j) g[r * cols + j] = s[j] * (gr[j] - dot);
      }
      accumulate(slot(0), g);
      return;
    }
    case OpKind::Concat: {
      const std::size_t total_cols = out.shape().back();
      const std::size_t rows = out.numel() / total_cols;
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t cols = in(k).shape().back();
        if (wants(k)) {
          Tensor g(in(k).shape());
          for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(grad.data().data() + r * total_cols + offset, cols, g.data().data() + r * cols);
          }
          accumulate(slot(k), g);
        }
        offset += cols;
      }
      return;
    }
    case OpKind::Sum:
    case OpKind::Mean: {
      const double scale = n.kind == OpKind::Mean ? grad[0] / static_cast<double>(in(0).numel()) : grad[0];
      accumulate(slot(0), Tensor(in(0).shape(), scale));
      return;
    }
    case OpKind::MaxLast:
    case OpKind::Gather:
    case OpKind::MaxExcept: {
      const Tensor& a = in(0);
      const auto [rows, cols] = row_view(a.shape());
      Tensor g(a.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* row = a.data().data() + r * cols;
        std::size_t j = 0;
        switch (n.kind) {
          case OpKind::MaxLast: j = argmax_row(row, cols, cols); break;
          case OpKind::Gather: j = n.index[r]; break;
          default: j = argmax_row(row, cols, n.index[r]); break;
        }
        g[r * cols + j] += grad[r];
      }
      accumulate(slot(0), g);
      return;
    }
    case OpKind::SoftmaxCrossEntropy: {
      const Tensor probs = softmax_values(in(0));
      const auto [rows, cols] = row_view(probs.shape());
      const double scale = grad[0] / static_cast<double>(rows);
      Tensor g(probs.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
          const double target = j == n.index[r] ? 1.0 : 0.0;
          g[r * cols + j] = scale * (probs[r * cols + j] - target);
        }
      }
      accumulate(slot(0), g);
      return;
    }
  }
}

Graph::Node Graph::make_node(OpKind kind, std::initializer_list<Var> inputs) {
  Graph::Node n;
  n.kind = kind;
  for (const Var& v : inputs) n.inputs.push_back(v.id());
  return n;
}

#define SEMTEST_CHECK_OWNED(v) node(v, __func__)

Var Graph::matmul(Var a, Var b) {
  SEMTEST_CHECK_OWNED(a);
  SEMTEST_CHECK_OWNED(b);
  return push(make_node(OpKind::MatMul, {a, b}));
}
Var Graph::add(Var a, Var b) {
  SEMTEST_CHECK_OWNED(a);
  SEMTEST_CHECK_OWNED(b);
  return push(make_node(OpKind::Add, {a, b}));
}
Var Graph::add_bias(Var x, Var bias) {
  SEMTEST_CHECK_OWNED(x);
  SEMTEST_CHECK_OWNED(bias);
  return push(make_node(OpKind::AddBias, {x, bias}));
}
Var Graph::sub(Var a, Var b) {
  SEMTEST_CHECK_OWNED(a);
  SEMTEST_CHECK_OWNED(b);
  return push(make_node(OpKind::Sub, {a, b}));
}
Var Graph::mul(Var a, Var b) {
  SEMTEST_CHECK_OWNED(a);
  SEMTEST_CHECK_OWNED(b);
  return push(make_node(OpKind::Mul, {a, b}));
}
Var Graph::scale(Var a, double factor) {
  SEMTEST_CHECK_OWNED(a);
  Node n = make_node(OpKind::Scale, {a});
  n.scalar = factor;
  return push(std::move(n));
}
Var Graph::add_scalar(Var a, double value) {
  SEMTEST_CHECK_OWNED(a);
  Node n = make_node(OpKind::AddScalar, {a});
  n.scalar = value;
  return push(std::move(n));
}
Var Graph::relu(Var a) {
  SEMTEST_CHECK_OWNED(a);
  return push(make_node(OpKind::Relu, {a}));
}
Var Graph::tanh(Var a) {
  SEMTEST_CHECK_OWNED(a);
  return push(make_node(OpKind::Tanh, {a}));
}
Var Graph::sigmoid(Var a) {
  SEMTEST_CHECK_OWNED(a);
  return push(make_node(OpKind::Sigmoid, {a}));
}
Var Graph::softplus(Var a) {
  SEMTEST_CHECK_OWNED(a);
  return push(make_node(OpKind::Softplus, {a}));
}
Var Graph::softmax(Var a) {
  SEMTEST_CHECK_OWNED(a);
  return push(make_node(OpKind::Softmax, {a}));
}
Var Graph::reshape(Var a, Shape shape) {
  SEMTEST_CHECK_OWNED(a);
  Node n = make_node(OpKind::Reshape, {a});
  n.shape = std::move(shape);
  return push(std::move(n));
}
Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  Node n;
  n.kind = OpKind::Concat;
  for (const Var& v : parts) {
    SEMTEST_CHECK_OWNED(v);
    n.inputs.push_back(v.id());
  }
  return push(std::move(n));
}
Var Graph::sum(Var a) {
  SEMTEST_CHECK_OWNED(a);
  return push(make_node(OpKind::Sum, {a}));
}
Var Graph::mean(Var a) {
  SEMTEST_CHECK_OWNED(a);
  return push(make_node(OpKind::Mean, {a}));
}
Var Graph::max_last(Var a) {
  SEMTEST_CHECK_OWNED(a);
  return push(make_node(OpKind::MaxLast, {a}));
}
Var Graph::gather(Var a, std::vector<std::size_t> index) {
  SEMTEST_CHECK_OWNED(a);
  Node n = make_node(OpKind::Gather, {a});
  n.index = std::move(index);
  return push(std::move(n));
}
Var Graph::max_except(Var a, std::vector<std::size_t> index) {
  SEMTEST_CHECK_OWNED(a);
  Node n = make_node(OpKind::MaxExcept, {a});
  n.index = std::move(index);
  return push(std::move(n));
}
Var Graph::softmax_cross_entropy(Var logits, std::vector<std::size_t> labels) {
  SEMTEST_CHECK_OWNED(logits);
  Node n = make_node(OpKind::SoftmaxCrossEntropy, {logits});
  n.index = std::move(labels);
  return push(std::move(n));
}

#undef SEMTEST_CHECK_OWNED

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& function, const Tensor& point,
                                  double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_difference_gradient: step must be > 0");
  Tensor grad(point.shape());
  Tensor probe = point;
  for (std::size_t i = 0; i < point.numel(); ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double up = function(probe);
    probe[i] = original - step;
    const double down = function(probe);
    probe[i] = original;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace semtest::ad
