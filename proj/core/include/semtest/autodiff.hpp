#pragma once

// Reverse-mode automatic differentiation over dense Tensors.
//
// A Graph is a tape: nodes are appended in creation order, which is always a
// topological order, so the graph is acyclic by construction. Operations are
// evaluated eagerly when created. Leaf values may later be replaced with
// set_value() and the graph re-evaluated with forward(), which lets callers
// build a graph once and walk it many times (the test generator and the
// finite-difference oracle both rely on this).
//
// Rank conventions: "row" operations (softmax, max_last, gather, max_except,
// softmax_cross_entropy) treat the last axis as the feature axis and every
// leading element as a row; a rank-1 tensor is a single row.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "semtest/tensor.hpp"

namespace semtest::ad {

enum class OpKind {
  Leaf,
  MatMul,
  Add,
  AddBias,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Relu,
  Tanh,
  Sigmoid,
  Softplus,
  Softmax,
  Reshape,
  Concat,
  Sum,
  Mean,
  MaxLast,
  Gather,
  MaxExcept,
  SoftmaxCrossEntropy,
};

const char* op_name(OpKind kind);

class Graph;

/// Lightweight handle to a node inside a Graph.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor& value() const;
  const Shape& shape() const;

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf owning its value.
  Var leaf(Tensor value);
  /// Leaf sharing an immutable tensor (model weights), no copy is made.
  Var leaf(std::shared_ptr<const Tensor> value);

  /// Replaces a leaf's value. The shape must not change. Dependent values
  /// are stale until forward() is called.
  void set_value(Var leaf, Tensor value);

  const Tensor& value(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Re-evaluates every operation node up to and including root, in creation
  /// order, and returns the root value.
  const Tensor& forward(Var root);

  /// Gradients of a single-element root with respect to each leaf in wrt.
  /// Only nodes that depend on some requested leaf receive adjoints.
  std::vector<Tensor> backward(Var root, std::span<const Var> wrt);
  std::vector<Tensor> backward(Var root, std::initializer_list<Var> wrt) {
    return backward(root, std::span<const Var>(wrt.begin(), wrt.size()));
  }

  /// Adjoint computed by the most recent backward(), if the node received one.
  const Tensor* adjoint(Var v) const;

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// x[..., n] + bias[n], broadcast over rows.
  Var add_bias(Var x, Var bias);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double value);
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var softmax(Var a);
  Var reshape(Var a, Shape shape);
  /// Concatenation along the last axis.
  Var concat(std::span<const Var> parts);
  Var sum(Var a);
  Var mean(Var a);
  /// Per-row maximum, shape [rows].
  Var max_last(Var a);
  /// Per-row element a[r, index[r]], shape [rows].
  Var gather(Var a, std::vector<std::size_t> index);
  /// Per-row maximum over every column except index[r], shape [rows].
  Var max_except(Var a, std::vector<std::size_t> index);
  /// Mean over rows of -log softmax(logits)[r, label[r]], shape [1].
  Var softmax_cross_entropy(Var logits, std::vector<std::size_t> labels);

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<std::size_t> inputs;
    std::shared_ptr<const Tensor> value;
    double scalar = 0.0;
    std::vector<std::size_t> index;
    Shape shape;
  };

  static Node make_node(OpKind kind, std::initializer_list<Var> inputs);
  Var push(Node node);
  const Node& node(Var v, const char* where) const;
  Tensor evaluate(const Node& n) const;
  void propagate(const Node& n, const Tensor& grad, const std::vector<char>& needs,
                 std::vector<std::optional<Tensor>>& adjoints) const;

  std::vector<Node> nodes_;
  std::vector<std::optional<Tensor>> adjoints_;
};

inline Var operator+(Var a, Var b) { return a.graph()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph()->mul(a, b); }
inline Var operator*(double s, Var a) { return a.graph()->scale(a, s); }
inline Var operator+(Var a, double s) { return a.graph()->add_scalar(a, s); }
inline Var matmul(Var a, Var b) { return a.graph()->matmul(a, b); }
inline Var relu(Var a) { return a.graph()->relu(a); }
inline Var tanh(Var a) { return a.graph()->tanh(a); }
inline Var sigmoid(Var a) { return a.graph()->sigmoid(a); }
inline Var softplus(Var a) { return a.graph()->softplus(a); }
inline Var softmax(Var a) { return a.graph()->softmax(a); }
inline Var sum(Var a) { return a.graph()->sum(a); }
inline Var mean(Var a) { return a.graph()->mean(a); }

/// Central-difference gradient of a scalar function, one element at a time.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& function,
                                  const Tensor& point, double step);

/// Row-wise softmax with max subtraction, outside any graph.
Tensor softmax_values(const Tensor& logits);

}  // namespace semtest::ad
