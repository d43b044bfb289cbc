#pragma once

// Reverse-mode differentiation over dense column-major matrices.
//
// A Graph is an append-only tape: every operation appends one node holding its
// value, its gradient buffer and a closure that pushes the node's gradient to
// its parents. Because nodes are only ever appended after their inputs, the
// tape order is a topological order and backward is a single reverse sweep.
//
// Learnable tensors live outside any graph as Parameters. A graph binds a
// Parameter through param()/param_row(); after backward,
// accumulate_parameter_grads() adds the bound node gradients into
// Parameter::grad. Graphs never write to parameters before that call, so
// independent graphs may be built and differentiated concurrently.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "akde/errors.hpp"

namespace akde::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value);

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }

  std::string name;
  Matrix value;
  Matrix grad;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph* graph() const { return graph_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class UnaryOp { sigmoid, tanh, exp, negate };
enum class BinaryOp { add, sub, hadamard, matmul, concat_rows };

class Graph {
 public:
  // Receives the graph and the id of the node whose gradient is ready.
  using BackwardFn = std::function<void(Graph&, std::uint32_t)>;

  explicit Graph(bool grad_enabled = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  Var variable(Matrix value);
  Var zeros(Index rows, Index cols = 1);

  // Leaf bound to a parameter; repeated calls return the same node.
  Var param(Parameter& p);
  // Column vector holding row `row` of `p`; memoized per (p, row).
  Var param_row(Parameter& p, Index row);

  // Appends an op node. `backward` is dropped when no parent requires grad.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Matrix value, std::span<const Var> parents, BackwardFn backward);

  const Matrix& value(std::uint32_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::uint32_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::uint32_t>& parents(std::uint32_t id) const { return nodes_[id].parents; }

  template <typename Derived>
  void accumulate(std::uint32_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    n.grad += g;
    n.touched = true;
  }

  // Seeds d(root)/d(root) = 1 and sweeps the tape backwards. Gradients add to
  // whatever the nodes already hold; call zero_grad() to start over.
  void backward(Var root);
  void zero_grad();

  // Adds bound node gradients into Parameter::grad (the single-writer step).
  void accumulate_parameter_grads() const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::uint32_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    bool touched = false;
  };

  struct Binding {
    Parameter* parameter;
    std::uint32_t node;
    Index row;  // -1 for a whole-tensor binding
  };

  struct RowKey {
    const Parameter* parameter;
    Index row;
    bool operator==(const RowKey&) const = default;
  };
  struct RowKeyHash {
    std::size_t operator()(const RowKey& k) const {
      return std::hash<const void*>()(k.parameter) ^ (std::hash<Index>()(k.row) * 0x9e3779b97f4a7c15ULL);
    }
  };

  Var append(Matrix value, bool requires_grad);
  void check_owner(Var v) const;

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::vector<Binding> bindings_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
  std::unordered_map<RowKey, std::uint32_t, RowKeyHash> row_nodes_;
};

inline const Matrix& Var::value() const { return graph_->value(id_); }
inline const Matrix& Var::grad() const { return graph_->grad(id_); }

// Elementwise logistic; saturates to exactly 0 or 1 instead of producing NaN.
template <typename Derived>
auto logistic(const Eigen::ArrayBase<Derived>& x) {
  return (typename Derived::Scalar(1) + (-x).exp()).inverse();
}

Var apply(UnaryOp kind, Var x);
Var apply(BinaryOp kind, Var a, Var b);

inline Var sigmoid(Var x) { return apply(UnaryOp::sigmoid, x); }
inline Var tanh(Var x) { return apply(UnaryOp::tanh, x); }
inline Var exp(Var x) { return apply(UnaryOp::exp, x); }
inline Var operator-(Var x) { return apply(UnaryOp::negate, x); }
inline Var operator+(Var a, Var b) { return apply(BinaryOp::add, a, b); }
inline Var operator-(Var a, Var b) { return apply(BinaryOp::sub, a, b); }
inline Var hadamard(Var a, Var b) { return apply(BinaryOp::hadamard, a, b); }
inline Var matmul(Var a, Var b) { return apply(BinaryOp::matmul, a, b); }
inline Var concat_rows(Var a, Var b) { return apply(BinaryOp::concat_rows, a, b); }

Var transpose(Var x);
Var scale(Var x, double factor);
Var one_minus(Var x);
Var sum(Var x);
// aᵀb for two column vectors of equal length.
Var dot(Var a, Var b);
// Places column vectors side by side: n vectors of length d give a d×n matrix.
Var hstack(std::span<const Var> columns);

// Masked, max-shifted softmax over a column vector. `mask[i] == false` hides
// position i (output exactly 0). An empty mask means every position is valid.
Var softmax(Var logits, const std::vector<bool>& mask = {});

struct GradientCheckResult {
  double max_relative_error = 0.0;
  // Worst entry per parameter, in the order the parameters were given.
  std::vector<std::pair<std::string, double>> per_parameter;
};

// Compares analytic gradients of `loss` against central differences, one
// parameter entry at a time. Error per entry is
// |analytic - numeric| / max(1, |analytic| + |numeric|).
// Parameter::grad is overwritten with the analytic gradient.
GradientCheckResult finite_difference_check(const std::function<Var(Graph&)>& loss,
                                            std::span<Parameter* const> params, double eps);

}  // namespace akde::ad
