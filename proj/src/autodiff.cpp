#include "akde/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace akde::ad {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

const char* name_of(UnaryOp kind) {
  switch (kind) {
    case UnaryOp::sigmoid: return "sigmoid";
    case UnaryOp::tanh: return "tanh";
    case UnaryOp::exp: return "exp";
    case UnaryOp::negate: return "negate";
  }
  return "?";
}

Graph& owner(Var a, Var b) {
  if (a.graph() == nullptr || a.graph() != b.graph())
    throw ContractError("operands belong to different graphs");
  return *a.graph();
}

Graph& owner(Var a) {
  if (a.graph() == nullptr) throw ContractError("operand is not bound to a graph");
  return *a.graph();
}

}  // namespace

Parameter::Parameter(std::string name_, Matrix value_)
    : name(std::move(name_)), value(std::move(value_)), grad(Matrix::Zero(value.rows(), value.cols())) {}

Graph::Graph(bool grad_enabled) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }

Var Graph::append(Matrix value, bool requires_grad) {
  Node n;
  n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Graph::check_owner(Var v) const {
  if (v.graph() != this) throw ContractError("variable belongs to a different graph");
}

Var Graph::constant(Matrix value) { return append(std::move(value), false); }

Var Graph::variable(Matrix value) { return append(std::move(value), grad_enabled_); }

Var Graph::zeros(Index rows, Index cols) { return constant(Matrix::Zero(rows, cols)); }

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Var v = append(p.value, grad_enabled_);
  param_nodes_.emplace(&p, v.id());
  if (grad_enabled_) bindings_.push_back({&p, v.id(), -1});
  return v;
}

Var Graph::param_row(Parameter& p, Index row) {
  if (row < 0 || row >= p.value.rows())
    throw DimensionError("row " + std::to_string(row) + " out of range for " + p.name + " (" + shape(p.value) + ")");
  RowKey key{&p, row};
  if (auto it = row_nodes_.find(key); it != row_nodes_.end()) return Var(this, it->second);
  Var v = append(p.value.row(row).transpose(), grad_enabled_);
  row_nodes_.emplace(key, v.id());
  if (grad_enabled_) bindings_.push_back({&p, v.id(), row});
  return v;
}

Var Graph::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Graph::record(Matrix value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (Var p : parents) {
    check_owner(p);
    needs = needs || nodes_[p.id()].requires_grad;
  }
  needs = needs && grad_enabled_;
  Var v = append(std::move(value), needs);
  Node& n = nodes_.back();
  n.parents.reserve(parents.size());
  for (Var p : parents) n.parents.push_back(p.id());
  if (needs) n.backward = std::move(backward);
  return v;
}

void Graph::backward(Var root) {
  check_owner(root);
  if (!grad_enabled_) throw ContractError("backward on a graph built without gradients");
  Node& r = nodes_[root.id()];
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw ContractError("backward requires a scalar root, got " + shape(r.value));
  if (!r.requires_grad) return;
  r.grad(0, 0) += 1.0;
  r.touched = true;
  for (std::int64_t i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.touched && n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
  }
}

void Graph::zero_grad() {
  for (Node& n : nodes_) {
    n.grad.setZero();
    n.touched = false;
  }
}

void Graph::accumulate_parameter_grads() const {
  for (const Binding& b : bindings_) {
    const Node& n = nodes_[b.node];
    if (!n.touched) continue;
    Parameter& p = *b.parameter;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
    if (b.row < 0)
      p.grad += n.grad;
    else
      p.grad.row(b.row) += n.grad.transpose();
  }
}

Var apply(UnaryOp kind, Var x) {
  Graph& g = owner(x);
  const Matrix& xv = x.value();
  if (!xv.allFinite()) throw NumericError(std::string(name_of(kind)) + ": non-finite input");
  const std::uint32_t xi = x.id();
  switch (kind) {
    case UnaryOp::sigmoid:
      return g.record(ad::logistic(xv.array()).matrix(), {x}, [xi](Graph& gr, std::uint32_t self) {
        const auto y = gr.value(self).array();
        gr.accumulate(xi, (gr.grad(self).array() * y * (1.0 - y)).matrix());
      });
    case UnaryOp::tanh:
      return g.record(xv.array().tanh().matrix(), {x}, [xi](Graph& gr, std::uint32_t self) {
        const auto y = gr.value(self).array();
        gr.accumulate(xi, (gr.grad(self).array() * (1.0 - y.square())).matrix());
      });
    case UnaryOp::exp:
      return g.record(xv.array().exp().matrix(), {x}, [xi](Graph& gr, std::uint32_t self) {
        gr.accumulate(xi, (gr.grad(self).array() * gr.value(self).array()).matrix());
      });
    case UnaryOp::negate:
      return g.record(-xv, {x}, [xi](Graph& gr, std::uint32_t self) { gr.accumulate(xi, -gr.grad(self)); });
  }
  throw ContractError("unknown unary op");
}

Var apply(BinaryOp kind, Var a, Var b) {
  Graph& g = owner(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const std::uint32_t ai = a.id();
  const std::uint32_t bi = b.id();
  switch (kind) {
    case BinaryOp::add:
      if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("add", av, bv);
      return g.record(av + bv, {a, b}, [ai, bi](Graph& gr, std::uint32_t self) {
        gr.accumulate(ai, gr.grad(self));
        gr.accumulate(bi, gr.grad(self));
      });
    case BinaryOp::sub:
      if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("sub", av, bv);
      return g.record(av - bv, {a, b}, [ai, bi](Graph& gr, std::uint32_t self) {
        gr.accumulate(ai, gr.grad(self));
        gr.accumulate(bi, -gr.grad(self));
      });
    case BinaryOp::hadamard:
      if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("hadamard", av, bv);
      return g.record(av.cwiseProduct(bv), {a, b}, [ai, bi](Graph& gr, std::uint32_t self) {
        const Matrix& go = gr.grad(self);
        if (gr.requires_grad(ai)) gr.accumulate(ai, go.cwiseProduct(gr.value(bi)));
        if (gr.requires_grad(bi)) gr.accumulate(bi, go.cwiseProduct(gr.value(ai)));
      });
    case BinaryOp::matmul:
      if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
      return g.record(av * bv, {a, b}, [ai, bi](Graph& gr, std::uint32_t self) {
        const Matrix& go = gr.grad(self);
        if (gr.requires_grad(ai)) gr.accumulate(ai, go * gr.value(bi).transpose());
        if (gr.requires_grad(bi)) gr.accumulate(bi, gr.value(ai).transpose() * go);
      });
    case BinaryOp::concat_rows: {
      if (av.cols() != bv.cols()) shape_error("concat_rows", av, bv);
      Matrix out(av.rows() + bv.rows(), av.cols());
      out << av, bv;
      const Index top = av.rows();
      const Index bottom = bv.rows();
      return g.record(std::move(out), {a, b}, [ai, bi, top, bottom](Graph& gr, std::uint32_t self) {
        const Matrix& go = gr.grad(self);
        gr.accumulate(ai, go.topRows(top));
        gr.accumulate(bi, go.bottomRows(bottom));
      });
    }
  }
  throw ContractError("unknown binary op");
}

Var transpose(Var x) {
  Graph& g = owner(x);
  const std::uint32_t xi = x.id();
  return g.record(x.value().transpose(), {x},
                  [xi](Graph& gr, std::uint32_t self) { gr.accumulate(xi, gr.grad(self).transpose()); });
}

Var scale(Var x, double factor) {
  Graph& g = owner(x);
  const std::uint32_t xi = x.id();
  return g.record(factor * x.value(), {x},
                  [xi, factor](Graph& gr, std::uint32_t self) { gr.accumulate(xi, factor * gr.grad(self)); });
}

Var one_minus(Var x) {
  Graph& g = owner(x);
  const std::uint32_t xi = x.id();
  return g.record((1.0 - x.value().array()).matrix(), {x},
                  [xi](Graph& gr, std::uint32_t self) { gr.accumulate(xi, -gr.grad(self)); });
}

Var sum(Var x) {
  Graph& g = owner(x);
  const std::uint32_t xi = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return g.record(std::move(out), {x}, [xi](Graph& gr, std::uint32_t self) {
    const Matrix& xv = gr.value(xi);
    gr.accumulate(xi, Matrix::Constant(xv.rows(), xv.cols(), gr.grad(self)(0, 0)));
  });
}

Var dot(Var a, Var b) {
  Graph& g = owner(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != 1 || bv.cols() != 1 || av.rows() != bv.rows()) shape_error("dot", av, bv);
  const std::uint32_t ai = a.id();
  const std::uint32_t bi = b.id();
  Matrix out(1, 1);
  out(0, 0) = av.col(0).dot(bv.col(0));
  return g.record(std::move(out), {a, b}, [ai, bi](Graph& gr, std::uint32_t self) {
    const double go = gr.grad(self)(0, 0);
    if (gr.requires_grad(ai)) gr.accumulate(ai, go * gr.value(bi));
    if (gr.requires_grad(bi)) gr.accumulate(bi, go * gr.value(ai));
  });
}

Var hstack(std::span<const Var> columns) {
  if (columns.empty()) throw DimensionError("hstack: no columns");
  Graph& g = owner(columns.front());
  const Index rows = columns.front().rows();
  Matrix out(rows, static_cast<Index>(columns.size()));
  std::vector<std::uint32_t> ids;
  ids.reserve(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const Matrix& c = columns[j].value();
    if (c.cols() != 1 || c.rows() != rows) shape_error("hstack", columns.front().value(), c);
    out.col(static_cast<Index>(j)) = c.col(0);
    ids.push_back(columns[j].id());
  }
  return g.record(std::move(out), columns, [ids = std::move(ids)](Graph& gr, std::uint32_t self) {
    const Matrix& go = gr.grad(self);
    for (std::size_t j = 0; j < ids.size(); ++j) gr.accumulate(ids[j], go.col(static_cast<Index>(j)));
  });
}

Var softmax(Var logits, const std::vector<bool>& mask) {
  Graph& g = owner(logits);
  const Matrix& lv = logits.value();
  if (lv.cols() != 1) throw DimensionError("softmax: expected a column vector, got " + shape(lv));
  const Index n = lv.rows();
  if (!mask.empty() && static_cast<Index>(mask.size()) != n)
    throw DimensionError("softmax: mask length " + std::to_string(mask.size()) + " vs " + std::to_string(n) +
                         " logits");
  auto valid = [&](Index i) { return mask.empty() || mask[static_cast<std::size_t>(i)]; };

  double top = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i)
    if (valid(i)) top = std::max(top, lv(i, 0));
  if (n == 0 || top == -std::numeric_limits<double>::infinity())
    throw EmptyAttentionError("softmax: every position is masked");
  if (!std::isfinite(top)) throw NumericError("softmax: non-finite logit");

  Matrix out = Matrix::Zero(n, 1);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!valid(i)) continue;
    out(i, 0) = std::exp(lv(i, 0) - top);
    total += out(i, 0);
  }
  out /= total;

  const std::uint32_t li = logits.id();
  return g.record(std::move(out), {logits}, [li](Graph& gr, std::uint32_t self) {
    const Matrix& alpha = gr.value(self);
    const Matrix& go = gr.grad(self);
    const double inner = alpha.col(0).dot(go.col(0));
    gr.accumulate(li, (alpha.array() * (go.array() - inner)).matrix());
  });
}

GradientCheckResult finite_difference_check(const std::function<Var(Graph&)>& loss,
                                            std::span<Parameter* const> params, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_difference_check: eps must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    Var root = loss(g);
    g.backward(root);
    g.accumulate_parameter_grads();
  }

  auto evaluate = [&loss]() {
    Graph g(false);
    Var root = loss(g);
    if (root.rows() != 1 || root.cols() != 1) throw ContractError("finite_difference_check: loss is not scalar");
    return root.value()(0, 0);
  };

  GradientCheckResult result;
  for (Parameter* p : params) {
    double worst = 0.0;
    for (Index j = 0; j < p->value.cols(); ++j) {
      for (Index i = 0; i < p->value.rows(); ++i) {
        const double saved = p->value(i, j);
        p->value(i, j) = saved + eps;
        const double up = evaluate();
        p->value(i, j) = saved - eps;
        const double down = evaluate();
        p->value(i, j) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = p->grad(i, j);
        const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic) + std::abs(numeric));
        worst = std::max(worst, err);
      }
    }
    result.per_parameter.emplace_back(p->name, worst);
    result.max_relative_error = std::max(result.max_relative_error, worst);
  }
  return result;
}

}  // namespace akde::ad
