#include "akde/encoders.hpp"

#include <array>
#include <cmath>

namespace akde {

Matrix uniform_init(Index rows, Index cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(cols, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  // Column-major fill order keeps initialization independent of Eigen internals.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

GruParams::GruParams(const std::string& prefix, Index input_dim, Index hidden, bool bias, std::mt19937_64& rng)
    : w_update(prefix + ".w_update", uniform_init(hidden, input_dim, rng)),
      w_reset(prefix + ".w_reset", uniform_init(hidden, input_dim, rng)),
      w_candidate(prefix + ".w_candidate", uniform_init(hidden, input_dim, rng)),
      u_update(prefix + ".u_update", uniform_init(hidden, hidden, rng)),
      u_reset(prefix + ".u_reset", uniform_init(hidden, hidden, rng)),
      u_candidate(prefix + ".u_candidate", uniform_init(hidden, hidden, rng)),
      with_bias(bias) {
  if (bias) {
    b_update = Parameter(prefix + ".b_update", Matrix::Zero(hidden, 1));
    b_reset = Parameter(prefix + ".b_reset", Matrix::Zero(hidden, 1));
    b_candidate = Parameter(prefix + ".b_candidate", Matrix::Zero(hidden, 1));
  }
}

std::vector<Parameter*> GruParams::parameters() {
  std::vector<Parameter*> out{&w_update, &w_reset, &w_candidate, &u_update, &u_reset, &u_candidate};
  if (with_bias) {
    out.push_back(&b_update);
    out.push_back(&b_reset);
    out.push_back(&b_candidate);
  }
  return out;
}

GruWeights bind(Graph& g, GruParams& p) {
  GruWeights w{g.param(p.w_update), g.param(p.w_reset), g.param(p.w_candidate),
               g.param(p.u_update), g.param(p.u_reset), g.param(p.u_candidate),
               std::nullopt,        std::nullopt,       std::nullopt};
  if (p.with_bias) {
    w.b_update = g.param(p.b_update);
    w.b_reset = g.param(p.b_reset);
    w.b_candidate = g.param(p.b_candidate);
  }
  return w;
}

namespace {

void check_step_shapes(const GruWeights& w, Var x, Var h_prev) {
  if (x.cols() != 1 || x.rows() != w.input_dim())
    throw DimensionError("gru_step: input " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         " vs expected " + std::to_string(w.input_dim()) + "x1");
  if (h_prev.cols() != 1 || h_prev.rows() != w.hidden())
    throw DimensionError("gru_step: state " + std::to_string(h_prev.rows()) + "x" + std::to_string(h_prev.cols()) +
                         " vs expected " + std::to_string(w.hidden()) + "x1");
}

}  // namespace

Var gru_step(const GruWeights& w, Var x, Var h_prev) {
  check_step_shapes(w, x, h_prev);
  Graph& g = *x.graph();
  const Matrix& xv = x.value();
  const Matrix& hv = h_prev.value();
  if (!xv.allFinite() || !hv.allFinite()) throw NumericError("gru_step: non-finite input");

  Matrix a_update = w.w_update.value() * xv + w.u_update.value() * hv;
  Matrix a_reset = w.w_reset.value() * xv + w.u_reset.value() * hv;
  if (w.b_update) {
    a_update += w.b_update->value();
    a_reset += w.b_reset->value();
  }
  Matrix z = ad::logistic(a_update.array()).matrix();
  Matrix r = ad::logistic(a_reset.array()).matrix();
  Matrix gated = r.cwiseProduct(hv);
  Matrix a_cand = w.w_candidate.value() * xv + w.u_candidate.value() * gated;
  if (w.b_candidate) a_cand += w.b_candidate->value();
  Matrix c = a_cand.array().tanh().matrix();
  Matrix h = z.cwiseProduct(c) + (1.0 - z.array()).matrix().cwiseProduct(hv);

  std::vector<Var> parents{x, h_prev, w.w_update, w.w_reset, w.w_candidate, w.u_update, w.u_reset, w.u_candidate};
  if (w.b_update) {
    parents.push_back(*w.b_update);
    parents.push_back(*w.b_reset);
    parents.push_back(*w.b_candidate);
  }
  std::array<std::uint32_t, 11> ids{};
  for (std::size_t i = 0; i < parents.size(); ++i) ids[i] = parents[i].id();
  const bool bias = w.b_update.has_value();

  return g.record(std::move(h), parents,
                  [ids, bias, z = std::move(z), r = std::move(r), c = std::move(c), gated = std::move(gated)](
                      Graph& gr, std::uint32_t self) {
                    enum { X, H, WZ, WR, WC, UZ, UR, UC, BZ, BR, BC };
                    const Matrix& go = gr.grad(self);
                    const Matrix& xv = gr.value(ids[X]);
                    const Matrix& hv = gr.value(ids[H]);

                    const Matrix d_z = go.cwiseProduct(c - hv);
                    const Matrix d_c = go.cwiseProduct(z);
                    Matrix d_h = go.cwiseProduct((1.0 - z.array()).matrix());

                    const Matrix da_cand = d_c.cwiseProduct((1.0 - c.array().square()).matrix());
                    const Matrix d_gated = gr.value(ids[UC]).transpose() * da_cand;
                    const Matrix d_r = d_gated.cwiseProduct(hv);
                    d_h += d_gated.cwiseProduct(r);
                    const Matrix da_reset = (d_r.array() * r.array() * (1.0 - r.array())).matrix();
                    const Matrix da_update = (d_z.array() * z.array() * (1.0 - z.array())).matrix();

                    d_h += gr.value(ids[UR]).transpose() * da_reset;
                    d_h += gr.value(ids[UZ]).transpose() * da_update;
                    gr.accumulate(ids[H], d_h);

                    if (gr.requires_grad(ids[X])) {
                      gr.accumulate(ids[X], gr.value(ids[WC]).transpose() * da_cand +
                                                gr.value(ids[WR]).transpose() * da_reset +
                                                gr.value(ids[WZ]).transpose() * da_update);
                    }
                    const auto xt = xv.transpose();
                    const auto ht = hv.transpose();
                    if (gr.requires_grad(ids[WZ])) gr.accumulate(ids[WZ], da_update * xt);
                    if (gr.requires_grad(ids[WR])) gr.accumulate(ids[WR], da_reset * xt);
                    if (gr.requires_grad(ids[WC])) gr.accumulate(ids[WC], da_cand * xt);
                    if (gr.requires_grad(ids[UZ])) gr.accumulate(ids[UZ], da_update * ht);
                    if (gr.requires_grad(ids[UR])) gr.accumulate(ids[UR], da_reset * ht);
                    if (gr.requires_grad(ids[UC])) gr.accumulate(ids[UC], da_cand * gated.transpose());
                    if (bias) {
                      gr.accumulate(ids[BZ], da_update);
                      gr.accumulate(ids[BR], da_reset);
                      gr.accumulate(ids[BC], da_cand);
                    }
                  });
}

Var gru_step_composed(const GruWeights& w, Var x, Var h_prev) {
  using namespace ad;
  check_step_shapes(w, x, h_prev);
  Var a_update = matmul(w.w_update, x) + matmul(w.u_update, h_prev);
  Var a_reset = matmul(w.w_reset, x) + matmul(w.u_reset, h_prev);
  if (w.b_update) {
    a_update = a_update + *w.b_update;
    a_reset = a_reset + *w.b_reset;
  }
  Var z = sigmoid(a_update);
  Var r = sigmoid(a_reset);
  Var a_cand = matmul(w.w_candidate, x) + matmul(w.u_candidate, hadamard(r, h_prev));
  if (w.b_candidate) a_cand = a_cand + *w.b_candidate;
  Var c = ad::tanh(a_cand);
  return hadamard(z, c) + hadamard(one_minus(z), h_prev);
}

namespace {

bool valid_at(const std::vector<bool>& mask, std::size_t t) { return mask.empty() || mask[t]; }

void check_mask(std::span<const Var> inputs, const std::vector<bool>& mask) {
  if (inputs.empty()) throw ContractError("encode: empty sequence");
  if (!mask.empty() && mask.size() != inputs.size())
    throw DimensionError("encode: mask length " + std::to_string(mask.size()) + " vs " +
                         std::to_string(inputs.size()) + " inputs");
  bool any = mask.empty();
  for (bool m : mask) any = any || m;
  if (!any) throw ContractError("encode: every position is masked");
}

std::vector<bool> full_mask(std::size_t n, const std::vector<bool>& mask) {
  return mask.empty() ? std::vector<bool>(n, true) : mask;
}

}  // namespace

EncodedSequence encode(const GruWeights& w, std::span<const Var> inputs, const std::vector<bool>& mask) {
  check_mask(inputs, mask);
  Graph& g = *inputs.front().graph();
  Var zero = g.zeros(w.hidden());
  Var h = zero;
  EncodedSequence out;
  out.states.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (!valid_at(mask, t)) {
      out.states.push_back(zero);
      continue;
    }
    h = gru_step(w, inputs[t], h);
    out.states.push_back(h);
  }
  out.final = h;
  out.mask = full_mask(inputs.size(), mask);
  return out;
}

EncodedSequence encode_bi(const GruWeights& fwd, const GruWeights& bwd, std::span<const Var> inputs,
                          const std::vector<bool>& mask) {
  check_mask(inputs, mask);
  Graph& g = *inputs.front().graph();
  const std::size_t n = inputs.size();

  std::vector<Var> forward(n), backward(n);
  Var h = g.zeros(fwd.hidden());
  for (std::size_t t = 0; t < n; ++t) {
    if (!valid_at(mask, t)) continue;
    h = gru_step(fwd, inputs[t], h);
    forward[t] = h;
  }
  const Var forward_final = h;

  h = g.zeros(bwd.hidden());
  for (std::size_t k = n; k-- > 0;) {
    if (!valid_at(mask, k)) continue;
    h = gru_step(bwd, inputs[k], h);
    backward[k] = h;
  }
  const Var backward_final = h;

  EncodedSequence out;
  out.states.reserve(n);
  Var zero = g.zeros(fwd.hidden() + bwd.hidden());
  for (std::size_t t = 0; t < n; ++t)
    out.states.push_back(valid_at(mask, t) ? ad::concat_rows(forward[t], backward[t]) : zero);
  out.final = ad::concat_rows(forward_final, backward_final);
  out.mask = full_mask(n, mask);
  return out;
}

}  // namespace akde
