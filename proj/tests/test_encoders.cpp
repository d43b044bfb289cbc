#include <random>

#include "doctest.h"

#include "akde/encoders.hpp"
#include "support/oracles.hpp"

using namespace akde;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Index r, Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

void zero_all(GruParams& p) {
  for (Parameter* q : p.parameters()) q->value.setZero();
}

testing::Mat to_rows(const Matrix& m) {
  testing::Mat out(static_cast<std::size_t>(m.rows()), testing::Vec(static_cast<std::size_t>(m.cols())));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

testing::Vec to_vec(const Matrix& m) { return testing::Vec(m.data(), m.data() + m.size()); }

std::vector<Var> constants(Graph& g, const std::vector<Matrix>& xs) {
  std::vector<Var> out;
  for (const auto& x : xs) out.push_back(g.constant(x));
  return out;
}

}  // namespace

TEST_CASE("zero weights halve the previous state") {
  std::mt19937_64 rng(1);
  GruParams p("gru", 3, 4, false, rng);
  zero_all(p);
  Graph g;
  GruWeights w = bind(g, p);
  Matrix v = random_matrix(rng, 4, 1);
  Var h = gru_step(w, g.constant(random_matrix(rng, 3, 1)), g.constant(v));
  CHECK(h.value().isApprox(0.5 * v, 1e-15));
}

TEST_CASE("identity candidate weights give half of tanh(x)") {
  std::mt19937_64 rng(1);
  GruParams p("gru", 3, 3, false, rng);
  zero_all(p);
  p.w_candidate.value = Matrix::Identity(3, 3);
  Graph g;
  GruWeights w = bind(g, p);
  Matrix x = random_matrix(rng, 3, 1, 0.1);
  Var h = gru_step(w, g.constant(x), g.zeros(3));
  CHECK(h.value().isApprox(0.5 * x.array().tanh().matrix(), 1e-15));
}

TEST_CASE("gru_step matches the scalar oracle") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    GruParams p("gru", 3, 4, false, rng);
    Graph g;
    GruWeights w = bind(g, p);
    Matrix x = random_matrix(rng, 3, 1, 2.0);
    Matrix h = random_matrix(rng, 4, 1);
    const Matrix fast = gru_step(w, g.constant(x), g.constant(h)).value();
    testing::ScalarGru s{to_rows(p.w_update.value), to_rows(p.w_reset.value), to_rows(p.w_candidate.value),
                         to_rows(p.u_update.value), to_rows(p.u_reset.value), to_rows(p.u_candidate.value)};
    const testing::Vec slow = testing::scalar_gru_step(s, to_vec(x), to_vec(h));
    for (Index i = 0; i < 4; ++i) CHECK(std::abs(fast(i, 0) - slow[static_cast<std::size_t>(i)]) <= 1e-10);
  }
}

TEST_CASE("fused and composed GRU steps agree in value and gradient") {
  std::mt19937_64 rng(9);
  for (bool bias : {false, true}) {
    GruParams p("gru", 3, 5, bias, rng);
    if (bias)
      for (Parameter* q : {&p.b_update, &p.b_reset, &p.b_candidate}) q->value = random_matrix(rng, 5, 1);
    Parameter x("x", random_matrix(rng, 3, 1));
    Parameter h("h", random_matrix(rng, 5, 1));
    auto run = [&](bool fused) {
      for (Parameter* q : p.parameters()) q->zero_grad();
      x.zero_grad();
      h.zero_grad();
      Graph g;
      GruWeights w = bind(g, p);
      Var out = fused ? gru_step(w, g.param(x), g.param(h)) : gru_step_composed(w, g.param(x), g.param(h));
      Var twice = fused ? gru_step(w, g.param(x), out) : gru_step_composed(w, g.param(x), out);
      g.backward(ad::dot(twice, g.constant(Matrix::Constant(5, 1, 0.7))));
      g.accumulate_parameter_grads();
      std::vector<Matrix> grads{x.grad, h.grad};
      for (Parameter* q : p.parameters()) grads.push_back(q->grad);
      return std::make_pair(Matrix(twice.value()), grads);
    };
    const auto a = run(true);
    const auto b = run(false);
    CHECK(a.first.isApprox(b.first, 1e-13));
    REQUIRE(a.second.size() == b.second.size());
    for (std::size_t i = 0; i < a.second.size(); ++i) CHECK((a.second[i] - b.second[i]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("GRU gradients pass the finite difference check") {
  std::mt19937_64 rng(4);
  GruParams fwd("f", 3, 4, true, rng);
  GruParams bwd("b", 3, 4, true, rng);
  for (GruParams* p : {&fwd, &bwd})
    for (Parameter* q : {&p->b_update, &p->b_reset, &p->b_candidate}) q->value = random_matrix(rng, 4, 1);
  std::vector<Matrix> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(random_matrix(rng, 3, 1));
  std::vector<Parameter*> params = fwd.parameters();
  for (Parameter* q : bwd.parameters()) params.push_back(q);
  auto loss = [&](Graph& g) {
    const auto seq = encode_bi(bind(g, fwd), bind(g, bwd), constants(g, xs), {true, true, false, true, false});
    Var acc = ad::sum(seq.final);
    for (const Var& s : seq.states) acc = acc + ad::dot(s, s);
    return acc;
  };
  CHECK(ad::finite_difference_check(loss, params, 1e-6).max_relative_error < 1e-7);
}

TEST_CASE("encode: length one and padding") {
  std::mt19937_64 rng(2);
  GruParams p("gru", 3, 4, false, rng);
  Graph g;
  GruWeights w = bind(g, p);
  std::vector<Matrix> xs{random_matrix(rng, 3, 1), random_matrix(rng, 3, 1), random_matrix(rng, 3, 1)};

  const auto one = encode(w, constants(g, {xs[0]}));
  CHECK(one.final.value() == gru_step(w, g.constant(xs[0]), g.zeros(4)).value());

  const auto plain = encode(w, constants(g, {xs[0], xs[1]}));
  const auto padded = encode(w, constants(g, xs), {true, true, false});
  CHECK(padded.final.value() == plain.final.value());
  CHECK(padded.states[2].value().isZero(0.0));
  CHECK(padded.states.size() == 3);
}

TEST_CASE("encode is deterministic") {
  std::mt19937_64 rng(2);
  GruParams p("gru", 3, 4, false, rng);
  std::vector<Matrix> xs{random_matrix(rng, 3, 1), random_matrix(rng, 3, 1)};
  Graph g1, g2;
  const auto a = encode(bind(g1, p), constants(g1, xs));
  const auto b = encode(bind(g2, p), constants(g2, xs));
  CHECK(a.final.value() == b.final.value());
}

TEST_CASE("encode rejects empty or fully masked input") {
  std::mt19937_64 rng(2);
  GruParams p("gru", 3, 4, false, rng);
  Graph g;
  GruWeights w = bind(g, p);
  CHECK_THROWS_AS(encode(w, std::vector<Var>{}), ContractError);
  CHECK_THROWS_AS(encode(w, constants(g, {Matrix::Zero(3, 1)}), {false}), ContractError);
  CHECK_THROWS_AS(encode(w, constants(g, {Matrix::Zero(2, 1)})), DimensionError);
}

TEST_CASE("bidirectional encoding: shapes, palindromes and reversal") {
  std::mt19937_64 rng(8);
  GruParams fwd("f", 3, 3, false, rng);
  GruParams bwd("b", 3, 3, false, rng);
  const Matrix a = random_matrix(rng, 3, 1), b = random_matrix(rng, 3, 1), c = random_matrix(rng, 3, 1);
  Graph g;

  SUBCASE("every state and final has twice the hidden size") {
    const auto seq = encode_bi(bind(g, fwd), bind(g, bwd), constants(g, {a, b, c}));
    CHECK(seq.final.rows() == 6);
    for (const auto& s : seq.states) CHECK(s.rows() == 6);
  }
  SUBCASE("palindrome with shared weights gives equal halves") {
    const GruWeights w = bind(g, fwd);
    const auto seq = encode_bi(w, w, constants(g, {a, b, a}));
    CHECK(seq.final.value().topRows(3) == seq.final.value().bottomRows(3));
  }
  SUBCASE("reversing the input and swapping directions swaps the halves") {
    const auto x = encode_bi(bind(g, fwd), bind(g, bwd), constants(g, {a, b, c}));
    const auto y = encode_bi(bind(g, bwd), bind(g, fwd), constants(g, {c, b, a}));
    CHECK(x.final.value().topRows(3) == y.final.value().bottomRows(3));
    CHECK(x.final.value().bottomRows(3) == y.final.value().topRows(3));
    // Direct recomputation of the forward half.
    GruWeights wf = bind(g, fwd);
    Var h = g.zeros(3);
    for (const Matrix& m : {a, b, c}) h = gru_step(wf, g.constant(m), h);
    CHECK(x.final.value().topRows(3) == h.value());
  }
  SUBCASE("trailing padding leaves both halves of the final unchanged") {
    const auto plain = encode_bi(bind(g, fwd), bind(g, bwd), constants(g, {a, b}));
    const auto padded = encode_bi(bind(g, fwd), bind(g, bwd), constants(g, {a, b, c}), {true, true, false});
    CHECK(plain.final.value() == padded.final.value());
  }
}

TEST_CASE("uniform_init respects the fan-in bound") {
  std::mt19937_64 rng(0);
  const Matrix m = uniform_init(50, 16, rng);
  CHECK(m.cwiseAbs().maxCoeff() <= 0.25);
  CHECK(m.cwiseAbs().maxCoeff() > 0.2);
}
