#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "akde/autodiff.hpp"

namespace akde {

using ad::Graph;
using ad::Index;
using ad::Matrix;
using ad::Parameter;
using ad::Var;
using ad::Vector;

// Uniform in ±1/sqrt(fan_in), fan_in being the column count.
Matrix uniform_init(Index rows, Index cols, std::mt19937_64& rng);

// GRU weights: input-to-hidden (hidden×input) and hidden-to-hidden
// (hidden×hidden) for the update gate, reset gate and candidate state.
// Gate biases exist only when requested.
struct GruParams {
  GruParams() = default;
  GruParams(const std::string& prefix, Index input_dim, Index hidden, bool with_bias, std::mt19937_64& rng);

  Index input_dim() const { return w_update.value.cols(); }
  Index hidden() const { return w_update.value.rows(); }
  bool has_bias() const { return with_bias; }

  std::vector<Parameter*> parameters();

  Parameter w_update, w_reset, w_candidate;
  Parameter u_update, u_reset, u_candidate;
  Parameter b_update, b_reset, b_candidate;
  bool with_bias = false;
};

// GruParams bound into one graph.
struct GruWeights {
  Var w_update, w_reset, w_candidate;
  Var u_update, u_reset, u_candidate;
  std::optional<Var> b_update, b_reset, b_candidate;

  Index hidden() const { return w_update.rows(); }
  Index input_dim() const { return w_update.cols(); }
};

GruWeights bind(Graph& g, GruParams& p);

// One GRU update:
//   z = σ(W_z x + U_z h),  r = σ(W_r x + U_r h),
//   c = tanh(W_h x + U_h (r ⊙ h)),  h' = z ⊙ c + (1 - z) ⊙ h.
// A single graph node with a hand-derived backward.
Var gru_step(const GruWeights& w, Var x, Var h_prev);

// The same update assembled from primitive graph ops; slower, used to
// cross-check gru_step.
Var gru_step_composed(const GruWeights& w, Var x, Var h_prev);

struct EncodedSequence {
  // One state per input position; masked positions hold zeros.
  std::vector<Var> states;
  // Sequence embedding: last forward state, or [forward; backward] finals.
  Var final;
  std::vector<bool> mask;

  Index dim() const { return final.rows(); }
};

// Runs from h_0 = 0. Masked steps leave the recurrent state untouched, so
// trailing padding has no effect on `final`. An empty mask means all valid.
EncodedSequence encode(const GruWeights& w, std::span<const Var> inputs, const std::vector<bool>& mask = {});

// Forward pass over w_1..w_T, backward pass over w_T..w_1, each from a zero
// state. states[t] = [fwd_t; bwd_t], final = [fwd after w_T; bwd after w_1].
EncodedSequence encode_bi(const GruWeights& fwd, const GruWeights& bwd, std::span<const Var> inputs,
                          const std::vector<bool>& mask = {});

}  // namespace akde
