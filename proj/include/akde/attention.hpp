#pragma once

#include <random>

#include "akde/encoders.hpp"

namespace akde {

// Bilinear attention matrices, both square in the encoder output size.
// `context_weight` scores context states against the response embedding,
// `response_weight` scores response states against the context embedding.
struct AttentionParams {
  AttentionParams() = default;
  AttentionParams(Index dim, std::mt19937_64& rng);

  std::vector<Parameter*> parameters() { return {&context_weight, &response_weight}; }

  Parameter context_weight;
  Parameter response_weight;
};

struct AttendedEmbedding {
  Var vector;   // dim×1, Σ_t weights_t · states_t
  Var weights;  // T×1, zero at masked steps
};

// logits_t = states_tᵀ · weight · query; weights = masked softmax(logits).
AttendedEmbedding attend(const EncodedSequence& seq, Var query, Var weight);

}  // namespace akde
