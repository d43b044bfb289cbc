#include "akde/attention.hpp"

namespace akde {

AttentionParams::AttentionParams(Index dim, std::mt19937_64& rng)
    : context_weight("attention.context", uniform_init(dim, dim, rng)),
      response_weight("attention.response", uniform_init(dim, dim, rng)) {}

AttendedEmbedding attend(const EncodedSequence& seq, Var query, Var weight) {
  using namespace ad;
  if (seq.states.empty()) throw EmptyAttentionError("attend: empty sequence");
  const Index dim = seq.states.front().rows();
  if (weight.rows() != dim || weight.cols() != query.rows() || query.cols() != 1)
    throw DimensionError("attend: states " + std::to_string(dim) + ", weight " + std::to_string(weight.rows()) + "x" +
                         std::to_string(weight.cols()) + ", query " + std::to_string(query.rows()) + "x" +
                         std::to_string(query.cols()));
  Var states = hstack(seq.states);                          // dim×T
  Var logits = matmul(transpose(states), matmul(weight, query));  // T×1
  Var weights = softmax(logits, seq.mask);
  return {matmul(states, weights), weights};
}

}  // namespace akde
