#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <unordered_map>

#include "akde/corpus.hpp"
#include "akde/encoders.hpp"

namespace akde {

// Bidirectional GRU over a keyword's description. Each direction has
// embed_dim/2 units so the concatenated final state has the word-embedding
// size.
struct DescriptionEncoderParams {
  DescriptionEncoderParams() = default;
  DescriptionEncoderParams(Index embed_dim, bool with_bias, std::mt19937_64& rng);

  std::vector<Parameter*> parameters();

  GruParams forward;
  GruParams backward;
};

// β_t = σ(Uᵀ·context + Vᵀ·word). U is context_dim×embed_dim, V is
// embed_dim×embed_dim.
struct GateParams {
  GateParams() = default;
  GateParams(Index context_dim, Index embed_dim, std::mt19937_64& rng);

  std::vector<Parameter*> parameters() { return {&context_gate, &word_gate}; }

  Parameter context_gate;  // U
  Parameter word_gate;     // V
};

struct GateWeights {
  Var context_gate_t;  // Uᵀ
  Var word_gate_t;     // Vᵀ
};

GateWeights bind(Graph& g, GateParams& p);

struct DescriptionEmbedding {
  Var vector;
  bool is_keyword = false;
};

// Description values computed outside gradient tracking, keyed by word and
// tagged with the parameter version they were computed under. A lookup under
// a newer version drops every stored entry first.
class DescriptionCache {
 public:
  DescriptionCache() = default;
  DescriptionCache(DescriptionCache&& other) noexcept;
  DescriptionCache& operator=(DescriptionCache&& other) noexcept;

  std::optional<Matrix> find(TokenId word, std::uint64_t version);
  void store(TokenId word, std::uint64_t version, Matrix value);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::uint64_t version_ = 0;
  std::unordered_map<TokenId, Matrix> values_;
};

// Produces description embeddings inside one graph. Within the graph each
// keyword is encoded once. When the graph does not track gradients and a
// cache is supplied, values are served from (and stored into) the cache.
class Describer {
 public:
  Describer(Graph& g, const KnowledgeBase& kb, DescriptionEncoderParams& encoder, Parameter& embedding,
            DescriptionCache* cache = nullptr, std::uint64_t version = 0);

  // Zero vector with is_keyword == false for words outside the knowledge base.
  DescriptionEmbedding describe(TokenId word);

  Index dim() const { return dim_; }

 private:
  Graph& graph_;
  const KnowledgeBase& kb_;
  DescriptionEncoderParams& encoder_;
  Parameter& embedding_;
  DescriptionCache* cache_;
  std::uint64_t version_;
  Index dim_;
  std::optional<GruWeights> fwd_, bwd_;
  std::optional<Var> zero_;
  std::unordered_map<TokenId, Var> memo_;
};

Var gate_coefficients(const GateWeights& gate, Var context_embedding, Var word);

// β ⊙ h_d + (1 - β) ⊙ w for keywords. Non-keywords pass `word` through
// unchanged unless `literal` is set, in which case the combination is applied
// with h_d = 0.
Var fuse(Var beta, const DescriptionEmbedding& description, Var word, bool literal = false);

// h_d + w for keywords, w otherwise.
Var simple_add_fuse(const DescriptionEmbedding& description, Var word);

}  // namespace akde
