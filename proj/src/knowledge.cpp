#include "akde/knowledge.hpp"

namespace akde {

DescriptionEncoderParams::DescriptionEncoderParams(Index embed_dim, bool with_bias, std::mt19937_64& rng) {
  if (embed_dim % 2 != 0)
    throw ConfigError("description encoder needs an even embedding size, got " + std::to_string(embed_dim));
  forward = GruParams("description.forward", embed_dim, embed_dim / 2, with_bias, rng);
  backward = GruParams("description.backward", embed_dim, embed_dim / 2, with_bias, rng);
}

std::vector<Parameter*> DescriptionEncoderParams::parameters() {
  auto out = forward.parameters();
  for (Parameter* p : backward.parameters()) out.push_back(p);
  return out;
}

GateParams::GateParams(Index context_dim, Index embed_dim, std::mt19937_64& rng)
    : context_gate("gate.context", uniform_init(context_dim, embed_dim, rng)),
      word_gate("gate.word", uniform_init(embed_dim, embed_dim, rng)) {}

GateWeights bind(Graph& g, GateParams& p) {
  return {ad::transpose(g.param(p.context_gate)), ad::transpose(g.param(p.word_gate))};
}

DescriptionCache::DescriptionCache(DescriptionCache&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  version_ = other.version_;
  values_ = std::move(other.values_);
}

DescriptionCache& DescriptionCache::operator=(DescriptionCache&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    version_ = other.version_;
    values_ = std::move(other.values_);
  }
  return *this;
}

std::optional<Matrix> DescriptionCache::find(TokenId word, std::uint64_t version) {
  std::lock_guard lock(mutex_);
  if (version != version_) {
    values_.clear();
    version_ = version;
    return std::nullopt;
  }
  if (auto it = values_.find(word); it != values_.end()) return it->second;
  return std::nullopt;
}

void DescriptionCache::store(TokenId word, std::uint64_t version, Matrix value) {
  std::lock_guard lock(mutex_);
  if (version != version_) {
    values_.clear();
    version_ = version;
  }
  values_[word] = std::move(value);
}

std::size_t DescriptionCache::size() const {
  std::lock_guard lock(mutex_);
  return values_.size();
}

Describer::Describer(Graph& g, const KnowledgeBase& kb, DescriptionEncoderParams& encoder, Parameter& embedding,
                     DescriptionCache* cache, std::uint64_t version)
    : graph_(g),
      kb_(kb),
      encoder_(encoder),
      embedding_(embedding),
      cache_(g.grad_enabled() ? nullptr : cache),
      version_(version),
      dim_(embedding.value.cols()) {}

DescriptionEmbedding Describer::describe(TokenId word) {
  const TokenSeq* description = kb_.find(word);
  if (description == nullptr) {
    if (!zero_) zero_ = graph_.zeros(dim_);
    return {*zero_, false};
  }
  if (auto it = memo_.find(word); it != memo_.end()) return {it->second, true};

  if (cache_) {
    if (auto hit = cache_->find(word, version_)) {
      Var v = graph_.constant(std::move(*hit));
      memo_.emplace(word, v);
      return {v, true};
    }
  }

  if (!fwd_) {
    fwd_ = bind(graph_, encoder_.forward);
    bwd_ = bind(graph_, encoder_.backward);
  }
  std::vector<Var> inputs;
  inputs.reserve(description->size());
  for (TokenId t : *description) inputs.push_back(graph_.param_row(embedding_, t));
  Var v = encode_bi(*fwd_, *bwd_, inputs).final;
  if (v.rows() != dim_)
    throw DimensionError("description embedding has " + std::to_string(v.rows()) + " rows, word embeddings " +
                         std::to_string(dim_));
  if (cache_) cache_->store(word, version_, v.value());
  memo_.emplace(word, v);
  return {v, true};
}

Var gate_coefficients(const GateWeights& gate, Var context_embedding, Var word) {
  using namespace ad;
  return sigmoid(matmul(gate.context_gate_t, context_embedding) + matmul(gate.word_gate_t, word));
}

Var fuse(Var beta, const DescriptionEmbedding& description, Var word, bool literal) {
  using namespace ad;
  if (!description.is_keyword && !literal) return word;
  return hadamard(beta, description.vector) + hadamard(one_minus(beta), word);
}

Var simple_add_fuse(const DescriptionEmbedding& description, Var word) {
  if (!description.is_keyword) return word;
  return description.vector + word;
}

}  // namespace akde
