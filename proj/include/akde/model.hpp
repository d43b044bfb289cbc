#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "akde/attention.hpp"
#include "akde/corpus.hpp"
#include "akde/encoders.hpp"
#include "akde/knowledge.hpp"

namespace akde {

enum class EncoderKind { gru, bigru };
enum class KnowledgeMode { none, simple_add, gated };

struct ModelConfig {
  EncoderKind encoder = EncoderKind::bigru;
  bool use_attention = true;
  KnowledgeMode knowledge = KnowledgeMode::gated;
  Index embed_dim = 200;
  Index hidden = 300;
  Limits limits;
  bool gru_bias = false;
  // Apply the gated combination to non-keywords too (with a zero description).
  bool literal_gate = false;

  // Output size of the sequence encoder: hidden, or 2·hidden when bidirectional.
  Index state_dim() const { return encoder == EncoderKind::bigru ? 2 * hidden : hidden; }
  // Table name for the six named configurations, "custom" otherwise.
  std::string variant_name() const;
  void validate() const;
};

// The six named configurations, from DE-GRU to AK-DE-biGRU.
const std::vector<std::string>& variant_names();

// Accepts the names above; "AK+-DE-biGRU" is accepted for "AK₊-DE-biGRU".
ModelConfig build_variant(std::string_view name);

struct ModelParams {
  ModelParams() = default;
  ModelParams(const ModelConfig& config, std::size_t vocab_size, std::mt19937_64& rng);

  // Every learnable tensor, in a fixed order shared by the optimizer and checkpoints.
  std::vector<Parameter*> parameters();
  Parameter* find(std::string_view name);

  Parameter embedding;
  GruParams encoder_forward;
  std::optional<GruParams> encoder_backward;
  std::optional<AttentionParams> attention;
  std::optional<DescriptionEncoderParams> description;
  std::optional<GateParams> gate;
  Parameter bilinear;  // M
  Parameter bias;      // b, 1×1

  // Bumped after every parameter update; invalidates cached descriptions.
  std::uint64_t version = 0;
};

struct Diagnostics {
  Vector context_attention;   // empty without attention
  Vector response_attention;  // empty without attention
  // One entry per response token when the gated combination is active;
  // std::nullopt at positions that bypass the gate.
  std::vector<std::optional<Vector>> gates;
};

struct ScoredPair {
  Var probability;  // 1×1
  Diagnostics diagnostics;
};

class DualEncoder;

struct EncodedContext {
  EncodedSequence sequence;
};

// Binds a model's parameters into one graph and scores pairs there.
// Description embeddings come from `cache` when given and the graph does not
// track gradients.
class ScoringSession {
 public:
  ScoringSession(Graph& g, DualEncoder& model, DescriptionCache* cache = nullptr);

  Var embed(TokenId token);
  EncodedContext encode_context(const TokenSeq& context);
  ScoredPair score(const EncodedContext& context, const TokenSeq& response);
  ScoredPair score(const TokenSeq& context, const TokenSeq& response);

  Graph& graph() { return graph_; }

 private:
  EncodedSequence encode_sequence(std::span<const Var> inputs);

  Graph& graph_;
  DualEncoder& model_;
  GruWeights forward_;
  std::optional<GruWeights> backward_;
  std::optional<Var> context_attention_, response_attention_;
  std::optional<GateWeights> gate_;
  std::optional<Describer> describer_;
  Var bilinear_, bias_;
};

class DualEncoder {
 public:
  DualEncoder(ModelConfig config, ModelParams params, KnowledgeBase knowledge = {});

  const ModelConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const KnowledgeBase& knowledge() const { return knowledge_; }
  DescriptionCache& description_cache() { return cache_; }

  // Probability and diagnostics for one pair, without gradient tracking.
  struct Scored {
    double probability;
    Diagnostics diagnostics;
  };
  Scored score(const TokenSeq& context, const TokenSeq& response);

  // Scores every candidate against one context; the context is encoded once.
  std::vector<double> score_candidates(const TokenSeq& context, std::span<const TokenSeq> candidates);

  // Mean binary cross-entropy over the batch, built into `g`.
  Var loss(Graph& g, std::span<const Triple> batch);

 private:
  ModelConfig config_;
  ModelParams params_;
  KnowledgeBase knowledge_;
  DescriptionCache cache_;
};

// Mean of -[y ln p + (1 - y) ln(1 - p)] with p clamped to [1e-12, 1 - 1e-12].
Var bce_loss(Var probabilities, const Vector& labels);

}  // namespace akde
