#include "akde/model.hpp"

#include <algorithm>
#include <cmath>

namespace akde {

namespace {

struct VariantRow {
  const char* name;
  EncoderKind encoder;
  bool attention;
  KnowledgeMode knowledge;
};

constexpr VariantRow kVariants[] = {
    {"DE-GRU", EncoderKind::gru, false, KnowledgeMode::none},
    {"DE-biGRU", EncoderKind::bigru, false, KnowledgeMode::none},
    {"A-DE-GRU", EncoderKind::gru, true, KnowledgeMode::none},
    {"A-DE-biGRU", EncoderKind::bigru, true, KnowledgeMode::none},
    {"AK₊-DE-biGRU", EncoderKind::bigru, true, KnowledgeMode::simple_add},
    {"AK-DE-biGRU", EncoderKind::bigru, true, KnowledgeMode::gated},
};

}  // namespace

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& v : kVariants) out.emplace_back(v.name);
    return out;
  }();
  return names;
}

ModelConfig build_variant(std::string_view name) {
  const std::string_view lookup = name == "AK+-DE-biGRU" ? std::string_view("AK₊-DE-biGRU") : name;
  for (const auto& v : kVariants) {
    if (lookup != v.name) continue;
    ModelConfig c;
    c.encoder = v.encoder;
    c.use_attention = v.attention;
    c.knowledge = v.knowledge;
    return c;
  }
  std::string valid;
  for (const auto& n : variant_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown variant '" + std::string(name) + "'; valid variants: " + valid);
}

std::string ModelConfig::variant_name() const {
  for (const auto& v : kVariants)
    if (v.encoder == encoder && v.attention == use_attention && v.knowledge == knowledge) return v.name;
  return "custom";
}

void ModelConfig::validate() const {
  if (knowledge != KnowledgeMode::none && !use_attention)
    throw ConfigError("knowledge variants require attention");
  if (embed_dim <= 0 || hidden <= 0) throw ConfigError("embedding and hidden sizes must be positive");
  if (knowledge != KnowledgeMode::none && embed_dim % 2 != 0)
    throw ConfigError("knowledge variants need an even embedding size, got " + std::to_string(embed_dim));
  if (limits.max_context == 0 || limits.max_response == 0 || limits.max_description == 0)
    throw ConfigError("length limits must be positive");
}

ModelParams::ModelParams(const ModelConfig& config, std::size_t vocab_size, std::mt19937_64& rng) {
  config.validate();
  const Index d = config.embed_dim;
  const Index h = config.hidden;
  const Index state = config.state_dim();

  Matrix table(static_cast<Index>(vocab_size), d);
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < table.rows(); ++i) table(i, j) = uniform(rng);
  if (table.rows() > 0) table.row(token::pad).setZero();
  embedding = Parameter("embedding", std::move(table));

  encoder_forward = GruParams("encoder.forward", d, h, config.gru_bias, rng);
  if (config.encoder == EncoderKind::bigru) encoder_backward.emplace("encoder.backward", d, h, config.gru_bias, rng);
  if (config.use_attention) attention.emplace(state, rng);
  if (config.knowledge != KnowledgeMode::none) description.emplace(d, config.gru_bias, rng);
  if (config.knowledge == KnowledgeMode::gated) gate.emplace(state, d, rng);
  bilinear = Parameter("bilinear", uniform_init(state, state, rng));
  bias = Parameter("bias", Matrix::Zero(1, 1));
}

std::vector<Parameter*> ModelParams::parameters() {
  std::vector<Parameter*> out{&embedding};
  auto append = [&out](std::vector<Parameter*> more) { out.insert(out.end(), more.begin(), more.end()); };
  append(encoder_forward.parameters());
  if (encoder_backward) append(encoder_backward->parameters());
  if (attention) append(attention->parameters());
  if (description) append(description->parameters());
  if (gate) append(gate->parameters());
  out.push_back(&bilinear);
  out.push_back(&bias);
  return out;
}

Parameter* ModelParams::find(std::string_view name) {
  for (Parameter* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

ScoringSession::ScoringSession(Graph& g, DualEncoder& model, DescriptionCache* cache)
    : graph_(g), model_(model), forward_(bind(g, model.params().encoder_forward)) {
  ModelParams& p = model.params();
  if (p.encoder_backward) backward_ = bind(g, *p.encoder_backward);
  if (p.attention) {
    context_attention_ = g.param(p.attention->context_weight);
    response_attention_ = g.param(p.attention->response_weight);
  }
  if (p.gate) gate_ = bind(g, *p.gate);
  if (p.description)
    describer_.emplace(g, model.knowledge(), *p.description, p.embedding, cache, p.version);
  bilinear_ = g.param(p.bilinear);
  bias_ = g.param(p.bias);
}

Var ScoringSession::embed(TokenId token) { return graph_.param_row(model_.params().embedding, token); }

EncodedSequence ScoringSession::encode_sequence(std::span<const Var> inputs) {
  if (backward_) return encode_bi(forward_, *backward_, inputs);
  return encode(forward_, inputs);
}

EncodedContext ScoringSession::encode_context(const TokenSeq& context) {
  if (context.empty()) throw ContractError("score: empty context");
  std::vector<Var> inputs;
  inputs.reserve(context.size());
  for (TokenId t : context) inputs.push_back(embed(t));
  return {encode_sequence(inputs)};
}

ScoredPair ScoringSession::score(const TokenSeq& context, const TokenSeq& response) {
  return score(encode_context(context), response);
}

ScoredPair ScoringSession::score(const EncodedContext& context, const TokenSeq& response) {
  using namespace ad;
  if (response.empty()) throw ContractError("score: empty response");
  const ModelConfig& cfg = model_.config();
  ScoredPair out;

  std::vector<Var> inputs;
  inputs.reserve(response.size());
  for (TokenId t : response) {
    Var word = embed(t);
    switch (cfg.knowledge) {
      case KnowledgeMode::none:
        inputs.push_back(word);
        break;
      case KnowledgeMode::simple_add:
        inputs.push_back(simple_add_fuse(describer_->describe(t), word));
        break;
      case KnowledgeMode::gated: {
        const DescriptionEmbedding d = describer_->describe(t);
        if (!d.is_keyword && !cfg.literal_gate) {
          inputs.push_back(word);
          out.diagnostics.gates.emplace_back(std::nullopt);
          break;
        }
        // The gate sees the unattended context embedding: the attended one
        // depends on the response encoding this gate feeds.
        Var beta = gate_coefficients(*gate_, context.sequence.final, word);
        inputs.push_back(fuse(beta, d, word, cfg.literal_gate));
        out.diagnostics.gates.emplace_back(Vector(beta.value().col(0)));
        break;
      }
    }
  }
  const EncodedSequence resp = encode_sequence(inputs);

  Var context_embedding = context.sequence.final;
  Var response_embedding = resp.final;
  if (cfg.use_attention) {
    const AttendedEmbedding ctx_att = attend(context.sequence, resp.final, *context_attention_);
    const AttendedEmbedding resp_att = attend(resp, context.sequence.final, *response_attention_);
    context_embedding = ctx_att.vector;
    response_embedding = resp_att.vector;
    out.diagnostics.context_attention = ctx_att.weights.value().col(0);
    out.diagnostics.response_attention = resp_att.weights.value().col(0);
  }
  out.probability = sigmoid(dot(context_embedding, matmul(bilinear_, response_embedding)) + bias_);
  return out;
}

DualEncoder::DualEncoder(ModelConfig config, ModelParams params, KnowledgeBase knowledge)
    : config_(std::move(config)), params_(std::move(params)), knowledge_(std::move(knowledge)) {
  config_.validate();
}

DualEncoder::Scored DualEncoder::score(const TokenSeq& context, const TokenSeq& response) {
  Graph g(false);
  ScoringSession session(g, *this, &cache_);
  ScoredPair s = session.score(context, response);
  return {s.probability.value()(0, 0), std::move(s.diagnostics)};
}

std::vector<double> DualEncoder::score_candidates(const TokenSeq& context, std::span<const TokenSeq> candidates) {
  Graph g(false);
  ScoringSession session(g, *this, &cache_);
  const EncodedContext ctx = session.encode_context(context);
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const TokenSeq& c : candidates) out.push_back(session.score(ctx, c).probability.value()(0, 0));
  return out;
}

Var DualEncoder::loss(Graph& g, std::span<const Triple> batch) {
  if (batch.empty()) throw ContractError("loss: empty batch");
  ScoringSession session(g, *this);
  std::vector<Var> probs;
  probs.reserve(batch.size());
  Vector labels(static_cast<Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    probs.push_back(session.score(batch[i].flat_context(), batch[i].response).probability);
    labels(static_cast<Index>(i)) = batch[i].label;
  }
  return bce_loss(ad::transpose(ad::hstack(probs)), labels);
}

Var bce_loss(Var probabilities, const Vector& labels) {
  constexpr double clamp = 1e-12;
  const Matrix& p = probabilities.value();
  if (p.cols() != 1 || p.rows() != labels.size())
    throw DimensionError("bce_loss: " + std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
                         " probabilities vs " + std::to_string(labels.size()) + " labels");
  const Index n = p.rows();
  Vector clamped = p.col(0).cwiseMax(clamp).cwiseMin(1.0 - clamp);
  double total = 0.0;
  for (Index i = 0; i < n; ++i)
    total -= labels(i) * std::log(clamped(i)) + (1.0 - labels(i)) * std::log(1.0 - clamped(i));
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(n);

  const std::uint32_t pi = probabilities.id();
  return probabilities.graph()->record(
      std::move(out), {probabilities},
      [pi, labels, clamped = std::move(clamped), n](Graph& g, std::uint32_t self) {
        const double go = g.grad(self)(0, 0) / static_cast<double>(n);
        Matrix d(n, 1);
        for (Index i = 0; i < n; ++i)
          d(i, 0) = go * (-labels(i) / clamped(i) + (1.0 - labels(i)) / (1.0 - clamped(i)));
        g.accumulate(pi, d);
      });
}

}  // namespace akde
