#include "akde/checkpoint.hpp"

#include <fstream>
#include <random>

#include "json.hpp"

namespace akde {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kFormat = "akde-checkpoint";
constexpr int kFormatVersion = 1;

const char* encoder_text(EncoderKind k) { return k == EncoderKind::bigru ? "bigru" : "gru"; }

const char* knowledge_text(KnowledgeMode k) {
  switch (k) {
    case KnowledgeMode::none: return "none";
    case KnowledgeMode::simple_add: return "simple_add";
    case KnowledgeMode::gated: return "gated";
  }
  return "none";
}

json config_to_json(const ModelConfig& c) {
  json j;
  j["variant"] = c.variant_name();
  j["encoder"] = encoder_text(c.encoder);
  j["attention"] = c.use_attention;
  j["knowledge"] = knowledge_text(c.knowledge);
  j["embed_dim"] = c.embed_dim;
  j["hidden"] = c.hidden;
  j["max_context"] = c.limits.max_context;
  j["max_response"] = c.limits.max_response;
  j["max_description"] = c.limits.max_description;
  j["gru_bias"] = c.gru_bias;
  j["literal_gate"] = c.literal_gate;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  const std::string encoder = j.at("encoder").get<std::string>();
  if (encoder == "gru")
    c.encoder = EncoderKind::gru;
  else if (encoder == "bigru")
    c.encoder = EncoderKind::bigru;
  else
    throw FormatError("checkpoint: unknown encoder '" + encoder + "'");
  c.use_attention = j.at("attention").get<bool>();
  const std::string knowledge = j.at("knowledge").get<std::string>();
  if (knowledge == "none")
    c.knowledge = KnowledgeMode::none;
  else if (knowledge == "simple_add")
    c.knowledge = KnowledgeMode::simple_add;
  else if (knowledge == "gated")
    c.knowledge = KnowledgeMode::gated;
  else
    throw FormatError("checkpoint: unknown knowledge mode '" + knowledge + "'");
  c.embed_dim = j.at("embed_dim").get<Index>();
  c.hidden = j.at("hidden").get<Index>();
  c.limits.max_context = j.at("max_context").get<std::size_t>();
  c.limits.max_response = j.at("max_response").get<std::size_t>();
  c.limits.max_description = j.at("max_description").get<std::size_t>();
  c.gru_bias = j.at("gru_bias").get<bool>();
  c.literal_gate = j.at("literal_gate").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(std::ostream& out, DualEncoder& model, const Vocabulary& vocab, const UnigramModel& unigram) {
  json doc;
  doc["format"] = kFormat;
  doc["format_version"] = kFormatVersion;
  doc["config"] = config_to_json(model.config());
  doc["vocabulary"]["hash"] = vocab.hash();
  doc["vocabulary"]["tokens"] = vocab.tokens();

  json kb = json::array();
  for (const auto& [keyword, description] : model.knowledge().entries())
    kb.push_back(json{{"keyword", keyword}, {"description", description}});
  doc["knowledge"] = std::move(kb);
  doc["unigram_counts"] = unigram.counts();

  json params = json::array();
  for (Parameter* p : model.params().parameters()) {
    json entry;
    entry["name"] = p->name;
    entry["rows"] = p->value.rows();
    entry["cols"] = p->value.cols();
    entry["values"] = std::vector<double>(p->value.data(), p->value.data() + p->value.size());
    params.push_back(std::move(entry));
  }
  doc["parameters"] = std::move(params);
  out << doc.dump() << "\n";
}

void save_checkpoint(const std::filesystem::path& path, DualEncoder& model, const Vocabulary& vocab,
                     const UnigramModel& unigram) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  save_checkpoint(out, model, vocab, unigram);
  if (!out) throw ConfigError("failed writing " + path.string());
}

Checkpoint load_checkpoint(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw FormatError("checkpoint: not an akde checkpoint");
    if (doc.at("format_version").get<int>() != kFormatVersion)
      throw FormatError("checkpoint: unsupported format version");

    Checkpoint cp;
    const auto tokens = doc.at("vocabulary").at("tokens").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (cp.vocabulary.add(tokens[i]) != static_cast<TokenId>(i))
        throw FormatError("checkpoint: vocabulary is not a bijection at id " + std::to_string(i));
    }
    if (cp.vocabulary.hash() != doc.at("vocabulary").at("hash").get<std::uint64_t>())
      throw FormatError("checkpoint: vocabulary hash mismatch");

    KnowledgeBase kb;
    for (const auto& e : doc.at("knowledge")) {
      const auto keyword = e.at("keyword").get<TokenId>();
      auto description = e.at("description").get<TokenSeq>();
      for (TokenId t : description)
        if (t < 0 || static_cast<std::size_t>(t) >= cp.vocabulary.size())
          throw FormatError("checkpoint: description token outside vocabulary");
      kb.set(keyword, std::move(description));
    }
    auto counts = doc.at("unigram_counts").get<std::vector<std::uint64_t>>();
    if (!counts.empty() && counts.size() != cp.vocabulary.size())
      throw FormatError("checkpoint: unigram counts do not match the vocabulary");
    cp.unigram = UnigramModel(std::move(counts));

    const ModelConfig config = config_from_json(doc.at("config"));
    std::mt19937_64 rng(0);
    ModelParams params(config, cp.vocabulary.size(), rng);
    const auto& stored = doc.at("parameters");
    const auto expected = params.parameters();
    if (stored.size() != expected.size())
      throw FormatError("checkpoint: " + std::to_string(stored.size()) + " parameters stored, config needs " +
                        std::to_string(expected.size()));
    for (const auto& entry : stored) {
      const std::string name = entry.at("name").get<std::string>();
      Parameter* p = params.find(name);
      if (p == nullptr) throw FormatError("checkpoint: unexpected parameter '" + name + "'");
      const auto rows = entry.at("rows").get<Index>();
      const auto cols = entry.at("cols").get<Index>();
      if (rows != p->value.rows() || cols != p->value.cols())
        throw FormatError("checkpoint: parameter '" + name + "' is " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", config expects " + std::to_string(p->value.rows()) + "x" +
                          std::to_string(p->value.cols()));
      const auto values = entry.at("values").get<std::vector<double>>();
      if (static_cast<Index>(values.size()) != rows * cols)
        throw FormatError("checkpoint: parameter '" + name + "' has the wrong number of values");
      p->value = Eigen::Map<const Matrix>(values.data(), rows, cols);
      p->zero_grad();
    }
    cp.model = std::make_unique<DualEncoder>(config, std::move(params), std::move(kb));
    return cp;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace akde
