#include "akde/corpus.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "akde/errors.hpp"

namespace akde {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

std::vector<std::string_view> split_tabs(std::string_view text) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = text.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(text.substr(start));
      return fields;
    }
    fields.push_back(text.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Keeps the last `max_tokens` of the flattened sequence, then re-splits it.
// A cut that lands on a separator drops the separator as well.
template <typename T>
void keep_recent(std::vector<std::vector<T>>& utterances, std::size_t max_tokens) {
  std::size_t total = 0;
  for (const auto& u : utterances) total += u.size();
  if (!utterances.empty()) total += utterances.size() - 1;
  if (total <= max_tokens) return;

  std::size_t drop = total - max_tokens;
  std::size_t first = 0;
  while (first < utterances.size() && drop > 0) {
    auto& u = utterances[first];
    if (drop >= u.size()) {
      drop -= u.size();
      ++first;
      // The separator that followed this utterance goes too.
      if (drop > 0) --drop;
    } else {
      u.erase(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(drop));
      drop = 0;
    }
  }
  utterances.erase(utterances.begin(), utterances.begin() + static_cast<std::ptrdiff_t>(first));
}

}  // namespace

Vocabulary::Vocabulary() {
  for (std::string_view t : {token::pad_text, token::unk_text, token::eot_text, token::url_text, token::path_text,
                             token::number_text})
    add(t);
}

TokenId Vocabulary::add(std::string_view tok) {
  if (auto it = ids_.find(std::string(tok)); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(tok);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view tok) const {
  if (auto it = ids_.find(std::string(tok)); it != ids_.end()) return it->second;
  return std::nullopt;
}

TokenId Vocabulary::id(std::string_view tok) const { return find(tok).value_or(token::unk); }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ContractError("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSeq Vocabulary::encode(std::span<const std::string> toks) const {
  TokenSeq ids;
  ids.reserve(toks.size());
  for (const auto& t : toks) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : tokens_) {
    for (char c : t) mix(static_cast<unsigned char>(c));
    mix(0);
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

TokenSeq join_utterances(const std::vector<TokenSeq>& utterances) {
  TokenSeq flat;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (i) flat.push_back(token::eot);
    flat.insert(flat.end(), utterances[i].begin(), utterances[i].end());
  }
  return flat;
}

}  // namespace

TokenSeq Triple::flat_context() const { return join_utterances(context); }
TokenSeq EvaluationGroup::flat_context() const { return join_utterances(context); }

std::vector<std::vector<std::string>> split_utterances(std::string_view context_text) {
  std::vector<std::vector<std::string>> utterances(1);
  for (auto& tok : tokenize(context_text)) {
    if (tok == token::eot_text) {
      utterances.emplace_back();
      continue;
    }
    utterances.back().push_back(std::move(tok));
  }
  std::erase_if(utterances, [](const auto& u) { return u.empty(); });
  return utterances;
}

std::vector<std::string> flatten_context(const std::vector<std::vector<std::string>>& utterances,
                                         std::size_t max_tokens) {
  auto kept = utterances;
  keep_recent(kept, max_tokens);
  std::vector<std::string> flat;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i) flat.emplace_back(token::eot_text);
    flat.insert(flat.end(), kept[i].begin(), kept[i].end());
  }
  return flat;
}

void truncate_context(std::vector<TokenSeq>& utterances, std::size_t max_tokens) {
  keep_recent(utterances, max_tokens);
}

RawTriple parse_triple_line(std::string_view text, const std::string& source, std::size_t line) {
  const auto fields = split_tabs(strip_cr(text));
  if (fields.size() != 3)
    throw ParseError(source, line, "expected label<TAB>context<TAB>response, got " + std::to_string(fields.size()) +
                                       " field(s)");
  RawTriple raw;
  if (fields[0] == "1")
    raw.label = 1;
  else if (fields[0] == "0")
    raw.label = 0;
  else
    throw ParseError(source, line, "label must be 0 or 1, got '" + std::string(fields[0]) + "'");
  raw.context = std::string(fields[1]);
  raw.response = std::string(fields[2]);
  return raw;
}

Triple make_triple(const RawTriple& raw, const Vocabulary& vocab, const Limits& limits) {
  Triple t;
  t.label = raw.label;
  for (const auto& u : split_utterances(raw.context)) t.context.push_back(vocab.encode(u));
  truncate_context(t.context, limits.max_context);
  auto resp = tokenize(raw.response);
  if (resp.size() > limits.max_response) resp.resize(limits.max_response);
  t.response = vocab.encode(resp);
  return t;
}

std::vector<Triple> load_triples(std::istream& in, const Vocabulary& vocab, const Limits& limits,
                                 const std::string& source) {
  std::vector<Triple> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (strip_cr(line).empty()) continue;
    out.push_back(make_triple(parse_triple_line(line, source, n), vocab, limits));
  }
  return out;
}

std::vector<Triple> load_triples(const std::filesystem::path& path, const Vocabulary& vocab, const Limits& limits) {
  auto in = open_input(path);
  return load_triples(in, vocab, limits, path.string());
}

std::vector<EvaluationGroup> load_groups(std::istream& in, const Vocabulary& vocab, std::size_t n,
                                         const Limits& limits, const std::string& source) {
  if (n < 2) throw ConfigError("evaluation groups need at least 2 candidates, got " + std::to_string(n));
  std::vector<EvaluationGroup> groups;
  std::string line;
  std::size_t line_no = 0;
  std::size_t in_block = 0;
  std::string block_context;
  std::size_t block_start = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip_cr(line).empty()) continue;
    RawTriple raw = parse_triple_line(line, source, line_no);
    if (in_block == 0) {
      if (raw.label != 1)
        throw FormatError(source + ":" + std::to_string(line_no) +
                          ": evaluation block must start with the positive candidate (label 1)");
      Triple t = make_triple(raw, vocab, limits);
      EvaluationGroup g;
      g.context = std::move(t.context);
      g.candidates.push_back(std::move(t.response));
      g.correct_index = 0;
      groups.push_back(std::move(g));
      block_context = detokenize(tokenize(raw.context));
      block_start = line_no;
    } else {
      if (raw.label != 0)
        throw FormatError(source + ":" + std::to_string(line_no) + ": block starting at line " +
                          std::to_string(block_start) + " has more than one positive candidate");
      if (detokenize(tokenize(raw.context)) != block_context)
        throw FormatError(source + ":" + std::to_string(line_no) + ": context differs from the block starting at line " +
                          std::to_string(block_start));
      auto resp = tokenize(raw.response);
      if (resp.size() > limits.max_response) resp.resize(limits.max_response);
      groups.back().candidates.push_back(vocab.encode(resp));
    }
    in_block = (in_block + 1) % n;
  }
  if (in_block != 0)
    throw FormatError(source + ": last block has " + std::to_string(in_block) + " line(s), expected " +
                      std::to_string(n));
  return groups;
}

std::vector<EvaluationGroup> load_groups(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t n,
                                         const Limits& limits) {
  auto in = open_input(path);
  return load_groups(in, vocab, n, limits, path.string());
}

std::size_t extend_vocabulary(std::istream& in, Vocabulary& vocab, const std::string& source) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (strip_cr(line).empty()) continue;
    const RawTriple raw = parse_triple_line(line, source, n);
    for (const auto& t : tokenize(raw.context)) vocab.add(t);
    for (const auto& t : tokenize(raw.response)) vocab.add(t);
  }
  return n;
}

std::size_t extend_vocabulary(const std::filesystem::path& path, Vocabulary& vocab) {
  auto in = open_input(path);
  return extend_vocabulary(in, vocab, path.string());
}

void KnowledgeBase::set(TokenId keyword, TokenSeq description) { entries_[keyword] = std::move(description); }

const TokenSeq* KnowledgeBase::find(TokenId keyword) const {
  auto it = entries_.find(keyword);
  return it == entries_.end() ? nullptr : &it->second;
}

KnowledgeBase load_knowledge(std::istream& in, Vocabulary& vocab, std::size_t max_description,
                             std::vector<std::string>* warnings, const std::string& source) {
  auto warn = [&](std::size_t line, const std::string& msg) {
    const std::string text = source + ":" + std::to_string(line) + ": " + msg;
    if (warnings)
      warnings->push_back(text);
    else
      std::cerr << "warning: " << text << "\n";
  };

  KnowledgeBase kb;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string_view text = strip_cr(line);
    if (text.empty()) continue;
    const std::size_t tab = text.find('\t');
    if (tab == std::string_view::npos) throw ParseError(source, n, "expected keyword<TAB>description");
    const auto keyword = tokenize(text.substr(0, tab));
    if (keyword.size() != 1) {
      warn(n, "keyword must be a single token; entry rejected");
      continue;
    }
    auto desc = tokenize(text.substr(tab + 1));
    if (desc.empty()) {
      warn(n, "empty description for '" + keyword[0] + "'; entry rejected");
      continue;
    }
    if (desc.size() > max_description) desc.resize(max_description);
    const TokenId id = vocab.add(keyword[0]);
    if (kb.contains(id)) warn(n, "duplicate keyword '" + keyword[0] + "'; last entry wins");
    TokenSeq ids;
    ids.reserve(desc.size());
    for (const auto& t : desc) ids.push_back(vocab.add(t));
    kb.set(id, std::move(ids));
  }
  return kb;
}

KnowledgeBase load_knowledge(const std::filesystem::path& path, Vocabulary& vocab, std::size_t max_description,
                             std::vector<std::string>* warnings) {
  auto in = open_input(path);
  return load_knowledge(in, vocab, max_description, warnings, path.string());
}

Eigen::MatrixXd load_embeddings(std::istream& in, const Vocabulary& vocab, Eigen::Index dim, std::mt19937_64& rng,
                                const std::string& source) {
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  Eigen::MatrixXd table(static_cast<Eigen::Index>(vocab.size()), dim);
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < dim; ++j) table(i, j) = uniform(rng);

  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto fields = tokenize(strip_cr(line));
    if (fields.empty()) continue;
    if (n == 1 && fields.size() == 2) {
      long long a = 0;
      const auto r = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a);
      if (r.ec == std::errc() && r.ptr == fields[0].data() + fields[0].size()) continue;
    }
    if (static_cast<Eigen::Index>(fields.size()) != dim + 1)
      throw FormatError(source + ":" + std::to_string(n) + ": expected " + std::to_string(dim) + " values, got " +
                        std::to_string(fields.size() - 1));
    const auto id = vocab.find(fields[0]);
    if (!id) continue;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const std::string& f = fields[static_cast<std::size_t>(j + 1)];
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(f, &used);
        if (used != f.size()) throw std::invalid_argument(f);
      } catch (const std::exception&) {
        throw ParseError(source, n, "not a number: '" + f + "'");
      }
      table(*id, j) = v;
    }
  }
  table.row(token::pad).setZero();
  return table;
}

Eigen::MatrixXd load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, Eigen::Index dim,
                                std::mt19937_64& rng) {
  auto in = open_input(path);
  return load_embeddings(in, vocab, dim, rng, path.string());
}

}  // namespace akde
