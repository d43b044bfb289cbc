#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace akde {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

namespace token {
inline constexpr TokenId pad = 0;
inline constexpr TokenId unk = 1;
inline constexpr TokenId eot = 2;
inline constexpr TokenId url = 3;
inline constexpr TokenId path = 4;
inline constexpr TokenId number = 5;
inline constexpr TokenId reserved_count = 6;

inline constexpr std::string_view pad_text = "__pad__";
inline constexpr std::string_view unk_text = "__unk__";
inline constexpr std::string_view eot_text = "__eot__";
inline constexpr std::string_view url_text = "__url__";
inline constexpr std::string_view path_text = "__path__";
inline constexpr std::string_view number_text = "__number__";
}  // namespace token

// Token <-> id bijection. The reserved tokens occupy ids 0..5 in every
// vocabulary, PAD first.
class Vocabulary {
 public:
  Vocabulary();

  // Returns the existing id or appends the token.
  TokenId add(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  // Unknown tokens map to UNK.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenSeq encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  // FNV-1a over the ordered token list; identifies a vocabulary in checkpoints.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Whitespace split with empty tokens dropped.
std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(std::span<const std::string> tokens);

struct Limits {
  std::size_t max_context = 320;
  std::size_t max_response = 160;
  std::size_t max_description = 60;
};

struct Triple {
  std::vector<TokenSeq> context;  // utterances, oldest first
  TokenSeq response;
  int label = 0;

  // Utterances joined by EOT.
  TokenSeq flat_context() const;
};

struct EvaluationGroup {
  std::vector<TokenSeq> context;
  std::vector<TokenSeq> candidates;
  std::size_t correct_index = 0;

  TokenSeq flat_context() const;
};

// Context text as it appears in the triple file, split into utterances on
// `__eot__`. Empty utterances are dropped.
std::vector<std::vector<std::string>> split_utterances(std::string_view context_text);

// Joins utterances with EOT and keeps the most recent `max_tokens` tokens.
std::vector<std::string> flatten_context(const std::vector<std::vector<std::string>>& utterances,
                                         std::size_t max_tokens);

// Trims a context so its flattened length (EOT separators included) is at
// most `max_tokens`, dropping from the oldest end.
void truncate_context(std::vector<TokenSeq>& utterances, std::size_t max_tokens);

struct RawTriple {
  int label = 0;
  std::string context;
  std::string response;
};

// Parses `label<TAB>context<TAB>response`. `source` and `line` only feed
// error messages.
RawTriple parse_triple_line(std::string_view text, const std::string& source, std::size_t line);

Triple make_triple(const RawTriple& raw, const Vocabulary& vocab, const Limits& limits);

std::vector<Triple> load_triples(std::istream& in, const Vocabulary& vocab, const Limits& limits,
                                 const std::string& source = "<stream>");
std::vector<Triple> load_triples(const std::filesystem::path& path, const Vocabulary& vocab, const Limits& limits);

// Folds consecutive blocks of `n` lines (positive first, then n-1 negatives,
// same context) into evaluation groups.
std::vector<EvaluationGroup> load_groups(std::istream& in, const Vocabulary& vocab, std::size_t n,
                                         const Limits& limits, const std::string& source = "<stream>");
std::vector<EvaluationGroup> load_groups(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t n,
                                         const Limits& limits);

// Adds every context and response token of a triple file to `vocab`. Returns
// the number of lines read.
std::size_t extend_vocabulary(std::istream& in, Vocabulary& vocab, const std::string& source = "<stream>");
std::size_t extend_vocabulary(const std::filesystem::path& path, Vocabulary& vocab);

class KnowledgeBase {
 public:
  // Replaces any previous description of `keyword`.
  void set(TokenId keyword, TokenSeq description);
  bool contains(TokenId keyword) const { return entries_.count(keyword) != 0; }
  const TokenSeq* find(TokenId keyword) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<TokenId, TokenSeq>& entries() const { return entries_; }

 private:
  std::map<TokenId, TokenSeq> entries_;
};

// Reads `keyword<TAB>description` lines. Keywords and description tokens are
// added to `vocab`; descriptions are cut to `max_description` tokens.
// Duplicate keywords keep the last entry; empty descriptions are rejected.
// Both produce a warning, appended to `warnings` or written to std::cerr when
// `warnings` is null.
KnowledgeBase load_knowledge(std::istream& in, Vocabulary& vocab, std::size_t max_description,
                             std::vector<std::string>* warnings = nullptr, const std::string& source = "<stream>");
KnowledgeBase load_knowledge(const std::filesystem::path& path, Vocabulary& vocab, std::size_t max_description,
                             std::vector<std::string>* warnings = nullptr);

// |V|×dim table. Rows for tokens in the file take the file's values, other
// rows are uniform in [-0.1, 0.1], the PAD row is zero. A leading
// `count dim` header line (fastText .vec) is skipped.
Eigen::MatrixXd load_embeddings(std::istream& in, const Vocabulary& vocab, Eigen::Index dim, std::mt19937_64& rng,
                                const std::string& source = "<stream>");
Eigen::MatrixXd load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, Eigen::Index dim,
                                std::mt19937_64& rng);

}  // namespace akde
