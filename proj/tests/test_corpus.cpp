#include <random>
#include <sstream>

#include "doctest.h"

#include "akde/corpus.hpp"
#include "akde/errors.hpp"

using namespace akde;

namespace {

Vocabulary vocab_of(std::initializer_list<const char*> words) {
  Vocabulary v;
  for (const char* w : words) v.add(w);
  return v;
}

std::string tokens(std::size_t n, const std::string& stem = "t") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + stem + std::to_string(i);
  return out;
}

}  // namespace

TEST_CASE("reserved tokens come first") {
  Vocabulary v;
  CHECK(v.size() == static_cast<std::size_t>(token::reserved_count));
  CHECK(v.token(token::pad) == "__pad__");
  CHECK(v.token(token::unk) == "__unk__");
  CHECK(v.token(token::eot) == "__eot__");
  CHECK(v.id("__url__") == token::url);
  CHECK(v.id("__path__") == token::path);
  CHECK(v.id("__number__") == token::number);
}

TEST_CASE("vocabulary is a bijection and maps unknown words to UNK") {
  Vocabulary v;
  const TokenId a = v.add("alpha");
  CHECK(v.add("alpha") == a);
  CHECK(v.token(a) == "alpha");
  CHECK(v.id("never-seen") == token::unk);
  CHECK_FALSE(v.find("never-seen").has_value());
  const std::vector<std::string> words{"alpha", "beta"};
  CHECK(v.decode(v.encode(words)) == std::vector<std::string>{"alpha", "__unk__"});
  CHECK_THROWS_AS((void)v.token(999), ContractError);
}

TEST_CASE("vocabulary hash depends on token order") {
  Vocabulary a = vocab_of({"x", "y"});
  Vocabulary b = vocab_of({"x", "y"});
  Vocabulary c = vocab_of({"y", "x"});
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
}

TEST_CASE("tokenize") {
  CHECK(tokenize("sudo shutdown -h now") == std::vector<std::string>{"sudo", "shutdown", "-h", "now"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("a  b") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize(" \ta\tb \n") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("parse a triple line") {
  Vocabulary v = vocab_of({"hi", "hello", "how", "are", "you"});
  const RawTriple raw = parse_triple_line("1\thi __eot__ hello\thow are you", "f", 1);
  const Triple t = make_triple(raw, v, Limits{});
  CHECK(t.label == 1);
  REQUIRE(t.context.size() == 2);
  CHECK(v.decode(t.context[0]) == std::vector<std::string>{"hi"});
  CHECK(v.decode(t.context[1]) == std::vector<std::string>{"hello"});
  CHECK(v.decode(t.response) == std::vector<std::string>{"how", "are", "you"});
  CHECK(t.flat_context() == TokenSeq{v.id("hi"), token::eot, v.id("hello")});
}

TEST_CASE("malformed triple lines report source and line") {
  try {
    parse_triple_line("1\tonly two", "data.tsv", 7);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
    CHECK(std::string(e.what()).find("data.tsv") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_triple_line("2\ta\tb", "f", 1), ParseError);
  CHECK_THROWS_AS(parse_triple_line("yes\ta\tb", "f", 1), ParseError);
}

TEST_CASE("long contexts keep their most recent tokens") {
  Vocabulary v;
  const std::string ctx = tokens(330);
  for (const auto& t : tokenize(ctx)) v.add(t);
  const Triple t = make_triple(parse_triple_line("0\t" + ctx + "\tx", "f", 1), v, Limits{});
  const TokenSeq flat = t.flat_context();
  REQUIRE(flat.size() == 320);
  CHECK(v.token(flat.front()) == "t10");
  CHECK(v.token(flat.back()) == "t329");
}

TEST_CASE("truncation counts separators and drops a leading one") {
  // a b EOT c d EOT e: keeping 4 leaves "c d EOT e"; keeping 3 leaves "d EOT e".
  std::vector<std::vector<std::string>> utt{{"a", "b"}, {"c", "d"}, {"e"}};
  CHECK(flatten_context(utt, 4) == std::vector<std::string>{"c", "d", "__eot__", "e"});
  CHECK(flatten_context(utt, 3) == std::vector<std::string>{"d", "__eot__", "e"});
  CHECK(flatten_context(utt, 2) == std::vector<std::string>{"e"});
  CHECK(flatten_context(utt, 100).size() == 7);
}

TEST_CASE("responses are cut to the response limit") {
  Vocabulary v;
  Limits limits;
  limits.max_response = 3;
  const Triple t = make_triple(parse_triple_line("1\ta\t" + tokens(5), "f", 1), v, limits);
  CHECK(t.response.size() == 3);
}

TEST_CASE("evaluation blocks fold into groups") {
  Vocabulary v;
  std::ostringstream text;
  for (int g = 0; g < 2; ++g) {
    text << "1\tctx" << g << " a\tgood\n";
    for (int i = 0; i < 9; ++i) text << "0\tctx" << g << " a\tbad" << i << "\n";
  }
  std::istringstream in(text.str());
  extend_vocabulary(in, v);
  std::istringstream again(text.str());
  const auto groups = load_groups(again, v, 10, Limits{});
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].correct_index == 0);
  CHECK(groups[0].candidates.size() == 10);
  CHECK(v.token(groups[1].candidates[3][0]) == "bad2");
}

TEST_CASE("malformed evaluation blocks are rejected") {
  Vocabulary v;
  SUBCASE("block starting with a negative") {
    std::istringstream in("0\tc\tr\n1\tc\tr\n");
    CHECK_THROWS_AS(load_groups(in, v, 2, Limits{}), FormatError);
  }
  SUBCASE("two positives") {
    std::istringstream in("1\tc\tr\n1\tc\tr\n");
    CHECK_THROWS_AS(load_groups(in, v, 2, Limits{}), FormatError);
  }
  SUBCASE("context changes inside a block") {
    std::istringstream in("1\tc\tr\n0\td\tr\n");
    CHECK_THROWS_AS(load_groups(in, v, 2, Limits{}), FormatError);
  }
  SUBCASE("incomplete last block") {
    std::istringstream in("1\tc\tr\n0\tc\tr\n1\tc\tr\n");
    CHECK_THROWS_AS(load_groups(in, v, 2, Limits{}), FormatError);
  }
  SUBCASE("group size below two") {
    std::istringstream in("1\tc\tr\n");
    CHECK_THROWS_AS(load_groups(in, v, 1, Limits{}), ConfigError);
  }
}

TEST_CASE("knowledge base loading") {
  Vocabulary v;
  std::vector<std::string> warnings;
  std::istringstream in(
      "shutdown\tbring the system down\n"
      "who\tshow who is logged on\n"
      "two words\tis not a keyword\n"
      "empty\t   \n"
      "who\tlist users\n");
  const KnowledgeBase kb = load_knowledge(in, v, 60, &warnings);
  CHECK(kb.size() == 2);
  const TokenSeq* shutdown = kb.find(v.id("shutdown"));
  REQUIRE(shutdown != nullptr);
  CHECK(shutdown->size() == 4);
  CHECK(v.decode(*shutdown) == std::vector<std::string>{"bring", "the", "system", "down"});
  // Common words are keywords when listed.
  REQUIRE(kb.contains(v.id("who")));
  CHECK(v.decode(*kb.find(v.id("who"))) == std::vector<std::string>{"list", "users"});
  CHECK(warnings.size() == 3);
}

TEST_CASE("knowledge descriptions are cut and an empty file gives an empty base") {
  Vocabulary v;
  std::istringstream in("ls\t" + tokens(80, "d") + "\n");
  const KnowledgeBase kb = load_knowledge(in, v, 60);
  CHECK(kb.find(v.id("ls"))->size() == 60);
  std::istringstream empty("");
  CHECK(load_knowledge(empty, v, 60).empty());
}

TEST_CASE("embedding table loading") {
  Vocabulary v = vocab_of({"hello", "absent"});
  std::ostringstream text;
  text << "2 200\nhello";
  for (int i = 0; i < 200; ++i) text << " " << i * 0.5;
  text << "\nnot-in-vocab";
  for (int i = 0; i < 200; ++i) text << " 9";
  text << "\n";
  std::istringstream in(text.str());
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd table = load_embeddings(in, v, 200, rng);
  REQUIRE(table.rows() == static_cast<Eigen::Index>(v.size()));
  for (int i = 0; i < 200; ++i) CHECK(table(v.id("hello"), i) == i * 0.5);
  CHECK(table.row(v.id("absent")).cwiseAbs().maxCoeff() <= 0.1);
  CHECK(table.row(token::pad).isZero(0.0));
}

TEST_CASE("embedding files with the wrong width or bad numbers fail") {
  Vocabulary v = vocab_of({"a"});
  std::mt19937_64 rng(1);
  std::istringstream narrow("a 1 2\n");
  CHECK_THROWS_AS(load_embeddings(narrow, v, 3, rng), FormatError);
  std::istringstream bad("a 1 x 2\n");
  CHECK_THROWS_AS(load_embeddings(bad, v, 3, rng), ParseError);
}
