#include <doctest.h>

#include <sstream>

#include "corex/corpus.hpp"

using namespace corex;

namespace {
std::vector<std::string> toks(std::string_view text, TokenizeOptions opts = {}) { return tokenize(text, opts); }
}  // namespace

TEST_CASE("tokenize examples") {
  CHECK(toks("").empty());
  CHECK(toks("God exists. god EXISTS") == std::vector<std::string>{"god", "exists", "god", "exists"});
  TokenizeOptions neg;
  neg.negation = true;
  CHECK(toks("no fever today", neg) == std::vector<std::string>{"not_fever", "today"});
  CHECK(toks("Not FEVER", neg) == std::vector<std::string>{"not_fever"});
}

TEST_CASE("tokenize rules") {
  CHECK(toks("don't stop 'quoted'") == std::vector<std::string>{"don't", "stop", "quoted"});
  CHECK(toks("a b cd") == std::vector<std::string>{"cd"});  // min length 2
  TokenizeOptions opts;
  opts.stopwords = {"the"};
  CHECK(toks("The cat the", opts) == std::vector<std::string>{"cat"});
  opts.lowercase = false;
  CHECK(toks("The Cat", opts) == std::vector<std::string>{"The", "Cat"});
  CHECK(toks("x1 2y under_score") == std::vector<std::string>{"x1", "2y", "under", "score"});
  // UTF-8 bytes stay inside words.
  CHECK(toks("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
  // Without negation, every token is a substring of the lowercased input.
  for (const auto& t : toks("Some RANDOM text, with Punctuation!")) {
    CHECK(!t.empty());
    CHECK(std::string("some random text, with punctuation!").find(t) != std::string::npos);
  }
}

TEST_CASE("strip_newsgroup_boilerplate examples") {
  CHECK(strip_newsgroup_boilerplate("From: a@b\nSubject: x\n\nbody") == "body");
  CHECK(strip_newsgroup_boilerplate("body only") == "body only");
  CHECK(strip_newsgroup_boilerplate("text\n> quoted\nmore") == "text\nmore");
  CHECK(strip_newsgroup_boilerplate("text\n  > indented quote\nmore") == "text\nmore");
  CHECK(strip_newsgroup_boilerplate("body\nline\n--\nsig name\n") == "body\nline");
  // A blank line not preceded by header-shaped lines keeps the leading block.
  CHECK(strip_newsgroup_boilerplate("para one\n\npara two") == "para one\n\npara two");
}

TEST_CASE("build_vocabulary examples") {
  std::vector<Document> docs{{"1", "aa bb", {}}, {"2", "aa", {}}, {"3", "aa cc", {}}};
  auto v = build_vocabulary(docs, {}, 2);
  CHECK(v.terms() == std::vector<std::string>{"aa", "bb"});
  CHECK(v.doc_freq() == std::vector<std::size_t>{3, 1});
  CHECK(build_vocabulary(docs, {}, 100).terms() == std::vector<std::string>{"aa", "bb", "cc"});
  CHECK(build_vocabulary(docs, {}, 100, 2).terms() == std::vector<std::string>{"aa"});
  CHECK_THROWS_AS(build_vocabulary(docs, {}, 100, 5), DataError);
  CHECK(v.find("bb") == std::optional<std::size_t>{1});
  CHECK_FALSE(v.find("zz"));
}

TEST_CASE("vectorize examples") {
  Vocabulary v({"aa", "bb", "cc"}, {});
  std::vector<Document> docs{{"1", "aa aa bb", {}}, {"2", "zz", {}}, {"3", "bb aa", {}}, {"4", "bb", {}}};
  auto m = vectorize(docs, v, {});
  CHECK(m.n_rows() == 4);
  CHECK(m.n_cols() == 3);
  CHECK(std::vector<std::uint32_t>(m.row(0).begin(), m.row(0).end()) == std::vector<std::uint32_t>{0, 1});
  CHECK(m.row(1).empty());
  CHECK(std::vector<std::uint32_t>(m.row(2).begin(), m.row(2).end()) == std::vector<std::uint32_t>{0, 1});
  CHECK(std::vector<std::uint32_t>(m.row(3).begin(), m.row(3).end()) == std::vector<std::uint32_t>{1});
  CHECK(m.column_counts() == std::vector<std::size_t>{2, 3, 0});
  CHECK(m.contains(3, 1));
  CHECK_FALSE(m.contains(3, 0));
}

TEST_CASE("sparse matrix validation") {
  SparseBinaryMatrix m(3, {{2, 0, 2}});
  CHECK(std::vector<std::uint32_t>(m.row(0).begin(), m.row(0).end()) == std::vector<std::uint32_t>{0, 2});
  CHECK_THROWS_AS(SparseBinaryMatrix(2, {{2}}), DataError);
}

TEST_CASE("corpus JSON-lines parsing") {
  std::istringstream good(R"({"id":"a","text":"x y","labels":["p"]}
{"id":"b","text":"z"}
)");
  auto docs = parse_corpus_jsonl(good);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].labels == std::vector<std::string>{"p"});
  CHECK(docs[1].labels.empty());

  std::istringstream dup("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
  try {
    parse_corpus_jsonl(dup);
    FAIL("expected a duplicate-id error");
  } catch (const DuplicateIdError& e) {
    CHECK(e.id() == "a");
  }
  std::istringstream bad("{\"id\":3,\"text\":\"x\"}\n");
  CHECK_THROWS_AS(parse_corpus_jsonl(bad), DataError);
  std::istringstream notjson("not json\n");
  CHECK_THROWS_AS(parse_corpus_jsonl(notjson), DataError);
}

TEST_CASE("vocabulary and matrix files round-trip") {
  Vocabulary v({"aa", "bb"}, {2, 1});
  std::stringstream vs;
  write_vocabulary(vs, v);
  CHECK(vs.str() == "#n=2\naa\nbb\n");
  auto v2 = parse_vocabulary(vs);
  CHECK(v2.terms() == v.terms());

  SparseBinaryMatrix m(3, {{0, 2}, {}, {1}});
  std::stringstream ms;
  write_matrix(ms, m);
  CHECK(ms.str() == "#rows=3 cols=3\n0 2\n\n1\n");
  CHECK(parse_matrix(ms) == m);

  std::istringstream unsorted("#rows=1 cols=3\n2 1\n");
  CHECK_THROWS_AS(parse_matrix(unsorted), DataError);
  std::istringstream short_rows("#rows=2 cols=3\n1\n");
  CHECK_THROWS_AS(parse_matrix(short_rows), DataError);
  std::istringstream wrong_count("#n=3\naa\n");
  CHECK_THROWS_AS(parse_vocabulary(wrong_count), DataError);
}

TEST_CASE("vocabulary construction is deterministic") {
  std::vector<Document> docs{{"1", "zeta alpha beta", {}}, {"2", "beta gamma", {}}, {"3", "alpha zeta", {}}};
  std::stringstream a, b;
  write_vocabulary(a, build_vocabulary(docs, {}, 10));
  write_vocabulary(b, build_vocabulary(docs, {}, 10));
  CHECK(a.str() == b.str());
  CHECK(a.str() == "#n=4\nalpha\nbeta\nzeta\ngamma\n");
}
