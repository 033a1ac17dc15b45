#include <doctest.h>

#include "corex/pipeline.hpp"

using namespace corex;

TEST_CASE("parse_anchor_spec") {
  auto e = parse_anchor_spec("jesus:0, christian:0:2.5\n# comment\n\ngod:3");
  REQUIRE(e.size() == 3);
  CHECK(e[0] == AnchorSpecEntry{"jesus", 0, std::nullopt});
  CHECK(e[1] == AnchorSpecEntry{"christian", 0, 2.5});
  CHECK(e[2] == AnchorSpecEntry{"god", 3, std::nullopt});
  CHECK(parse_anchor_spec("").empty());
  CHECK_THROWS_AS(parse_anchor_spec("jesus"), ValidationError);
  CHECK_THROWS_AS(parse_anchor_spec("jesus:x"), ValidationError);
  CHECK_THROWS_AS(parse_anchor_spec("jesus:-1"), ValidationError);
  CHECK_THROWS_AS(parse_anchor_spec("jesus:0:0"), ValidationError);
  CHECK_THROWS_AS(parse_anchor_spec("jesus:0:1:2"), ValidationError);
}

TEST_CASE("resolve_anchors") {
  Vocabulary vocab({"god", "jesus", "car"}, {3, 2, 1});
  auto r = resolve_anchors(parse_anchor_spec("jesus:0,car:1:3,zebra:0,yak:2"), vocab, 2.0);
  CHECK(r.unknown == std::vector<std::string>{"zebra", "yak"});
  REQUIRE(r.anchors.size() == 2);
  auto j = anchors_to_json(r.anchors, vocab);
  CHECK(j[0]["term"] == "jesus");
  CHECK(j[0]["strength"] == 2.0);
  CHECK(j[1]["term"] == "car");
  CHECK(j[1]["factor"] == 1);
  CHECK(j[1]["strength"] == 3.0);
}

TEST_CASE("prepare_corpus") {
  std::vector<Document> docs{{"a", "From: x@y\nSubject: hi\n\nthe car car engine", {"autos"}},
                             {"b", "engine oil", {"autos"}}};
  CorpusOptions opts;
  opts.strip_boilerplate = true;
  auto p = prepare_corpus(docs, opts);
  CHECK(p.vocab.find("engine").has_value());
  CHECK_FALSE(p.vocab.find("subject").has_value());
  CHECK(p.matrix.n_rows() == 2);
  CHECK_THROWS_AS(prepare_corpus({}, opts), DataError);
  docs.push_back({"a", "dup", {}});
  try {
    prepare_corpus(docs, opts);
    FAIL("expected DuplicateIdError");
  } catch (const DuplicateIdError& e) {
    CHECK(e.id() == "a");
  }
}
