// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <json.hpp>

#include "acrag/errors.hpp"
#include "acrag/knowledge_base.hpp"
#include "scenarios.hpp"

using namespace acrag;
namespace fs = std::filesystem;

namespace {

std::string words(int n, std::mt19937& rng) {
  static const std::vector<std::string> pool = {"cell", "  renal", "\tdose,", " mg/kg", " (acute)", "\nliver.", " ü"};
  std::string out;
  for (int i = 0; i < n; ++i) out += pool[rng() % pool.size()];
  return out;
}

IndexEntry unit_entry(const std::string& id, std::vector<float> v) {
  return {id, normalize(v), id + " text"};
}

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("acrag_kb_" + tag);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("corpus loader") {
  std::istringstream ok(
      R"({"doc_id": "d1", "title": "T", "body": "b1", "source_tag": "s"})"
      "\n\n"
      R"({"doc_id": "d2", "title": null, "body": ""})"
      "\n");
  const auto docs = load_corpus_jsonl(ok);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].title == "T");
  CHECK_FALSE(docs[1].title.has_value());

  std::istringstream dup(R"({"doc_id": "d1", "body": "x"})"
                         "\n"
                         R"({"doc_id": "d1", "body": "y"})"
                         "\n");
  try {
    load_corpus_jsonl(dup);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("tokenizer pieces") {
  const WhitespacePunctTokenizer tok;
  CHECK(tok.tokenize("") == std::vector<std::string>{});
  CHECK(tok.tokenize("Hello, world!  ") == std::vector<std::string>{"Hello", ",", " world", "!", "  "});
  CHECK(tok.tokenize("  a\n\nb") == std::vector<std::string>{"  a", "\n\nb"});
  CHECK(tok.tokenize("5mg/kg") == std::vector<std::string>{"5mg", "/", "kg"});
}

TEST_CASE("property: tokenizer round-trips arbitrary bytes") {
  std::mt19937 rng(3);
  const WhitespacePunctTokenizer tok;
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const int n = static_cast<int>(rng() % 200);
    for (int i = 0; i < n; ++i) s += static_cast<char>(rng() % 256);
    std::string joined;
    for (const auto& t : tok.tokenize(s)) {
      CHECK_FALSE(t.empty());
      joined += t;
    }
    CHECK(joined == s);
  }
}

TEST_CASE("chunking example: 1300 tokens gives 512, 512, 276") {
  std::string body;
  for (int i = 0; i < 1300; ++i) body += (i ? " w" : "w") + std::to_string(i);
  const auto chunks = chunk_document({"doc", std::nullopt, body, ""}, WhitespacePunctTokenizer{}, 512);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[0].token_count == 512);
  CHECK(chunks[1].token_count == 512);
  CHECK(chunks[2].token_count == 276);
  CHECK(chunks[0].chunk_id == "doc#0");
  CHECK(chunks[2].chunk_id == "doc#2");
  CHECK(chunks[0].text + chunks[1].text + chunks[2].text == body);
}

TEST_CASE("chunking edge cases") {
  const WhitespacePunctTokenizer tok;
  CHECK(chunk_document({"e", std::nullopt, "", ""}, tok).empty());
  const auto one = chunk_document({"s", std::nullopt, "just a few words", ""}, tok);
  REQUIRE(one.size() == 1);
  CHECK(one[0].token_count == 4);
  CHECK_THROWS_AS(chunk_document({"s", std::nullopt, "x", ""}, tok, 0), InvalidArgument);

  struct Lossy final : Tokenizer {
    std::string id() const override { return "lossy"; }
    std::vector<std::string> tokenize(std::string_view) const override { return {"x"}; }
  };
  CHECK_THROWS_AS(chunk_document({"s", std::nullopt, "abc", ""}, Lossy{}), IngestionError);
}

TEST_CASE("property: chunks are disjoint, covering and full-size except the last") {
  std::mt19937 rng(11);
  const WhitespacePunctTokenizer tok;
  for (int trial = 0; trial < 60; ++trial) {
    const int size = 1 + static_cast<int>(rng() % 40);
    const SourceDocument doc{"d" + std::to_string(trial), std::nullopt, words(static_cast<int>(rng() % 300), rng), ""};
    const auto tokens = tok.tokenize(doc.body);
    const auto chunks = chunk_document(doc, tok, size);
    std::string joined;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      CHECK(chunks[i].ordinal == static_cast<int>(i));
      if (i + 1 < chunks.size()) CHECK(chunks[i].token_count == size);
      CHECK(chunks[i].token_count >= 1);
      CHECK(chunks[i].token_count <= size);
      joined += chunks[i].text;
      covered += static_cast<std::size_t>(chunks[i].token_count);
    }
    CHECK(joined == doc.body);
    CHECK(covered == tokens.size());
  }
}

TEST_CASE("hashing embedder") {
  const HashingEmbedder e(16);
  CHECK(e.id() == "hashing-tf-16");
  const auto v = e.embed_one("Liver liver, KIDNEY!");
  CHECK(v.size() == 16);
  float total = 0;
  for (float x : v) total += x;
  CHECK(total == 3.0f);
  CHECK(e.embed_one("liver kidney") == e.embed_one("KIDNEY   liver"));
  CHECK(make_embedder("hashing-tf-32")->dimension() == 32);
  CHECK_THROWS_AS(make_embedder("bert"), ConfigurationError);
  CHECK_THROWS_AS(make_embedder("hashing-tf-"), ConfigurationError);
  CHECK_THROWS_AS(normalize(std::vector<float>(4, 0.0f)), EmbedderError);
  const auto n = normalize(std::vector<float>{3.0f, 4.0f});
  CHECK(n[0] == doctest::Approx(0.6));
  CHECK(n[1] == doctest::Approx(0.8));
}

TEST_CASE("embed checks dimension consistency") {
  struct Wobbly final : Embedder {
    mutable int calls = 0;
    std::string id() const override { return "wobbly"; }
    std::size_t dimension() const override { return 2; }
    std::vector<float> embed_one(std::string_view) const override {
      return ++calls == 1 ? std::vector<float>{1, 0} : std::vector<float>{1, 0, 0};
    }
  };
  CHECK_THROWS_AS(embed({"a", "b"}, Wobbly{}), EmbedderError);
  const auto ok = embed({"a b", "c"}, HashingEmbedder(8));
  CHECK(ok.size() == 2);
}

TEST_CASE("index build validation") {
  CHECK_THROWS_AS(VectorIndex::build({unit_entry("a", {1, 0}), unit_entry("a", {0, 1})}), IndexError);
  CHECK_THROWS_AS(VectorIndex::build({unit_entry("a", {1, 0}), unit_entry("b", {0, 1, 0})}), IndexError);
  CHECK_THROWS_AS(VectorIndex::build({IndexEntry{"a", {2.0f, 0.0f}, ""}}), IndexError);
  const auto empty = VectorIndex::build({}, {}, 8);
  CHECK(empty.size() == 0);
  CHECK(empty.dimension() == 8);
  CHECK(empty.search(std::vector<float>(8, 0.1f), 3).empty());
}

TEST_CASE("search ranks by cosine and breaks ties by chunk_id") {
  const auto index = VectorIndex::build({unit_entry("c", {1, 1}), unit_entry("b", {1, 1}), unit_entry("a", {0, 1}),
                                         unit_entry("d", {1, 0})});
  const auto q = normalize(std::vector<float>{1, 0.9f});
  const auto hits = index.search(q, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].chunk_id == "b");
  CHECK(hits[1].chunk_id == "c");
  CHECK(hits[0].similarity == hits[1].similarity);
  CHECK(hits[2].chunk_id == "d");
  CHECK(hits[0].text == "b text");
  CHECK(index.search(q, 10).size() == 4);
  CHECK_THROWS_AS(index.search(q, 0), InvalidArgument);
  CHECK_THROWS_AS(index.search(std::vector<float>{1, 0, 0}, 1), IndexError);
}

TEST_CASE("index persistence round-trips and validates") {
  const auto& index = testing::toy_index();
  const auto dir = temp_dir("roundtrip");
  index.save(dir);
  const auto manifest = nlohmann::json::parse(testing::read_file((dir / "manifest.json").string()));
  CHECK(manifest["format"] == "acrag-flat-index");
  CHECK(manifest["dimension"] == 64);
  CHECK(manifest["count"] == index.size());
  CHECK(manifest["embedder_id"] == "hashing-tf-64");
  CHECK(manifest["tokenizer_id"] == "ws-punct-v1");
  CHECK(fs::file_size(dir / "vectors.f32") == index.size() * 64 * 4);

  const auto loaded = VectorIndex::load(dir);
  CHECK(loaded.metadata() == index.metadata());
  REQUIRE(loaded.size() == index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    CHECK(loaded.chunk_id(r) == index.chunk_id(r));
    CHECK(loaded.text(r) == index.text(r));
    const auto a = index.vector(r), b = loaded.vector(r);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }

  fs::resize_file(dir / "vectors.f32", 12);
  CHECK_THROWS_AS(VectorIndex::load(dir), IndexError);
  CHECK_THROWS_AS(VectorIndex::load(temp_dir("missing")), IndexError);
}

TEST_CASE("knowledge base ingestion and retrieval") {
  const auto& index = testing::toy_index();
  CHECK(index.size() == 4);
  const Retriever retriever(testing::toy_embedder(), index);
  CHECK(retriever.retrieve("alphazyme pathway", 1).front().chunk_id == "alpha#0");
  CHECK(retriever.retrieve("betacline filtration", 1).front().chunk_id == "beta#0");
  CHECK(retriever.retrieve("Term gamma refers to gammacept activity.", 1).front().chunk_id == "gamma#0");
  CHECK_THROWS_AS(retriever.retrieve("!!!", 1), EmbedderError);
}

TEST_CASE("whitespace-only tails are not indexed") {
  std::string body;
  for (int i = 0; i < 4; ++i) body += " word";
  body += "   ";  // fifth token is pure whitespace
  const auto index = build_knowledge_base({{"d", std::nullopt, body, ""}}, WhitespacePunctTokenizer{},
                                          HashingEmbedder(16), {4, false});
  CHECK(index.size() == 1);
  CHECK(index.chunk_id(0) == "d#0");
}

TEST_CASE("titles are embedded only when asked") {
  const std::vector<SourceDocument> docs = {{"d", std::string("Zebrafish"), "liver enzyme", ""}};
  const HashingEmbedder e(64);
  const auto plain = build_knowledge_base(docs, WhitespacePunctTokenizer{}, e, {512, false});
  const auto titled = build_knowledge_base(docs, WhitespacePunctTokenizer{}, e, {512, true});
  const auto q = normalize(e.embed_one("zebrafish"));
  CHECK(plain.search(q, 1)[0].similarity < titled.search(q, 1)[0].similarity);
  CHECK(titled.text(0) == "liver enzyme");
}
