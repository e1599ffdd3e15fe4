#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "ghlda/corpus.hpp"

using namespace ghlda;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/ghlda_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

RawDocument doc(std::vector<std::string> toks) { return {std::move(toks), ""}; }

std::vector<std::string> decode(const Document& d, const Vocabulary& v) {
  std::vector<std::string> out;
  for (int t : d.tokens) out.push_back(v.words[t]);
  return out;
}

}  // namespace

TEST_CASE("ingest keeps only words reaching the frequency threshold") {
  auto corpus = ingest({doc({"a", "a", "b"}), doc({"a", "c"})}, 2);
  CHECK(corpus.vocab.words == std::vector<std::string>{"a"});
  REQUIRE(corpus.train.size() == 2);
  CHECK(corpus.train[0].tokens == std::vector<int>{0, 0});
  CHECK(corpus.train[1].tokens == std::vector<int>{0});
}

TEST_CASE("ingest keeps stop words and drops empty documents") {
  auto corpus = ingest({doc({"the", "the", "bank"}), doc({"the", "rare"})}, 2);
  CHECK(corpus.vocab.lookup("the").has_value());
  CHECK_FALSE(corpus.vocab.lookup("rare").has_value());
  CHECK_FALSE(corpus.vocab.lookup("bank").has_value());
  REQUIRE(corpus.train.size() == 2);
}

TEST_CASE("ingest fails on a corpus that filters to nothing") {
  CHECK_THROWS_AS(ingest({doc({"x"})}, 2), std::runtime_error);
}

TEST_CASE("vocabulary round-trips ids and words") {
  auto corpus = ingest({doc({"b", "a", "b", "c", "a", "b"})}, 2);
  for (int i = 0; i < corpus.vocab.size(); ++i) {
    CHECK(*corpus.vocab.lookup(corpus.vocab.words[i]) == i);
  }
  CHECK(decode(corpus.train[0], corpus.vocab) ==
        std::vector<std::string>{"b", "a", "b", "a", "b"});
}

TEST_CASE("default tokenizer lowercases and strips punctuation") {
  auto toks = default_tokenizer("The Bank, near (the) river-bed!");
  CHECK(toks == std::vector<std::string>{"the", "bank", "near", "the", "river-bed"});
}

TEST_CASE("glove text parsing") {
  TempFile f("glove.txt", "bank 0.1 0.2\nriver -1.5 2.0\n");
  auto emb = load_embeddings(f.path, EmbeddingFormat::glove_text);
  REQUIRE(emb.size() == 2);
  CHECK(emb.at("bank") == std::vector<double>{0.1, 0.2});
  CHECK(emb.at("river")[0] == doctest::Approx(-1.5));
}

TEST_CASE("word2vec text header is skipped") {
  TempFile f("w2v.txt", "3 4\na 1 2 3 4\nb 5 6 7 8\nc 9 10 11 12\n");
  auto emb = load_embeddings(f.path, EmbeddingFormat::word2vec_text);
  REQUIRE(emb.size() == 3);
  CHECK(emb.at("b").size() == 4);
}

TEST_CASE("embedding parse errors name the line") {
  TempFile bad_dim("bad_dim.txt", "a 1 2 3\nb 1 2\n");
  CHECK_THROWS_WITH_AS(load_embeddings(bad_dim.path, EmbeddingFormat::glove_text),
                       doctest::Contains("line 2"), std::runtime_error);
  TempFile bad_field("bad_field.txt", "a 1 2\nb 1 x\n");
  CHECK_THROWS_WITH_AS(load_embeddings(bad_field.path, EmbeddingFormat::glove_text),
                       doctest::Contains("non-numeric"), std::runtime_error);
}

TEST_CASE("duplicate embedding rows keep the first occurrence") {
  TempFile f("dup.txt", "a 1 1\na 2 2\n");
  auto emb = load_embeddings(f.path, EmbeddingFormat::glove_text);
  CHECK(emb.at("a") == std::vector<double>{1.0, 1.0});
}

TEST_CASE("align restricts the vocabulary to the embedding intersection") {
  auto corpus = ingest({doc({"a", "b", "a", "b"}), doc({"b", "a"})}, 2);
  RawEmbeddings emb{{"a", {0.5, 0.5}}};
  auto [aligned, table] = align(corpus, emb);
  CHECK(aligned.vocab.words == std::vector<std::string>{"a"});
  CHECK(table.dim == 2);
  CHECK(table.matrix.rows() == 1);
  for (const auto& d : aligned.train) {
    for (int t : d.tokens) CHECK(t == 0);
  }
}

TEST_CASE("align is idempotent") {
  auto corpus = ingest({doc({"a", "b", "a", "b", "c", "c"})}, 2);
  RawEmbeddings emb{{"a", {1.0}}, {"b", {2.0}}, {"c", {3.0}}};
  auto [once, table1] = align(corpus, emb);
  auto [twice, table2] = align(once, emb);
  CHECK(once.vocab.words == twice.vocab.words);
  REQUIRE(once.train.size() == twice.train.size());
  for (std::size_t i = 0; i < once.train.size(); ++i) {
    CHECK(once.train[i].tokens == twice.train[i].tokens);
  }
  CHECK(table1.matrix == table2.matrix);
}

TEST_CASE("align fails on an empty intersection") {
  auto corpus = ingest({doc({"a", "a"})}, 2);
  RawEmbeddings emb{{"zzz", {1.0}}};
  CHECK_THROWS_AS(align(corpus, emb), std::runtime_error);
}

TEST_CASE("split is deterministic and partitions the corpus") {
  std::vector<RawDocument> raw;
  for (int i = 0; i < 60; ++i) raw.push_back(doc({"w", "w", "v", "v"}));
  auto corpus = ingest(raw, 2);
  auto s1 = split(corpus, 10, 42);
  auto s2 = split(corpus, 10, 42);
  CHECK(s1.train.size() == 50);
  CHECK(s1.test.size() == 10);
  for (std::size_t i = 0; i < s1.test.size(); ++i) {
    CHECK(s1.test[i].doc_id == s2.test[i].doc_id);
  }
  std::multiset<int> ids;
  for (const auto& d : s1.train) ids.insert(d.doc_id);
  for (const auto& d : s1.test) ids.insert(d.doc_id);
  std::multiset<int> expected;
  for (const auto& d : corpus.train) expected.insert(d.doc_id);
  CHECK(ids == expected);

  auto s3 = split(corpus, 0, 7);
  CHECK(s3.test.empty());
  CHECK(s3.train.size() == 60);
  CHECK_THROWS_AS(split(corpus, 60, 1), std::invalid_argument);
}

TEST_CASE("corpus file reader handles labels") {
  TempFile f("corpus.txt", "Rivers\tThe river bank.\nno label doc\n");
  auto raw = read_corpus_file(f.path);
  REQUIRE(raw.size() == 2);
  CHECK(raw[0].second == "Rivers");
  CHECK(raw[0].first == std::vector<std::string>{"the", "river", "bank"});
  CHECK(raw[1].second.empty());
}

TEST_CASE("cache round-trips the corpus and embedding table") {
  auto corpus = ingest({doc({"a", "b", "a", "b"}), doc({"a", "b"})}, 2);
  RawEmbeddings emb{{"a", {1.0, 2.0}}, {"b", {3.0, 4.0}}};
  auto [aligned, table] = align(corpus, emb);
  TempFile f("cache.json", "");
  save_cache(f.path, aligned, &table);
  auto [loaded, loaded_table] = load_cache(f.path);
  CHECK(loaded.vocab.words == aligned.vocab.words);
  REQUIRE(loaded.train.size() == aligned.train.size());
  for (std::size_t i = 0; i < loaded.train.size(); ++i) {
    CHECK(loaded.train[i].tokens == aligned.train[i].tokens);
  }
  REQUIRE(loaded_table.has_value());
  CHECK(loaded_table->matrix == table.matrix);

  // Byte-stable on re-save.
  save_cache(f.path + ".2", aligned, &table);
  std::ifstream a(f.path), b(f.path + ".2");
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  std::remove((f.path + ".2").c_str());
}
