#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ghlda {

struct Vocabulary {
  std::vector<std::string> words;
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(words.size()); }
  std::optional<int> lookup(const std::string& w) const {
    auto it = index.find(w);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
  static Vocabulary from_words(std::vector<std::string> ws);
};

struct Document {
  std::vector<int> tokens;
  int doc_id = -1;
  std::string label;  // optional category
};

struct Corpus {
  std::vector<Document> train;
  std::vector<Document> test;
  Vocabulary vocab;

  std::int64_t total_train_tokens() const;
  // Training-corpus frequency of every vocab word.
  std::vector<std::int64_t> word_frequencies() const;
};

struct EmbeddingTable {
  Eigen::MatrixXd matrix;  // V rows, dim columns
  int dim = 0;

  Eigen::VectorXd row(int v) const { return matrix.row(v).transpose(); }
  Eigen::VectorXd grand_mean() const;
};

using RawDocument = std::pair<std::vector<std::string>, std::string>;  // tokens, label
using RawEmbeddings = std::map<std::string, std::vector<double>>;

enum class EmbeddingFormat { glove_text, word2vec_text, fasttext_text };

// Lowercase, split on whitespace, strip surrounding punctuation.
std::vector<std::string> default_tokenizer(const std::string& line);

// Corpus file: one document per line, optional leading "label<TAB>".
std::vector<RawDocument> read_corpus_file(const std::string& path);

Corpus ingest(const std::vector<RawDocument>& raw_documents, int min_count);

RawEmbeddings load_embeddings(const std::string& path, EmbeddingFormat format);

std::pair<Corpus, EmbeddingTable> align(const Corpus& corpus, const RawEmbeddings& embeddings);

// Deterministic shuffle by seed; last n_test documents become the test set.
Corpus split(const Corpus& corpus, int n_test, std::uint64_t seed);

// Versioned corpus cache so training never re-tokenizes; the embedding
// table travels with the corpus when present.
void save_cache(const std::string& path, const Corpus& corpus,
                const EmbeddingTable* table);
std::pair<Corpus, std::optional<EmbeddingTable>> load_cache(const std::string& path);

}  // namespace ghlda
