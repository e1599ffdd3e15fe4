#include "ghlda/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ghlda {

using nlohmann::json;

Vocabulary Vocabulary::from_words(std::vector<std::string> ws) {
  Vocabulary v;
  v.words = std::move(ws);
  for (std::size_t i = 0; i < v.words.size(); ++i) {
    v.index.emplace(v.words[i], static_cast<int>(i));
  }
  return v;
}

std::int64_t Corpus::total_train_tokens() const {
  std::int64_t n = 0;
  for (const auto& d : train) n += static_cast<std::int64_t>(d.tokens.size());
  return n;
}

std::vector<std::int64_t> Corpus::word_frequencies() const {
  std::vector<std::int64_t> freq(vocab.size(), 0);
  for (const auto& d : train) {
    for (int t : d.tokens) freq[t] += 1;
  }
  return freq;
}

Eigen::VectorXd EmbeddingTable::grand_mean() const {
  return matrix.colwise().mean().transpose();
}

std::vector<std::string> default_tokenizer(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
    if (b == e) continue;
    std::string w = tok.substr(b, e - b);
    std::transform(w.begin(), w.end(), w.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<RawDocument> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<RawDocument> docs;
  std::string line;
  while (std::getline(in, line)) {
    std::string label;
    auto tab = line.find('\t');
    std::string body = line;
    if (tab != std::string::npos) {
      label = line.substr(0, tab);
      body = line.substr(tab + 1);
    }
    auto toks = default_tokenizer(body);
    if (toks.empty() && label.empty()) continue;
    docs.push_back({std::move(toks), std::move(label)});
  }
  return docs;
}

Corpus ingest(const std::vector<RawDocument>& raw_documents, int min_count) {
  std::unordered_map<std::string, std::int64_t> freq;
  for (const auto& [toks, label] : raw_documents) {
    for (const auto& t : toks) freq[t] += 1;
  }
  std::vector<std::string> kept;
  for (const auto& [w, c] : freq) {
    if (c >= min_count) kept.push_back(w);
  }
  std::sort(kept.begin(), kept.end());
  Corpus corpus;
  corpus.vocab = Vocabulary::from_words(std::move(kept));
  int doc_id = 0;
  for (const auto& [toks, label] : raw_documents) {
    Document d;
    d.label = label;
    for (const auto& t : toks) {
      if (auto id = corpus.vocab.lookup(t)) d.tokens.push_back(*id);
    }
    if (d.tokens.empty()) continue;
    d.doc_id = doc_id++;
    corpus.train.push_back(std::move(d));
  }
  if (corpus.train.empty()) {
    throw std::runtime_error("ingest: corpus empty after frequency filtering");
  }
  return corpus;
}

RawEmbeddings load_embeddings(const std::string& path, EmbeddingFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  RawEmbeddings out;
  std::string line;
  int line_no = 0;
  int dim = -1;
  bool skip_header = format != EmbeddingFormat::glove_text;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (skip_header) {
      skip_header = false;  // "count dim" header
      continue;
    }
    std::istringstream is(line);
    std::string word;
    is >> word;
    std::vector<double> vec;
    std::string field;
    while (is >> field) {
      try {
        std::size_t used = 0;
        double x = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        vec.push_back(x);
      } catch (const std::exception&) {
        throw std::runtime_error("embedding parse error at line " +
                                 std::to_string(line_no) + ": non-numeric field '" +
                                 field + "'");
      }
    }
    if (vec.empty()) {
      throw std::runtime_error("embedding parse error at line " +
                               std::to_string(line_no) + ": no values");
    }
    if (dim < 0) dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != dim) {
      throw std::runtime_error("embedding parse error at line " +
                               std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " values, got " +
                               std::to_string(vec.size()));
    }
    out.emplace(std::move(word), std::move(vec));  // first occurrence wins
  }
  if (out.empty()) throw std::runtime_error("embedding file is empty: " + path);
  return out;
}

namespace {

std::vector<Document> reencode(const std::vector<Document>& docs,
                               const Vocabulary& old_vocab,
                               const Vocabulary& new_vocab, bool drop_empty) {
  std::vector<Document> out;
  for (const auto& d : docs) {
    Document nd;
    nd.doc_id = d.doc_id;
    nd.label = d.label;
    for (int t : d.tokens) {
      if (auto id = new_vocab.lookup(old_vocab.words[t])) nd.tokens.push_back(*id);
    }
    if (drop_empty && nd.tokens.empty()) continue;
    out.push_back(std::move(nd));
  }
  return out;
}

}  // namespace

std::pair<Corpus, EmbeddingTable> align(const Corpus& corpus,
                                        const RawEmbeddings& embeddings) {
  std::vector<std::string> kept;
  for (const auto& w : corpus.vocab.words) {
    if (embeddings.count(w)) kept.push_back(w);
  }
  if (kept.empty()) {
    throw std::runtime_error("align: vocabulary and embeddings do not intersect");
  }
  Corpus out;
  out.vocab = Vocabulary::from_words(kept);
  out.train = reencode(corpus.train, corpus.vocab, out.vocab, true);
  out.test = reencode(corpus.test, corpus.vocab, out.vocab, false);
  if (out.train.empty()) {
    throw std::runtime_error("align: no training documents survive the intersection");
  }
  const int dim = static_cast<int>(embeddings.begin()->second.size());
  EmbeddingTable table;
  table.dim = dim;
  table.matrix.resize(out.vocab.size(), dim);
  for (int v = 0; v < out.vocab.size(); ++v) {
    const auto& vec = embeddings.at(out.vocab.words[v]);
    for (int j = 0; j < dim; ++j) {
      if (!std::isfinite(vec[j])) {
        throw std::runtime_error("align: non-finite embedding for word " +
                                 out.vocab.words[v]);
      }
      table.matrix(v, j) = vec[j];
    }
  }
  return {std::move(out), std::move(table)};
}

Corpus split(const Corpus& corpus, int n_test, std::uint64_t seed) {
  std::vector<Document> all = corpus.train;
  for (const auto& d : corpus.test) all.push_back(d);
  if (n_test >= static_cast<int>(all.size())) {
    throw std::invalid_argument("split: n_test must be smaller than the corpus");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  Corpus out;
  out.vocab = corpus.vocab;
  const int n_train = static_cast<int>(all.size()) - n_test;
  out.train.assign(all.begin(), all.begin() + n_train);
  out.test.assign(all.begin() + n_train, all.end());
  return out;
}

namespace {
constexpr int kCacheVersion = 1;

json docs_to_json(const std::vector<Document>& docs) {
  json arr = json::array();
  for (const auto& d : docs) {
    arr.push_back({{"id", d.doc_id}, {"label", d.label}, {"tokens", d.tokens}});
  }
  return arr;
}

std::vector<Document> docs_from_json(const json& arr) {
  std::vector<Document> out;
  for (const auto& j : arr) {
    Document d;
    d.doc_id = j.at("id").get<int>();
    d.label = j.at("label").get<std::string>();
    d.tokens = j.at("tokens").get<std::vector<int>>();
    out.push_back(std::move(d));
  }
  return out;
}
}  // namespace

void save_cache(const std::string& path, const Corpus& corpus,
                const EmbeddingTable* table) {
  json j;
  j["format"] = "ghlda-corpus-cache";
  j["version"] = kCacheVersion;
  j["vocab"] = corpus.vocab.words;
  j["train"] = docs_to_json(corpus.train);
  j["test"] = docs_to_json(corpus.test);
  if (table != nullptr) {
    j["embedding_dim"] = table->dim;
    json rows = json::array();
    for (int v = 0; v < table->matrix.rows(); ++v) {
      std::vector<double> row(table->dim);
      for (int c = 0; c < table->dim; ++c) row[c] = table->matrix(v, c);
      rows.push_back(row);
    }
    j["embeddings"] = std::move(rows);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write cache file: " + path);
  out << j.dump() << "\n";
}

std::pair<Corpus, std::optional<EmbeddingTable>> load_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cache file: " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "ghlda-corpus-cache") {
    throw std::runtime_error("not a corpus cache file: " + path);
  }
  if (j.at("version").get<int>() > kCacheVersion) {
    throw std::runtime_error("cache file version is newer than this build: " + path);
  }
  Corpus corpus;
  corpus.vocab = Vocabulary::from_words(j.at("vocab").get<std::vector<std::string>>());
  corpus.train = docs_from_json(j.at("train"));
  corpus.test = docs_from_json(j.at("test"));
  std::optional<EmbeddingTable> table;
  if (j.contains("embeddings")) {
    EmbeddingTable t;
    t.dim = j.at("embedding_dim").get<int>();
    const auto& rows = j.at("embeddings");
    t.matrix.resize(rows.size(), t.dim);
    for (std::size_t v = 0; v < rows.size(); ++v) {
      auto row = rows[v].get<std::vector<double>>();
      for (int c = 0; c < t.dim; ++c) t.matrix(static_cast<int>(v), c) = row[c];
    }
    table = std::move(t);
  }
  return {std::move(corpus), std::move(table)};
}

}  // namespace ghlda
