// Command-line front end: ingest, train, eval, export, topics, polysemy.
// Exit codes: 0 success, 1 runtime failure, 2 configuration/input error.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ghlda/corpus.hpp"
#include "ghlda/eval.hpp"
#include "ghlda/samplers.hpp"
#include "ghlda/tree.hpp"

using nlohmann::json;
using namespace ghlda;

namespace {

// Thrown for anything the user got wrong (config, paths, formats).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string model = "lda";
  std::string corpus_path;
  std::string cache_path;
  std::string embeddings_path;
  std::string embedding_format = "glove";
  int min_count = 50;
  int n_test = 0;
  std::uint64_t split_seed = 1;
  Hyperparams hp;
  int epochs = 100;
  std::uint64_t seed = 1;
  int checkpoint_interval = 0;
  int freeze_new_leaves_for = 5;
  bool shuffle_docs = false;
  std::string checkpoint_path;
  std::string diagnostics_path;  // empty or "-" means stdout
};

RunConfig load_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  c.model = j.value("model", c.model);
  c.corpus_path = j.value("corpus", c.corpus_path);
  c.cache_path = j.value("cache", c.cache_path);
  c.embeddings_path = j.value("embeddings", c.embeddings_path);
  c.embedding_format = j.value("embedding_format", c.embedding_format);
  c.min_count = j.value("min_count", c.min_count);
  c.n_test = j.value("n_test", c.n_test);
  c.split_seed = j.value("split_seed", c.split_seed);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
  c.freeze_new_leaves_for = j.value("freeze_new_leaves_for", c.freeze_new_leaves_for);
  c.shuffle_docs = j.value("shuffle_docs", c.shuffle_docs);
  c.checkpoint_path = j.value("checkpoint", c.checkpoint_path);
  c.diagnostics_path = j.value("diagnostics", c.diagnostics_path);
  c.hp = Hyperparams::from_json(j);
  return c;
}

EmbeddingFormat parse_embedding_format(const std::string& s) {
  if (s == "glove") return EmbeddingFormat::glove_text;
  if (s == "word2vec") return EmbeddingFormat::word2vec_text;
  if (s == "fasttext") return EmbeddingFormat::fasttext_text;
  throw ConfigError("unknown embedding format: " + s +
                    " (expected glove, word2vec, or fasttext)");
}

void require_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(what + " not found: " + path);
}

struct LoadedData {
  Corpus corpus;
  std::optional<EmbeddingTable> table;
};

LoadedData load_data(const RunConfig& c) {
  if (c.cache_path.empty()) throw ConfigError("a corpus cache path is required (--cache)");
  require_file(c.cache_path, "corpus cache");
  auto [corpus, table] = load_cache(c.cache_path);
  return {std::move(corpus), std::move(table)};
}

// A trained model of either family plus the data it was built on.
struct LoadedModel {
  LoadedData data;
  std::optional<FlatModel> flat;
  std::optional<HierModel> hier;

  ModelKind kind() const { return flat ? flat->kind() : hier->kind(); }
};

LoadedModel load_model(const std::string& checkpoint_path, const RunConfig& c) {
  if (checkpoint_path.empty()) throw ConfigError("a checkpoint path is required (--checkpoint)");
  require_file(checkpoint_path, "checkpoint");
  LoadedModel out{load_data(c), std::nullopt, std::nullopt};
  const json ckpt = read_checkpoint_file(checkpoint_path);
  const ModelKind kind = model_kind_from_string(ckpt.at("model").get<std::string>());
  const EmbeddingTable* table = out.data.table ? &*out.data.table : nullptr;
  if (is_gaussian(kind) && table == nullptr) {
    throw ConfigError("checkpoint is a Gaussian model but the cache has no embeddings");
  }
  if (is_hierarchical(kind)) {
    out.hier.emplace(HierModel::from_checkpoint(ckpt, out.data.corpus, table));
  } else {
    out.flat.emplace(FlatModel::from_checkpoint(ckpt, out.data.corpus, table));
  }
  return out;
}

std::ofstream open_output(const std::string& path, const std::string& what) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + what + ": " + path);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& c, const std::string& out_path) {
  if (c.corpus_path.empty()) throw ConfigError("a corpus file is required (--corpus)");
  require_file(c.corpus_path, "corpus file");
  const bool gaussian = is_gaussian(model_kind_from_string(c.model));
  if (gaussian && c.embeddings_path.empty()) {
    throw ConfigError("model " + c.model + " requires an embedding file (--embeddings)");
  }
  if (!c.embeddings_path.empty()) require_file(c.embeddings_path, "embedding file");
  if (out_path.empty()) throw ConfigError("an output cache path is required (--output)");

  Corpus corpus = ingest(read_corpus_file(c.corpus_path), c.min_count);
  std::optional<EmbeddingTable> table;
  if (!c.embeddings_path.empty()) {
    auto raw = load_embeddings(c.embeddings_path, parse_embedding_format(c.embedding_format));
    auto [aligned, t] = align(corpus, raw);
    corpus = std::move(aligned);
    table = std::move(t);
  }
  if (c.n_test > 0) corpus = split(corpus, c.n_test, c.split_seed);
  save_cache(out_path, corpus, table ? &*table : nullptr);
  std::cout << "V=" << corpus.vocab.size() << ", D_train=" << corpus.train.size()
            << ", D_test=" << corpus.test.size()
            << ", tokens=" << corpus.total_train_tokens() << "\n";
  return 0;
}

int cmd_train(const RunConfig& c) {
  const ModelKind kind = model_kind_from_string(c.model);
  LoadedData data = load_data(c);
  const EmbeddingTable* table = data.table ? &*data.table : nullptr;
  if (is_gaussian(kind) && table == nullptr) {
    throw ConfigError("model " + c.model + " requires a cache built with embeddings");
  }
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.checkpoint_path.empty()) throw ConfigError("a checkpoint path is required (--checkpoint)");

  std::ofstream diag_file;
  TrainOptions opts;
  opts.epochs = c.epochs;
  opts.freeze_new_leaves_for = c.freeze_new_leaves_for;
  opts.shuffle_docs = c.shuffle_docs;
  opts.checkpoint_interval = c.checkpoint_interval;
  opts.checkpoint_path = c.checkpoint_path;
  if (c.diagnostics_path.empty() || c.diagnostics_path == "-") {
    opts.diagnostics = &std::cout;
  } else {
    diag_file = open_output(c.diagnostics_path, "diagnostics file");
    opts.diagnostics = &diag_file;
  }

  if (is_hierarchical(kind)) {
    HierModel model(kind, data.corpus, table, c.hp, c.seed);
    model.init();
    model.train(opts);
    write_checkpoint_file(c.checkpoint_path, model.checkpoint());
  } else {
    FlatModel model(kind, data.corpus, table, c.hp, c.seed);
    model.init();
    model.train(opts);
    write_checkpoint_file(c.checkpoint_path, model.checkpoint());
  }
  return 0;
}

int cmd_resume(const RunConfig& c, const std::string& checkpoint_path) {
  LoadedModel m = load_model(checkpoint_path, c);
  std::ofstream diag_file;
  TrainOptions opts;
  opts.epochs = c.epochs;
  opts.freeze_new_leaves_for = c.freeze_new_leaves_for;
  opts.shuffle_docs = c.shuffle_docs;
  opts.checkpoint_interval = c.checkpoint_interval;
  opts.checkpoint_path = c.checkpoint_path.empty() ? checkpoint_path : c.checkpoint_path;
  if (c.diagnostics_path.empty() || c.diagnostics_path == "-") {
    opts.diagnostics = &std::cout;
  } else {
    diag_file = open_output(c.diagnostics_path, "diagnostics file");
    opts.diagnostics = &diag_file;
  }
  if (m.hier) {
    m.hier->train(opts);
    write_checkpoint_file(opts.checkpoint_path, m.hier->checkpoint());
  } else {
    m.flat->train(opts);
    write_checkpoint_file(opts.checkpoint_path, m.flat->checkpoint());
  }
  return 0;
}

int cmd_eval(const RunConfig& c, const std::string& checkpoint_path, bool heldout, bool pmi,
             bool polysemy, int particles, int top_n, int min_count, int window_size,
             std::uint64_t eval_seed, const std::string& out_path) {
  if (!heldout && !pmi && !polysemy) {
    throw ConfigError("select at least one of --heldout, --pmi, --polysemy");
  }
  LoadedModel m = load_model(checkpoint_path, c);
  json report;
  report["model"] = to_string(m.kind());
  if (heldout) {
    const auto& docs = m.data.corpus.test.empty() ? m.data.corpus.train : m.data.corpus.test;
    HeldoutResult r = m.hier ? left_to_right(*m.hier, docs, particles, eval_seed)
                             : left_to_right(*m.flat, docs, particles, eval_seed);
    report["heldout"] = heldout_to_json(r);
  }
  if (pmi || polysemy) {
    auto topics = m.hier ? top_words(*m.hier, top_n) : top_words(*m.flat, top_n);
    if (pmi) {
      std::vector<std::vector<std::string>> reference;
      for (const auto& d : m.data.corpus.train) {
        std::vector<std::string> words;
        for (int t : d.tokens) words.push_back(m.data.corpus.vocab.words[t]);
        reference.push_back(std::move(words));
      }
      auto cooc = build_cooccurrence(reference, window_size);
      report["pmi"] = pmi_to_json(pmi_coherence(topics, cooc, top_n), topics);
    }
    if (polysemy) {
      auto entries = m.hier ? polysemy_report(*m.hier, min_count)
                            : polysemy_report(*m.flat, min_count);
      report["polysemy"] = polysemy_to_json(entries);
    }
  }
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    open_output(out_path, "report") << report.dump(2) << "\n";
  }
  return 0;
}

json topics_to_json(const LoadedModel& m, int top_n) {
  auto topics = m.hier ? top_words(*m.hier, top_n) : top_words(*m.flat, top_n);
  json arr = json::array();
  for (const auto& t : topics) {
    json words = json::array();
    for (const auto& [w, score] : t.top_words) {
      words.push_back({{"word", w}, {"count", score}});
    }
    json entry = {{"topic", t.topic_id},
                  {"assignment_count", t.assignment_count},
                  {"top_words", std::move(words)}};
    if (t.level >= 0) {
      entry["level"] = t.level;
      entry["parent"] = m.hier->tree().node(t.topic_id).parent;
    }
    arr.push_back(std::move(entry));
  }
  return json{{"model", to_string(m.kind())}, {"topics", std::move(arr)}};
}

std::string dot_label(const TopicReport& t, int width) {
  std::ostringstream os;
  int used = 0;
  for (const auto& [w, score] : t.top_words) {
    if (used == width) break;
    if (used > 0) os << "\\n";
    os << w;
    ++used;
  }
  if (used == 0) os << "(empty)";
  return os.str();
}

std::string export_dot_text(const LoadedModel& m) {
  auto topics = m.hier ? top_words(*m.hier, 5) : top_words(*m.flat, 5);
  if (m.hier) {
    std::map<int, const TopicReport*> by_id;
    for (const auto& t : topics) by_id.emplace(t.topic_id, &t);
    return m.hier->tree().export_dot(
        [&](const TopicNode& n) { return dot_label(*by_id.at(n.id), 5); });
  }
  // Flat models: star graph from a virtual root.
  std::ostringstream os;
  os << "digraph topics {\n  node [shape=box];\n  root [label=\"corpus\"];\n";
  for (const auto& t : topics) {
    os << "  n" << t.topic_id << " [label=\"" << dot_label(t, 5) << "\"];\n";
  }
  for (const auto& t : topics) {
    os << "  root -> n" << t.topic_id << ";\n";
  }
  os << "}\n";
  return os.str();
}

int cmd_export(const RunConfig& c, const std::string& checkpoint_path,
               const std::string& format, const std::string& out_path) {
  if (format != "dot" && format != "json") {
    throw ConfigError("unknown export format: " + format + " (expected dot or json)");
  }
  LoadedModel m = load_model(checkpoint_path, c);
  std::string text = format == "dot" ? export_dot_text(m) : topics_to_json(m, 10).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    open_output(out_path, "export") << text;
  }
  return 0;
}

int cmd_topics(const RunConfig& c, const std::string& checkpoint_path, int top_n) {
  LoadedModel m = load_model(checkpoint_path, c);
  auto topics = m.hier ? top_words(*m.hier, top_n) : top_words(*m.flat, top_n);
  for (const auto& t : topics) {
    std::cout << (m.hier ? "node " : "topic ") << t.topic_id;
    if (t.level >= 0) std::cout << " (level " << t.level << ")";
    std::cout << " [" << t.assignment_count << " tokens]:";
    for (const auto& [w, score] : t.top_words) std::cout << " " << w;
    std::cout << "\n";
  }
  return 0;
}

int cmd_polysemy(const RunConfig& c, const std::string& checkpoint_path, int min_count) {
  LoadedModel m = load_model(checkpoint_path, c);
  auto entries =
      m.hier ? polysemy_report(*m.hier, min_count) : polysemy_report(*m.flat, min_count);
  for (const auto& e : entries) {
    if (!e.flagged) continue;
    std::cout << e.word << " (" << e.total << " tokens):";
    for (const auto& g : e.groups) {
      if (g.path_leaf >= 0) {
        std::cout << " [leaf " << g.path_leaf << " level " << g.level << ": " << g.count << "]";
      } else {
        std::cout << " [topic " << g.topic << ": " << g.count << "]";
      }
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("GHLDA_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) Eigen::setNbThreads(n);
  }

  CLI::App app{"Hierarchical Gaussian topic modeling over word embeddings"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_path, format = "dot";
  bool heldout = false, pmi = false, polysemy = false;
  int particles = 20, top_n = 10, min_count_report = 10, window_size = 0;
  std::uint64_t eval_seed = 1;

  // Flag values land here; only flags the user actually passed override the
  // config file.
  RunConfig flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--model", flags.model, "lda, glda, hlda, or ghlda");
    sub->add_option("--cache", flags.cache_path, "corpus cache file");
    sub->add_option("--seed", flags.seed, "sampler seed");
    return sub;
  };
  auto merge = [&](CLI::App* sub) {
    RunConfig c = load_config(config_path);
    for (const auto* opt : sub->get_options()) {
      if (opt->count() == 0) continue;
      const std::string name = opt->get_name();
      if (name == "--model") c.model = flags.model;
      if (name == "--cache") c.cache_path = flags.cache_path;
      if (name == "--seed") c.seed = flags.seed;
      if (name == "--corpus") c.corpus_path = flags.corpus_path;
      if (name == "--embeddings") c.embeddings_path = flags.embeddings_path;
      if (name == "--embedding-format") c.embedding_format = flags.embedding_format;
      if (name == "--min-count") c.min_count = flags.min_count;
      if (name == "--n-test") c.n_test = flags.n_test;
      if (name == "--split-seed") c.split_seed = flags.split_seed;
      if (name == "--epochs") c.epochs = flags.epochs;
      if (name == "--checkpoint-interval") c.checkpoint_interval = flags.checkpoint_interval;
      if (name == "--freeze-epochs") c.freeze_new_leaves_for = flags.freeze_new_leaves_for;
      if (name == "--shuffle-docs") c.shuffle_docs = flags.shuffle_docs;
      if (name == "--checkpoint-out") c.checkpoint_path = flags.checkpoint_path;
      if (name == "--diagnostics") c.diagnostics_path = flags.diagnostics_path;
      if (name == "--topics") c.hp.num_topics = flags.hp.num_topics;
      if (name == "--depth") c.hp.depth = flags.hp.depth;
      if (name == "--branch-spec") c.hp.branch_spec = flags.hp.branch_spec;
    }
    return c;
  };

  auto* ingest = add_common(app.add_subcommand("ingest", "Tokenize, filter, and cache a corpus"));
  ingest->add_option("--corpus", flags.corpus_path, "corpus text file (one doc per line)");
  ingest->add_option("--embeddings", flags.embeddings_path, "embedding text file");
  ingest->add_option("--embedding-format", flags.embedding_format, "glove, word2vec, fasttext");
  ingest->add_option("--min-count", flags.min_count, "minimum word frequency");
  ingest->add_option("--n-test", flags.n_test, "held-out document count");
  ingest->add_option("--split-seed", flags.split_seed, "shuffle seed for the split");
  ingest->add_option("--output", out_path, "cache file to write");

  auto* train = add_common(app.add_subcommand("train", "Run the collapsed Gibbs sampler"));
  train->add_option("--epochs", flags.epochs, "training epochs");
  train->add_option("--topics", flags.hp.num_topics, "topic count (flat models)");
  train->add_option("--depth", flags.hp.depth, "tree depth (hierarchical models)");
  train->add_option("--branch-spec", flags.hp.branch_spec, "initial tree branching")
      ->delimiter(',');
  train->add_option("--checkpoint-out", flags.checkpoint_path, "checkpoint file to write");
  train->add_option("--checkpoint-interval", flags.checkpoint_interval,
                    "epochs between periodic checkpoints");
  train->add_option("--freeze-epochs", flags.freeze_new_leaves_for,
                    "epochs before new tree branches may open");
  train->add_flag("--shuffle-docs", flags.shuffle_docs, "shuffle document order per epoch");
  train->add_option("--diagnostics", flags.diagnostics_path, "JSONL diagnostics file (- = stdout)");
  train->add_option("--resume", checkpoint_path, "checkpoint to resume from");

  auto* eval = add_common(app.add_subcommand("eval", "Evaluate a trained checkpoint"));
  eval->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  eval->add_flag("--heldout", heldout, "left-to-right held-out likelihood");
  eval->add_flag("--pmi", pmi, "PMI topic coherence");
  eval->add_flag("--polysemy", polysemy, "multi-topic word report");
  eval->add_option("--particles", particles, "particles for --heldout");
  eval->add_option("--top-n", top_n, "top words per topic");
  eval->add_option("--min-count", min_count_report, "minimum tokens for --polysemy");
  eval->add_option("--window-size", window_size, "PMI window (0 = whole document)");
  eval->add_option("--eval-seed", eval_seed, "seed for the held-out estimator");
  eval->add_option("--output", out_path, "report file (default stdout)");

  auto* exp = add_common(app.add_subcommand("export", "Export the topic structure"));
  exp->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  exp->add_option("--format", format, "dot or json");
  exp->add_option("--output", out_path, "output file (default stdout)");

  auto* topics = add_common(app.add_subcommand("topics", "Print top words per topic"));
  topics->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  topics->add_option("--top-n", top_n, "top words per topic");

  auto* poly = add_common(app.add_subcommand("polysemy", "Print words split across topics"));
  poly->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  poly->add_option("--min-count", min_count_report, "minimum tokens per word");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(ingest)) return cmd_ingest(merge(ingest), out_path);
    if (app.got_subcommand(train)) {
      const RunConfig c = merge(train);
      return checkpoint_path.empty() ? cmd_train(c) : cmd_resume(c, checkpoint_path);
    }
    if (app.got_subcommand(eval)) {
      return cmd_eval(merge(eval), checkpoint_path, heldout, pmi, polysemy, particles, top_n,
                      min_count_report, window_size, eval_seed, out_path);
    }
    if (app.got_subcommand(exp)) return cmd_export(merge(exp), checkpoint_path, format, out_path);
    if (app.got_subcommand(topics)) return cmd_topics(merge(topics), checkpoint_path, top_n);
    if (app.got_subcommand(poly)) return cmd_polysemy(merge(poly), checkpoint_path,
                                                      min_count_report);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
