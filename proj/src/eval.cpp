#include "ghlda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ghlda/rng.hpp"

namespace ghlda {

using nlohmann::json;

namespace {

std::vector<std::pair<std::string, double>> rank_words(
    const std::vector<std::int64_t>& counts, const Eigen::VectorXd& theta,
    const Vocabulary& vocab, int n) {
  std::vector<int> order;
  for (int v = 0; v < static_cast<int>(counts.size()); ++v) {
    if (counts[v] > 0) order.push_back(v);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    if (theta(a) != theta(b)) return theta(a) > theta(b);
    return a < b;
  });
  if (static_cast<int>(order.size()) > n) order.resize(n);
  std::vector<std::pair<std::string, double>> out;
  for (int v : order) {
    out.emplace_back(vocab.words[v], static_cast<double>(counts[v]));
  }
  return out;
}

}  // namespace

std::vector<TopicReport> top_words(const FlatModel& model, int n) {
  const auto& corpus = model.corpus();
  const int k_count = model.num_topics();
  std::vector<std::vector<std::int64_t>> counts(
      k_count, std::vector<std::int64_t>(corpus.vocab.size(), 0));
  const auto& z = model.assignments();
  for (std::size_t d = 0; d < z.size(); ++d) {
    for (std::size_t i = 0; i < z[d].size(); ++i) {
      counts[z[d][i]][corpus.train[d].tokens[i]] += 1;
    }
  }
  const Eigen::MatrixXd theta = model.topic_word_theta();
  std::vector<TopicReport> out;
  for (int k = 0; k < k_count; ++k) {
    TopicReport r;
    r.topic_id = k;
    r.assignment_count = std::accumulate(counts[k].begin(), counts[k].end(), std::int64_t{0});
    r.top_words = rank_words(counts[k], theta.row(k).transpose(), corpus.vocab, n);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TopicReport> top_words(const HierModel& model, int n) {
  const auto& corpus = model.corpus();
  std::map<int, std::vector<std::int64_t>> counts;
  const auto& levels = model.level_assignments();
  for (std::size_t d = 0; d < levels.size(); ++d) {
    for (std::size_t i = 0; i < levels[d].size(); ++i) {
      const int node = model.path_of(static_cast<int>(d))[levels[d][i]];
      auto it = counts.find(node);
      if (it == counts.end()) {
        it = counts.emplace(node, std::vector<std::int64_t>(corpus.vocab.size(), 0)).first;
      }
      it->second[corpus.train[d].tokens[i]] += 1;
    }
  }
  std::vector<TopicReport> out;
  for (int id : model.tree().node_ids()) {
    TopicReport r;
    r.topic_id = id;
    r.level = model.tree().node(id).level;
    auto it = counts.find(id);
    if (it != counts.end()) {
      r.assignment_count =
          std::accumulate(it->second.begin(), it->second.end(), std::int64_t{0});
      r.top_words = rank_words(it->second, model.node_theta(id), corpus.vocab, n);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::int64_t CooccurrenceStats::word_count(const std::string& w) const {
  auto it = word_windows.find(w);
  return it == word_windows.end() ? 0 : it->second;
}

std::int64_t CooccurrenceStats::pair_count(const std::string& a, const std::string& b) const {
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  auto it = pair_windows.find(key);
  return it == pair_windows.end() ? 0 : it->second;
}

CooccurrenceStats build_cooccurrence(const std::vector<std::vector<std::string>>& docs,
                                     int window_size) {
  CooccurrenceStats stats;
  auto add_window = [&](const std::set<std::string>& window) {
    stats.total_windows += 1;
    for (auto it = window.begin(); it != window.end(); ++it) {
      stats.word_windows[*it] += 1;
      for (auto jt = std::next(it); jt != window.end(); ++jt) {
        stats.pair_windows[{*it, *jt}] += 1;
      }
    }
  };
  for (const auto& doc : docs) {
    if (window_size <= 0) {
      if (!doc.empty()) add_window({doc.begin(), doc.end()});
    } else {
      for (std::size_t start = 0; start + window_size <= doc.size(); ++start) {
        add_window({doc.begin() + start, doc.begin() + start + window_size});
      }
      if (doc.size() < static_cast<std::size_t>(window_size) && !doc.empty()) {
        add_window({doc.begin(), doc.end()});
      }
    }
  }
  return stats;
}

PmiResult pmi_coherence(const std::vector<TopicReport>& topics,
                        const CooccurrenceStats& cooc, int top_n, double epsilon) {
  if (top_n < 2) throw std::invalid_argument("pmi_coherence: top_n must be >= 2");
  if (cooc.total_windows <= 0) throw std::invalid_argument("pmi_coherence: empty reference");
  const double total = static_cast<double>(cooc.total_windows);
  const double eps = epsilon < 0.0 ? 1.0 / total : epsilon;
  PmiResult result;
  double sum = 0.0;
  int resolvable_topics = 0;
  for (const auto& topic : topics) {
    std::vector<std::string> words;
    int absent = 0;
    for (const auto& [w, score] : topic.top_words) {
      if (static_cast<int>(words.size()) + absent >= top_n) break;
      if (cooc.word_count(w) > 0) {
        words.push_back(w);
      } else {
        ++absent;
      }
    }
    result.skipped_pairs += absent;
    if (words.size() < 2) {
      result.per_topic.push_back(std::nullopt);
      continue;
    }
    double acc = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
      for (std::size_t j = i + 1; j < words.size(); ++j) {
        const double pi = cooc.word_count(words[i]) / total;
        const double pj = cooc.word_count(words[j]) / total;
        const double pij = cooc.pair_count(words[i], words[j]) / total;
        acc += std::log((pij + eps) / (pi * pj));
        ++pairs;
      }
    }
    const double score = acc / pairs;
    result.per_topic.push_back(score);
    sum += score;
    ++resolvable_topics;
  }
  result.mean = resolvable_topics > 0 ? sum / resolvable_topics : 0.0;
  return result;
}

namespace {

std::vector<PolysemyEntry> finalize_polysemy(
    std::map<int, std::map<std::pair<int, int>, std::int64_t>>& by_word,
    const Vocabulary& vocab, int min_count, bool hierarchical) {
  std::vector<PolysemyEntry> out;
  for (auto& [v, groups] : by_word) {
    std::int64_t total = 0;
    for (const auto& [key, c] : groups) total += c;
    if (total < min_count) continue;
    PolysemyEntry e;
    e.word = vocab.words[v];
    e.total = total;
    for (const auto& [key, c] : groups) {
      PolysemyGroup g;
      if (hierarchical) {
        g.path_leaf = key.first;
        g.level = key.second;
      } else {
        g.topic = key.first;
      }
      g.count = c;
      e.groups.push_back(g);
    }
    std::sort(e.groups.begin(), e.groups.end(),
              [](const PolysemyGroup& a, const PolysemyGroup& b) { return a.count > b.count; });
    int heavy = 0;
    for (const auto& g : e.groups) {
      if (static_cast<double>(g.count) >= 0.05 * static_cast<double>(total)) ++heavy;
    }
    e.flagged = heavy >= 2;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::vector<PolysemyEntry> polysemy_report(const FlatModel& model, int min_count) {
  std::map<int, std::map<std::pair<int, int>, std::int64_t>> by_word;
  const auto& z = model.assignments();
  const auto& corpus = model.corpus();
  for (std::size_t d = 0; d < z.size(); ++d) {
    for (std::size_t n = 0; n < z[d].size(); ++n) {
      by_word[corpus.train[d].tokens[n]][{z[d][n], -1}] += 1;
    }
  }
  return finalize_polysemy(by_word, corpus.vocab, min_count, false);
}

std::vector<PolysemyEntry> polysemy_report(const HierModel& model, int min_count) {
  std::map<int, std::map<std::pair<int, int>, std::int64_t>> by_word;
  const auto& levels = model.level_assignments();
  const auto& corpus = model.corpus();
  for (std::size_t d = 0; d < levels.size(); ++d) {
    const auto& path = model.path_of(static_cast<int>(d));
    const int leaf = path.back();
    for (std::size_t n = 0; n < levels[d].size(); ++n) {
      by_word[corpus.train[d].tokens[n]][{leaf, levels[d][n]}] += 1;
    }
  }
  return finalize_polysemy(by_word, corpus.vocab, min_count, true);
}

// ---------------------------------------------------------------------------
// Left-to-right held-out likelihood

namespace {

struct PositionEstimate {
  double mean;
  double se2_log;  // squared standard error of log(mean)
};

PositionEstimate summarize(const std::vector<double>& p) {
  const double r = static_cast<double>(p.size());
  double mean = 0.0;
  for (double x : p) mean += x;
  mean /= r;
  double var = 0.0;
  for (double x : p) var += (x - mean) * (x - mean);
  var = p.size() > 1 ? var / (r - 1.0) : 0.0;
  const double se2 = var / r;
  return {mean, mean > 0.0 ? se2 / (mean * mean) : 0.0};
}

double gem_log_weight_for(const std::vector<int>& counts, int l, double m, double b) {
  auto at_least = [&](int i) {
    int s = 0;
    for (std::size_t j = i; j < counts.size(); ++j) s += counts[j];
    return static_cast<double>(s);
  };
  double lw = std::log(m * b + counts[l]) - std::log(b + at_least(l));
  for (int i = 0; i < l; ++i) {
    lw += std::log((1.0 - m) * b + at_least(i + 1)) - std::log(b + at_least(i));
  }
  return lw;
}

}  // namespace

HeldoutResult left_to_right(const FlatModel& model, const std::vector<Document>& docs,
                            int particles, std::uint64_t seed) {
  if (particles < 1) throw std::invalid_argument("left_to_right: particles must be >= 1");
  const Eigen::MatrixXd theta = model.topic_word_theta();
  const int k_count = model.num_topics();
  const double alpha = model.hyperparams().alpha;
  HeldoutResult result;
  result.particles = particles;
  result.seed = seed;
  for (std::size_t di = 0; di < docs.size(); ++di) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * (di + 1));
    const auto& tokens = docs[di].tokens;
    std::vector<std::vector<int>> counts(particles, std::vector<int>(k_count, 0));
    std::vector<std::vector<int>> z(particles);
    double ll = 0.0;
    double se2 = 0.0;
    std::vector<double> pvals(particles);
    std::vector<double> w(k_count);
    for (std::size_t n = 0; n < tokens.size(); ++n) {
      const int v = tokens[n];
      for (int r = 0; r < particles; ++r) {
        auto& cnt = counts[r];
        auto& zr = z[r];
        for (std::size_t i = 0; i < n; ++i) {
          cnt[zr[i]] -= 1;
          for (int k = 0; k < k_count; ++k) {
            w[k] = (alpha + cnt[k]) * theta(k, tokens[i]);
          }
          zr[i] = sample_categorical(w, rng);
          cnt[zr[i]] += 1;
        }
        double p = 0.0;
        const double denom = k_count * alpha + static_cast<double>(n);
        for (int k = 0; k < k_count; ++k) {
          w[k] = (alpha + cnt[k]) * theta(k, v);
          p += w[k] / denom;
        }
        pvals[r] = p;
        const int znew = sample_categorical(w, rng);
        zr.push_back(znew);
        cnt[znew] += 1;
      }
      const auto est = summarize(pvals);
      ll += std::log(est.mean);
      se2 += est.se2_log;
    }
    result.per_doc.push_back(ll);
    result.per_doc_se.push_back(std::sqrt(se2));
  }
  result.mean = result.per_doc.empty()
                    ? 0.0
                    : std::accumulate(result.per_doc.begin(), result.per_doc.end(), 0.0) /
                          static_cast<double>(result.per_doc.size());
  return result;
}

HeldoutResult left_to_right(const HierModel& model, const std::vector<Document>& docs,
                            int particles, std::uint64_t seed) {
  if (particles < 1) throw std::invalid_argument("left_to_right: particles must be >= 1");
  const int depth = model.depth();
  const double m = model.hyperparams().gem_m;
  const double b = model.hyperparams().gem_b;
  const auto proposals = model.tree().enumerate_paths(false);
  const int n_paths = static_cast<int>(proposals.size());
  std::vector<double> path_prior(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    path_prior[p] = model.tree().path_log_prior(proposals[p]);
  }
  // theta rows for every node appearing on a path.
  std::map<int, Eigen::VectorXd> theta;
  for (const auto& p : proposals) {
    for (int id : p.nodes) {
      if (!theta.count(id)) theta.emplace(id, model.node_theta(id));
    }
  }
  HeldoutResult result;
  result.particles = particles;
  result.seed = seed;
  for (std::size_t di = 0; di < docs.size(); ++di) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * (di + 1));
    const auto& tokens = docs[di].tokens;
    std::vector<int> path(particles);
    std::vector<std::vector<int>> counts(particles, std::vector<int>(depth, 0));
    std::vector<std::vector<int>> z(particles);
    for (int r = 0; r < particles; ++r) {
      path[r] = sample_log_categorical(path_prior, rng);
    }
    double ll = 0.0;
    double se2 = 0.0;
    std::vector<double> pvals(particles);
    std::vector<double> w(depth);
    std::vector<double> path_score(n_paths);
    for (std::size_t n = 0; n < tokens.size(); ++n) {
      const int v = tokens[n];
      for (int r = 0; r < particles; ++r) {
        auto& cnt = counts[r];
        auto& zr = z[r];
        const auto& nodes_r = proposals[path[r]].nodes;
        for (std::size_t i = 0; i < n; ++i) {
          cnt[zr[i]] -= 1;
          for (int l = 0; l < depth; ++l) {
            w[l] = std::exp(gem_log_weight_for(cnt, l, m, b)) * theta.at(nodes_r[l])(tokens[i]);
          }
          zr[i] = sample_categorical(w, rng);
          cnt[zr[i]] += 1;
        }
        if (n > 0) {
          for (int p = 0; p < n_paths; ++p) {
            double s = path_prior[p];
            for (std::size_t i = 0; i < n; ++i) {
              s += std::log(theta.at(proposals[p].nodes[zr[i]])(tokens[i]));
            }
            path_score[p] = s;
          }
          path[r] = sample_log_categorical(path_score, rng);
        }
        const auto& nodes = proposals[path[r]].nodes;
        double gem_total = 0.0;
        for (int l = 0; l < depth; ++l) {
          w[l] = std::exp(gem_log_weight_for(cnt, l, m, b));
          gem_total += w[l];
        }
        double p_tok = 0.0;
        for (int l = 0; l < depth; ++l) {
          p_tok += (w[l] / gem_total) * theta.at(nodes[l])(v);
          w[l] *= theta.at(nodes[l])(v);
        }
        pvals[r] = p_tok;
        const int znew = sample_categorical(w, rng);
        zr.push_back(znew);
        cnt[znew] += 1;
      }
      const auto est = summarize(pvals);
      ll += std::log(est.mean);
      se2 += est.se2_log;
    }
    result.per_doc.push_back(ll);
    result.per_doc_se.push_back(std::sqrt(se2));
  }
  result.mean = result.per_doc.empty()
                    ? 0.0
                    : std::accumulate(result.per_doc.begin(), result.per_doc.end(), 0.0) /
                          static_cast<double>(result.per_doc.size());
  return result;
}

json heldout_to_json(const HeldoutResult& r) {
  return json{{"per_document", r.per_doc},
              {"per_document_se", r.per_doc_se},
              {"mean", r.mean},
              {"particles", r.particles},
              {"seed", r.seed}};
}

json pmi_to_json(const PmiResult& r, const std::vector<TopicReport>& topics) {
  json per = json::array();
  for (std::size_t i = 0; i < r.per_topic.size(); ++i) {
    json words = json::array();
    for (const auto& [w, score] : topics[i].top_words) {
      words.push_back({{"word", w}, {"score", score}});
    }
    json entry = {{"topic", topics[i].topic_id}, {"top_words", std::move(words)}};
    if (topics[i].level >= 0) entry["level"] = topics[i].level;
    if (r.per_topic[i].has_value()) {
      entry["pmi"] = *r.per_topic[i];
    } else {
      entry["pmi"] = nullptr;
    }
    per.push_back(std::move(entry));
  }
  return json{{"per_topic", std::move(per)},
              {"mean_pmi", r.mean},
              {"skipped_words", r.skipped_pairs}};
}

json polysemy_to_json(const std::vector<PolysemyEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    json groups = json::array();
    for (const auto& g : e.groups) {
      json jg = {{"count", g.count}};
      if (g.topic >= 0) jg["topic"] = g.topic;
      if (g.path_leaf >= 0) {
        jg["path_leaf"] = g.path_leaf;
        jg["level"] = g.level;
      }
      groups.push_back(std::move(jg));
    }
    arr.push_back({{"word", e.word},
                   {"total", e.total},
                   {"flagged", e.flagged},
                   {"groups", std::move(groups)}});
  }
  return arr;
}

}  // namespace ghlda
