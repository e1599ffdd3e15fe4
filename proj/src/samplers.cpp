#include "ghlda/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ghlda/rng.hpp"

namespace ghlda {

using nlohmann::json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::lda: return "lda";
    case ModelKind::glda: return "glda";
    case ModelKind::hlda: return "hlda";
    case ModelKind::ghlda: return "ghlda";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "lda") return ModelKind::lda;
  if (s == "glda") return ModelKind::glda;
  if (s == "hlda") return ModelKind::hlda;
  if (s == "ghlda") return ModelKind::ghlda;
  throw std::invalid_argument("unknown model kind: " + s);
}

json Hyperparams::to_json() const {
  return json{{"alpha", alpha},
              {"beta", beta},
              {"gem_m", gem_m},
              {"gem_b", gem_b},
              {"gamma", gamma},
              {"kappa", kappa},
              {"nu", nu},
              {"psi_scale", psi_scale},
              {"level_psi_ratios", level_psi_ratios},
              {"level_eta", level_eta},
              {"depth", depth},
              {"num_topics", num_topics},
              {"branch_spec", branch_spec}};
}

Hyperparams Hyperparams::from_json(const json& j) {
  Hyperparams hp;
  hp.alpha = j.value("alpha", hp.alpha);
  hp.beta = j.value("beta", hp.beta);
  hp.gem_m = j.value("gem_m", hp.gem_m);
  hp.gem_b = j.value("gem_b", hp.gem_b);
  hp.gamma = j.value("gamma", hp.gamma);
  hp.kappa = j.value("kappa", hp.kappa);
  hp.nu = j.value("nu", hp.nu);
  hp.psi_scale = j.value("psi_scale", hp.psi_scale);
  hp.level_psi_ratios = j.value("level_psi_ratios", hp.level_psi_ratios);
  hp.level_eta = j.value("level_eta", hp.level_eta);
  hp.depth = j.value("depth", hp.depth);
  hp.num_topics = j.value("num_topics", hp.num_topics);
  hp.branch_spec = j.value("branch_spec", hp.branch_spec);
  return hp;
}

namespace {

std::shared_ptr<const NIWPrior> make_niw_prior(const Hyperparams& hp,
                                               const EmbeddingTable& emb,
                                               double psi_ratio) {
  auto prior = std::make_shared<NIWPrior>();
  const int m = emb.dim;
  prior->u = emb.grand_mean();
  prior->psi = psi_ratio * hp.psi_scale * Eigen::MatrixXd::Identity(m, m);
  prior->kappa = hp.kappa;
  prior->nu = hp.nu > 0.0 ? hp.nu : m + 1.0;
  prior->validate();
  return prior;
}

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

std::string rng_state_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_state_restore(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

// ---------------------------------------------------------------------------
// FlatModel

FlatModel::FlatModel(ModelKind kind, const Corpus& corpus,
                     const EmbeddingTable* embeddings, Hyperparams hp,
                     std::uint64_t seed)
    : kind_(kind),
      corpus_(&corpus),
      emb_(embeddings),
      hp_(std::move(hp)),
      k_(hp_.num_topics),
      rng_(seed),
      seed_(seed) {
  if (is_hierarchical(kind)) throw std::invalid_argument("FlatModel: flat kinds only");
  if (kind_ == ModelKind::glda && emb_ == nullptr) {
    throw std::invalid_argument("FlatModel: glda requires embeddings");
  }
  if (k_ < 1) throw std::invalid_argument("FlatModel: num_topics must be >= 1");
  if (kind_ == ModelKind::glda) {
    prior_ = make_niw_prior(hp_, *emb_, 1.0);
    gauss_topics_.assign(k_, GaussianTopicStats(prior_));
  } else {
    word_topics_.assign(k_, DirMultStats(corpus_->vocab.size(), hp_.beta));
  }
  const int d_count = static_cast<int>(corpus_->train.size());
  z_.resize(d_count);
  doc_topic_.assign(d_count, std::vector<int>(k_, 0));
  for (int d = 0; d < d_count; ++d) {
    z_[d].assign(corpus_->train[d].tokens.size(), -1);
  }
}

void FlatModel::init() {
  std::uniform_int_distribution<int> pick(0, k_ - 1);
  for (std::size_t d = 0; d < z_.size(); ++d) {
    for (std::size_t n = 0; n < z_[d].size(); ++n) {
      add_token(static_cast<int>(d), static_cast<int>(n), pick(rng_));
    }
  }
}

void FlatModel::add_token(int d, int n, int topic) {
  z_[d][n] = topic;
  doc_topic_[d][topic] += 1;
  const int v = corpus_->train[d].tokens[n];
  if (kind_ == ModelKind::glda) {
    gauss_topics_[topic].add_point(emb_->row(v));
  } else {
    word_topics_[topic].add_word(v);
  }
}

void FlatModel::remove_token(int d, int n) {
  const int topic = z_[d][n];
  if (topic < 0) throw std::logic_error("remove_token: token unassigned");
  doc_topic_[d][topic] -= 1;
  const int v = corpus_->train[d].tokens[n];
  if (kind_ == ModelKind::glda) {
    gauss_topics_[topic].remove_point(emb_->row(v));
  } else {
    word_topics_[topic].remove_word(v);
  }
  z_[d][n] = -1;
}

std::vector<double> FlatModel::conditional_logits(int d, int n) {
  const int v = corpus_->train[d].tokens[n];
  std::vector<double> logits(k_);
  if (kind_ == ModelKind::glda) {
    const Eigen::VectorXd x = emb_->row(v);
    for (int k = 0; k < k_; ++k) {
      logits[k] = std::log(hp_.alpha + doc_topic_[d][k]) + gauss_topics_[k].log_predictive(x);
    }
    density_evals_ += k_;
  } else {
    for (int k = 0; k < k_; ++k) {
      logits[k] = std::log(hp_.alpha + doc_topic_[d][k]) + word_topics_[k].log_predictive(v);
    }
  }
  return logits;
}

void FlatModel::token_step(int d, int n) {
  remove_token(d, n);
  const auto logits = conditional_logits(d, n);
  add_token(d, n, sample_log_categorical(logits, rng_));
}

void FlatModel::run_epoch(bool shuffle_docs) {
  std::vector<int> order(z_.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_docs) std::shuffle(order.begin(), order.end(), rng_);
  for (int d : order) {
    for (std::size_t n = 0; n < z_[d].size(); ++n) {
      token_step(d, static_cast<int>(n));
    }
  }
  ++epoch_;
}

double FlatModel::joint_log_likelihood() const {
  double ll = 0.0;
  const double ka = k_ * hp_.alpha;
  for (std::size_t d = 0; d < z_.size(); ++d) {
    ll += std::lgamma(ka) - std::lgamma(ka + z_[d].size());
    for (int k = 0; k < k_; ++k) {
      ll += std::lgamma(hp_.alpha + doc_topic_[d][k]) - std::lgamma(hp_.alpha);
    }
  }
  if (kind_ == ModelKind::glda) {
    std::vector<std::vector<Eigen::VectorXd>> by_topic(k_);
    for (std::size_t d = 0; d < z_.size(); ++d) {
      for (std::size_t n = 0; n < z_[d].size(); ++n) {
        by_topic[z_[d][n]].push_back(emb_->row(corpus_->train[d].tokens[n]));
      }
    }
    for (int k = 0; k < k_; ++k) {
      ll += GaussianTopicStats(prior_).log_marginal_set(by_topic[k]);
    }
  } else {
    std::vector<std::vector<int>> by_topic(k_);
    for (std::size_t d = 0; d < z_.size(); ++d) {
      for (std::size_t n = 0; n < z_[d].size(); ++n) {
        by_topic[z_[d][n]].push_back(corpus_->train[d].tokens[n]);
      }
    }
    for (int k = 0; k < k_; ++k) {
      ll += DirMultStats(corpus_->vocab.size(), hp_.beta).log_marginal_set(by_topic[k]);
    }
  }
  return ll;
}

Eigen::MatrixXd FlatModel::topic_word_theta() const {
  const int vsize = corpus_->vocab.size();
  Eigen::MatrixXd theta(k_, vsize);
  if (kind_ == ModelKind::glda) {
    for (int k = 0; k < k_; ++k) {
      std::vector<double> logp(vsize);
      for (int v = 0; v < vsize; ++v) {
        logp[v] = gauss_topics_[k].log_predictive(emb_->row(v));
      }
      const double lz = log_sum_exp(logp);
      for (int v = 0; v < vsize; ++v) theta(k, v) = std::exp(logp[v] - lz);
    }
  } else {
    for (int k = 0; k < k_; ++k) {
      for (int v = 0; v < vsize; ++v) theta(k, v) = std::exp(word_topics_[k].log_predictive(v));
    }
  }
  return theta;
}

void FlatModel::verify_counts() const {
  std::vector<std::vector<int>> dt(z_.size(), std::vector<int>(k_, 0));
  std::vector<std::vector<int>> tw(k_, std::vector<int>(corpus_->vocab.size(), 0));
  for (std::size_t d = 0; d < z_.size(); ++d) {
    for (std::size_t n = 0; n < z_[d].size(); ++n) {
      const int k = z_[d][n];
      if (k < 0) throw std::logic_error("verify_counts: unassigned token");
      dt[d][k] += 1;
      tw[k][corpus_->train[d].tokens[n]] += 1;
    }
  }
  if (dt != doc_topic_) throw std::logic_error("verify_counts: doc-topic mismatch");
  for (int k = 0; k < k_; ++k) {
    const int total = std::accumulate(tw[k].begin(), tw[k].end(), 0);
    if (kind_ == ModelKind::glda) {
      if (gauss_topics_[k].count() != total) {
        throw std::logic_error("verify_counts: gaussian topic count mismatch");
      }
    } else {
      for (int v = 0; v < corpus_->vocab.size(); ++v) {
        if (word_topics_[k].count(v) != tw[k][v]) {
          throw std::logic_error("verify_counts: topic-word mismatch");
        }
      }
    }
  }
}

json FlatModel::epoch_diagnostics() const {
  return json{{"epoch", epoch_},
              {"joint_log_likelihood", joint_log_likelihood()},
              {"topics", k_},
              {"density_evals", density_evals_}};
}

json FlatModel::checkpoint() const {
  return json{{"format", "ghlda-checkpoint"},
              {"version", kCheckpointVersion},
              {"model", to_string(kind_)},
              {"vocab_size", corpus_->vocab.size()},
              {"hyperparams", hp_.to_json()},
              {"seed", seed_},
              {"epoch", epoch_},
              {"density_evals", density_evals_},
              {"rng", rng_state_string(rng_)},
              {"assignments", z_}};
}

FlatModel FlatModel::from_checkpoint(const json& j, const Corpus& corpus,
                                     const EmbeddingTable* embeddings) {
  if (j.value("format", "") != "ghlda-checkpoint") {
    throw std::runtime_error("not a checkpoint file");
  }
  if (j.at("version").get<int>() > kCheckpointVersion) {
    throw std::runtime_error("checkpoint version is newer than this build");
  }
  if (j.contains("vocab_size") && j.at("vocab_size").get<int>() != corpus.vocab.size()) {
    throw std::runtime_error("checkpoint vocabulary does not match the corpus");
  }
  FlatModel m(model_kind_from_string(j.at("model").get<std::string>()), corpus,
              embeddings, Hyperparams::from_json(j.at("hyperparams")),
              j.at("seed").get<std::uint64_t>());
  const auto z = j.at("assignments").get<std::vector<std::vector<int>>>();
  for (std::size_t d = 0; d < z.size(); ++d) {
    for (std::size_t n = 0; n < z[d].size(); ++n) {
      m.add_token(static_cast<int>(d), static_cast<int>(n), z[d][n]);
    }
  }
  m.epoch_ = j.at("epoch").get<int>();
  m.density_evals_ = j.at("density_evals").get<std::int64_t>();
  rng_state_restore(m.rng_, j.at("rng").get<std::string>());
  return m;
}

void FlatModel::train(const TrainOptions& opts) {
  for (int e = 0; e < opts.epochs; ++e) {
    run_epoch(opts.shuffle_docs);
    if (opts.diagnostics != nullptr) {
      (*opts.diagnostics) << epoch_diagnostics().dump() << "\n";
      opts.diagnostics->flush();
    }
    if (opts.checkpoint_interval > 0 && epoch_ % opts.checkpoint_interval == 0 &&
        !opts.checkpoint_path.empty()) {
      write_checkpoint_file(opts.checkpoint_path, checkpoint());
    }
  }
}

// ---------------------------------------------------------------------------
// HierModel

HierModel::HierModel(ModelKind kind, const Corpus& corpus,
                     const EmbeddingTable* embeddings, Hyperparams hp,
                     std::uint64_t seed)
    : kind_(kind),
      corpus_(&corpus),
      emb_(embeddings),
      hp_(std::move(hp)),
      tree_(hp_.depth, hp_.gamma, [](int) -> NodePayload { return std::monostate{}; }),
      rng_(seed),
      seed_(seed) {
  if (!is_hierarchical(kind)) throw std::invalid_argument("HierModel: hierarchical kinds only");
  if (kind_ == ModelKind::ghlda && emb_ == nullptr) {
    throw std::invalid_argument("HierModel: ghlda requires embeddings");
  }
  if (hp_.depth < 1) throw std::invalid_argument("HierModel: depth must be >= 1");
  if (static_cast<int>(hp_.branch_spec.size()) != hp_.depth) {
    throw std::invalid_argument("HierModel: branch_spec length must equal depth");
  }
  if (kind_ == ModelKind::ghlda) {
    if (static_cast<int>(hp_.level_psi_ratios.size()) < hp_.depth) {
      throw std::invalid_argument("HierModel: level_psi_ratios shorter than depth");
    }
    for (int l = 0; l < hp_.depth; ++l) {
      level_priors_.push_back(make_niw_prior(hp_, *emb_, hp_.level_psi_ratios[l]));
    }
  } else if (static_cast<int>(hp_.level_eta.size()) < hp_.depth) {
    throw std::invalid_argument("HierModel: level_eta shorter than depth");
  }
  tree_ = TopicTree(hp_.depth, hp_.gamma, payload_factory());
  const int d_count = static_cast<int>(corpus_->train.size());
  levels_.resize(d_count);
  doc_path_.assign(d_count, {});
  doc_level_counts_.assign(d_count, std::vector<int>(hp_.depth, 0));
  for (int d = 0; d < d_count; ++d) {
    levels_[d].assign(corpus_->train[d].tokens.size(), -1);
  }
}

NodePayload HierModel::make_payload(int level) const {
  if (kind_ == ModelKind::ghlda) {
    return GaussianTopicStats(level_priors_[level]);
  }
  return DirMultStats(corpus_->vocab.size(), hp_.level_eta[level]);
}

TopicTree::PayloadFactory HierModel::payload_factory() const {
  const ModelKind kind = kind_;
  auto priors = level_priors_;
  const int vocab = corpus_->vocab.size();
  auto etas = hp_.level_eta;
  return [kind, priors, vocab, etas](int level) -> NodePayload {
    if (kind == ModelKind::ghlda) return GaussianTopicStats(priors[level]);
    return DirMultStats(vocab, etas[level]);
  };
}

Eigen::VectorXd HierModel::embedding_of(int d, int n) const {
  return emb_->row(corpus_->train[d].tokens[n]);
}

std::vector<int> frequency_cdf_segments(const Corpus& corpus, int levels) {
  const auto freq = corpus.word_frequencies();
  std::vector<int> order(freq.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return freq[a] > freq[b]; });
  const double total = static_cast<double>(corpus.total_train_tokens());
  std::vector<int> segment(freq.size(), 0);
  double cum = 0.0;
  for (int v : order) {
    int s = static_cast<int>(cum * levels / total);
    segment[v] = std::min(s, levels - 1);
    cum += static_cast<double>(freq[v]);
  }
  return segment;
}

void HierModel::init(LevelInitMode mode) {
  tree_ = TopicTree::complete(hp_.branch_spec, hp_.gamma, payload_factory());
  auto leaf_paths = tree_.enumerate_paths(false);
  std::uniform_int_distribution<int> pick_path(0, static_cast<int>(leaf_paths.size()) - 1);
  std::uniform_int_distribution<int> pick_level(0, hp_.depth - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> segment;
  if (mode == LevelInitMode::frequency_cdf_half_random) {
    segment = frequency_cdf_segments(*corpus_, hp_.depth);
  }
  for (std::size_t d = 0; d < levels_.size(); ++d) {
    const auto& proposal = leaf_paths[pick_path(rng_)];
    doc_path_[d] = tree_.attach(proposal);
    for (std::size_t n = 0; n < levels_[d].size(); ++n) {
      int level;
      if (mode == LevelInitMode::frequency_cdf_half_random && unif(rng_) < 0.5) {
        level = segment[corpus_->train[d].tokens[n]];
      } else {
        level = pick_level(rng_);
      }
      add_token(static_cast<int>(d), static_cast<int>(n), level);
    }
  }
}

void HierModel::add_token(int d, int n, int level) {
  levels_[d][n] = level;
  doc_level_counts_[d][level] += 1;
  TopicNode& node = tree_.node(doc_path_[d][level]);
  if (kind_ == ModelKind::ghlda) {
    std::get<GaussianTopicStats>(node.payload).add_point(embedding_of(d, n));
  } else {
    std::get<DirMultStats>(node.payload).add_word(corpus_->train[d].tokens[n]);
  }
}

void HierModel::remove_token(int d, int n) {
  const int level = levels_[d][n];
  if (level < 0) throw std::logic_error("remove_token: token unassigned");
  doc_level_counts_[d][level] -= 1;
  TopicNode& node = tree_.node(doc_path_[d][level]);
  if (kind_ == ModelKind::ghlda) {
    std::get<GaussianTopicStats>(node.payload).remove_point(embedding_of(d, n));
  } else {
    std::get<DirMultStats>(node.payload).remove_word(corpus_->train[d].tokens[n]);
  }
  levels_[d][n] = -1;
}

void HierModel::detach_document(int d) {
  for (std::size_t n = 0; n < levels_[d].size(); ++n) {
    const int level = levels_[d][n];
    TopicNode& node = tree_.node(doc_path_[d][level]);
    if (kind_ == ModelKind::ghlda) {
      std::get<GaussianTopicStats>(node.payload).remove_point(embedding_of(d, static_cast<int>(n)));
    } else {
      std::get<DirMultStats>(node.payload).remove_word(corpus_->train[d].tokens[n]);
    }
  }
  tree_.detach(doc_path_[d]);
  doc_path_[d].clear();
}

void HierModel::attach_document(int d, const PathProposal& p) {
  doc_path_[d] = tree_.attach(p);
  for (std::size_t n = 0; n < levels_[d].size(); ++n) {
    const int level = levels_[d][n];
    TopicNode& node = tree_.node(doc_path_[d][level]);
    if (kind_ == ModelKind::ghlda) {
      std::get<GaussianTopicStats>(node.payload).add_point(embedding_of(d, static_cast<int>(n)));
    } else {
      std::get<DirMultStats>(node.payload).add_word(corpus_->train[d].tokens[n]);
    }
  }
}

std::pair<std::vector<PathProposal>, std::vector<double>> HierModel::path_conditional(int d) {
  const int depth = hp_.depth;
  std::vector<std::vector<Eigen::VectorXd>> points_by_level;
  std::vector<std::vector<int>> words_by_level(depth);
  if (kind_ == ModelKind::ghlda) points_by_level.resize(depth);
  for (std::size_t n = 0; n < levels_[d].size(); ++n) {
    const int level = levels_[d][n];
    if (kind_ == ModelKind::ghlda) {
      points_by_level[level].push_back(embedding_of(d, static_cast<int>(n)));
    } else {
      words_by_level[level].push_back(corpus_->train[d].tokens[n]);
    }
  }
  auto level_empty = [&](int l) {
    return kind_ == ModelKind::ghlda ? points_by_level[l].empty() : words_by_level[l].empty();
  };

  auto proposals = tree_.enumerate_paths(allow_new_paths_);

  // Shared-prefix cache: one marginal per existing node, one per
  // hypothetical level.
  std::map<int, double> node_marginal;
  std::vector<double> prior_marginal(depth, 0.0);
  std::vector<bool> prior_done(depth, false);
  auto existing_marginal = [&](int node_id) {
    auto it = node_marginal.find(node_id);
    if (it != node_marginal.end()) return it->second;
    const TopicNode& node = tree_.node(node_id);
    double m = 0.0;
    if (!level_empty(node.level)) {
      if (kind_ == ModelKind::ghlda) {
        m = std::get<GaussianTopicStats>(node.payload).log_marginal_set(points_by_level[node.level]);
      } else {
        m = std::get<DirMultStats>(node.payload).log_marginal_set(words_by_level[node.level]);
      }
      density_evals_ += 1;
    }
    node_marginal.emplace(node_id, m);
    return m;
  };
  auto hypothetical_marginal = [&](int level) {
    if (!prior_done[level]) {
      if (!level_empty(level)) {
        NodePayload fresh = make_payload(level);
        if (kind_ == ModelKind::ghlda) {
          prior_marginal[level] =
              std::get<GaussianTopicStats>(fresh).log_marginal_set(points_by_level[level]);
        } else {
          prior_marginal[level] =
              std::get<DirMultStats>(fresh).log_marginal_set(words_by_level[level]);
        }
        prior_marginal_evals_ += 1;
      }
      prior_done[level] = true;
    }
    return prior_marginal[level];
  };

  std::vector<double> scores;
  scores.reserve(proposals.size());
  for (const auto& p : proposals) {
    double s = tree_.path_log_prior(p);
    for (int l = 0; l < depth; ++l) {
      s += p.nodes[l] >= 0 ? existing_marginal(p.nodes[l]) : hypothetical_marginal(l);
    }
    scores.push_back(s);
  }
  return {std::move(proposals), std::move(scores)};
}

void HierModel::path_step(int d) {
  detach_document(d);
  auto [proposals, scores] = path_conditional(d);
  const int pick = sample_log_categorical(scores, rng_);
  attach_document(d, proposals[pick]);
}

double HierModel::gem_log_weight(int d, int l) const {
  const auto& c = doc_level_counts_[d];
  const double m = hp_.gem_m;
  const double b = hp_.gem_b;
  auto at_least = [&](int i) {
    int s = 0;
    for (int j = i; j < hp_.depth; ++j) s += c[j];
    return static_cast<double>(s);
  };
  double lw = std::log(m * b + c[l]) - std::log(b + at_least(l));
  for (int i = 0; i < l; ++i) {
    lw += std::log((1.0 - m) * b + at_least(i + 1)) - std::log(b + at_least(i));
  }
  return lw;
}

std::vector<double> HierModel::level_conditional_logits(int d, int n) {
  const int depth = hp_.depth;
  std::vector<double> logits(depth);
  if (kind_ == ModelKind::ghlda) {
    const Eigen::VectorXd x = embedding_of(d, n);
    for (int l = 0; l < depth; ++l) {
      logits[l] = gem_log_weight(d, l) +
                  std::get<GaussianTopicStats>(tree_.node(doc_path_[d][l]).payload).log_predictive(x);
    }
  } else {
    const int v = corpus_->train[d].tokens[n];
    for (int l = 0; l < depth; ++l) {
      logits[l] = gem_log_weight(d, l) +
                  std::get<DirMultStats>(tree_.node(doc_path_[d][l]).payload).log_predictive(v);
    }
  }
  density_evals_ += depth;
  return logits;
}

void HierModel::level_step(int d, int n) {
  remove_token(d, n);
  const auto logits = level_conditional_logits(d, n);
  add_token(d, n, sample_log_categorical(logits, rng_));
}

void HierModel::run_epoch(bool shuffle_docs) {
  std::vector<int> order(levels_.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_docs) std::shuffle(order.begin(), order.end(), rng_);
  for (int d : order) {
    path_step(d);
    for (std::size_t n = 0; n < levels_[d].size(); ++n) {
      level_step(d, static_cast<int>(n));
    }
  }
  ++epoch_;
}

void HierModel::train(const TrainOptions& opts) {
  for (int e = 0; e < opts.epochs; ++e) {
    allow_new_paths_ = epoch_ >= opts.freeze_new_leaves_for;
    run_epoch(opts.shuffle_docs);
    if (opts.diagnostics != nullptr) {
      (*opts.diagnostics) << epoch_diagnostics().dump() << "\n";
      opts.diagnostics->flush();
    }
    if (opts.checkpoint_interval > 0 && epoch_ % opts.checkpoint_interval == 0 &&
        !opts.checkpoint_path.empty()) {
      write_checkpoint_file(opts.checkpoint_path, checkpoint());
    }
  }
}

double HierModel::joint_log_likelihood() const {
  double ll = 0.0;
  // nCRP exchangeable partition probability, one CRP per internal node.
  for (int id : tree_.node_ids()) {
    const TopicNode& node = tree_.node(id);
    // Empty children are init scaffolding and carry no seating information.
    int occupied = 0;
    for (int c : node.children) {
      const int docs = tree_.node(c).doc_count;
      if (docs > 0) {
        ll += std::lgamma(static_cast<double>(docs));
        ++occupied;
      }
    }
    if (occupied == 0) continue;
    ll += occupied * std::log(hp_.gamma) + std::lgamma(hp_.gamma) -
          std::lgamma(hp_.gamma + node.doc_count);
  }
  // Truncated GEM level assignments per document.
  const double m = hp_.gem_m;
  const double b = hp_.gem_b;
  for (std::size_t d = 0; d < levels_.size(); ++d) {
    const auto& c = doc_level_counts_[d];
    int above = 0;
    for (int l = hp_.depth - 1; l >= 0; --l) {
      ll += lbeta(m * b + c[l], (1.0 - m) * b + above) - lbeta(m * b, (1.0 - m) * b);
      above += c[l];
    }
  }
  // Per-node data marginal from the prior.
  std::map<int, std::vector<Eigen::VectorXd>> points;
  std::map<int, std::vector<int>> words;
  for (std::size_t d = 0; d < levels_.size(); ++d) {
    for (std::size_t n = 0; n < levels_[d].size(); ++n) {
      const int node = doc_path_[d][levels_[d][n]];
      if (kind_ == ModelKind::ghlda) {
        points[node].push_back(embedding_of(static_cast<int>(d), static_cast<int>(n)));
      } else {
        words[node].push_back(corpus_->train[d].tokens[n]);
      }
    }
  }
  if (kind_ == ModelKind::ghlda) {
    for (const auto& [id, pts] : points) {
      ll += GaussianTopicStats(level_priors_[tree_.node(id).level]).log_marginal_set(pts);
    }
  } else {
    for (const auto& [id, ws] : words) {
      ll += DirMultStats(corpus_->vocab.size(), hp_.level_eta[tree_.node(id).level])
                .log_marginal_set(ws);
    }
  }
  return ll;
}

Eigen::VectorXd HierModel::node_theta(int node_id) const {
  const int vsize = corpus_->vocab.size();
  Eigen::VectorXd theta(vsize);
  const TopicNode& node = tree_.node(node_id);
  if (kind_ == ModelKind::ghlda) {
    const auto& stats = std::get<GaussianTopicStats>(node.payload);
    std::vector<double> logp(vsize);
    for (int v = 0; v < vsize; ++v) logp[v] = stats.log_predictive(emb_->row(v));
    const double lz = log_sum_exp(logp);
    for (int v = 0; v < vsize; ++v) theta(v) = std::exp(logp[v] - lz);
  } else {
    const auto& stats = std::get<DirMultStats>(node.payload);
    for (int v = 0; v < vsize; ++v) theta(v) = std::exp(stats.log_predictive(v));
  }
  return theta;
}

void HierModel::verify_counts() const {
  std::map<int, int> node_tokens;
  std::map<int, int> node_docs;
  for (std::size_t d = 0; d < levels_.size(); ++d) {
    std::vector<int> lc(hp_.depth, 0);
    for (std::size_t n = 0; n < levels_[d].size(); ++n) {
      const int level = levels_[d][n];
      if (level < 0) throw std::logic_error("verify_counts: unassigned token");
      lc[level] += 1;
      node_tokens[doc_path_[d][level]] += 1;
    }
    if (lc != doc_level_counts_[d]) throw std::logic_error("verify_counts: level counts mismatch");
    for (int id : doc_path_[d]) node_docs[id] += 1;
  }
  for (int id : tree_.node_ids()) {
    const TopicNode& node = tree_.node(id);
    if (node.doc_count != node_docs[id]) {
      throw std::logic_error("verify_counts: node doc_count mismatch");
    }
    if (payload_token_count(node.payload) != node_tokens[id]) {
      throw std::logic_error("verify_counts: node token count mismatch");
    }
  }
}

json HierModel::epoch_diagnostics() const {
  return json{{"epoch", epoch_},
              {"joint_log_likelihood", joint_log_likelihood()},
              {"nodes", tree_.node_count()},
              {"paths", tree_.path_count()},
              {"density_evals", density_evals_},
              {"prior_marginal_evals", prior_marginal_evals_}};
}

json HierModel::checkpoint() const {
  json nodes = json::array();
  for (const auto& r : tree_.snapshot_structure()) {
    nodes.push_back({{"id", r.id}, {"parent", r.parent}, {"level", r.level},
                     {"doc_count", r.doc_count}});
  }
  return json{{"format", "ghlda-checkpoint"},
              {"version", kCheckpointVersion},
              {"model", to_string(kind_)},
              {"vocab_size", corpus_->vocab.size()},
              {"hyperparams", hp_.to_json()},
              {"seed", seed_},
              {"epoch", epoch_},
              {"density_evals", density_evals_},
              {"prior_marginal_evals", prior_marginal_evals_},
              {"allow_new_paths", allow_new_paths_},
              {"rng", rng_state_string(rng_)},
              {"tree", {{"nodes", nodes}, {"next_id", tree_.next_id()}}},
              {"doc_paths", doc_path_},
              {"levels", levels_}};
}

HierModel HierModel::from_checkpoint(const json& j, const Corpus& corpus,
                                     const EmbeddingTable* embeddings) {
  if (j.value("format", "") != "ghlda-checkpoint") {
    throw std::runtime_error("not a checkpoint file");
  }
  if (j.at("version").get<int>() > kCheckpointVersion) {
    throw std::runtime_error("checkpoint version is newer than this build");
  }
  if (j.contains("vocab_size") && j.at("vocab_size").get<int>() != corpus.vocab.size()) {
    throw std::runtime_error("checkpoint vocabulary does not match the corpus");
  }
  HierModel m(model_kind_from_string(j.at("model").get<std::string>()), corpus,
              embeddings, Hyperparams::from_json(j.at("hyperparams")),
              j.at("seed").get<std::uint64_t>());
  std::vector<TopicTree::NodeRecord> records;
  for (const auto& n : j.at("tree").at("nodes")) {
    records.push_back(TopicTree::NodeRecord{n.at("id").get<int>(), n.at("parent").get<int>(),
                                            n.at("level").get<int>(),
                                            n.at("doc_count").get<int>()});
  }
  m.tree_ = TopicTree::restore(records, m.hp_.depth, m.hp_.gamma,
                               j.at("tree").at("next_id").get<int>(),
                               m.payload_factory());
  m.doc_path_ = j.at("doc_paths").get<std::vector<std::vector<int>>>();
  const auto levels = j.at("levels").get<std::vector<std::vector<int>>>();
  for (std::size_t d = 0; d < levels.size(); ++d) {
    for (std::size_t n = 0; n < levels[d].size(); ++n) {
      m.add_token(static_cast<int>(d), static_cast<int>(n), levels[d][n]);
    }
  }
  m.epoch_ = j.at("epoch").get<int>();
  m.density_evals_ = j.at("density_evals").get<std::int64_t>();
  m.prior_marginal_evals_ = j.at("prior_marginal_evals").get<std::int64_t>();
  m.allow_new_paths_ = j.at("allow_new_paths").get<bool>();
  rng_state_restore(m.rng_, j.at("rng").get<std::string>());
  m.verify_counts();
  return m;
}

void write_checkpoint_file(const std::string& path, const json& ckpt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << ckpt.dump() << "\n";
}

json read_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return json::parse(in);
}

}  // namespace ghlda
