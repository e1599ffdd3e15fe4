#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghlda/corpus.hpp"
#include "ghlda/gaussian.hpp"
#include "ghlda/multinomial.hpp"
#include "ghlda/tree.hpp"

namespace ghlda {

enum class ModelKind { lda, glda, hlda, ghlda };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);
inline bool is_gaussian(ModelKind k) { return k == ModelKind::glda || k == ModelKind::ghlda; }
inline bool is_hierarchical(ModelKind k) { return k == ModelKind::hlda || k == ModelKind::ghlda; }

struct Hyperparams {
  double alpha = 0.1;           // document-topic Dirichlet (flat models)
  double beta = 0.1;            // topic-word Dirichlet (LDA)
  double gem_m = 0.5;
  double gem_b = 100.0;
  double gamma = 0.1;           // nCRP concentration
  double kappa = 0.1;
  double nu = 0.0;              // <= 0 selects the default M+1
  double psi_scale = 50.0;      // Psi = psi_scale * I
  std::vector<double> level_psi_ratios{1.0, 0.8, 0.6, 0.4};
  std::vector<double> level_eta{2.0, 1.0, 0.5, 0.25};
  int depth = 4;
  int num_topics = 40;
  std::vector<int> branch_spec{1, 1, 4, 4};

  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& j);
};

struct TrainOptions {
  int epochs = 100;
  int freeze_new_leaves_for = 5;  // hierarchical models only
  bool shuffle_docs = false;
  int checkpoint_interval = 0;    // 0 disables periodic checkpoints
  std::string checkpoint_path;
  std::ostream* diagnostics = nullptr;  // JSONL, one object per epoch
};

// LDA / GLDA collapsed Gibbs sampler with K fixed topics.
class FlatModel {
 public:
  FlatModel(ModelKind kind, const Corpus& corpus, const EmbeddingTable* embeddings,
            Hyperparams hp, std::uint64_t seed);

  void init();
  void token_step(int d, int n);
  void run_epoch(bool shuffle_docs = false);
  void train(const TrainOptions& opts);

  // Unnormalized log conditional over topics for token (d,n); the token
  // must already be removed from the counts.
  std::vector<double> conditional_logits(int d, int n);
  void remove_token(int d, int n);
  void add_token(int d, int n, int topic);

  double joint_log_likelihood() const;
  Eigen::MatrixXd topic_word_theta() const;  // K x V, rows normalized

  ModelKind kind() const { return kind_; }
  int num_topics() const { return k_; }
  const Corpus& corpus() const { return *corpus_; }
  const EmbeddingTable* embeddings() const { return emb_; }
  const Hyperparams& hyperparams() const { return hp_; }
  int topic_of(int d, int n) const { return z_[d][n]; }
  const std::vector<std::vector<int>>& assignments() const { return z_; }
  std::int64_t density_evals() const { return density_evals_; }
  int epoch() const { return epoch_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<GaussianTopicStats>& gaussian_topics() const { return gauss_topics_; }
  const std::vector<DirMultStats>& word_topics() const { return word_topics_; }
  std::shared_ptr<const NIWPrior> niw_prior() const { return prior_; }

  nlohmann::json checkpoint() const;
  static FlatModel from_checkpoint(const nlohmann::json& j, const Corpus& corpus,
                                   const EmbeddingTable* embeddings);

  // Full recount of cached statistics; throws on any mismatch.
  void verify_counts() const;

  nlohmann::json epoch_diagnostics() const;

 private:
  ModelKind kind_;
  const Corpus* corpus_;
  const EmbeddingTable* emb_;
  Hyperparams hp_;
  int k_;
  std::shared_ptr<const NIWPrior> prior_;
  std::vector<std::vector<int>> z_;
  std::vector<std::vector<int>> doc_topic_;
  std::vector<DirMultStats> word_topics_;          // LDA
  std::vector<GaussianTopicStats> gauss_topics_;   // GLDA
  std::mt19937_64 rng_;
  std::uint64_t seed_;
  std::int64_t density_evals_ = 0;
  int epoch_ = 0;
};

enum class LevelInitMode { frequency_cdf_half_random, uniform_random };

// hLDA / GhLDA collapsed Gibbs sampler over the nCRP tree.
class HierModel {
 public:
  HierModel(ModelKind kind, const Corpus& corpus, const EmbeddingTable* embeddings,
            Hyperparams hp, std::uint64_t seed);

  void init(LevelInitMode mode = LevelInitMode::frequency_cdf_half_random);
  void path_step(int d);
  void level_step(int d, int n);
  void run_epoch(bool shuffle_docs = false);
  void train(const TrainOptions& opts);

  // Path proposals and their unnormalized log posteriors for document d;
  // the document must already be detached.
  std::pair<std::vector<PathProposal>, std::vector<double>> path_conditional(int d);
  // Unnormalized log conditional over levels for token (d,n), token removed.
  std::vector<double> level_conditional_logits(int d, int n);

  void detach_document(int d);
  void attach_document(int d, const PathProposal& p);
  void remove_token(int d, int n);
  void add_token(int d, int n, int level);
  double gem_log_weight(int d, int l) const;

  double joint_log_likelihood() const;
  Eigen::VectorXd node_theta(int node_id) const;  // length V, normalized

  ModelKind kind() const { return kind_; }
  const Corpus& corpus() const { return *corpus_; }
  const EmbeddingTable* embeddings() const { return emb_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const TopicTree& tree() const { return tree_; }
  TopicTree& tree() { return tree_; }
  int depth() const { return hp_.depth; }
  const std::vector<int>& path_of(int d) const { return doc_path_[d]; }
  int level_of(int d, int n) const { return levels_[d][n]; }
  const std::vector<std::vector<int>>& level_assignments() const { return levels_; }
  std::int64_t density_evals() const { return density_evals_; }
  std::int64_t prior_marginal_evals() const { return prior_marginal_evals_; }
  void set_allow_new_paths(bool allow) { allow_new_paths_ = allow; }
  bool allow_new_paths() const { return allow_new_paths_; }
  int epoch() const { return epoch_; }
  std::uint64_t seed() const { return seed_; }
  std::shared_ptr<const NIWPrior> level_prior(int level) const { return level_priors_[level]; }

  nlohmann::json checkpoint() const;
  static HierModel from_checkpoint(const nlohmann::json& j, const Corpus& corpus,
                                   const EmbeddingTable* embeddings);

  void verify_counts() const;

  nlohmann::json epoch_diagnostics() const;

 private:
  NodePayload make_payload(int level) const;
  // Self-contained factory (captures by value) so it stays valid when the
  // model object moves.
  TopicTree::PayloadFactory payload_factory() const;
  Eigen::VectorXd embedding_of(int d, int n) const;

  ModelKind kind_;
  const Corpus* corpus_;
  const EmbeddingTable* emb_;
  Hyperparams hp_;
  std::vector<std::shared_ptr<const NIWPrior>> level_priors_;
  TopicTree tree_;
  std::vector<std::vector<int>> levels_;
  std::vector<std::vector<int>> doc_path_;
  std::vector<std::vector<int>> doc_level_counts_;
  std::mt19937_64 rng_;
  std::uint64_t seed_;
  std::int64_t density_evals_ = 0;
  std::int64_t prior_marginal_evals_ = 0;
  bool allow_new_paths_ = true;
  int epoch_ = 0;
};

// Frequency-CDF segment per vocabulary word: the corpus frequency CDF is
// split into `levels` equal-mass segments, most frequent words first.
std::vector<int> frequency_cdf_segments(const Corpus& corpus, int levels);

void write_checkpoint_file(const std::string& path, const nlohmann::json& ckpt);
nlohmann::json read_checkpoint_file(const std::string& path);

}  // namespace ghlda
