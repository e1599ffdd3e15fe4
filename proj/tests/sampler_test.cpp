#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "ghlda/rng.hpp"
#include "ghlda/samplers.hpp"
#include "toy_models.hpp"

using namespace ghlda;

namespace {

using toy::make_corpus;
using toy::make_embeddings;
using toy::normalize_log;
using toy::random_corpus;
using toy::random_embeddings;

void check_flat_conditionals(FlatModel& m, double tol) {
  CHECK(toy::max_flat_conditional_error(m) < tol);
}

void check_level_conditionals(HierModel& m, double tol) {
  CHECK(toy::max_level_conditional_error(m) < tol);
}

void check_path_conditionals(HierModel& m, double tol) {
  CHECK(toy::max_path_conditional_error(m) < tol);
}

Hyperparams hier_toy_hp() {
  Hyperparams hp;
  hp.depth = 3;
  hp.branch_spec = {1, 2, 2};
  hp.level_psi_ratios = {1.0, 0.8, 0.6};
  hp.level_eta = {2.0, 1.0, 0.5};
  hp.gem_m = 0.5;
  hp.gem_b = 2.0;
  hp.gamma = 0.4;
  hp.psi_scale = 2.0;
  hp.kappa = 0.5;
  return hp;
}

}  // namespace

TEST_CASE("lda conditional matches brute-force joint ratios") {
  auto corpus = random_corpus(4, 5, 4, 7, 101);
  Hyperparams hp;
  hp.alpha = 0.3;
  hp.beta = 0.2;
  hp.num_topics = 3;
  FlatModel m(ModelKind::lda, corpus, nullptr, hp, 1);
  m.init();
  m.run_epoch();
  check_flat_conditionals(m, 1e-8);
  m.verify_counts();
}

TEST_CASE("glda conditional matches brute-force joint ratios") {
  auto corpus = random_corpus(4, 4, 3, 6, 103);
  auto emb = random_embeddings(4, 2, 5);
  Hyperparams hp;
  hp.alpha = 0.4;
  hp.psi_scale = 2.0;
  hp.kappa = 0.5;
  hp.num_topics = 2;
  FlatModel m(ModelKind::glda, corpus, &emb, hp, 2);
  m.init();
  m.run_epoch();
  check_flat_conditionals(m, 1e-8);
  m.verify_counts();
}

TEST_CASE("hlda level and path conditionals match brute-force joint ratios") {
  auto corpus = random_corpus(4, 5, 4, 7, 107);
  HierModel m(ModelKind::hlda, corpus, nullptr, hier_toy_hp(), 3);
  m.init();
  m.run_epoch();
  check_level_conditionals(m, 1e-8);
  check_path_conditionals(m, 1e-8);
}

TEST_CASE("ghlda level and path conditionals match brute-force joint ratios") {
  auto corpus = random_corpus(4, 4, 3, 6, 109);
  auto emb = random_embeddings(4, 2, 7);
  HierModel m(ModelKind::ghlda, corpus, &emb, hier_toy_hp(), 4);
  m.init();
  m.run_epoch();
  check_level_conditionals(m, 1e-8);
  check_path_conditionals(m, 1e-8);
}

TEST_CASE("stick-breaking level weights for an empty document") {
  auto corpus = make_corpus({{0, 1, 2}}, 3);
  Hyperparams hp;
  hp.depth = 4;
  hp.branch_spec = {1, 1, 1, 1};
  hp.gem_m = 0.5;
  hp.gem_b = 37.0;  // must cancel when all counts are zero
  HierModel m(ModelKind::hlda, corpus, nullptr, hp, 1);
  const double expected[] = {0.5, 0.25, 0.125, 0.0625};
  for (int l = 0; l < 4; ++l) {
    CHECK(std::exp(m.gem_log_weight(0, l)) == doctest::Approx(expected[l]).epsilon(1e-12));
  }
}

TEST_CASE("fresh symmetric lda gives a uniform conditional") {
  auto corpus = make_corpus({{0, 1, 2, 0}}, 3);
  Hyperparams hp;
  hp.num_topics = 4;
  FlatModel m(ModelKind::lda, corpus, nullptr, hp, 1);
  const auto logits = m.conditional_logits(0, 0);
  for (int k = 1; k < 4; ++k) {
    CHECK(std::abs(logits[k] - logits[0]) < 1e-12);
  }
}

TEST_CASE("huge alpha washes out the document counts") {
  auto corpus = random_corpus(3, 5, 5, 8, 113);
  Hyperparams hp;
  hp.alpha = 1e6;
  hp.beta = 0.2;
  hp.num_topics = 3;
  FlatModel m(ModelKind::lda, corpus, nullptr, hp, 9);
  m.init();
  const int original = m.topic_of(0, 0);
  m.remove_token(0, 0);
  const auto cond = normalize_log(m.conditional_logits(0, 0));
  std::vector<double> pred;
  const int v = corpus.train[0].tokens[0];
  for (const auto& topic : m.word_topics()) pred.push_back(topic.log_predictive(v));
  const auto ref = normalize_log(pred);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(cond[k] - ref[k]) < 1e-4);
  }
  m.add_token(0, 0, original);
}

TEST_CASE("glda assigns a point to the topic holding its cluster") {
  auto emb = make_embeddings({{0.0, 0.1}, {0.1, 0.0}, {10.0, 10.1}, {10.1, 10.0}});
  auto corpus = make_corpus({{0, 1, 0, 1, 2, 3, 2, 3}}, 4);
  Hyperparams hp;
  hp.alpha = 0.1;
  hp.psi_scale = 1.0;
  hp.kappa = 1.0;
  hp.num_topics = 2;
  FlatModel m(ModelKind::glda, corpus, &emb, hp, 1);
  for (int n = 0; n < 8; ++n) m.add_token(0, n, n < 4 ? 0 : 1);
  m.remove_token(0, 0);
  const auto cond = normalize_log(m.conditional_logits(0, 0));
  CHECK(cond[0] > 0.99);
  m.add_token(0, 0, 0);
}

TEST_CASE("path scoring reuses one marginal per node and per hypothetical level") {
  auto corpus = make_corpus({{0, 1, 2, 3, 0, 2}, {1, 2, 3, 0, 1, 3}}, 4);
  auto emb = random_embeddings(4, 2, 21);
  HierModel m(ModelKind::ghlda, corpus, &emb, hier_toy_hp(), 5);
  m.init();
  // Give document 0 tokens on every level so no node is skipped.
  for (int n = 0; n < 6; ++n) {
    m.remove_token(0, n);
    m.add_token(0, n, n % 3);
  }
  m.detach_document(0);

  m.set_allow_new_paths(false);
  const auto before = m.density_evals();
  const auto prior_before = m.prior_marginal_evals();
  auto [frozen, frozen_scores] = m.path_conditional(0);
  CHECK(m.density_evals() - before == m.tree().node_count());
  CHECK(m.prior_marginal_evals() == prior_before);
  for (const auto& p : frozen) CHECK_FALSE(p.has_new_nodes());

  m.set_allow_new_paths(true);
  const auto before2 = m.density_evals();
  auto [open, open_scores] = m.path_conditional(0);
  CHECK(m.density_evals() - before2 == m.tree().node_count());
  // Hypothetical branches start at levels 1..depth-1.
  CHECK(m.prior_marginal_evals() - prior_before == m.depth() - 1);
  CHECK(open.size() > frozen.size());

  m.attach_document(0, frozen[0]);
  m.verify_counts();
}

TEST_CASE("detach then attach restores the state") {
  auto corpus = random_corpus(6, 4, 4, 6, 127);
  auto emb = random_embeddings(4, 2, 11);
  HierModel m(ModelKind::ghlda, corpus, &emb, hier_toy_hp(), 6);
  m.init();
  const double before = m.joint_log_likelihood();
  // Pick a document whose leaf is shared so its path survives the detach.
  int doc = -1;
  for (std::size_t d = 0; d < corpus.train.size() && doc < 0; ++d) {
    if (m.tree().node(m.path_of(static_cast<int>(d)).back()).doc_count >= 2) {
      doc = static_cast<int>(d);
    }
  }
  REQUIRE(doc >= 0);
  PathProposal keep{m.path_of(doc), m.depth()};
  m.detach_document(doc);
  m.attach_document(doc, keep);
  m.verify_counts();
  CHECK(m.joint_log_likelihood() == doctest::Approx(before).epsilon(1e-8));
}

TEST_CASE("identical seeds give identical trajectories") {
  auto corpus = random_corpus(5, 6, 4, 8, 131);
  auto emb = random_embeddings(6, 2, 13);

  Hyperparams flat_hp;
  flat_hp.num_topics = 3;
  flat_hp.psi_scale = 2.0;
  flat_hp.kappa = 0.5;
  FlatModel f1(ModelKind::glda, corpus, &emb, flat_hp, 77);
  FlatModel f2(ModelKind::glda, corpus, &emb, flat_hp, 77);
  f1.init();
  f2.init();
  for (int e = 0; e < 3; ++e) {
    f1.run_epoch();
    f2.run_epoch();
  }
  CHECK(f1.assignments() == f2.assignments());

  HierModel h1(ModelKind::hlda, corpus, nullptr, hier_toy_hp(), 78);
  HierModel h2(ModelKind::hlda, corpus, nullptr, hier_toy_hp(), 78);
  h1.init();
  h2.init();
  for (int e = 0; e < 3; ++e) {
    h1.run_epoch();
    h2.run_epoch();
  }
  CHECK(h1.level_assignments() == h2.level_assignments());
  for (std::size_t d = 0; d < corpus.train.size(); ++d) {
    CHECK(h1.path_of(static_cast<int>(d)) == h2.path_of(static_cast<int>(d)));
  }
}

TEST_CASE("checkpoint resume reproduces an uninterrupted run") {
  auto corpus = random_corpus(5, 5, 4, 7, 137);
  Hyperparams hp;
  hp.num_topics = 3;

  FlatModel straight(ModelKind::lda, corpus, nullptr, hp, 5);
  straight.init();
  TrainOptions four;
  four.epochs = 4;
  straight.train(four);

  FlatModel half(ModelKind::lda, corpus, nullptr, hp, 5);
  half.init();
  TrainOptions two;
  two.epochs = 2;
  half.train(two);
  auto resumed = FlatModel::from_checkpoint(half.checkpoint(), corpus, nullptr);
  resumed.train(two);
  CHECK(resumed.assignments() == straight.assignments());
  CHECK(resumed.checkpoint().dump() == straight.checkpoint().dump());
}

TEST_CASE("hierarchical checkpoint restores the full sampler state") {
  auto corpus = random_corpus(5, 4, 4, 6, 139);
  auto emb = random_embeddings(4, 2, 17);
  HierModel a(ModelKind::ghlda, corpus, &emb, hier_toy_hp(), 8);
  a.init();
  TrainOptions opts;
  opts.epochs = 4;
  opts.freeze_new_leaves_for = 2;
  a.train(opts);

  HierModel b(ModelKind::ghlda, corpus, &emb, hier_toy_hp(), 8);
  b.init();
  TrainOptions first;
  first.epochs = 2;
  first.freeze_new_leaves_for = 2;
  b.train(first);
  auto resumed = HierModel::from_checkpoint(b.checkpoint(), corpus, &emb);
  resumed.train(first);
  CHECK(resumed.checkpoint().dump() == a.checkpoint().dump());
  resumed.verify_counts();
}

TEST_CASE("frequency segments follow the corpus cdf") {
  std::vector<int> toks;
  auto push = [&](int v, int times) { for (int i = 0; i < times; ++i) toks.push_back(v); };
  push(0, 8);
  push(1, 4);
  push(2, 2);
  push(3, 2);
  auto corpus = make_corpus({toks}, 4);
  CHECK(frequency_cdf_segments(corpus, 4) == std::vector<int>{0, 2, 3, 3});
  CHECK(frequency_cdf_segments(corpus, 2) == std::vector<int>{0, 1, 1, 1});
}

TEST_CASE("initialization builds the complete starting tree") {
  auto corpus = random_corpus(8, 5, 3, 6, 149);
  HierModel m(ModelKind::hlda, corpus, nullptr, hier_toy_hp(), 12);
  m.init(LevelInitMode::uniform_random);
  CHECK(m.tree().node_count() <= 7);  // {1,2,2} complete tree
  CHECK(m.tree().path_count() <= 4);
  m.verify_counts();
  CHECK(std::isfinite(m.joint_log_likelihood()));
}

TEST_CASE("training keeps cached counts consistent and improves the joint") {
  auto corpus = random_corpus(10, 6, 5, 10, 151);
  Hyperparams hp;
  hp.num_topics = 3;
  FlatModel m(ModelKind::lda, corpus, nullptr, hp, 4);
  m.init();
  const double start = m.joint_log_likelihood();
  std::ostringstream diag;
  TrainOptions opts;
  opts.epochs = 10;
  opts.diagnostics = &diag;
  m.train(opts);
  m.verify_counts();
  CHECK(m.joint_log_likelihood() >= start - 5.0);  // no collapse on a toy
  int lines = 0;
  std::string line;
  std::istringstream in(diag.str());
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("joint_log_likelihood"));
    ++lines;
  }
  CHECK(lines == 10);
}

TEST_CASE("model kind names round-trip") {
  for (auto k : {ModelKind::lda, ModelKind::glda, ModelKind::hlda, ModelKind::ghlda}) {
    CHECK(model_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(model_kind_from_string("pachinko"), std::invalid_argument);
  CHECK(is_gaussian(ModelKind::glda));
  CHECK_FALSE(is_gaussian(ModelKind::hlda));
  CHECK(is_hierarchical(ModelKind::ghlda));
  CHECK_FALSE(is_hierarchical(ModelKind::lda));
}
