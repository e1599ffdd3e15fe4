#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghlda/samplers.hpp"

namespace ghlda {

struct TopicReport {
  int topic_id = -1;  // topic index (flat) or node id (hierarchical)
  int level = -1;     // hierarchical only
  std::vector<std::pair<std::string, double>> top_words;  // sorted descending
  std::int64_t assignment_count = 0;
};

std::vector<TopicReport> top_words(const FlatModel& model, int n);
std::vector<TopicReport> top_words(const HierModel& model, int n);

struct CooccurrenceStats {
  std::unordered_map<std::string, std::int64_t> word_windows;
  std::map<std::pair<std::string, std::string>, std::int64_t> pair_windows;
  std::int64_t total_windows = 0;

  std::int64_t word_count(const std::string& w) const;
  std::int64_t pair_count(const std::string& a, const std::string& b) const;
};

// Presence counts per window. Window is either one document or a sliding
// window of `window_size` tokens (window_size <= 0 selects document windows).
CooccurrenceStats build_cooccurrence(const std::vector<std::vector<std::string>>& docs,
                                     int window_size = 0);

struct PmiResult {
  std::vector<std::optional<double>> per_topic;  // missing when < 2 resolvable words
  double mean = 0.0;                             // over resolvable topics
  int skipped_pairs = 0;
};

// Mean pairwise PMI over each topic's top_n words. epsilon < 0 selects the
// default smoothing 1/total_windows; epsilon = 0 disables smoothing.
PmiResult pmi_coherence(const std::vector<TopicReport>& topics,
                        const CooccurrenceStats& cooc, int top_n,
                        double epsilon = -1.0);

struct PolysemyGroup {
  int topic = -1;      // flat models
  int path_leaf = -1;  // hierarchical models: leaf node id identifies the path
  int level = -1;
  std::int64_t count = 0;
};

struct PolysemyEntry {
  std::string word;
  std::int64_t total = 0;
  std::vector<PolysemyGroup> groups;  // sorted descending by count
  bool flagged = false;               // >= 2 groups with >= 5% of the word's tokens
};

std::vector<PolysemyEntry> polysemy_report(const FlatModel& model, int min_count);
std::vector<PolysemyEntry> polysemy_report(const HierModel& model, int min_count);

struct HeldoutResult {
  std::vector<double> per_doc;     // log p(w_d)
  std::vector<double> per_doc_se;  // propagated particle standard error
  double mean = 0.0;
  int particles = 0;
  std::uint64_t seed = 0;
};

// Left-to-right sequential estimator of held-out document likelihood.
HeldoutResult left_to_right(const FlatModel& model, const std::vector<Document>& docs,
                            int particles, std::uint64_t seed);
HeldoutResult left_to_right(const HierModel& model, const std::vector<Document>& docs,
                            int particles, std::uint64_t seed);

nlohmann::json heldout_to_json(const HeldoutResult& r);
nlohmann::json pmi_to_json(const PmiResult& r, const std::vector<TopicReport>& topics);
nlohmann::json polysemy_to_json(const std::vector<PolysemyEntry>& entries);

}  // namespace ghlda
