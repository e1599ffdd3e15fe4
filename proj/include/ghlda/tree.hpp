#pragma once

#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ghlda/gaussian.hpp"
#include "ghlda/multinomial.hpp"

namespace ghlda {

using NodePayload = std::variant<std::monostate, GaussianTopicStats, DirMultStats>;

inline int payload_token_count(const NodePayload& p) {
  if (std::holds_alternative<GaussianTopicStats>(p)) {
    return std::get<GaussianTopicStats>(p).count();
  }
  if (std::holds_alternative<DirMultStats>(p)) {
    return std::get<DirMultStats>(p).total();
  }
  return 0;
}

struct TopicNode {
  int id = -1;
  int parent = -1;  // -1 for root
  int level = 0;
  std::vector<int> children;
  int doc_count = 0;
  NodePayload payload;
};

// A root-to-leaf path, possibly ending in hypothetical nodes. Entries from
// first_new_level on are -1 and do not exist in the tree yet.
struct PathProposal {
  std::vector<int> nodes;
  int first_new_level;  // == depth for fully existing paths

  bool has_new_nodes() const { return first_new_level < static_cast<int>(nodes.size()); }
};

// nCRP topic hierarchy truncated at a fixed depth. All leaves sit at
// depth-1; nodes with doc_count 0 are garbage-collected on detach and the
// collector insists their payloads are empty.
class TopicTree {
 public:
  using PayloadFactory = std::function<NodePayload(int level)>;

  TopicTree(int depth, double gamma, PayloadFactory factory);

  // Complete tree with branch_spec[l] children per node at level l-1;
  // branch_spec[0] must be 1 (the root).
  static TopicTree complete(const std::vector<int>& branch_spec, double gamma,
                            PayloadFactory factory);

  // Every existing root-to-leaf path, then one new-branch candidate per
  // internal node (deterministic order).
  std::vector<PathProposal> enumerate_paths(bool include_candidates = true) const;

  // Nested CRP log prior of a proposal against current doc counts.
  double path_log_prior(const PathProposal& p) const;

  // Materializes hypothetical nodes and bumps doc counts; returns the
  // realized node-id path.
  std::vector<int> attach(const PathProposal& p);
  void detach(const std::vector<int>& path);

  TopicNode& node(int id);
  const TopicNode& node(int id) const;
  bool contains(int id) const { return nodes_.count(id) > 0; }

  int root() const { return root_; }
  int depth() const { return depth_; }
  double gamma() const { return gamma_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  std::vector<int> node_ids() const;
  int path_count() const;

  std::string export_dot(
      const std::function<std::string(const TopicNode&)>& label) const;

  // Structure-only snapshot for checkpoints; payloads are rebuilt by the
  // caller from assignments after restore.
  struct NodeRecord {
    int id;
    int parent;
    int level;
    int doc_count;
  };
  std::vector<NodeRecord> snapshot_structure() const;
  static TopicTree restore(const std::vector<NodeRecord>& records, int depth,
                           double gamma, int next_id, PayloadFactory factory);
  int next_id() const { return next_id_; }

 private:
  int new_node(int parent, int level);

  std::map<int, TopicNode> nodes_;
  int root_;
  int depth_;
  double gamma_;
  int next_id_ = 0;
  PayloadFactory factory_;
};

}  // namespace ghlda
