#include "ghlda/tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ghlda {

TopicTree::TopicTree(int depth, double gamma, PayloadFactory factory)
    : depth_(depth), gamma_(gamma), factory_(std::move(factory)) {
  if (depth < 1) throw std::invalid_argument("TopicTree: depth must be >= 1");
  if (gamma <= 0.0) throw std::invalid_argument("TopicTree: gamma must be positive");
  root_ = new_node(-1, 0);
}

int TopicTree::new_node(int parent, int level) {
  const int id = next_id_++;
  TopicNode n;
  n.id = id;
  n.parent = parent;
  n.level = level;
  n.payload = factory_(level);
  nodes_.emplace(id, std::move(n));
  if (parent >= 0) nodes_.at(parent).children.push_back(id);
  return id;
}

TopicTree TopicTree::complete(const std::vector<int>& branch_spec, double gamma,
                              PayloadFactory factory) {
  if (branch_spec.empty() || branch_spec[0] != 1) {
    throw std::invalid_argument("TopicTree: branch_spec must start with a single root");
  }
  for (int b : branch_spec) {
    if (b < 1) throw std::invalid_argument("TopicTree: branch counts must be >= 1");
  }
  TopicTree tree(static_cast<int>(branch_spec.size()), gamma, std::move(factory));
  std::vector<int> frontier{tree.root_};
  for (std::size_t l = 1; l < branch_spec.size(); ++l) {
    std::vector<int> next;
    for (int parent : frontier) {
      for (int b = 0; b < branch_spec[l]; ++b) {
        next.push_back(tree.new_node(parent, static_cast<int>(l)));
      }
    }
    frontier = std::move(next);
  }
  return tree;
}

TopicNode& TopicTree::node(int id) { return nodes_.at(id); }
const TopicNode& TopicTree::node(int id) const { return nodes_.at(id); }

std::vector<int> TopicTree::node_ids() const {
  std::vector<int> ids;
  ids.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) ids.push_back(id);
  return ids;
}

int TopicTree::path_count() const {
  int leaves = 0;
  for (const auto& [id, n] : nodes_) {
    if (n.level == depth_ - 1) ++leaves;
  }
  return leaves;
}

std::vector<PathProposal> TopicTree::enumerate_paths(bool include_candidates) const {
  std::vector<PathProposal> out;
  std::vector<int> prefix;
  // DFS in child order; nodes_ is an ordered map so candidate emission
  // below is deterministic too.
  std::function<void(int)> dfs = [&](int id) {
    const TopicNode& n = nodes_.at(id);
    prefix.push_back(id);
    if (n.level == depth_ - 1) {
      out.push_back(PathProposal{prefix, depth_});
    } else {
      for (int c : n.children) dfs(c);
    }
    prefix.pop_back();
  };
  dfs(root_);
  if (include_candidates) {
    for (const auto& [id, n] : nodes_) {
      if (n.level >= depth_ - 1) continue;
      std::vector<int> path;
      int cur = id;
      while (cur >= 0) {
        path.push_back(cur);
        cur = nodes_.at(cur).parent;
      }
      std::reverse(path.begin(), path.end());
      PathProposal p;
      p.first_new_level = n.level + 1;
      p.nodes = std::move(path);
      p.nodes.resize(depth_, -1);
      out.push_back(std::move(p));
    }
  }
  return out;
}

double TopicTree::path_log_prior(const PathProposal& p) const {
  if (static_cast<int>(p.nodes.size()) != depth_ || p.nodes[0] != root_) {
    throw std::invalid_argument("path_log_prior: malformed path");
  }
  double lp = 0.0;
  for (int l = 0; l + 1 < depth_; ++l) {
    const int parent_id = p.nodes[l];
    const int child_id = p.nodes[l + 1];
    const double parent_docs =
        parent_id >= 0 ? static_cast<double>(nodes_.at(parent_id).doc_count) : 0.0;
    if (child_id >= 0) {
      const TopicNode& child = nodes_.at(child_id);
      if (child.parent != parent_id) {
        throw std::invalid_argument("path_log_prior: path inconsistent with tree");
      }
      // An existing but empty branch costs the same as opening a new one.
      const double w = child.doc_count > 0 ? static_cast<double>(child.doc_count) : gamma_;
      lp += std::log(w) - std::log(gamma_ + parent_docs);
    } else {
      lp += std::log(gamma_) - std::log(gamma_ + parent_docs);
    }
  }
  return lp;
}

std::vector<int> TopicTree::attach(const PathProposal& p) {
  std::vector<int> realized = p.nodes;
  for (int l = p.first_new_level; l < depth_; ++l) {
    realized[l] = new_node(realized[l - 1], l);
  }
  for (int id : realized) nodes_.at(id).doc_count += 1;
  return realized;
}

void TopicTree::detach(const std::vector<int>& path) {
  if (static_cast<int>(path.size()) != depth_) {
    throw std::invalid_argument("detach: malformed path");
  }
  for (int id : path) {
    TopicNode& n = nodes_.at(id);
    if (n.doc_count < 1) throw std::logic_error("detach: document not attached here");
    n.doc_count -= 1;
  }
  // Collect bottom-up; a node may only go when no document and no token
  // references it. Removing an internal node takes its (necessarily empty)
  // scaffold descendants with it so nothing is left orphaned.
  std::function<void(int)> erase_subtree = [&](int id) {
    TopicNode& n = nodes_.at(id);
    if (n.doc_count > 0) throw std::logic_error("detach: removing occupied node");
    if (payload_token_count(n.payload) != 0) {
      throw std::logic_error("detach: empty node still holds tokens");
    }
    for (int c : std::vector<int>(n.children)) erase_subtree(c);
    auto& siblings = nodes_.at(nodes_.at(id).parent).children;
    siblings.erase(std::find(siblings.begin(), siblings.end(), id));
    nodes_.erase(id);
  };
  for (int l = depth_ - 1; l >= 1; --l) {
    if (nodes_.at(path[l]).doc_count > 0) break;
    erase_subtree(path[l]);
  }
}

std::vector<TopicTree::NodeRecord> TopicTree::snapshot_structure() const {
  std::vector<NodeRecord> out;
  out.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) {
    out.push_back(NodeRecord{n.id, n.parent, n.level, n.doc_count});
  }
  return out;
}

TopicTree TopicTree::restore(const std::vector<NodeRecord>& records, int depth,
                             double gamma, int next_id, PayloadFactory factory) {
  TopicTree tree(depth, gamma, std::move(factory));
  tree.nodes_.clear();
  for (const auto& r : records) {
    TopicNode n;
    n.id = r.id;
    n.parent = r.parent;
    n.level = r.level;
    n.doc_count = r.doc_count;
    n.payload = tree.factory_(r.level);
    if (r.parent < 0) tree.root_ = r.id;
    tree.nodes_.emplace(r.id, std::move(n));
  }
  for (const auto& r : records) {
    if (r.parent >= 0) tree.nodes_.at(r.parent).children.push_back(r.id);
  }
  tree.next_id_ = next_id;
  return tree;
}

std::string TopicTree::export_dot(
    const std::function<std::string(const TopicNode&)>& label) const {
  std::ostringstream os;
  os << "digraph topics {\n  node [shape=box];\n";
  for (const auto& [id, n] : nodes_) {
    os << "  n" << id << " [label=\"" << label(n) << "\"];\n";
  }
  for (const auto& [id, n] : nodes_) {
    for (int c : n.children) os << "  n" << id << " -> n" << c << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace ghlda
