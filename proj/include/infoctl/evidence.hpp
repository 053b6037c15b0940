#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "infoctl/error.hpp"

namespace infoctl {

using NodeId = std::string;
using NodeSet = std::set<NodeId>;

struct EvidenceNode {
  NodeId node_id;
  std::optional<NodeId> parent_id;
  int level = 0;
  std::string title;
  std::string text;
  bool is_leaf = true;
};

struct Edge {
  NodeId parent;
  NodeId child;

  auto operator<=>(const Edge&) const = default;
};

// On-disk corpus document: {doc_id, title, nodes:[{node_id, parent_id|null, level, title, text}]}.
struct NodeRecord {
  NodeId node_id;
  std::optional<NodeId> parent_id;
  int level = 0;
  std::string title;
  std::string text;
};

struct DocumentRecord {
  std::string doc_id;
  std::string title;
  std::vector<NodeRecord> nodes;
};

// A validated rooted hierarchy for one retrieved source. Immutable after build.
class EvidenceTree {
 public:
  const std::string& doc_id() const { return doc_id_; }
  const std::string& title() const { return title_; }
  const EvidenceNode& root() const { return nodes_[root_]; }
  std::span<const EvidenceNode> nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }

  const EvidenceNode* find(const NodeId& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &nodes_[it->second];
  }

  bool has_edge(const Edge& e) const { return edges_.contains(e); }

  std::vector<const EvidenceNode*> children(const NodeId& id) const {
    std::vector<const EvidenceNode*> out;
    for (const auto& n : nodes_) {
      if (n.parent_id && *n.parent_id == id) out.push_back(&n);
    }
    return out;
  }

  // Leaves in record order. A root-only tree yields its root.
  std::vector<const EvidenceNode*> leaves() const {
    std::vector<const EvidenceNode*> out;
    for (const auto& n : nodes_) {
      if (n.is_leaf) out.push_back(&n);
    }
    return out;
  }

  std::size_t depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.level);
    return static_cast<std::size_t>(d) + 1;
  }

  friend EvidenceTree build_tree(const DocumentRecord& record);

 private:
  std::string doc_id_;
  std::string title_;
  std::vector<EvidenceNode> nodes_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::set<Edge> edges_;
  std::size_t root_ = 0;
};

// Validates the parent relation and recomputes levels from the parent chain;
// the record's own level fields are ignored.
inline EvidenceTree build_tree(const DocumentRecord& record) {
  if (record.nodes.empty()) {
    throw Error(ErrorKind::EmptyTree, "document '" + record.doc_id + "' has no nodes");
  }
  EvidenceTree tree;
  tree.doc_id_ = record.doc_id;
  tree.title_ = record.title;
  tree.nodes_.reserve(record.nodes.size());
  for (const auto& r : record.nodes) {
    if (tree.index_.contains(r.node_id)) {
      throw Error(ErrorKind::DuplicateNode, "node '" + r.node_id + "' appears twice");
    }
    tree.index_.emplace(r.node_id, tree.nodes_.size());
    tree.nodes_.push_back(EvidenceNode{r.node_id, r.parent_id, 0, r.title, r.text, true});
  }

  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    const auto& n = tree.nodes_[i];
    if (!n.parent_id) {
      if (root) {
        throw Error(ErrorKind::MultipleRoots,
                    "nodes '" + tree.nodes_[*root].node_id + "' and '" + n.node_id + "' have no parent");
      }
      root = i;
    } else if (!tree.index_.contains(*n.parent_id)) {
      throw Error(ErrorKind::DanglingParent,
                  "node '" + n.node_id + "' references missing parent '" + *n.parent_id + "'");
    }
  }

  // Walk each parent chain; a chain longer than the node count is a cycle.
  // A forest whose only parentless node is absent is also reported as a cycle.
  const std::size_t n_nodes = tree.nodes_.size();
  for (std::size_t i = 0; i < n_nodes; ++i) {
    std::size_t cur = i;
    int level = 0;
    while (tree.nodes_[cur].parent_id) {
      cur = tree.index_.at(*tree.nodes_[cur].parent_id);
      if (++level > static_cast<int>(n_nodes)) {
        throw Error(ErrorKind::CycleDetected, "parent chain from '" + tree.nodes_[i].node_id + "' loops");
      }
    }
    tree.nodes_[i].level = level;
  }
  if (!root) throw Error(ErrorKind::CycleDetected, "document '" + record.doc_id + "' has no root");
  tree.root_ = *root;

  for (const auto& n : tree.nodes_) {
    if (n.parent_id) {
      tree.edges_.insert(Edge{*n.parent_id, n.node_id});
      tree.nodes_[tree.index_.at(*n.parent_id)].is_leaf = false;
    }
  }
  return tree;
}

using TreePtr = std::shared_ptr<const EvidenceTree>;

struct RetrievalOutput {
  std::size_t search_index = 0;
  std::string query;
  std::vector<TreePtr> trees;
  std::vector<double> scores;
};

struct LeafRef {
  NodeId node_id;
  std::string text;

  bool operator==(const LeafRef&) const = default;
};

struct LeafPool {
  std::vector<LeafRef> leaves;
  std::size_t search_index = 0;

  bool empty() const { return leaves.empty(); }
  std::size_t size() const { return leaves.size(); }

  bool contains(const NodeId& id) const {
    return std::any_of(leaves.begin(), leaves.end(), [&](const LeafRef& l) { return l.node_id == id; });
  }
};

// All leaves of every retrieved tree, independent of injection state.
// Tree order is preserved; a leaf seen twice is kept once.
inline LeafPool leaf_pool(const RetrievalOutput& output) {
  LeafPool pool;
  pool.search_index = output.search_index;
  std::set<NodeId> seen;
  for (const auto& tree : output.trees) {
    for (const auto* leaf : tree->leaves()) {
      if (seen.insert(leaf->node_id).second) pool.leaves.push_back(LeafRef{leaf->node_id, leaf->text});
    }
  }
  return pool;
}

// Union of leaf pools by node id; the result is the prior pool for later steps.
inline void merge_into(LeafPool& into, const LeafPool& from) {
  std::set<NodeId> seen;
  for (const auto& l : into.leaves) seen.insert(l.node_id);
  for (const auto& l : from.leaves) {
    if (seen.insert(l.node_id).second) into.leaves.push_back(l);
  }
}

enum class EdgeStatus { Ok, UnknownEdge, ParentNotInjected };

// Time-indexed, monotone record of nodes placed in the agent context.
// Every primitive step that touches the ledger gets an immutable snapshot.
class InjectedLedger {
 public:
  struct Entry {
    int step;
    NodeId node;
  };

  void inject_roots(const RetrievalOutput& output, int t) {
    check_step(t);
    for (const auto& tree : output.trees) register_tree(tree);
    for (const auto& tree : output.trees) add(tree->root().node_id, t);
    commit(t);
  }

  // Children of the given edges join the context at step t. The whole call is
  // rejected if any edge is unknown or its parent was not injected before t.
  void apply_expansion(std::span<const Edge> edges, int t) {
    check_step(t);
    for (const auto& e : edges) {
      switch (classify(e)) {
        case EdgeStatus::UnknownEdge:
          throw Error(ErrorKind::UnknownEdge, "(" + e.parent + ", " + e.child + ") is not a retrieved edge");
        case EdgeStatus::ParentNotInjected:
          throw Error(ErrorKind::ParentNotInjected, "parent '" + e.parent + "' is not injected");
        case EdgeStatus::Ok:
          break;
      }
    }
    for (const auto& e : edges) add(e.child, t);
    commit(t);
  }

  // Records C_t = C_{t-1} for a step that injects nothing.
  void mark(int t) {
    check_step(t);
    commit(t);
  }

  EdgeStatus classify(const Edge& e) const {
    auto it = registry_.find(e.child);
    if (it == registry_.end() || !it->second.node->parent_id || *it->second.node->parent_id != e.parent) {
      return EdgeStatus::UnknownEdge;
    }
    return current_.contains(e.parent) ? EdgeStatus::Ok : EdgeStatus::ParentNotInjected;
  }

  // C_{t_end} \ C_{t_start - 1}; the set before step 0 is empty.
  NodeSet net_injected(int t_start, int t_end) const {
    if (t_start > t_end) {
      throw Error(ErrorKind::InvalidArgument, "t_start " + std::to_string(t_start) + " > t_end " + std::to_string(t_end));
    }
    const auto end = snapshot(t_end);
    NodeSet before;
    if (t_start > 0) before = *snapshot(t_start - 1);
    NodeSet out;
    std::set_difference(end->begin(), end->end(), before.begin(), before.end(), std::inserter(out, out.end()));
    return out;
  }

  std::shared_ptr<const NodeSet> snapshot(int t) const {
    auto it = snapshots_.find(t);
    if (it == snapshots_.end()) {
      throw Error(ErrorKind::MissingSnapshot, "no snapshot at step " + std::to_string(t));
    }
    return it->second;
  }

  bool has_snapshot(int t) const { return snapshots_.contains(t); }
  const NodeSet& injected() const { return current_; }
  bool contains(const NodeId& id) const { return current_.contains(id); }
  std::span<const Entry> entries() const { return entries_; }
  std::optional<int> last_step() const { return last_step_; }

  const EvidenceNode* lookup(const NodeId& id) const {
    auto it = registry_.find(id);
    return it == registry_.end() ? nullptr : it->second.node;
  }

  bool known(const NodeId& id) const { return registry_.contains(id); }

  // Texts of injected nodes in injection order.
  std::vector<std::string> injected_texts() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(lookup(e.node)->text);
    return out;
  }

  // Union of the node sets of every tree seen so far.
  NodeSet retrieved_nodes() const {
    NodeSet out;
    for (const auto& [id, _] : registry_) out.insert(id);
    return out;
  }

 private:
  struct Located {
    const EvidenceTree* tree;
    const EvidenceNode* node;
  };

  void check_step(int t) const {
    if (t < 0 || (last_step_ && t <= *last_step_)) {
      throw Error(ErrorKind::NonMonotoneStep,
                  "step " + std::to_string(t) + " after " + std::to_string(last_step_.value_or(-1)));
    }
  }

  void register_tree(const TreePtr& tree) {
    if (std::any_of(trees_.begin(), trees_.end(), [&](const TreePtr& t) { return t.get() == tree.get(); })) return;
    trees_.push_back(tree);
    for (const auto& n : tree->nodes()) registry_.emplace(n.node_id, Located{tree.get(), &n});
  }

  void add(const NodeId& id, int t) {
    if (current_.insert(id).second) entries_.push_back(Entry{t, id});
  }

  void commit(int t) {
    snapshots_[t] = std::make_shared<const NodeSet>(current_);
    last_step_ = t;
  }

  std::vector<TreePtr> trees_;
  std::map<NodeId, Located> registry_;
  std::vector<Entry> entries_;
  std::map<int, std::shared_ptr<const NodeSet>> snapshots_;
  NodeSet current_;
  std::optional<int> last_step_;
};

}  // namespace infoctl
