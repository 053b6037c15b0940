#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "infoctl/infoctl.hpp"

namespace testing_support {

using namespace infoctl;

// {node, parent} pairs; an empty parent marks the root.
inline DocumentRecord doc(const std::string& doc_id, const std::vector<std::pair<std::string, std::string>>& nodes) {
  DocumentRecord d{doc_id, doc_id + " title", {}};
  for (const auto& [id, parent] : nodes) {
    d.nodes.push_back(NodeRecord{id, parent.empty() ? std::nullopt : std::optional<std::string>(parent), 0, id,
                                 "text of " + id});
  }
  return d;
}

inline TreePtr tree(const DocumentRecord& d) { return std::make_shared<const EvidenceTree>(build_tree(d)); }

inline RetrievalOutput output(std::vector<TreePtr> trees, std::size_t l = 0) {
  RetrievalOutput o;
  o.search_index = l;
  o.query = "q";
  for (std::size_t i = 0; i < trees.size(); ++i) o.scores.push_back(1.0 / static_cast<double>(i + 1));
  o.trees = std::move(trees);
  return o;
}

// Random tree on n nodes: node i > 0 hangs off a uniformly chosen earlier node.
// Node ids are "<prefix>.<i>", zero-padded so lexical and numeric order agree.
inline DocumentRecord random_document(std::mt19937_64& rng, const std::string& prefix, std::size_t n) {
  std::vector<std::pair<std::string, std::string>> nodes;
  auto id = [&](std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%02zu", i);
    return prefix + "." + buf;
  };
  nodes.emplace_back(id(0), "");
  for (std::size_t i = 1; i < n; ++i) nodes.emplace_back(id(i), id(rng() % i));
  return doc(prefix, nodes);
}

// Returns the scripted per-token log-probs for each candidate; unknown candidates
// fall back to `fallback`.
class TableScorer final : public Scorer {
 public:
  explicit TableScorer(std::map<std::string, std::vector<double>> table, std::vector<double> fallback = {-1.0})
      : table_(std::move(table)), fallback_(std::move(fallback)) {}

  std::vector<double> score_tokens(std::string_view candidate, const ScoringContext&) const override {
    auto it = table_.find(std::string(candidate));
    return it == table_.end() ? fallback_ : it->second;
  }

 private:
  std::map<std::string, std::vector<double>> table_;
  std::vector<double> fallback_;
};

// Embeds listed texts to fixed vectors; anything else maps to e_0.
class TableEmbedder final : public Embedder {
 public:
  TableEmbedder(std::size_t dim, std::map<std::string, std::vector<double>> table)
      : dim_(dim), table_(std::move(table)) {}

  EmbeddingVector embed(std::string_view text) const override {
    auto it = table_.find(std::string(text));
    if (it != table_.end()) return EmbeddingVector{it->second};
    std::vector<double> v(dim_, 0.0);
    v[0] = 1.0;
    return EmbeddingVector{v};
  }
  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
  std::map<std::string, std::vector<double>> table_;
};

// Brute-force reference for expansion planning. The top-k set is found by
// checking every k-subset for one whose members all outrank all non-members.
struct PlanOracle {
  std::vector<NodeId> leaves;
  NodeSet closure;
  std::vector<std::set<Edge>> layers;
};

inline PlanOracle plan_oracle(const std::vector<TreePtr>& trees, const std::map<NodeId, double>& score, std::size_t k) {
  struct Key {
    double score;
    std::size_t tree;
    NodeId id;
    const EvidenceNode* node;
  };
  std::vector<Key> all;
  NodeSet seen;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    for (const auto* leaf : trees[t]->leaves()) {
      if (seen.insert(leaf->node_id).second) all.push_back(Key{score.at(leaf->node_id), t, leaf->node_id, leaf});
    }
  }
  auto beats = [](const Key& a, const Key& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.tree != b.tree) return a.tree < b.tree;
    return a.id < b.id;
  };
  PlanOracle o;
  k = std::min(k, all.size());
  if (k == 0) return o;
  const std::size_t n = all.size();
  std::vector<Key> chosen;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      for (std::size_t j = 0; j < n && ok; ++j) {
        if (!(mask >> j & 1) && !beats(all[i], all[j])) ok = false;
      }
    }
    if (ok) {
      for (std::size_t i = 0; i < n; ++i) {
        if (mask >> i & 1) chosen.push_back(all[i]);
      }
      break;
    }
  }
  std::sort(chosen.begin(), chosen.end(), beats);
  std::map<int, std::set<Edge>> by_level;
  for (const auto& c : chosen) {
    o.leaves.push_back(c.id);
    const auto& tr = *trees[c.tree];
    for (const EvidenceNode* node = c.node; node;) {
      o.closure.insert(node->node_id);
      if (!node->parent_id) break;
      by_level[node->level].insert(Edge{*node->parent_id, node->node_id});
      node = tr.find(*node->parent_id);
    }
  }
  for (auto& [lvl, edges] : by_level) o.layers.push_back(edges);
  return o;
}

// Returns the same trees for every query.
class FixtureEnvironment final : public Environment {
 public:
  FixtureEnvironment(TaskRecord task, std::vector<TreePtr> trees, const Embedder& emb, const Scorer& scorer)
      : task_(std::move(task)), trees_(std::move(trees)), emb_(emb), scorer_(scorer) {}

  const TaskRecord& task() const override { return task_; }
  RetrievalOutput retrieve(std::string_view query, std::size_t l) const override {
    auto o = output(trees_, l);
    o.query = std::string(query);
    return o;
  }
  const Embedder& embedder() const override { return emb_; }
  const Scorer& scorer() const override { return scorer_; }

 private:
  TaskRecord task_;
  std::vector<TreePtr> trees_;
  const Embedder& emb_;
  const Scorer& scorer_;
};

// Policy from a callable; records every observation's control message.
class FnPolicy final : public Policy {
 public:
  explicit FnPolicy(std::function<Action(const Observation&)> fn) : fn_(std::move(fn)) {}
  Action act(const Observation& obs) override {
    seen_controls.push_back(obs.control);
    return fn_(obs);
  }
  std::vector<std::optional<std::string>> seen_controls;

 private:
  std::function<Action(const Observation&)> fn_;
};

inline Action retrieve_action(std::string q = "query") { return Action{"", ActionKind::Retrieve, std::move(q), 0}; }
inline Action answer_action(std::string a) { return Action{"", ActionKind::Answer, std::move(a), 0}; }
inline Action expand_action(const std::vector<Edge>& edges) {
  return Action{"", ActionKind::Expand, format_expand_params(edges), 0};
}

// Candidate scores independent of the evidence: p(candidate) is proportional to `weights`.
inline TableScorer constant_scorer(const std::vector<std::pair<std::string, double>>& weights) {
  std::map<std::string, std::vector<double>> t;
  for (const auto& [c, w] : weights) t[c] = {std::log(w)};
  return TableScorer(t);
}

}  // namespace testing_support
