#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infoctl/error.hpp"
#include "infoctl/evidence.hpp"
#include "infoctl/utility.hpp"

namespace infoctl {

struct ControllerConfig {
  double rho = 0.5;
  double delta = 0.2;
  std::size_t m_stop = 2;
  std::size_t m_cont = 1;
  double eta = 0.7;
  std::size_t k_expand = 3;
  std::size_t k_nn = 3;

  void validate() const {
    if (rho < 0.0 || rho > 1.0) throw Error(ErrorKind::InvalidConfig, "rho must lie in [0, 1]");
    if (m_stop < 1 || m_cont < 1) throw Error(ErrorKind::InvalidConfig, "window lengths must be >= 1");
    if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorKind::InvalidConfig, "eta must lie in (0, 1]");
    if (k_nn < 1) throw Error(ErrorKind::InvalidConfig, "k_nn must be >= 1");
  }

  bool operator==(const ControllerConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Search continuation

// Smallest l >= m_stop - 1 whose trailing window of m_stop utilities stays
// below delta, i.e. the end of the first run of m_stop consecutive sub-delta steps.
inline std::optional<std::size_t> should_stop(std::span<const double> utilities, double delta, std::size_t m_stop) {
  if (m_stop == 0) throw Error(ErrorKind::InvalidArgument, "m_stop must be >= 1");
  std::size_t run = 0;
  for (std::size_t l = 0; l < utilities.size(); ++l) {
    run = utilities[l] < delta ? run + 1 : 0;
    if (run >= m_stop) return l;
  }
  return std::nullopt;
}

inline std::optional<std::size_t> should_stop(std::span<const UtilityScore> history, const ControllerConfig& cfg) {
  std::vector<double> u;
  u.reserve(history.size());
  for (const auto& s : history) u.push_back(s.utility);
  return should_stop(u, cfg.delta, cfg.m_stop);
}

// Training-time continuation trigger: the gold answer is under-believed while
// the last m_cont search steps all carried utility >= delta. Returns false when
// fewer than m_cont steps exist.
inline bool should_continue(const AnswerDistribution& dist, const CandidateSet& candidates,
                            std::span<const UtilityScore> history, const ControllerConfig& cfg) {
  if (!candidates.gold_index) throw Error(ErrorKind::MissingGold, "continuation needs the gold answer");
  if (dist.probs.size() != candidates.size()) {
    throw Error(ErrorKind::MisalignedCandidates, "distribution does not match the candidate set");
  }
  if (history.size() < cfg.m_cont) return false;
  const double p_gold = dist.probs[*candidates.gold_index];
  if (!(p_gold < cfg.eta * dist.max())) return false;
  for (std::size_t j = history.size() - cfg.m_cont; j < history.size(); ++j) {
    if (history[j].utility < cfg.delta) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Selective expansion

struct LeafScore {
  NodeId node_id;
  double score;
};

// Per-leaf utility: rho * novelty against the prior pool + (1 - rho) * query relevance.
inline std::vector<LeafScore> score_leaves(const LeafPool& pool, const LeafPool& prior_pool,
                                           const EmbeddingVector& query_embedding, const ControllerConfig& cfg,
                                           const Embedder& embedder) {
  if (pool.empty()) throw Error(ErrorKind::EmptyNewPool, "no leaves to score");
  std::vector<EmbeddingVector> prior;
  prior.reserve(prior_pool.size());
  for (const auto& l : prior_pool.leaves) prior.push_back(embedder.embed(l.text));
  std::vector<LeafScore> out;
  out.reserve(pool.size());
  for (const auto& l : pool.leaves) {
    const auto v = embedder.embed(l.text);
    const double nov = leaf_novelty(v, prior, cfg.k_nn);
    const double rel = clamped_cosine(v, query_embedding);
    out.push_back(LeafScore{l.node_id, cfg.rho * nov + (1.0 - cfg.rho) * rel});
  }
  return out;
}

struct ExpansionPlan {
  std::vector<NodeId> target_leaves;
  NodeSet target_set;
  // One edge batch per expansion action, shallowest layer first.
  std::vector<std::set<Edge>> per_step_edges;

  bool empty() const { return target_leaves.empty(); }
};

// Top-k_expand leaves by score (ties: tree order, then node id ascending),
// closed under ancestors and grouped into one edge layer per depth below the roots.
inline ExpansionPlan derive_expansion_plan(std::span<const TreePtr> trees, std::span<const LeafScore> scores,
                                           const ControllerConfig& cfg) {
  ExpansionPlan plan;
  if (cfg.k_expand == 0) return plan;

  std::map<NodeId, double> by_id;
  for (const auto& s : scores) by_id[s.node_id] = s.score;

  struct Candidate {
    double score;
    std::size_t tree;
    const EvidenceNode* leaf;
  };
  std::vector<Candidate> cands;
  std::set<NodeId> seen;
  for (std::size_t ti = 0; ti < trees.size(); ++ti) {
    auto leaves = trees[ti]->leaves();
    std::sort(leaves.begin(), leaves.end(),
              [](const EvidenceNode* a, const EvidenceNode* b) { return a->node_id < b->node_id; });
    for (const auto* leaf : leaves) {
      if (!seen.insert(leaf->node_id).second) continue;
      auto it = by_id.find(leaf->node_id);
      if (it == by_id.end()) {
        throw Error(ErrorKind::InvalidArgument, "no score for leaf '" + leaf->node_id + "'");
      }
      cands.push_back(Candidate{it->second, ti, leaf});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  const std::size_t k = std::min(cfg.k_expand, cands.size());

  std::map<int, std::set<Edge>> layers;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& tree = *trees[cands[i].tree];
    plan.target_leaves.push_back(cands[i].leaf->node_id);
    for (const EvidenceNode* n = cands[i].leaf; n != nullptr;) {
      plan.target_set.insert(n->node_id);
      if (!n->parent_id) break;
      layers[n->level].insert(Edge{*n->parent_id, n->node_id});
      n = tree.find(*n->parent_id);
    }
  }
  for (auto& [level, edges] : layers) plan.per_step_edges.push_back(std::move(edges));
  return plan;
}

// ---------------------------------------------------------------------------
// Control messages

enum class SignalKind { Stop, ContinueOneStep, Expand };

constexpr std::string_view to_string(SignalKind k) {
  switch (k) {
    case SignalKind::Stop: return "stop";
    case SignalKind::ContinueOneStep: return "continue";
    case SignalKind::Expand: return "expand";
  }
  return "?";
}

struct ControlSignal {
  SignalKind kind = SignalKind::Stop;
  std::vector<NodeId> expand_ids;
  int issued_at = 0;

  bool operator==(const ControlSignal&) const = default;
};

inline constexpr std::string_view kControlOpen = "<control>";
inline constexpr std::string_view kControlClose = "</control>";
inline constexpr std::string_view kStopBody = "Stop searching";
inline constexpr std::string_view kContinueBody = "Continue the search for one additional step";
inline constexpr std::string_view kExpandPrefix = "Expand the retrieved documents: [";

inline std::string render_control(const ControlSignal& signal) {
  std::string body;
  switch (signal.kind) {
    case SignalKind::Stop:
      body = kStopBody;
      break;
    case SignalKind::ContinueOneStep:
      body = kContinueBody;
      break;
    case SignalKind::Expand:
      if (signal.expand_ids.empty()) throw Error(ErrorKind::InvalidArgument, "Expand signal without ids");
      body = std::string(kExpandPrefix) + join(signal.expand_ids, ", ") + "]";
      break;
  }
  return std::string(kControlOpen) + body + std::string(kControlClose);
}

// Inverse of render_control; issued_at is not part of the message and comes back as 0.
inline std::optional<ControlSignal> parse_control(std::string_view message) {
  if (!message.starts_with(kControlOpen) || !message.ends_with(kControlClose)) return std::nullopt;
  message.remove_prefix(kControlOpen.size());
  message.remove_suffix(kControlClose.size());
  if (message == kStopBody) return ControlSignal{SignalKind::Stop, {}, 0};
  if (message == kContinueBody) return ControlSignal{SignalKind::ContinueOneStep, {}, 0};
  if (message.starts_with(kExpandPrefix) && message.ends_with("]")) {
    message.remove_prefix(kExpandPrefix.size());
    message.remove_suffix(1);
    ControlSignal s{SignalKind::Expand, {}, 0};
    for (;;) {
      const auto pos = message.find(", ");
      s.expand_ids.emplace_back(message.substr(0, pos));
      if (pos == std::string_view::npos) break;
      message.remove_prefix(pos + 2);
    }
    if (s.expand_ids.empty() || std::any_of(s.expand_ids.begin(), s.expand_ids.end(),
                                            [](const NodeId& id) { return id.empty(); })) {
      return std::nullopt;
    }
    return s;
  }
  return std::nullopt;
}

}  // namespace infoctl
