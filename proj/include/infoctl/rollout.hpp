#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoctl/control.hpp"
#include "infoctl/error.hpp"
#include "infoctl/evidence.hpp"
#include "infoctl/reward.hpp"
#include "infoctl/task.hpp"
#include "infoctl/utility.hpp"

namespace infoctl {

enum class ActionKind { Retrieve, Expand, Answer };
enum class Mode { Controlled, Free };
enum class ViolationKind { MalformedToolCall, UnknownTarget, ParentNotInjected, ControlNonCompliance, BudgetOverrun };

constexpr std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Retrieve: return "retrieve";
    case ActionKind::Expand: return "expand";
    case ActionKind::Answer: return "answer";
  }
  return "?";
}

constexpr std::string_view to_string(Mode m) { return m == Mode::Controlled ? "controlled" : "free"; }

constexpr std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::MalformedToolCall: return "MalformedToolCall";
    case ViolationKind::UnknownTarget: return "UnknownTarget";
    case ViolationKind::ParentNotInjected: return "ParentNotInjected";
    case ViolationKind::ControlNonCompliance: return "ControlNonCompliance";
    case ViolationKind::BudgetOverrun: return "BudgetOverrun";
  }
  return "?";
}

// (thought, kind, params). params holds the query, the expansion request
// {"edges": [[parent, child], ...]}, or the answer text.
struct Action {
  std::string thought;
  ActionKind kind = ActionKind::Answer;
  std::string params;
  int step = 0;

  bool operator==(const Action&) const = default;
};

inline std::string format_expand_params(std::span<const Edge> edges) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : edges) arr.push_back({e.parent, e.child});
  return nlohmann::json{{"edges", arr}}.dump();
}

// nullopt for anything that is not a non-empty list of [parent, child] string pairs.
inline std::optional<std::vector<Edge>> parse_expand_params(std::string_view params) {
  const auto j = nlohmann::json::parse(params, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("edges") || !j["edges"].is_array()) return std::nullopt;
  std::vector<Edge> out;
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) return std::nullopt;
    out.push_back(Edge{e[0].get<std::string>(), e[1].get<std::string>()});
  }
  if (out.empty()) return std::nullopt;
  return out;
}

struct Violation {
  int step = 0;
  ViolationKind kind = ViolationKind::MalformedToolCall;
  std::string detail;
};

struct SearchStep {
  std::size_t l = 0;
  int t_start = 0;
  int t_end = 0;

  bool operator==(const SearchStep&) const = default;
};

struct StepUtility {
  std::size_t l = 0;
  UtilityScore score;
  bool degenerate = false;
};

struct ControlEvent {
  int step = 0;
  std::size_t search_index = 0;
  ControlSignal signal;
  std::string message;
  bool complied = true;
  // The proposal the signal pre-empted, if any. Pre-empted proposals are not executed.
  std::optional<ActionKind> intercepted;
};

struct InjectedNode {
  int step = 0;
  NodeId node_id;
  std::string text;
};

struct EpisodeTrace {
  std::string task_id;
  Mode mode = Mode::Free;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::vector<Action> actions;
  std::vector<SearchStep> search_steps;
  std::vector<StepUtility> utilities;
  std::vector<ControlEvent> control_events;
  std::vector<Violation> violations;
  RewardBreakdown reward;
  // Inputs needed to recompute the reward offline.
  std::vector<std::string> gold_answers;
  std::optional<std::string> prediction;
  std::vector<InjectedNode> injected;
};

// ---------------------------------------------------------------------------
// Rollout modes and the annealed curriculum

// Controlled with probability p. Uses the top 53 bits of one draw so the
// outcome is identical on every standard library.
inline Mode sample_mode(double p, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u < p ? Mode::Controlled : Mode::Free;
}

struct AnnealStage {
  std::size_t epochs = 1;
  double p = 0.0;

  bool operator==(const AnnealStage&) const = default;
};

struct AnnealSchedule {
  std::vector<AnnealStage> stages;

  static AnnealSchedule standard() { return AnnealSchedule{{{2, 0.9}, {1, 0.5}, {1, 0.2}, {1, 0.0}}}; }

  std::size_t total_epochs() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.epochs;
    return n;
  }

  void validate() const {
    if (stages.empty()) throw Error(ErrorKind::InvalidConfig, "anneal schedule has no stages");
    for (const auto& s : stages) {
      if (s.epochs == 0) throw Error(ErrorKind::InvalidConfig, "anneal stage with zero epochs");
      if (s.p < 0.0 || s.p > 1.0) throw Error(ErrorKind::InvalidConfig, "anneal p outside [0, 1]");
    }
  }

  bool operator==(const AnnealSchedule&) const = default;
};

inline double anneal_p(const AnnealSchedule& schedule, std::size_t epoch) {
  std::size_t start = 0;
  for (const auto& s : schedule.stages) {
    if (epoch < start + s.epochs) return s.p;
    start += s.epochs;
  }
  throw Error(ErrorKind::EpochOutOfRange,
              "epoch " + std::to_string(epoch) + " beyond schedule of " + std::to_string(start) + " epochs");
}

// ---------------------------------------------------------------------------
// Search-step segmentation

namespace detail {
inline std::vector<SearchStep> segment(std::span<const Action> actions, bool strict) {
  std::vector<SearchStep> out;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const auto kind = actions[t].kind;
    if (kind == ActionKind::Retrieve) {
      if (!out.empty()) out.back().t_end = static_cast<int>(t) - 1;
      out.push_back(SearchStep{out.size(), static_cast<int>(t), static_cast<int>(t)});
    } else if (kind == ActionKind::Expand && out.empty() && strict) {
      throw Error(ErrorKind::ExpandBeforeFirstRetrieve, "expand at step " + std::to_string(t));
    }
  }
  if (!out.empty()) out.back().t_end = static_cast<int>(actions.size()) - 1;
  return out;
}
}  // namespace detail

// One segment per retrieval, running to the step before the next retrieval or to the last action.
inline std::vector<SearchStep> segment_search_steps(std::span<const Action> actions) {
  return detail::segment(actions, true);
}

// ---------------------------------------------------------------------------
// Episode state, violations

struct EpisodeState {
  const TaskRecord* task = nullptr;
  InjectedLedger ledger;
  std::vector<UtilityScore> utility_history;
  std::optional<ControlSignal> pending_control;
  std::size_t actions_taken = 0;
  Mode mode = Mode::Free;
  std::size_t searches = 0;
};

inline bool covers_directive(std::span<const Edge> edges, const ControlSignal& directive) {
  for (const auto& id : directive.expand_ids) {
    if (std::none_of(edges.begin(), edges.end(), [&](const Edge& e) { return e.child == id; })) return false;
  }
  return true;
}

inline std::vector<Violation> detect_violations(const Action& action, const EpisodeState& state) {
  std::vector<Violation> out;
  const auto& pending = state.pending_control;
  auto flag = [&](ViolationKind k, std::string detail) { out.push_back(Violation{action.step, k, std::move(detail)}); };

  switch (action.kind) {
    case ActionKind::Retrieve:
      if (pending && pending->kind == SignalKind::Stop) flag(ViolationKind::ControlNonCompliance, "retrieve after stop");
      break;
    case ActionKind::Answer:
      if (pending && pending->kind == SignalKind::ContinueOneStep) {
        flag(ViolationKind::ControlNonCompliance, "answer instead of continuing");
      }
      break;
    case ActionKind::Expand: {
      if (state.searches == 0) {
        flag(ViolationKind::MalformedToolCall, "expand before any retrieval");
        break;
      }
      const auto edges = parse_expand_params(action.params);
      if (!edges) {
        flag(ViolationKind::MalformedToolCall, "unparsable expand parameters");
        break;
      }
      for (const auto& e : *edges) {
        switch (state.ledger.classify(e)) {
          case EdgeStatus::UnknownEdge:
            flag(ViolationKind::UnknownTarget, "(" + e.parent + ", " + e.child + ")");
            break;
          case EdgeStatus::ParentNotInjected:
            flag(ViolationKind::ParentNotInjected, "(" + e.parent + ", " + e.child + ")");
            break;
          case EdgeStatus::Ok:
            break;
        }
      }
      if (pending && pending->kind == SignalKind::Expand && !covers_directive(*edges, *pending)) {
        flag(ViolationKind::ControlNonCompliance, "expansion omits a directed node");
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Environment and policy interfaces

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const TaskRecord& task() const = 0;
  virtual RetrievalOutput retrieve(std::string_view query, std::size_t search_index) const = 0;
  virtual const Embedder& embedder() const = 0;
  virtual const Scorer& scorer() const = 0;
};

// What the agent sees. The gold answer is not part of it.
struct Observation {
  std::string_view question;
  std::span<const std::string> candidates;
  int step = 0;
  std::size_t budget = 0;
  std::size_t searches = 0;
  const RetrievalOutput* latest = nullptr;
  const InjectedLedger& ledger;
  std::optional<std::string> control;
  const Embedder& embedder;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const Observation& obs) = 0;
};

struct EpisodeConfig {
  ControllerConfig controller;
  RewardConfig reward;
  std::size_t budget = 8;
};

// Memoizes an embedder within one episode. Not thread-safe; one per episode.
class CachedEmbedder final : public Embedder {
 public:
  explicit CachedEmbedder(const Embedder& inner) : inner_(inner) {}

  EmbeddingVector embed(std::string_view text) const override {
    auto it = cache_.find(std::string(text));
    if (it != cache_.end()) return it->second;
    return cache_.emplace(std::string(text), inner_.embed(text)).first->second;
  }

  std::size_t dim() const override { return inner_.dim(); }

 private:
  const Embedder& inner_;
  mutable std::unordered_map<std::string, EmbeddingVector> cache_;
};

// Runs one episode to an answer, a complied stop, or budget exhaustion.
//
// A search step closes when the agent proposes its next retrieval or its answer
// (or the budget runs out); utility is computed exactly then. In Controlled mode
// the controller may pre-empt that proposal with Stop (on a retrieval) or
// ContinueOneStep (on an answer) and re-query the agent; Expand directives are
// issued right after retrieval results arrive, one per plan layer.
inline EpisodeTrace run_episode(const Environment& env, Policy& agent, const EpisodeConfig& cfg, Mode mode) {
  cfg.controller.validate();
  cfg.reward.validate();
  if (cfg.budget < 1) throw Error(ErrorKind::InvalidArgument, "budget must be >= 1");

  const TaskRecord& task = env.task();
  const CandidateSet& cands = task.candidates;
  const bool controlled = mode == Mode::Controlled;
  CachedEmbedder emb(env.embedder());

  EpisodeState st;
  st.task = &task;
  st.mode = mode;

  EpisodeTrace tr;
  tr.task_id = task.task_id;
  tr.mode = mode;
  tr.gold_answers = task.gold_answers;

  struct OpenStep {
    std::size_t l;
    LeafPool pool;
  };
  std::optional<OpenStep> open;
  std::optional<RetrievalOutput> latest;
  LeafPool prior;
  AnswerDistribution prev = answer_distribution(env.scorer(), task.question, {}, task.canned_trace, cands);
  std::optional<AnswerDistribution> belief;
  bool stop_issued = false;
  bool continue_issued = false;
  std::optional<std::size_t> pending_event;
  std::deque<std::set<Edge>> plan_layers;

  auto observe = [&](int t) {
    return Observation{task.question,
                       cands.candidates,
                       t,
                       cfg.budget,
                       st.searches,
                       latest ? &*latest : nullptr,
                       st.ledger,
                       st.pending_control ? std::optional<std::string>(render_control(*st.pending_control))
                                          : std::nullopt,
                       emb};
  };

  auto issue = [&](ControlSignal signal, std::optional<ActionKind> intercepted) {
    if (pending_event && st.pending_control && st.pending_control->kind != SignalKind::Stop) {
      tr.control_events[*pending_event].complied = false;
    }
    const std::size_t l = st.searches == 0 ? 0 : st.searches - 1;
    tr.control_events.push_back(ControlEvent{signal.issued_at, l, signal, render_control(signal), true, intercepted});
    pending_event = tr.control_events.size() - 1;
    st.pending_control = std::move(signal);
  };

  auto issue_next_expand = [&](int t) {
    while (!plan_layers.empty()) {
      auto layer = std::move(plan_layers.front());
      plan_layers.pop_front();
      std::vector<NodeId> ids;
      for (const auto& e : layer) {
        if (!st.ledger.contains(e.child)) ids.push_back(e.child);
      }
      if (!ids.empty()) {
        issue(ControlSignal{SignalKind::Expand, std::move(ids), t}, std::nullopt);
        return;
      }
    }
  };

  auto close_step = [&]() {
    const auto& o = *open;
    const double nov = novelty(o.pool, prior, cfg.controller.k_nn, emb);
    const auto texts = st.ledger.injected_texts();
    auto dist = answer_distribution(env.scorer(), task.question, texts, task.canned_trace, cands, o.l);
    const double eff = effectiveness(dist, prev);
    const auto score = utility(nov, eff, cfg.controller.rho);
    st.utility_history.push_back(score);
    tr.utilities.push_back(StepUtility{o.l, score, dist.degenerate});
    merge_into(prior, o.pool);
    prev = dist;
    belief = std::move(dist);
    open.reset();
  };

  for (;;) {
    const int t = static_cast<int>(tr.actions.size());
    if (tr.actions.size() == cfg.budget) {
      if (open) close_step();
      (void)agent.act(observe(t));
      tr.violations.push_back(Violation{t, ViolationKind::BudgetOverrun, "action budget exhausted"});
      break;
    }

    Action a = agent.act(observe(t));
    a.step = t;

    if (open && a.kind != ActionKind::Expand) {
      close_step();
      if (controlled) {
        const bool stop_fires = should_stop(st.utility_history, cfg.controller).has_value();
        if (a.kind == ActionKind::Retrieve && stop_fires && !stop_issued) {
          stop_issued = true;
          plan_layers.clear();
          issue(ControlSignal{SignalKind::Stop, {}, t}, ActionKind::Retrieve);
          continue;
        }
        if (a.kind == ActionKind::Answer && !stop_fires && !continue_issued && cands.gold_index &&
            should_continue(*belief, cands, st.utility_history, cfg.controller)) {
          continue_issued = true;
          plan_layers.clear();
          issue(ControlSignal{SignalKind::ContinueOneStep, {}, t}, ActionKind::Answer);
          continue;
        }
      }
    }

    for (auto& v : detect_violations(a, st)) tr.violations.push_back(std::move(v));

    std::optional<std::vector<Edge>> edges;
    if (a.kind == ActionKind::Expand) edges = parse_expand_params(a.params);

    bool expand_complied = false;
    if (st.pending_control) {
      auto& ev = tr.control_events[*pending_event];
      switch (st.pending_control->kind) {
        case SignalKind::Stop:
          if (a.kind == ActionKind::Retrieve) ev.complied = false;
          break;
        case SignalKind::ContinueOneStep:
          ev.complied = a.kind != ActionKind::Answer;
          st.pending_control.reset();
          break;
        case SignalKind::Expand:
          expand_complied = edges && covers_directive(*edges, *st.pending_control);
          ev.complied = expand_complied;
          if (!expand_complied) plan_layers.clear();
          st.pending_control.reset();
          break;
      }
      if (!st.pending_control) pending_event.reset();
    }

    tr.actions.push_back(a);
    ++st.actions_taken;

    if (a.kind == ActionKind::Retrieve) {
      const std::size_t l = st.searches;
      RetrievalOutput out;
      try {
        out = env.retrieve(a.params, l);
      } catch (const Error&) {
        throw;
      } catch (const std::exception& e) {
        throw Error(ErrorKind::EnvironmentFailure, e.what());
      }
      if (out.trees.empty()) throw Error(ErrorKind::EnvironmentFailure, "retrieval returned no sources");
      st.ledger.inject_roots(out, t);
      ++st.searches;
      open = OpenStep{l, leaf_pool(out)};
      latest = std::move(out);
      if (controlled && cfg.controller.k_expand > 0 && !stop_issued) {
        const auto q = emb.embed(latest->query);
        const auto scores = score_leaves(open->pool, prior, q, cfg.controller, emb);
        const auto plan = derive_expansion_plan(latest->trees, scores, cfg.controller);
        plan_layers.assign(plan.per_step_edges.begin(), plan.per_step_edges.end());
        issue_next_expand(t);
      }
    } else if (a.kind == ActionKind::Expand) {
      std::vector<Edge> valid;
      if (edges && st.searches > 0) {
        for (const auto& e : *edges) {
          if (st.ledger.classify(e) == EdgeStatus::Ok) valid.push_back(e);
        }
      }
      if (valid.empty()) {
        st.ledger.mark(t);
      } else {
        st.ledger.apply_expansion(valid, t);
      }
      if (controlled && expand_complied) issue_next_expand(t);
    } else {
      st.ledger.mark(t);
      tr.prediction = a.params;
      break;
    }
  }

  tr.search_steps = detail::segment(tr.actions, false);
  for (const auto& e : st.ledger.entries()) {
    tr.injected.push_back(InjectedNode{e.step, e.node, st.ledger.lookup(e.node)->text});
  }
  const auto texts = st.ledger.injected_texts();
  tr.reward = total_reward(tr.prediction, tr.gold_answers, tr.violations.size(), texts, cfg.reward);
  return tr;
}

// Reward recomputed from the fields stored in a trace.
inline RewardBreakdown recompute_reward(const EpisodeTrace& tr, const RewardConfig& cfg) {
  std::vector<std::string> texts;
  texts.reserve(tr.injected.size());
  for (const auto& n : tr.injected) texts.push_back(n.text);
  return total_reward(tr.prediction, tr.gold_answers, tr.violations.size(), texts, cfg);
}

}  // namespace infoctl
