#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "infoctl/control.hpp"
#include "infoctl/error.hpp"
#include "infoctl/evidence.hpp"
#include "infoctl/rollout.hpp"
#include "infoctl/task.hpp"
#include "infoctl/text.hpp"
#include "infoctl/utility.hpp"

namespace infoctl {

// ---------------------------------------------------------------------------
// Hash embedder

// Bag-of-tokens feature hashing with signed buckets, L2-normalized. Tokens are
// those of the normalized text, so it agrees with answer normalization.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 256) : dim_(dim) {
    if (dim < 16) throw Error(ErrorKind::InvalidArgument, "hash embedder dim must be >= 16");
  }

  std::size_t dim() const override { return dim_; }

  std::size_t bucket(std::string_view token) const { return fnv1a64(token) % dim_; }
  double sign(std::string_view token) const { return (fnv1a64(token) >> 63) ? -1.0 : 1.0; }

  EmbeddingVector embed(std::string_view text) const override {
    EmbeddingVector v{std::vector<double>(dim_, 0.0)};
    const auto tokens = normalized_tokens(text);
    for (const auto& tok : tokens) v.values[bucket(tok)] += sign(tok);
    double norm = 0.0;
    for (double x : v.values) norm += x * x;
    if (norm == 0.0) {
      // Empty text maps to e_0; a nonempty text whose buckets cancel gets its own basis vector.
      v.values[tokens.empty() ? 0 : fnv1a64(text) % dim_] = 1.0;
      return v;
    }
    norm = std::sqrt(norm);
    for (double& x : v.values) x /= norm;
    return v;
  }

 private:
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Toy answer scorer

// log p(token) under a smoothed unigram model of the conditioning text
// (task + evidence + trace):  p = (count + a) / (N + a * (V + 1)),
// N = conditioning tokens, V = distinct conditioning tokens.
class ToyScorer final : public Scorer {
 public:
  static constexpr double kSmoothing = 0.5;

  std::vector<double> score_tokens(std::string_view candidate, const ScoringContext& ctx) const override {
    std::unordered_map<std::string, double> counts;
    double n = 0.0;
    auto absorb = [&](std::string_view text) {
      for (auto& tok : normalized_tokens(text)) {
        counts[std::move(tok)] += 1.0;
        n += 1.0;
      }
    };
    absorb(ctx.task);
    for (const auto& e : ctx.evidence) absorb(e);
    absorb(ctx.trace);
    const double denom = n + kSmoothing * (static_cast<double>(counts.size()) + 1.0);

    std::vector<double> out;
    for (const auto& tok : normalized_tokens(candidate)) {
      auto it = counts.find(tok);
      const double c = it == counts.end() ? 0.0 : it->second;
      out.push_back(std::log((c + kSmoothing) / denom));
    }
    // An all-punctuation candidate still gets one (unseen) token.
    if (out.empty()) out.push_back(std::log(kSmoothing / denom));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Corpus generation

struct CorpusSpec {
  std::size_t num_docs = 200;
  std::size_t depth = 3;
  std::size_t branching = 3;
  std::size_t num_tasks = 20;
  std::size_t redundancy_factor = 3;
  std::size_t noise_vocab_size = 500;
  std::uint64_t seed = 7;

  static constexpr std::size_t kAnswersPerTask = 5;

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw Error(ErrorKind::InvalidSpec, std::string(name) + " must be positive");
    };
    positive(num_docs, "num_docs");
    positive(depth, "depth");
    positive(branching, "branching");
    positive(num_tasks, "num_tasks");
    positive(redundancy_factor, "redundancy_factor");
    positive(noise_vocab_size, "noise_vocab_size");
    if (num_docs < num_tasks * redundancy_factor) {
      throw Error(ErrorKind::InvalidSpec, "num_docs must be >= num_tasks * redundancy_factor");
    }
    if (num_tasks * kAnswersPerTask > 9000) throw Error(ErrorKind::InvalidSpec, "too many tasks");
    if (branching > 9) throw Error(ErrorKind::InvalidSpec, "branching must be <= 9");
    if (depth > 8) throw Error(ErrorKind::InvalidSpec, "depth must be <= 8");
  }

  bool operator==(const CorpusSpec&) const = default;
};

struct Corpus {
  std::vector<DocumentRecord> documents;
  std::vector<TaskRecord> tasks;
};

namespace detail {

// Pronounceable pseudo-words, unique per index. Namespaces keep noise, topic
// and answer vocabularies disjoint.
inline std::string pseudo_word(std::size_t index) {
  static constexpr std::string_view kCons = "bdfgklmnprstvz";
  static constexpr std::string_view kVow = "aeiou";
  std::string w;
  for (int i = 0; i < 3; ++i) {
    const std::size_t syl = index % 70;
    index /= 70;
    w.push_back(kCons[syl / 5]);
    w.push_back(kVow[syl % 5]);
  }
  return w;
}

inline std::string noise_word(std::size_t i) { return pseudo_word(i); }
inline std::string topic_word(std::size_t i) { return pseudo_word(100000 + i); }
inline std::string answer_text(std::size_t i) {
  return pseudo_word(200000 + i) + " " + std::to_string(1000 + i);
}

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

struct Template {
  std::string title;
  std::vector<std::vector<std::string>> leaves;  // token lists; first two tokens are keywords
  std::size_t planted = 0;
};

inline std::size_t leaf_count(const CorpusSpec& spec) {
  std::size_t n = 1;
  for (std::size_t d = 1; d < spec.depth; ++d) n *= spec.branching;
  return n;
}

inline std::vector<std::string> noise_tokens(Draw& draw, const CorpusSpec& spec, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(noise_word(draw.index(spec.noise_vocab_size)));
  return out;
}

// Materializes a template as a depth/branching tree. Internal nodes summarize
// their children by concatenating each child's two keywords.
inline DocumentRecord materialize(const std::string& doc_id, const Template& tpl, const CorpusSpec& spec) {
  DocumentRecord doc;
  doc.doc_id = doc_id;
  doc.title = tpl.title;
  std::size_t next_leaf = 0;
  std::vector<NodeRecord> nodes;

  struct Built {
    std::string keywords;
  };
  auto build = [&](auto&& self, const NodeId& id, const std::optional<NodeId>& parent, std::size_t level) -> Built {
    const std::size_t idx = nodes.size();
    nodes.push_back(NodeRecord{id, parent, static_cast<int>(level), "", ""});
    if (level + 1 == spec.depth) {
      const auto& toks = tpl.leaves[next_leaf];
      nodes[idx].title = "passage " + std::to_string(++next_leaf);
      nodes[idx].text = join(toks, " ");
      return Built{toks[0] + " " + toks[1]};
    }
    std::vector<std::string> kws;
    for (std::size_t b = 1; b <= spec.branching; ++b) {
      kws.push_back(self(self, id + "." + std::to_string(b), id, level + 1).keywords);
    }
    nodes[idx].title = level == 0 ? tpl.title : "section " + id.substr(id.find('.') + 1);
    nodes[idx].text = join(kws, " ");
    const auto toks = split_whitespace(nodes[idx].text);
    return Built{toks[0] + " " + toks[1]};
  };
  build(build, doc_id, std::nullopt, 0);
  if (spec.depth == 1) nodes[0].title = tpl.title;
  doc.nodes = std::move(nodes);
  return doc;
}

}  // namespace detail

// Deterministic in spec.seed. Each task owns num_docs / num_tasks documents:
// redundancy_factor near-copies of a template planting the gold answer in one
// leaf, then near-copies of distractor templates planting other candidates.
// Leftover documents are pure noise.
inline Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  using namespace detail;
  Corpus corpus;
  const std::size_t per_task = spec.num_docs / spec.num_tasks;
  const std::size_t leaves = leaf_count(spec);
  const std::size_t body = 6;
  std::size_t doc_counter = 0;
  auto next_doc_id = [&] {
    char buf[16];
    std::snprintf(buf, sizeof buf, "d%05zu", doc_counter++);
    return std::string(buf);
  };

  for (std::size_t ti = 0; ti < spec.num_tasks; ++ti) {
    Draw draw(splitmix64(spec.seed ^ splitmix64(ti + 1)));
    const std::string ent1 = topic_word(3 * ti), ent2 = topic_word(3 * ti + 1), attr = topic_word(3 * ti + 2);
    std::vector<std::string> answers;
    for (std::size_t a = 0; a < CorpusSpec::kAnswersPerTask; ++a) {
      answers.push_back(answer_text(CorpusSpec::kAnswersPerTask * ti + a));
    }

    TaskRecord task;
    char tid[16];
    std::snprintf(tid, sizeof tid, "q%04zu", ti);
    task.task_id = tid;
    task.question = "what is the " + attr + " of " + ent1 + " " + ent2;
    task.gold_answers = {answers[0]};
    task.canned_trace = "the question asks for the " + attr + " of " + ent1 + " " + ent2;
    std::vector<std::string> shuffled = answers;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[draw.index(i)]);
    task.candidates = CandidateSet::make(shuffled, answers[0]);

    const std::size_t n_templates = (per_task + spec.redundancy_factor - 1) / spec.redundancy_factor;
    std::vector<Template> templates;
    for (std::size_t g = 0; g < n_templates; ++g) {
      Template tpl;
      const bool gold = g == 0;
      const std::string& planted_answer = gold ? answers[0] : answers[1 + (g - 1) % (answers.size() - 1)];
      // Distractor titles share one topic word fewer, so planted copies rank first.
      tpl.title = gold ? ent1 + " " + ent2 + " " + attr : (g % 2 ? ent1 : ent2) + " " + attr;
      tpl.title += " " + noise_word(draw.index(spec.noise_vocab_size));
      tpl.planted = draw.index(leaves);
      for (std::size_t li = 0; li < leaves; ++li) {
        auto toks = noise_tokens(draw, spec, 2);
        if (li == tpl.planted) {
          for (const auto& w : {ent1, ent2, attr, std::string("is")}) toks.push_back(w);
          for (const auto& w : split_whitespace(planted_answer)) toks.push_back(w);
          for (const auto& w : noise_tokens(draw, spec, 2)) toks.push_back(w);
        } else {
          toks.push_back(li % 2 ? ent1 : attr);
          for (const auto& w : noise_tokens(draw, spec, body - 1)) toks.push_back(w);
        }
        tpl.leaves.push_back(std::move(toks));
      }
      templates.push_back(std::move(tpl));
    }

    for (std::size_t s = 0; s < per_task; ++s) {
      Template copy = templates[s / spec.redundancy_factor];
      // Near-copy: one non-keyword, non-planted token per leaf is resampled.
      if (s % spec.redundancy_factor != 0) {
        for (std::size_t li = 0; li < copy.leaves.size(); ++li) {
          if (li == copy.planted) continue;
          auto& toks = copy.leaves[li];
          toks[3 + draw.index(toks.size() - 3)] = noise_word(draw.index(spec.noise_vocab_size));
        }
      }
      auto doc = materialize(next_doc_id(), copy, spec);
      if (s < spec.redundancy_factor) {
        // Planted leaves are the copy's planted-index leaf.
        std::size_t li = 0;
        for (const auto& n : doc.nodes) {
          const bool is_leaf = static_cast<std::size_t>(n.level) + 1 == spec.depth;
          if (is_leaf && li++ == copy.planted) task.relevant_leaf_ids.push_back(n.node_id);
        }
      }
      corpus.documents.push_back(std::move(doc));
    }
    corpus.tasks.push_back(std::move(task));
  }

  Draw noise(splitmix64(spec.seed ^ 0xabcdef));
  while (corpus.documents.size() < spec.num_docs) {
    Template tpl;
    tpl.title = join(noise_tokens(noise, spec, 3), " ");
    for (std::size_t li = 0; li < leaves; ++li) tpl.leaves.push_back(noise_tokens(noise, spec, body + 2));
    corpus.documents.push_back(materialize(next_doc_id(), tpl, spec));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Retrieval

// Trees plus precomputed root embeddings (title + summary text). Immutable, shareable.
struct DocumentIndex {
  std::vector<TreePtr> trees;
  std::vector<EmbeddingVector> root_embeddings;
  std::map<std::string, std::size_t> by_doc;

  static DocumentIndex build(const std::vector<DocumentRecord>& docs, const Embedder& embedder) {
    DocumentIndex idx;
    for (const auto& d : docs) {
      auto tree = std::make_shared<const EvidenceTree>(build_tree(d));
      idx.root_embeddings.push_back(embedder.embed(tree->title() + " " + tree->root().text));
      idx.by_doc.emplace(tree->doc_id(), idx.trees.size());
      idx.trees.push_back(std::move(tree));
    }
    return idx;
  }
};

// Top-k documents by clamped cosine(query, root), descending; ties by doc id.
inline RetrievalOutput retrieve(std::string_view query, const DocumentIndex& index, std::size_t k,
                                const Embedder& embedder, std::size_t search_index = 0) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (index.trees.empty()) throw Error(ErrorKind::EmptyCorpus, "no documents to retrieve from");
  const auto q = embedder.embed(query);
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(index.trees.size());
  for (std::size_t i = 0; i < index.trees.size(); ++i) ranked.emplace_back(clamped_cosine(q, index.root_embeddings[i]), i);
  const std::size_t n = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                    [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return index.trees[a.second]->doc_id() < index.trees[b.second]->doc_id();
                    });
  RetrievalOutput out;
  out.search_index = search_index;
  out.query = std::string(query);
  for (std::size_t i = 0; i < n; ++i) {
    out.trees.push_back(index.trees[ranked[i].second]);
    out.scores.push_back(ranked[i].first);
  }
  return out;
}

inline RetrievalOutput retrieve(std::string_view query, const std::vector<DocumentRecord>& documents, std::size_t k,
                                const Embedder& embedder) {
  return retrieve(query, DocumentIndex::build(documents, embedder), k, embedder);
}

// The i-th query an agent issues for a question: the question's words
// rotated left by i. Same bag of words, so a bag-of-words retriever sees the
// same need each time.
inline std::string query_variant(std::string_view question, std::size_t i) {
  auto toks = split_whitespace(question);
  if (toks.size() < 2) return std::string(question);
  std::rotate(toks.begin(), toks.begin() + static_cast<std::ptrdiff_t>(i % toks.size()), toks.end());
  return join(toks, " ");
}

// Fewest actions that inject a leaf carrying the gold answer: one retrieval
// that surfaces a planted document, then one expansion per level down to the
// leaf. Query choices explored are the first `budget` query variants.
inline std::optional<std::size_t> min_actions_to_gold(const TaskRecord& task, const DocumentIndex& index,
                                                      std::size_t k, std::size_t budget, const Embedder& embedder) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < budget; ++i) {
    const auto out = retrieve(query_variant(task.question, i), index, k, embedder);
    for (const auto& tree : out.trees) {
      for (const auto& id : task.relevant_leaf_ids) {
        if (const auto* leaf = tree->find(id)) {
          const std::size_t cost = 1 + static_cast<std::size_t>(leaf->level);
          if (!best || cost < *best) best = cost;
        }
      }
    }
  }
  if (best && *best > budget) return std::nullopt;
  return best;
}

// Everything episodes share: parsed trees, retrieval index, tasks.
struct SimWorld {
  DocumentIndex index;
  std::vector<TaskRecord> tasks;
  std::size_t retrieval_k = 5;

  static std::shared_ptr<const SimWorld> build(const Corpus& corpus, const Embedder& embedder, std::size_t k = 5) {
    auto w = std::make_shared<SimWorld>();
    w->index = DocumentIndex::build(corpus.documents, embedder);
    w->tasks = corpus.tasks;
    w->retrieval_k = k;
    return w;
  }
};

// Checks every task is reachable within the budget; returns ids of those that are not.
inline std::vector<std::string> unreachable_tasks(const SimWorld& world, std::size_t budget, const Embedder& embedder) {
  std::vector<std::string> out;
  for (const auto& t : world.tasks) {
    if (!min_actions_to_gold(t, world.index, world.retrieval_k, budget, embedder)) out.push_back(t.task_id);
  }
  return out;
}

class SimEnvironment final : public Environment {
 public:
  SimEnvironment(std::shared_ptr<const SimWorld> world, std::size_t task_index, const Embedder& embedder,
                 const Scorer& scorer)
      : world_(std::move(world)), task_(&world_->tasks.at(task_index)), embedder_(embedder), scorer_(scorer) {}

  const TaskRecord& task() const override { return *task_; }

  RetrievalOutput retrieve(std::string_view query, std::size_t search_index) const override {
    return infoctl::retrieve(query, world_->index, world_->retrieval_k, embedder_, search_index);
  }

  const Embedder& embedder() const override { return embedder_; }
  const Scorer& scorer() const override { return scorer_; }

 private:
  std::shared_ptr<const SimWorld> world_;
  const TaskRecord* task_;
  const Embedder& embedder_;
  const Scorer& scorer_;
};

// ---------------------------------------------------------------------------
// Scripted agents

enum class AgentProfile { GreedyExpander, OverRetriever, PrematureStopper, Compliant };

constexpr std::string_view to_string(AgentProfile p) {
  switch (p) {
    case AgentProfile::GreedyExpander: return "greedy-expander";
    case AgentProfile::OverRetriever: return "over-retriever";
    case AgentProfile::PrematureStopper: return "premature-stopper";
    case AgentProfile::Compliant: return "compliant";
  }
  return "?";
}

inline AgentProfile parse_profile(std::string_view name) {
  for (auto p : {AgentProfile::GreedyExpander, AgentProfile::OverRetriever, AgentProfile::PrematureStopper,
                 AgentProfile::Compliant}) {
    if (name == to_string(p)) return p;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown agent profile '" + std::string(name) + "'");
}

// Deterministic stand-ins for a policy. All profiles obey Stop and Continue
// messages; only Compliant follows Expand directives, the others expand (or
// not) on their own terms.
//   GreedyExpander:   retrieve, expand its own relevance-ranked plan, answer.
//   OverRetriever:    retrieve with rotating queries, never answer unprompted.
//   PrematureStopper: answer right after a search step.
//   Compliant:        follow every control message; otherwise GreedyExpander.
class ScriptedAgent final : public Policy {
 public:
  explicit ScriptedAgent(AgentProfile profile, std::size_t k_expand = 3) : profile_(profile), k_expand_(k_expand) {}

  AgentProfile profile() const { return profile_; }

  Action act(const Observation& obs) override {
    if (obs.searches != seen_searches_) {
      seen_searches_ = obs.searches;
      own_plan_.clear();
      planned_ = false;
      followed_directive_ = false;
    }
    const auto ctl = obs.control ? parse_control(*obs.control) : std::nullopt;
    if (ctl) {
      switch (ctl->kind) {
        case SignalKind::Stop:
          return answer(obs, "told to stop searching");
        case SignalKind::ContinueOneStep:
          return retrieve(obs, "told to search once more");
        case SignalKind::Expand:
          if (profile_ == AgentProfile::Compliant) {
            followed_directive_ = true;
            return expand_ids(obs, ctl->expand_ids);
          }
          break;
      }
    }

    switch (profile_) {
      case AgentProfile::OverRetriever:
        return retrieve(obs, "more evidence might help");
      case AgentProfile::PrematureStopper:
        return obs.searches == 0 ? retrieve(obs, "need evidence") : answer(obs, "enough evidence");
      case AgentProfile::GreedyExpander:
      case AgentProfile::Compliant:
        break;
    }
    if (obs.searches == 0) return retrieve(obs, "need evidence");
    if (followed_directive_) return answer(obs, "directed expansion done");
    if (!planned_) plan(obs);
    while (!own_plan_.empty()) {
      auto layer = std::move(own_plan_.front());
      own_plan_.pop_front();
      std::vector<Edge> edges;
      for (const auto& e : layer) {
        if (!obs.ledger.contains(e.child) && obs.ledger.contains(e.parent)) edges.push_back(e);
      }
      if (!edges.empty()) return Action{"expand the most relevant passages", ActionKind::Expand, format_expand_params(edges), obs.step};
    }
    return answer(obs, "expansion done");
  }

 private:
  Action retrieve(const Observation& obs, std::string thought) const {
    return Action{std::move(thought), ActionKind::Retrieve, query_variant(obs.question, obs.searches), obs.step};
  }

  Action expand_ids(const Observation& obs, const std::vector<NodeId>& ids) const {
    std::vector<Edge> edges;
    for (const auto& id : ids) {
      const auto* n = obs.ledger.lookup(id);
      if (n && n->parent_id) edges.push_back(Edge{*n->parent_id, id});
    }
    return Action{"follow the expansion directive", ActionKind::Expand, format_expand_params(edges), obs.step};
  }

  // Answers with the candidate mentioned most often in the injected evidence.
  Action answer(const Observation& obs, std::string thought) const {
    std::string evidence;
    for (const auto& t : obs.ledger.injected_texts()) evidence += " " + normalize_answer(t) + " ";
    std::size_t best = 0, best_count = 0;
    for (std::size_t i = 0; i < obs.candidates.size(); ++i) {
      const auto needle = " " + normalize_answer(obs.candidates[i]) + " ";
      std::size_t count = 0;
      for (auto pos = evidence.find(needle); pos != std::string::npos; pos = evidence.find(needle, pos + 1)) ++count;
      if (count > best_count) {
        best = i;
        best_count = count;
      }
    }
    std::string text = obs.candidates.empty() ? std::string() : obs.candidates[best];
    return Action{std::move(thought), ActionKind::Answer, std::move(text), obs.step};
  }

  void plan(const Observation& obs) {
    planned_ = true;
    if (!obs.latest || k_expand_ == 0) return;
    const auto q = obs.embedder.embed(obs.question);
    std::vector<LeafScore> scores;
    for (const auto& leaf : leaf_pool(*obs.latest).leaves) {
      scores.push_back(LeafScore{leaf.node_id, clamped_cosine(obs.embedder.embed(leaf.text), q)});
    }
    ControllerConfig cfg;
    cfg.k_expand = k_expand_;
    const auto p = derive_expansion_plan(obs.latest->trees, scores, cfg);
    own_plan_.assign(p.per_step_edges.begin(), p.per_step_edges.end());
  }

  AgentProfile profile_;
  std::size_t k_expand_;
  std::size_t seen_searches_ = 0;
  std::deque<std::set<Edge>> own_plan_;
  bool planned_ = false;
  bool followed_directive_ = false;
};

}  // namespace infoctl
