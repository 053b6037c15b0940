#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infoctl/error.hpp"
#include "infoctl/evidence.hpp"
#include "infoctl/text.hpp"

namespace infoctl {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

inline EmbeddingVector embed(std::string_view text, const Embedder& embedder) { return embedder.embed(text); }

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::InvalidArgument, "cosine of vectors with dims " + std::to_string(a.dim()) + " and " +
                                                std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Similarity used by novelty and relevance: cosine clamped into [0, 1].
inline double clamped_cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return std::clamp(cosine(a, b), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Novelty

// 1 - mean similarity of `v` to its min(k_nn, |prior|) most similar prior
// leaves. An empty prior pool is maximally novel.
inline double leaf_novelty(const EmbeddingVector& v, std::span<const EmbeddingVector> prior, std::size_t k_nn) {
  if (prior.empty()) return 1.0;
  if (k_nn == 0) throw Error(ErrorKind::InvalidArgument, "k_nn must be positive");
  std::vector<double> sims;
  sims.reserve(prior.size());
  for (const auto& p : prior) sims.push_back(clamped_cosine(v, p));
  const std::size_t k = std::min(k_nn, sims.size());
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += sims[i];
  return std::clamp(1.0 - sum / static_cast<double>(k), 0.0, 1.0);
}

inline double novelty(std::span<const EmbeddingVector> fresh, std::span<const EmbeddingVector> prior,
                      std::size_t k_nn) {
  if (fresh.empty()) throw Error(ErrorKind::EmptyNewPool, "novelty needs at least one new leaf");
  double sum = 0.0;
  for (const auto& v : fresh) sum += leaf_novelty(v, prior, k_nn);
  return sum / static_cast<double>(fresh.size());
}

inline double novelty(const LeafPool& fresh, const LeafPool& prior, std::size_t k_nn, const Embedder& embedder) {
  if (fresh.empty()) throw Error(ErrorKind::EmptyNewPool, "novelty needs at least one new leaf");
  std::vector<EmbeddingVector> a, b;
  a.reserve(fresh.size());
  b.reserve(prior.size());
  for (const auto& l : fresh.leaves) a.push_back(embedder.embed(l.text));
  for (const auto& l : prior.leaves) b.push_back(embedder.embed(l.text));
  return novelty(a, b, k_nn);
}

// ---------------------------------------------------------------------------
// Answer belief

// Ordered candidate answers, deduplicated under answer normalization.
struct CandidateSet {
  std::vector<std::string> candidates;
  std::optional<std::size_t> gold_index;

  std::size_t size() const { return candidates.size(); }

  // Keeps the first spelling of each normalized answer. The gold answer is
  // added if missing and gold_index points at its surviving spelling.
  static CandidateSet make(const std::vector<std::string>& raw, std::optional<std::string> gold = std::nullopt) {
    CandidateSet out;
    std::vector<std::string> seen;
    auto add = [&](const std::string& c) {
      auto norm = normalize_answer(c);
      auto it = std::find(seen.begin(), seen.end(), norm);
      if (it != seen.end()) return static_cast<std::size_t>(it - seen.begin());
      seen.push_back(std::move(norm));
      out.candidates.push_back(c);
      return out.candidates.size() - 1;
    };
    for (const auto& c : raw) add(c);
    if (gold) out.gold_index = add(*gold);
    if (out.candidates.empty()) throw Error(ErrorKind::InvalidArgument, "candidate set is empty");
    return out;
  }

  // Identifies the candidate list so distributions over different sets are not compared.
  std::uint64_t key() const {
    std::uint64_t h = 0x51ed27a1b3c5d7e9ULL;
    for (const auto& c : candidates) h = splitmix64(h ^ fnv1a64(normalize_answer(c)));
    return h;
  }
};

struct AnswerDistribution {
  std::vector<double> probs;
  std::size_t search_index = 0;
  std::uint64_t candidate_key = 0;
  // Set when every candidate score underflowed and the uniform fallback was used.
  bool degenerate = false;

  double max() const { return *std::max_element(probs.begin(), probs.end()); }
};

// What the scorer conditions on: task, injected evidence in injection order, reasoning trace.
struct ScoringContext {
  std::string_view task;
  std::span<const std::string> evidence;
  std::string_view trace;
};

// Per-token log-probabilities of a candidate answer; must be deterministic and <= 0.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> score_tokens(std::string_view candidate, const ScoringContext& ctx) const = 0;
};

// Length-normalized candidate scores exp(mean token log-prob), normalized over
// the candidate set. Normalization subtracts the max mean log-prob first, which
// leaves the ratio unchanged.
inline AnswerDistribution answer_distribution(const Scorer& scorer, std::string_view task,
                                              std::span<const std::string> evidence, std::string_view trace,
                                              const CandidateSet& candidates, std::size_t search_index = 0) {
  if (candidates.candidates.empty()) throw Error(ErrorKind::InvalidArgument, "candidate set is empty");
  const ScoringContext ctx{task, evidence, trace};
  std::vector<double> mean_lp;
  mean_lp.reserve(candidates.size());
  for (const auto& c : candidates.candidates) {
    const auto lps = scorer.score_tokens(c, ctx);
    if (lps.empty()) throw Error(ErrorKind::ScorerFailure, "no token scores for candidate '" + c + "'");
    double sum = 0.0;
    for (double lp : lps) {
      if (std::isnan(lp) || lp > 0.0) {
        throw Error(ErrorKind::ScorerFailure, "invalid token log-prob for candidate '" + c + "'");
      }
      sum += lp;
    }
    mean_lp.push_back(sum / static_cast<double>(lps.size()));
  }

  AnswerDistribution dist;
  dist.search_index = search_index;
  dist.candidate_key = candidates.key();
  dist.probs.assign(candidates.size(), 0.0);
  const double top = *std::max_element(mean_lp.begin(), mean_lp.end());
  if (!std::isfinite(top)) {
    dist.probs.assign(candidates.size(), 1.0 / static_cast<double>(candidates.size()));
    dist.degenerate = true;
    return dist;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < mean_lp.size(); ++i) {
    dist.probs[i] = std::exp(mean_lp[i] - top);
    z += dist.probs[i];
  }
  for (auto& p : dist.probs) p /= z;
  return dist;
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorKind::MisalignedCandidates,
                "distributions of size " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return std::clamp(0.5 * s, 0.0, 1.0);
}

inline double effectiveness(const AnswerDistribution& curr, const AnswerDistribution& prev) {
  if (curr.candidate_key != prev.candidate_key) {
    throw Error(ErrorKind::MisalignedCandidates, "distributions are over different candidate sets");
  }
  return total_variation(curr.probs, prev.probs);
}

// ---------------------------------------------------------------------------
// Utility

struct UtilityScore {
  double novelty = 0.0;
  double effectiveness = 0.0;
  double utility = 0.0;
  double rho = 0.5;
};

inline UtilityScore utility(double novelty, double effectiveness, double rho) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(novelty) || !in_unit(effectiveness) || !in_unit(rho)) {
    throw Error(ErrorKind::OutOfRange, "utility arguments must lie in [0, 1]");
  }
  return UtilityScore{novelty, effectiveness, rho * novelty + (1.0 - rho) * effectiveness, rho};
}

}  // namespace infoctl
