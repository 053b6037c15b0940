#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infoctl/error.hpp"
#include "infoctl/text.hpp"

namespace infoctl {

struct RewardConfig {
  double lambda_format = 0.1;
  double lambda_penalty = 0.2;
  double lambda_penalty_max = 0.4;
  double lambda_ret = 0.1;
  double lambda_ceil = 0.9;

  void validate() const {
    if (!(0.0 <= lambda_format && lambda_format <= lambda_ceil && lambda_ceil <= 1.0)) {
      throw Error(ErrorKind::InvalidConfig, "need 0 <= lambda_format <= lambda_ceil <= 1");
    }
    if (!(0.0 <= lambda_penalty && lambda_penalty <= lambda_penalty_max)) {
      throw Error(ErrorKind::InvalidConfig, "need 0 <= lambda_penalty <= lambda_penalty_max");
    }
    if (lambda_ret < 0.0) throw Error(ErrorKind::InvalidConfig, "lambda_ret must be >= 0");
  }

  bool operator==(const RewardConfig&) const = default;
};

struct RewardBreakdown {
  double f1 = 0.0;
  double r_correct = 0.0;
  double r_penalty = 0.0;
  double r_ret = 0.0;
  double total = 0.0;
  // True when the imperfect-answer ceiling lambda_ceil was binding.
  bool ceiling_applied = false;
};

// SQuAD-style token F1 over normalized text with multiset overlap.
inline double f1(std::string_view pred, std::string_view gold) {
  const auto p = normalized_tokens(pred);
  const auto g = normalized_tokens(gold);
  if (p.empty() || g.empty()) return 0.0;
  if (p == g) return 1.0;
  std::map<std::string, int> counts;
  for (const auto& t : g) ++counts[t];
  int common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

inline double correctness_reward(const std::optional<std::string>& pred, std::string_view gold,
                                 const RewardConfig& cfg) {
  if (!pred) return 0.0;
  return std::max(f1(*pred, gold), cfg.lambda_format);
}

inline double penalty_reward(std::size_t violation_count, const RewardConfig& cfg) {
  return 0.0 - std::min(cfg.lambda_penalty * static_cast<double>(violation_count), cfg.lambda_penalty_max);
}

inline bool retrieval_hit(std::span<const std::string> injected_texts, std::string_view gold) {
  const auto g = normalize_answer(gold);
  if (g.empty() || injected_texts.empty()) return false;
  std::vector<std::string> parts;
  parts.reserve(injected_texts.size());
  for (const auto& t : injected_texts) parts.push_back(normalize_answer(t));
  return join(parts, " ").find(g) != std::string::npos;
}

inline double retrieval_bonus(std::span<const std::string> injected_texts, std::string_view gold,
                              const RewardConfig& cfg) {
  return retrieval_hit(injected_texts, gold) ? cfg.lambda_ret : 0.0;
}

// The composite reward from its already-evaluated inputs. total_reward and
// offline audits both go through here.
inline RewardBreakdown compose_reward(double f1_score, bool pred_present, std::size_t violation_count,
                                      bool retrieval_hit, const RewardConfig& cfg) {
  RewardBreakdown r;
  r.f1 = pred_present ? f1_score : 0.0;
  r.r_correct = pred_present ? std::max(r.f1, cfg.lambda_format) : 0.0;
  r.r_penalty = penalty_reward(violation_count, cfg);
  r.r_ret = retrieval_hit ? cfg.lambda_ret : 0.0;
  const double raw = r.r_correct + r.r_penalty + r.r_ret;
  if (r.f1 == 1.0) {
    r.total = std::min(raw, 1.0);
  } else {
    r.ceiling_applied = raw > cfg.lambda_ceil;
    r.total = std::min(raw, cfg.lambda_ceil);
  }
  return r;
}

inline RewardBreakdown total_reward(const std::optional<std::string>& pred, std::string_view gold,
                                    std::size_t violation_count, std::span<const std::string> injected_texts,
                                    const RewardConfig& cfg) {
  const double score = pred ? f1(*pred, gold) : 0.0;
  return compose_reward(score, pred.has_value(), violation_count, retrieval_hit(injected_texts, gold), cfg);
}

// Several accepted gold spellings: the best-scoring one is used.
inline RewardBreakdown total_reward(const std::optional<std::string>& pred, std::span<const std::string> golds,
                                    std::size_t violation_count, std::span<const std::string> injected_texts,
                                    const RewardConfig& cfg) {
  if (golds.empty()) throw Error(ErrorKind::InvalidArgument, "no gold answers");
  std::optional<RewardBreakdown> best;
  for (const auto& g : golds) {
    auto r = total_reward(pred, g, violation_count, injected_texts, cfg);
    if (!best || r.total > best->total) best = r;
  }
  return *best;
}

}  // namespace infoctl
