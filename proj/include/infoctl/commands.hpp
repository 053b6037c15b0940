#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "infoctl/config.hpp"
#include "infoctl/error.hpp"
#include "infoctl/io.hpp"
#include "infoctl/rollout.hpp"
#include "infoctl/simenv.hpp"

namespace infoctl {

// ---------------------------------------------------------------------------
// corpus

inline Corpus build_corpus(const RunConfig& cfg) {
  auto corpus = generate_corpus(cfg.corpus);
  HashEmbedder emb(cfg.embed_dim);
  const auto world = SimWorld::build(corpus, emb, cfg.retrieval_k);
  const auto bad = unreachable_tasks(*world, cfg.budget, emb);
  if (!bad.empty()) {
    throw Error(ErrorKind::InvalidSpec, std::to_string(bad.size()) + " task(s) cannot reach their answer within budget " +
                                            std::to_string(cfg.budget) + ", first: " + bad.front());
  }
  return corpus;
}

inline Corpus cmd_corpus(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  auto corpus = build_corpus(cfg);
  write_corpus(cfg.output_dir, corpus);
  log << "corpus: " << corpus.documents.size() << " documents, " << corpus.tasks.size() << " tasks -> "
      << cfg.output_dir << "\n";
  return corpus;
}

// ---------------------------------------------------------------------------
// simulate

inline std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t episode) {
  return splitmix64(run_seed ^ splitmix64(0x5eedULL + episode));
}

inline Mode episode_mode(const RunConfig& cfg, std::size_t episode) {
  std::mt19937_64 rng(episode_seed(cfg.seed, episode));
  return sample_mode(anneal_p(cfg.schedule, episode / cfg.episodes_per_epoch), rng);
}

// Episode g belongs to epoch g / episodes_per_epoch and plays task g mod num_tasks.
// Its mode is drawn from its own RNG stream, so results do not depend on `workers`.
inline std::vector<EpisodeTrace> simulate(const RunConfig& cfg, const Corpus& corpus) {
  cfg.validate();
  if (corpus.tasks.empty()) throw Error(ErrorKind::EmptyCorpus, "no tasks to simulate");
  const HashEmbedder emb(cfg.embed_dim);
  const ToyScorer scorer;
  const auto world = SimWorld::build(corpus, emb, cfg.retrieval_k);
  const auto profile = parse_profile(cfg.agent_profile);
  const auto ep_cfg = cfg.episode_config();
  const std::size_t total = cfg.schedule.total_epochs() * cfg.episodes_per_epoch;

  std::vector<EpisodeTrace> out(total);
  auto run_one = [&](std::size_t g) {
    const std::size_t epoch = g / cfg.episodes_per_epoch;
    const auto seed = episode_seed(cfg.seed, g);
    const Mode mode = episode_mode(cfg, g);
    SimEnvironment env(world, g % world->tasks.size(), emb, scorer);
    ScriptedAgent agent(profile, cfg.controller.k_expand);
    auto tr = run_episode(env, agent, ep_cfg, mode);
    tr.epoch = epoch;
    tr.seed = seed;
    out[g] = std::move(tr);
  };

  const std::size_t workers = std::min(cfg.workers, std::max<std::size_t>(total, 1));
  if (workers <= 1) {
    for (std::size_t g = 0; g < total; ++g) run_one(g);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = total;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t g = next++; g < total; g = next++) {
        try {
          run_one(g);
        } catch (...) {
          std::lock_guard lock(mu);
          if (g < failed_at) {
            failed_at = g;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline std::vector<EpisodeTrace> cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::filesystem::path dir = cfg.output_dir;
  if (!std::filesystem::exists(dir / kCorpusFile) || !std::filesystem::exists(dir / kTasksFile)) {
    throw Error(ErrorKind::IoFailure, "no corpus in " + dir.string() + "; run the corpus command first");
  }
  const auto traces = simulate(cfg, read_corpus(dir));
  write_traces(dir / kTracesFile, traces);
  std::size_t controlled = 0;
  for (const auto& t : traces) controlled += t.mode == Mode::Controlled;
  log << "simulate: " << traces.size() << " episodes over " << cfg.schedule.total_epochs() << " epochs ("
      << controlled << " controlled) -> " << (dir / kTracesFile).string() << "\n";
  return traces;
}

// ---------------------------------------------------------------------------
// analyze

struct CurveRow {
  std::size_t episode = 0;
  std::string task_id;
  std::size_t epoch = 0;
  Mode mode = Mode::Free;
  std::size_t l = 0;
  UtilityScore score;
};

struct StepSummary {
  std::size_t l = 0;
  std::size_t count = 0;
  double mean_novelty = 0.0;
  double mean_effectiveness = 0.0;
  double mean_utility = 0.0;
};

struct AnalysisReport {
  std::vector<CurveRow> rows;
  std::vector<StepSummary> per_step;
  std::size_t episodes = 0;
  std::size_t stop_events = 0;
  std::size_t continue_events = 0;
  std::size_t expand_events = 0;
  std::size_t violations = 0;
  double mean_reward = 0.0;
};

inline AnalysisReport analyze(const std::vector<EpisodeTrace>& traces) {
  AnalysisReport r;
  r.episodes = traces.size();
  std::map<std::size_t, StepSummary> steps;
  double reward_sum = 0.0;
  for (std::size_t e = 0; e < traces.size(); ++e) {
    const auto& tr = traces[e];
    for (const auto& u : tr.utilities) {
      r.rows.push_back(CurveRow{e, tr.task_id, tr.epoch, tr.mode, u.l, u.score});
      auto& s = steps[u.l];
      s.l = u.l;
      ++s.count;
      s.mean_novelty += u.score.novelty;
      s.mean_effectiveness += u.score.effectiveness;
      s.mean_utility += u.score.utility;
    }
    for (const auto& ev : tr.control_events) {
      switch (ev.signal.kind) {
        case SignalKind::Stop: ++r.stop_events; break;
        case SignalKind::ContinueOneStep: ++r.continue_events; break;
        case SignalKind::Expand: ++r.expand_events; break;
      }
    }
    r.violations += tr.violations.size();
    reward_sum += tr.reward.total;
  }
  for (auto& [l, s] : steps) {
    const double n = static_cast<double>(s.count);
    s.mean_novelty /= n;
    s.mean_effectiveness /= n;
    s.mean_utility /= n;
    r.per_step.push_back(s);
  }
  if (!traces.empty()) r.mean_reward = reward_sum / static_cast<double>(traces.size());
  return r;
}

inline void write_curves_csv(const AnalysisReport& r, std::ostream& out) {
  out << "episode,task_id,epoch,mode,step,novelty,effectiveness,utility\n";
  out << std::setprecision(10);
  for (const auto& row : r.rows) {
    out << row.episode << ',' << row.task_id << ',' << row.epoch << ',' << to_string(row.mode) << ',' << row.l << ','
        << row.score.novelty << ',' << row.score.effectiveness << ',' << row.score.utility << '\n';
  }
}

inline void write_summary(const AnalysisReport& r, std::ostream& out) {
  out << std::setprecision(6);
  out << "# episodes " << r.episodes << ", search steps " << r.rows.size() << ", mean reward " << r.mean_reward << "\n";
  out << "# control events: stop " << r.stop_events << ", continue " << r.continue_events << ", expand "
      << r.expand_events << "; violations " << r.violations << "\n";
  for (const auto& s : r.per_step) {
    out << "# step " << s.l << ": n=" << s.count << " novelty=" << s.mean_novelty
        << " effectiveness=" << s.mean_effectiveness << " utility=" << s.mean_utility << "\n";
  }
}

inline AnalysisReport cmd_analyze(const std::filesystem::path& trace_file, std::ostream& out) {
  const auto report = analyze(read_traces(trace_file));
  write_curves_csv(report, out);
  write_summary(report, out);
  return report;
}

// ---------------------------------------------------------------------------
// reward audit

struct RewardMismatch {
  std::size_t episode = 0;
  std::string task_id;
  RewardBreakdown recorded;
  RewardBreakdown recomputed;
};

struct RewardAudit {
  std::size_t episodes = 0;
  std::vector<RewardMismatch> mismatches;
  // Episodes whose recorded total breaks total <= 1, or total <= lambda_ceil when f1 < 1.
  std::size_t bound_violations = 0;
};

inline bool same_reward(const RewardBreakdown& a, const RewardBreakdown& b, double tol = 1e-12) {
  auto eq = [&](double x, double y) { return std::abs(x - y) <= tol; };
  return eq(a.f1, b.f1) && eq(a.r_correct, b.r_correct) && eq(a.r_penalty, b.r_penalty) && eq(a.r_ret, b.r_ret) &&
         eq(a.total, b.total) && a.ceiling_applied == b.ceiling_applied;
}

inline RewardAudit audit_rewards(const std::vector<EpisodeTrace>& traces, const RewardConfig& cfg) {
  RewardAudit a;
  a.episodes = traces.size();
  for (std::size_t e = 0; e < traces.size(); ++e) {
    const auto& tr = traces[e];
    const auto again = recompute_reward(tr, cfg);
    if (!same_reward(tr.reward, again)) a.mismatches.push_back(RewardMismatch{e, tr.task_id, tr.reward, again});
    if (tr.reward.total > 1.0 || (tr.reward.f1 < 1.0 && tr.reward.total > cfg.lambda_ceil)) ++a.bound_violations;
  }
  return a;
}

inline RewardAudit cmd_reward(const std::filesystem::path& trace_file, const RewardConfig& cfg, std::ostream& out) {
  const auto audit = audit_rewards(read_traces(trace_file), cfg);
  out << std::setprecision(10);
  for (const auto& m : audit.mismatches) {
    out << "mismatch episode " << m.episode << " (" << m.task_id << "): recorded total " << m.recorded.total
        << ", recomputed " << m.recomputed.total << "\n";
  }
  out << "reward audit: " << audit.episodes << " episodes, " << audit.mismatches.size() << " mismatches, "
      << audit.bound_violations << " bound violations\n";
  return audit;
}

// ---------------------------------------------------------------------------
// selftest

// Checks that built-in defaults carry the reference hyperparameters. Prints one line per check.
inline bool selftest(std::ostream& out) {
  const RunConfig c;
  bool ok = true;
  auto check = [&](const char* name, bool pass) {
    out << (pass ? "PASS " : "FAIL ") << name << "\n";
    ok = ok && pass;
  };
  const auto& k = c.controller;
  const auto& w = c.reward;
  check("rho = 0.5", k.rho == 0.5);
  check("delta = 0.2", k.delta == 0.2);
  check("m_stop = 2", k.m_stop == 2);
  check("m_cont = 1", k.m_cont == 1);
  check("eta = 0.7", k.eta == 0.7);
  check("lambda_format = 0.1", w.lambda_format == 0.1);
  check("lambda_penalty = 0.2", w.lambda_penalty == 0.2);
  check("lambda_penalty_max = 0.4", w.lambda_penalty_max == 0.4);
  check("lambda_ret = 0.1", w.lambda_ret == 0.1);
  check("lambda_ceil = 0.9", w.lambda_ceil == 0.9);
  check("budget = 8", c.budget == 8);
  check("schedule 0.9/0.5/0.2/0 over 2/1/1/1 epochs",
        c.schedule == AnnealSchedule{{{2, 0.9}, {1, 0.5}, {1, 0.2}, {1, 0.0}}});
  check("stop message", render_control({SignalKind::Stop, {}, 0}) == "<control>Stop searching</control>");
  check("continue message", render_control({SignalKind::ContinueOneStep, {}, 0}) ==
                                "<control>Continue the search for one additional step</control>");
  check("expand message", render_control({SignalKind::Expand, {"i1", "i2"}, 0}) ==
                              "<control>Expand the retrieved documents: [i1, i2]</control>");
  check("config round trip", to_json(config_from_json(to_json(c))) == to_json(c));
  return ok;
}

}  // namespace infoctl
