#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "infoctl/infoctl.hpp"

namespace {

struct Options {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> episodes;
  std::optional<std::string> profile;
  std::optional<std::size_t> workers;
  std::optional<std::string> trace;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--out", o.out, "output directory");
}

// Config file, then INFOCTL_* environment overrides, then flags.
infoctl::RunConfig resolve(const Options& o) {
  infoctl::RunConfig cfg = o.config ? infoctl::load_config(*o.config) : infoctl::RunConfig{};
  infoctl::apply_env_overrides(cfg);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.episodes) cfg.episodes_per_epoch = *o.episodes;
  if (o.profile) cfg.agent_profile = *o.profile;
  if (o.workers) cfg.workers = *o.workers;
  cfg.validate();
  return cfg;
}

std::filesystem::path trace_path(const Options& o, const infoctl::RunConfig& cfg) {
  if (o.trace) return *o.trace;
  return std::filesystem::path(cfg.output_dir) / infoctl::kTracesFile;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-utility search control: corpus generation, simulation, analysis, reward audit"};
  app.require_subcommand(1);
  Options o;

  auto* corpus = app.add_subcommand("corpus", "generate the synthetic corpus and tasks");
  add_common(corpus, o);

  auto* simulate = app.add_subcommand("simulate", "run episodes over the anneal schedule");
  add_common(simulate, o);
  simulate->add_option("--episodes", o.episodes, "episodes per epoch");
  simulate->add_option("--profile", o.profile, "agent profile: greedy-expander, over-retriever, premature-stopper, compliant");
  simulate->add_option("--workers", o.workers, "parallel episode workers");

  auto* analyze = app.add_subcommand("analyze", "per-step utility table and summary");
  add_common(analyze, o);
  analyze->add_option("--trace", o.trace, "trace file (default <out>/traces.jsonl)");

  auto* reward = app.add_subcommand("reward", "recompute and audit recorded rewards");
  add_common(reward, o);
  reward->add_option("--trace", o.trace, "trace file (default <out>/traces.jsonl)");

  auto* selftest = app.add_subcommand("selftest", "check built-in defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*selftest) return infoctl::selftest(std::cout) ? 0 : 1;
    const auto cfg = resolve(o);
    if (*corpus) {
      infoctl::cmd_corpus(cfg, std::cout);
    } else if (*simulate) {
      infoctl::cmd_simulate(cfg, std::cout);
    } else if (*analyze) {
      infoctl::cmd_analyze(trace_path(o, cfg), std::cout);
    } else if (*reward) {
      const auto audit = infoctl::cmd_reward(trace_path(o, cfg), cfg.reward, std::cout);
      if (!audit.mismatches.empty() || audit.bound_violations) return 3;
    }
  } catch (const infoctl::Error& e) {
    std::cerr << "infoctl: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "infoctl: internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
