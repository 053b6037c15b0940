#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "infoctl/control.hpp"
#include "infoctl/error.hpp"
#include "infoctl/reward.hpp"
#include "infoctl/rollout.hpp"
#include "infoctl/simenv.hpp"

namespace infoctl {

struct RunConfig {
  ControllerConfig controller;
  RewardConfig reward;
  AnnealSchedule schedule = AnnealSchedule::standard();
  std::size_t budget = 8;
  CorpusSpec corpus;
  std::string agent_profile = "compliant";
  std::size_t episodes_per_epoch = 100;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::size_t retrieval_k = 5;
  std::size_t embed_dim = 256;
  std::size_t workers = 1;

  void validate() const {
    controller.validate();
    reward.validate();
    schedule.validate();
    corpus.validate();
    if (budget < 1) throw Error(ErrorKind::InvalidConfig, "budget must be >= 1");
    if (episodes_per_epoch < 1) throw Error(ErrorKind::InvalidConfig, "episodes_per_epoch must be >= 1");
    if (retrieval_k < 1) throw Error(ErrorKind::InvalidConfig, "retrieval_k must be >= 1");
    if (embed_dim < 16) throw Error(ErrorKind::InvalidConfig, "embed_dim must be >= 16");
    if (workers < 1) throw Error(ErrorKind::InvalidConfig, "workers must be >= 1");
    (void)parse_profile(agent_profile);
  }

  EpisodeConfig episode_config() const { return EpisodeConfig{controller, reward, budget}; }
};

namespace detail {

// Copies known keys from `j` into fields; any other key is a config error.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, scope_ + " must be an object");
  }

  template <typename T>
  FieldReader& get(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return *this;
    try {
      field = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::InvalidConfig, scope_ + "." + key + " has the wrong type");
    }
    return *this;
  }

  FieldReader& nested(const char* key, const std::function<void(const nlohmann::json&, const std::string&)>& fn) {
    seen_.insert(key);
    if (j_.contains(key)) fn(j_.at(key), scope_ + "." + key);
    return *this;
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw Error(ErrorKind::InvalidConfig, "unknown config key " + scope_ + "." + k);
    }
  }

 private:
  const nlohmann::json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::FieldReader top(j, "config");
  top.nested("controller",
             [&](const nlohmann::json& v, const std::string& s) {
               detail::FieldReader r(v, s);
               auto& k = c.controller;
               r.get("rho", k.rho).get("delta", k.delta).get("m_stop", k.m_stop).get("m_cont", k.m_cont);
               r.get("eta", k.eta).get("k_expand", k.k_expand).get("k_nn", k.k_nn);
               r.finish();
             })
      .nested("reward",
              [&](const nlohmann::json& v, const std::string& s) {
                detail::FieldReader r(v, s);
                auto& w = c.reward;
                r.get("lambda_format", w.lambda_format).get("lambda_penalty", w.lambda_penalty);
                r.get("lambda_penalty_max", w.lambda_penalty_max).get("lambda_ret", w.lambda_ret);
                r.get("lambda_ceil", w.lambda_ceil);
                r.finish();
              })
      .nested("schedule",
              [&](const nlohmann::json& v, const std::string& s) {
                if (!v.is_array()) throw Error(ErrorKind::InvalidConfig, s + " must be a list of stages");
                c.schedule.stages.clear();
                for (const auto& st : v) {
                  AnnealStage stage;
                  detail::FieldReader r(st, s + "[]");
                  r.get("epochs", stage.epochs).get("p", stage.p);
                  r.finish();
                  c.schedule.stages.push_back(stage);
                }
              })
      .nested("corpus", [&](const nlohmann::json& v, const std::string& s) {
        detail::FieldReader r(v, s);
        auto& k = c.corpus;
        r.get("num_docs", k.num_docs).get("depth", k.depth).get("branching", k.branching);
        r.get("num_tasks", k.num_tasks).get("redundancy_factor", k.redundancy_factor);
        r.get("noise_vocab_size", k.noise_vocab_size).get("seed", k.seed);
        r.finish();
      });
  top.get("budget", c.budget).get("agent_profile", c.agent_profile);
  top.get("episodes_per_epoch", c.episodes_per_epoch).get("seed", c.seed).get("output_dir", c.output_dir);
  top.get("retrieval_k", c.retrieval_k).get("embed_dim", c.embed_dim).get("workers", c.workers);
  top.finish();
  c.validate();
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : c.schedule.stages) stages.push_back({{"epochs", s.epochs}, {"p", s.p}});
  const auto& k = c.controller;
  const auto& w = c.reward;
  const auto& cs = c.corpus;
  return {{"controller",
           {{"rho", k.rho}, {"delta", k.delta}, {"m_stop", k.m_stop}, {"m_cont", k.m_cont}, {"eta", k.eta},
            {"k_expand", k.k_expand}, {"k_nn", k.k_nn}}},
          {"reward",
           {{"lambda_format", w.lambda_format}, {"lambda_penalty", w.lambda_penalty},
            {"lambda_penalty_max", w.lambda_penalty_max}, {"lambda_ret", w.lambda_ret}, {"lambda_ceil", w.lambda_ceil}}},
          {"schedule", stages},
          {"budget", c.budget},
          {"corpus",
           {{"num_docs", cs.num_docs}, {"depth", cs.depth}, {"branching", cs.branching}, {"num_tasks", cs.num_tasks},
            {"redundancy_factor", cs.redundancy_factor}, {"noise_vocab_size", cs.noise_vocab_size}, {"seed", cs.seed}}},
          {"agent_profile", c.agent_profile},
          {"episodes_per_epoch", c.episodes_per_epoch},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"retrieval_k", c.retrieval_k},
          {"embed_dim", c.embed_dim},
          {"workers", c.workers}};
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::InvalidConfig, path.string() + " is not valid JSON");
  return config_from_json(j);
}

// INFOCTL_SEED and INFOCTL_OUTPUT_DIR; nothing else is read from the environment.
inline void apply_env_overrides(RunConfig& c) {
  if (const char* s = std::getenv("INFOCTL_SEED"); s && *s) {
    char* end = nullptr;
    errno = 0;
    const auto v = std::strtoull(s, &end, 10);
    if (errno || *end != '\0' || *s == '-') throw Error(ErrorKind::InvalidConfig, "INFOCTL_SEED is not an unsigned integer");
    c.seed = v;
  }
  if (const char* d = std::getenv("INFOCTL_OUTPUT_DIR"); d && *d) c.output_dir = d;
}

}  // namespace infoctl
