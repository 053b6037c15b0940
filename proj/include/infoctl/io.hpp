#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoctl/error.hpp"
#include "infoctl/evidence.hpp"
#include "infoctl/rollout.hpp"
#include "infoctl/simenv.hpp"
#include "infoctl/task.hpp"

namespace infoctl {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Enum spellings

namespace detail {
template <typename E, std::size_t N>
E parse_enum(std::string_view s, const E (&all)[N], ErrorKind on_error, const char* what) {
  for (E e : all) {
    if (to_string(e) == s) return e;
  }
  throw Error(on_error, std::string("unknown ") + what + " '" + std::string(s) + "'");
}
}  // namespace detail

inline ActionKind parse_action_kind(std::string_view s) {
  static constexpr ActionKind all[] = {ActionKind::Retrieve, ActionKind::Expand, ActionKind::Answer};
  return detail::parse_enum(s, all, ErrorKind::MalformedTrace, "action kind");
}

inline Mode parse_mode(std::string_view s) {
  static constexpr Mode all[] = {Mode::Controlled, Mode::Free};
  return detail::parse_enum(s, all, ErrorKind::MalformedTrace, "mode");
}

inline ViolationKind parse_violation_kind(std::string_view s) {
  static constexpr ViolationKind all[] = {ViolationKind::MalformedToolCall, ViolationKind::UnknownTarget,
                                          ViolationKind::ParentNotInjected, ViolationKind::ControlNonCompliance,
                                          ViolationKind::BudgetOverrun};
  return detail::parse_enum(s, all, ErrorKind::MalformedTrace, "violation kind");
}

inline SignalKind parse_signal_kind(std::string_view s) {
  static constexpr SignalKind all[] = {SignalKind::Stop, SignalKind::ContinueOneStep, SignalKind::Expand};
  return detail::parse_enum(s, all, ErrorKind::MalformedTrace, "signal kind");
}

// ---------------------------------------------------------------------------
// Corpus records

inline json to_json(const DocumentRecord& d) {
  json nodes = json::array();
  for (const auto& n : d.nodes) {
    nodes.push_back({{"node_id", n.node_id},
                     {"parent_id", n.parent_id ? json(*n.parent_id) : json(nullptr)},
                     {"level", n.level},
                     {"title", n.title},
                     {"text", n.text}});
  }
  return {{"doc_id", d.doc_id}, {"title", d.title}, {"nodes", nodes}};
}

inline DocumentRecord document_from_json(const json& j) {
  DocumentRecord d;
  d.doc_id = j.at("doc_id").get<std::string>();
  d.title = j.value("title", "");
  for (const auto& n : j.at("nodes")) {
    NodeRecord r;
    r.node_id = n.at("node_id").get<std::string>();
    if (n.contains("parent_id") && !n["parent_id"].is_null()) r.parent_id = n["parent_id"].get<std::string>();
    r.level = n.value("level", 0);
    r.title = n.value("title", "");
    r.text = n.value("text", "");
    d.nodes.push_back(std::move(r));
  }
  return d;
}

inline json to_json(const TaskRecord& t) {
  return {{"task_id", t.task_id},
          {"question", t.question},
          {"gold_answers", t.gold_answers},
          {"candidates", t.candidates.candidates},
          {"canned_trace", t.canned_trace},
          {"relevant_leaf_ids", t.relevant_leaf_ids}};
}

inline TaskRecord task_from_json(const json& j) {
  TaskRecord t;
  t.task_id = j.at("task_id").get<std::string>();
  t.question = j.at("question").get<std::string>();
  t.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
  const auto raw = j.at("candidates").get<std::vector<std::string>>();
  t.candidates = CandidateSet::make(raw, t.gold_answers.empty() ? std::nullopt
                                                                : std::optional<std::string>(t.gold_answers.front()));
  t.canned_trace = j.value("canned_trace", "");
  t.relevant_leaf_ids = j.value("relevant_leaf_ids", std::vector<std::string>{});
  return t;
}

// ---------------------------------------------------------------------------
// Episode traces

inline json to_json(const RewardBreakdown& r) {
  return {{"f1", r.f1},         {"r_correct", r.r_correct}, {"r_penalty", r.r_penalty},
          {"r_ret", r.r_ret},   {"total", r.total},         {"ceiling_applied", r.ceiling_applied}};
}

inline RewardBreakdown reward_from_json(const json& j) {
  RewardBreakdown r;
  r.f1 = j.at("f1").get<double>();
  r.r_correct = j.at("r_correct").get<double>();
  r.r_penalty = j.at("r_penalty").get<double>();
  r.r_ret = j.at("r_ret").get<double>();
  r.total = j.at("total").get<double>();
  r.ceiling_applied = j.at("ceiling_applied").get<bool>();
  return r;
}

inline json to_json(const EpisodeTrace& tr) {
  json actions = json::array();
  for (const auto& a : tr.actions) {
    actions.push_back({{"step", a.step}, {"kind", to_string(a.kind)}, {"thought", a.thought}, {"params", a.params}});
  }
  json steps = json::array();
  for (const auto& s : tr.search_steps) steps.push_back({{"l", s.l}, {"t_start", s.t_start}, {"t_end", s.t_end}});
  json utils = json::array();
  for (const auto& u : tr.utilities) {
    utils.push_back({{"l", u.l},
                     {"novelty", u.score.novelty},
                     {"effectiveness", u.score.effectiveness},
                     {"utility", u.score.utility},
                     {"rho", u.score.rho},
                     {"degenerate", u.degenerate}});
  }
  json events = json::array();
  for (const auto& e : tr.control_events) {
    events.push_back({{"step", e.step},
                      {"search_index", e.search_index},
                      {"kind", to_string(e.signal.kind)},
                      {"ids", e.signal.expand_ids},
                      {"message", e.message},
                      {"complied", e.complied},
                      {"intercepted", e.intercepted ? json(to_string(*e.intercepted)) : json(nullptr)}});
  }
  json violations = json::array();
  for (const auto& v : tr.violations) {
    violations.push_back({{"step", v.step}, {"kind", to_string(v.kind)}, {"detail", v.detail}});
  }
  json injected = json::array();
  for (const auto& n : tr.injected) injected.push_back({{"step", n.step}, {"node_id", n.node_id}, {"text", n.text}});

  return {{"task_id", tr.task_id},
          {"mode", to_string(tr.mode)},
          {"epoch", tr.epoch},
          {"seed", tr.seed},
          {"actions", actions},
          {"search_steps", steps},
          {"utilities", utils},
          {"control_events", events},
          {"violations", violations},
          {"reward", to_json(tr.reward)},
          {"gold_answers", tr.gold_answers},
          {"prediction", tr.prediction ? json(*tr.prediction) : json(nullptr)},
          {"injected", injected}};
}

inline EpisodeTrace trace_from_json(const json& j) {
  try {
    EpisodeTrace tr;
    tr.task_id = j.at("task_id").get<std::string>();
    tr.mode = parse_mode(j.at("mode").get<std::string>());
    tr.epoch = j.at("epoch").get<std::size_t>();
    tr.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("actions")) {
      tr.actions.push_back(Action{a.at("thought").get<std::string>(), parse_action_kind(a.at("kind").get<std::string>()),
                                  a.at("params").get<std::string>(), a.at("step").get<int>()});
    }
    for (const auto& s : j.at("search_steps")) {
      tr.search_steps.push_back(
          SearchStep{s.at("l").get<std::size_t>(), s.at("t_start").get<int>(), s.at("t_end").get<int>()});
    }
    for (const auto& u : j.at("utilities")) {
      tr.utilities.push_back(StepUtility{u.at("l").get<std::size_t>(),
                                         UtilityScore{u.at("novelty").get<double>(), u.at("effectiveness").get<double>(),
                                                      u.at("utility").get<double>(), u.at("rho").get<double>()},
                                         u.value("degenerate", false)});
    }
    for (const auto& e : j.at("control_events")) {
      ControlEvent ev;
      ev.step = e.at("step").get<int>();
      ev.search_index = e.at("search_index").get<std::size_t>();
      ev.signal.kind = parse_signal_kind(e.at("kind").get<std::string>());
      ev.signal.expand_ids = e.value("ids", std::vector<std::string>{});
      ev.signal.issued_at = ev.step;
      ev.message = e.at("message").get<std::string>();
      ev.complied = e.at("complied").get<bool>();
      if (e.contains("intercepted") && !e["intercepted"].is_null()) {
        ev.intercepted = parse_action_kind(e["intercepted"].get<std::string>());
      }
      tr.control_events.push_back(std::move(ev));
    }
    for (const auto& v : j.at("violations")) {
      tr.violations.push_back(Violation{v.at("step").get<int>(), parse_violation_kind(v.at("kind").get<std::string>()),
                                        v.value("detail", "")});
    }
    tr.reward = reward_from_json(j.at("reward"));
    tr.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
    if (!j.at("prediction").is_null()) tr.prediction = j["prediction"].get<std::string>();
    for (const auto& n : j.at("injected")) {
      tr.injected.push_back(
          InjectedNode{n.at("step").get<int>(), n.at("node_id").get<std::string>(), n.at("text").get<std::string>()});
    }
    return tr;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedTrace, e.what());
  }
}

// ---------------------------------------------------------------------------
// Line-delimited files

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

// Blank lines are skipped. Parse failures raise `on_parse_error` with the line number.
inline std::vector<json> read_jsonl(const std::filesystem::path& path, ErrorKind on_parse_error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(on_parse_error, path.string() + ":" + std::to_string(lineno) + ": not a JSON object");
    }
    out.push_back(std::move(j));
  }
  return out;
}

inline void write_traces(const std::filesystem::path& path, const std::vector<EpisodeTrace>& traces) {
  std::vector<json> recs;
  recs.reserve(traces.size());
  for (const auto& t : traces) recs.push_back(to_json(t));
  write_jsonl(path, recs);
}

inline std::vector<EpisodeTrace> read_traces(const std::filesystem::path& path) {
  std::vector<EpisodeTrace> out;
  std::size_t i = 0;
  for (const auto& j : read_jsonl(path, ErrorKind::MalformedTrace)) {
    ++i;
    try {
      out.push_back(trace_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::MalformedTrace, path.string() + ": record " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

inline constexpr std::string_view kCorpusFile = "corpus.jsonl";
inline constexpr std::string_view kTasksFile = "tasks.jsonl";
inline constexpr std::string_view kTracesFile = "traces.jsonl";

inline void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::vector<json> docs, tasks;
  for (const auto& d : corpus.documents) docs.push_back(to_json(d));
  for (const auto& t : corpus.tasks) tasks.push_back(to_json(t));
  write_jsonl(dir / kCorpusFile, docs);
  write_jsonl(dir / kTasksFile, tasks);
}

inline Corpus read_corpus(const std::filesystem::path& dir) {
  Corpus c;
  try {
    for (const auto& j : read_jsonl(dir / kCorpusFile, ErrorKind::IoFailure)) c.documents.push_back(document_from_json(j));
    for (const auto& j : read_jsonl(dir / kTasksFile, ErrorKind::IoFailure)) c.tasks.push_back(task_from_json(j));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IoFailure, std::string("bad corpus record: ") + e.what());
  }
  return c;
}

}  // namespace infoctl
