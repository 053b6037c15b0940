#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "infoctl/error.hpp"
#include "infoctl/utility.hpp"

namespace infoctl {

// Wire format for an external scoring service.
//   request:  {"task": str, "evidence": [str], "trace": str, "candidate": str}
//   response: {"token_logprobs": [number]}
inline std::string encode_score_request(std::string_view candidate, const ScoringContext& ctx) {
  nlohmann::json j;
  j["task"] = std::string(ctx.task);
  j["evidence"] = std::vector<std::string>(ctx.evidence.begin(), ctx.evidence.end());
  j["trace"] = std::string(ctx.trace);
  j["candidate"] = std::string(candidate);
  return j.dump();
}

inline std::vector<double> decode_score_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ScorerFailure, std::string("unparsable scorer response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("token_logprobs") || !j["token_logprobs"].is_array()) {
    throw Error(ErrorKind::ScorerFailure, "scorer response lacks a token_logprobs array");
  }
  std::vector<double> out;
  for (const auto& v : j["token_logprobs"]) {
    if (!v.is_number()) throw Error(ErrorKind::ScorerFailure, "non-numeric token log-prob");
    out.push_back(v.get<double>());
  }
  return out;
}

// Adapts any request/response transport (HTTP client, RPC stub, test double)
// to the Scorer interface. The transport must be safe to call concurrently if
// the scorer is shared across episodes.
class RemoteScorer final : public Scorer {
 public:
  using Transport = std::function<std::string(const std::string& request)>;

  explicit RemoteScorer(Transport transport) : transport_(std::move(transport)) {}

  std::vector<double> score_tokens(std::string_view candidate, const ScoringContext& ctx) const override {
    std::string body;
    try {
      body = transport_(encode_score_request(candidate, ctx));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorKind::ScorerFailure, std::string("transport failed: ") + e.what());
    }
    return decode_score_response(body);
  }

 private:
  Transport transport_;
};

}  // namespace infoctl
