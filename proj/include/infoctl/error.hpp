#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace infoctl {

enum class ErrorKind {
  // evidence
  CycleDetected,
  MultipleRoots,
  DanglingParent,
  DuplicateNode,
  EmptyTree,
  NonMonotoneStep,
  ParentNotInjected,
  UnknownEdge,
  MissingSnapshot,
  // utility
  EmptyNewPool,
  ScorerFailure,
  MisalignedCandidates,
  OutOfRange,
  // control
  MissingGold,
  InvalidArgument,
  // rollout
  EpochOutOfRange,
  ExpandBeforeFirstRetrieve,
  EnvironmentFailure,
  // simenv
  InvalidSpec,
  EmptyCorpus,
  // io
  IoFailure,
  MalformedTrace,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::CycleDetected: return "CycleDetected";
    case ErrorKind::MultipleRoots: return "MultipleRoots";
    case ErrorKind::DanglingParent: return "DanglingParent";
    case ErrorKind::DuplicateNode: return "DuplicateNode";
    case ErrorKind::EmptyTree: return "EmptyTree";
    case ErrorKind::NonMonotoneStep: return "NonMonotoneStep";
    case ErrorKind::ParentNotInjected: return "ParentNotInjected";
    case ErrorKind::UnknownEdge: return "UnknownEdge";
    case ErrorKind::MissingSnapshot: return "MissingSnapshot";
    case ErrorKind::EmptyNewPool: return "EmptyNewPool";
    case ErrorKind::ScorerFailure: return "ScorerFailure";
    case ErrorKind::MisalignedCandidates: return "MisalignedCandidates";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::MissingGold: return "MissingGold";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EpochOutOfRange: return "EpochOutOfRange";
    case ErrorKind::ExpandBeforeFirstRetrieve: return "ExpandBeforeFirstRetrieve";
    case ErrorKind::EnvironmentFailure: return "EnvironmentFailure";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::MalformedTrace: return "MalformedTrace";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace infoctl
