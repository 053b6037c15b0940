#pragma once

#include <string>
#include <vector>

#include "infoctl/evidence.hpp"
#include "infoctl/utility.hpp"

namespace infoctl {

struct TaskRecord {
  std::string task_id;
  std::string question;
  std::vector<std::string> gold_answers;
  CandidateSet candidates;
  // Fixed reasoning trace the answer scorer conditions on.
  std::string canned_trace;
  // Generator bookkeeping; never shown to agents.
  std::vector<NodeId> relevant_leaf_ids;
};

}  // namespace infoctl
