#pragma once

// sessions.jsonl: one self-contained JSON object per repair session.
//
//   session_id, defect_id, project   strings
//   mode                             "Blind" | "Enlightened"
//   outcome                          "CorrectFix" | "PlausibleOnly" | "NoFix" | "Error"
//   detail                           free text
//   degraded                         bool
//   rqa_status                       "NotRun" | "Validated" | "Exhausted" | "HarnessFailure" | "ArchitectFailed"
//   verdicts                         [{attempt, kind, side|null, detail}], absent for Blind
//   spec                             rendered Gherkin or null
//   patch                            {rationale, files: [{path, content}]} or null
//   fallback_events                  [{kind, detail}]
//   scope_violations                 [path]
//   costs                            [{role, duration_s, turns, tokens}]
//   started_at, finished_at          UTC ISO-8601
//   elapsed_s                        number
//   tree_before_fix, tree_after_fix  workspace digests
//   artifacts                        {name: path relative to the campaign directory}

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "anvil/pipeline.hpp"

namespace anvil::cli {

nlohmann::json session_to_json(const pipeline::RepairSession& s);
// Throws std::invalid_argument on a malformed record.
pipeline::RepairSession session_from_json(const nlohmann::json& j);

// A final line without its newline (an interrupted write) is ignored; any
// other bad line throws std::invalid_argument naming the line.
std::vector<pipeline::RepairSession> parse_sessions(std::string_view jsonl);
std::vector<pipeline::RepairSession> load_sessions(const std::filesystem::path& path);

// Appends whole lines under a mutex and flushes after each record.
class SessionLogWriter {
 public:
  explicit SessionLogWriter(const std::filesystem::path& path);
  void append(const pipeline::RepairSession& s);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace anvil::cli
