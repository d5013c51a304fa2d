#pragma once

// Fix rate, rescue rate, the per-project composite table and per-role
// cost breakdowns, computed exactly in integers and rounded only for
// display.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "anvil/agents.hpp"

namespace anvil::metrics {

struct OutcomeRecord {
  std::string defect_id;
  std::string project;
  bool blind_correct = false;
  bool enlightened_attempted = false;
  bool enlightened_correct = false;
  // The enlightened fix was made without a validated spec.
  bool enlightened_degraded = false;

  bool operator==(const OutcomeRecord&) const = default;
};

class RecordError : public std::runtime_error {
 public:
  RecordError(std::size_t line, const std::string& reason);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// One JSON object per line; blank lines are skipped. Throws RecordError
// naming the 1-based line of the first bad record.
std::vector<OutcomeRecord> parse_outcomes(std::string_view jsonl);
std::vector<OutcomeRecord> load_outcomes(const std::filesystem::path& path);
std::string outcome_to_json(const OutcomeRecord& r);

// Exact ratio num / den with den > 0.
struct Rate {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double percent() const { return 100.0 * static_cast<double>(num) / static_cast<double>(den); }
  // Percentage rounded half-up, without the % sign.
  std::string display(int places) const;

  bool operator==(const Rate&) const = default;
};

// Undefined (nullopt) when total == 0.
std::optional<Rate> fix_rate(std::uint64_t correct, std::uint64_t total);

// Enlightened successes among blind failures over blind failures. Degraded
// successes count only when `include_degraded` is set. Undefined when no
// record is a blind failure.
std::optional<Rate> rescue_rate(std::span<const OutcomeRecord> records, bool include_degraded = false);

struct ProjectRow {
  std::string project;
  std::uint64_t bugs = 0;
  std::uint64_t blind_success = 0;
  std::uint64_t blind_fail = 0;
  std::uint64_t rescued = 0;
  std::uint64_t total = 0;

  std::optional<Rate> rate() const { return fix_rate(total, bugs); }
  bool operator==(const ProjectRow&) const = default;
};

struct ProjectTable {
  // Projects in order of first appearance.
  std::vector<ProjectRow> rows;
  ProjectRow total{"Total"};
};

// Throws std::invalid_argument on a record without a project or one that
// breaks the OutcomeRecord invariants.
ProjectTable project_table(std::span<const OutcomeRecord> records, bool include_degraded = false);

// Averages are fixed-point with 6 decimals so that sums of averages are
// exact (136.77 + 671.67 + 452.64 == 1261.08).
using Micro = std::int64_t;
inline constexpr Micro kMicro = 1'000'000;

Micro to_micro(double value);
std::string format_micro(Micro value, int places);

struct RoleCost {
  agents::AgentRole role = agents::AgentRole::Architect;
  Micro avg_duration_s = 0;
  Micro avg_turns = 0;
  Micro avg_tokens = 0;
  // Role tokens over all tokens.
  Rate ratio;
};

struct CostBreakdown {
  std::uint64_t sessions = 0;
  std::vector<RoleCost> roles;
  Micro total_duration_s = 0;
  Micro total_turns = 0;
  Micro total_tokens = 0;
};

// One entry per session holding that session's per-role records. Averages
// divide by the number of sessions. Undefined when there are no sessions
// or no tokens at all.
std::optional<CostBreakdown> cost_breakdown(std::span<const std::vector<agents::CostRecord>> sessions);

struct RoleAverages {
  agents::AgentRole role = agents::AgentRole::Architect;
  double avg_duration_s = 0.0;
  double avg_turns = 0.0;
  double avg_tokens = 0.0;
};

// Precomputed per-session averages, as in table3-costs.json:
//   {"sessions": 189, "roles": [{"role": "Architect", "avg_duration_s": ..,
//    "avg_turns": .., "avg_tokens": ..}, ...]}
struct CostAverages {
  std::uint64_t sessions = 0;
  std::vector<RoleAverages> roles;
};

CostAverages parse_cost_averages(std::string_view json_text);
CostAverages load_cost_averages(const std::filesystem::path& path);
std::optional<CostBreakdown> cost_breakdown(const CostAverages& averages);

enum class Format { Markdown, Csv };
std::optional<Format> parse_format(std::string_view s);

struct ReportInput {
  std::vector<OutcomeRecord> records;
  std::optional<CostBreakdown> costs;
  bool include_degraded = false;
};

// Project table (1-decimal rates, 2 for the total), rescue-rate summary
// and, when present, the cost table. Identical inputs give identical
// bytes. A report without records says "no sessions".
std::string render_report(const ReportInput& input, Format format);

}  // namespace anvil::metrics
