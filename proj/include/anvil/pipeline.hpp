#pragma once

// Repair sessions (failure analysis, optional specification synthesis,
// repair), patch adjudication and the composite Blind -> Enlightened
// campaign.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "anvil/agents.hpp"
#include "anvil/gherkin.hpp"
#include "anvil/harness.hpp"
#include "anvil/metrics.hpp"
#include "anvil/rqa.hpp"
#include "anvil/step_runtime.hpp"

namespace anvil::pipeline {

enum class Mode { Blind, Enlightened };
// Ordered by evidence: CorrectFix implies everything PlausibleOnly checks.
enum class Outcome { CorrectFix, PlausibleOnly, NoFix, Error };
enum class FallbackKind { EnvironmentPruning, StrategyFallback };
// NotRun for Blind sessions. HarnessFailure is the fallback path;
// ArchitectFailed means no well-formed spec was ever produced.
enum class RqaStatus { NotRun, Validated, Exhausted, HarnessFailure, ArchitectFailed };

std::string_view to_string(Mode m);
std::string_view to_string(Outcome o);
std::string_view to_string(FallbackKind k);
std::string_view to_string(RqaStatus s);
std::optional<Mode> parse_mode(std::string_view s);
std::optional<Outcome> parse_outcome(std::string_view s);
std::optional<FallbackKind> parse_fallback_kind(std::string_view s);
std::optional<RqaStatus> parse_rqa_status(std::string_view s);

struct FallbackEvent {
  FallbackKind kind = FallbackKind::EnvironmentPruning;
  std::string detail;

  bool operator==(const FallbackEvent&) const = default;
};

struct Backends {
  std::shared_ptr<agents::Backend> architect;
  std::shared_ptr<agents::Backend> engineer;
  std::shared_ptr<agents::Backend> fixer;

  agents::Backend& for_role(agents::AgentRole role) const;
};

struct PipelineConfig {
  int max_rqa_attempts = 3;
  // Compare against the fixed tree with the probe suite when the defect
  // has one; off means byte identity of the scoped file.
  bool use_probes = true;
  // Session artifacts go to <artifacts_dir>/<session id>/ when set.
  std::filesystem::path artifacts_dir;
};

struct RepairSession {
  std::string session_id;
  std::string defect_id;
  std::string project;
  Mode mode = Mode::Blind;
  RqaStatus rqa_status = RqaStatus::NotRun;
  // Verification history; absent for Blind sessions.
  std::optional<std::vector<rqa::RQAResult>> rqa;
  // The spec shown to the fixer: the validated one, or on the fallback
  // path the last unverifiable one.
  std::optional<gherkin::FeatureSpec> spec;
  std::optional<harness::Patch> patch;
  Outcome outcome = Outcome::Error;
  std::string detail;
  // Enlightened session that repaired without a validated spec.
  bool degraded = false;
  std::vector<FallbackEvent> fallback_events;
  std::vector<std::string> scope_violations;
  std::vector<agents::CostRecord> costs;
  std::string started_at;
  std::string finished_at;
  double elapsed_s = 0.0;
  // Repair workspace digests around the fixer phase.
  std::string tree_before_fix;
  std::string tree_after_fix;
  std::string fixer_prompt;
  std::map<std::string, std::string> artifacts;
};

struct Adjudication {
  Outcome outcome = Outcome::Error;
  std::string detail;
  std::string method;
};

struct SpecCheck {
  gherkin::FeatureSpec spec;
  runtime::StepBindingSet bindings;
};

// Applies the patch to a fresh buggy checkout, runs the baseline tests and
// the validated spec (if given), then asks the harness for the ground-truth
// comparison. Never throws.
Adjudication adjudicate(const harness::Patch& patch, const harness::DefectRecord& defect,
                        const harness::Corpus& corpus, const PipelineConfig& config,
                        const std::optional<SpecCheck>& spec = std::nullopt);

// Never throws; infrastructure failures become Outcome::Error.
RepairSession run_session(const harness::DefectRecord& defect, Mode mode, const harness::Corpus& corpus,
                          const Backends& backends, const PipelineConfig& config);

struct DefectSessions {
  RepairSession blind;
  std::optional<RepairSession> enlightened;
};

struct CampaignTotals {
  long long defects = 0;
  long long blind_correct = 0;
  long long blind_fail = 0;
  // Enlightened CorrectFix among blind failures, degraded ones included.
  long long rescued = 0;
  long long rescued_degraded = 0;
  long long total_correct = 0;

  bool operator==(const CampaignTotals&) const = default;
};

struct CampaignResult {
  // Corpus order.
  std::vector<DefectSessions> sessions;
  CampaignTotals totals;
};

struct CampaignOptions {
  int workers = 1;
  // Run Enlightened sessions for blind failures.
  bool composite = true;
  // Already-logged sessions keyed by (defect id, mode); they are reused
  // instead of executed.
  std::map<std::pair<std::string, Mode>, RepairSession> prior;
  // Receives each newly executed session; calls are serialized.
  std::function<void(const RepairSession&)> sink;
};

// Throws std::logic_error if the composite identity does not hold.
CampaignTotals compute_totals(const std::vector<DefectSessions>& sessions);

CampaignResult run_campaign(const harness::Corpus& corpus, const Backends& backends, const PipelineConfig& config,
                            const CampaignOptions& options = {});

metrics::OutcomeRecord to_outcome_record(const DefectSessions& sessions);
std::vector<metrics::OutcomeRecord> to_outcome_records(const CampaignResult& result);

std::string session_id(std::string_view defect_id, Mode mode);

}  // namespace anvil::pipeline
