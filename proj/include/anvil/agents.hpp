#pragma once

// Agent roles and the pluggable backend contract. Architect, Engineer and
// Fixer each turn an ordered list of named context blocks into one
// response; the operations here own prompt assembly, response parsing,
// format-repair re-asks and cost accounting.

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "anvil/gherkin.hpp"
#include "anvil/harness.hpp"
#include "anvil/step_runtime.hpp"

namespace anvil::agents {

enum class AgentRole { Architect, Engineer, Fixer };

inline constexpr AgentRole kAllRoles[] = {AgentRole::Architect, AgentRole::Engineer, AgentRole::Fixer};

std::string_view to_string(AgentRole r);
// Case-insensitive.
std::optional<AgentRole> parse_agent_role(std::string_view name);

struct ContextBlock {
  std::string name;
  std::string text;

  bool operator==(const ContextBlock&) const = default;
};

struct AgentTurn {
  AgentRole role = AgentRole::Architect;
  std::string request_excerpt;
  std::string response;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double duration_s = 0.0;
};

struct Transcript {
  std::string session_id;
  std::string defect_id;
  // "blind" or "enlightened"; scripted backends use it to pick fixtures.
  std::string mode;
  std::vector<AgentTurn> turns;

  std::size_t turns_for(AgentRole role) const;
};

struct CostRecord {
  AgentRole role = AgentRole::Architect;
  double duration_s = 0.0;
  long long turns = 0;
  long long tokens = 0;

  bool operator==(const CostRecord&) const = default;
};

class AgentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendError : public AgentError {
 public:
  using AgentError::AgentError;
};

class MalformedOutput : public AgentError {
 public:
  using AgentError::AgentError;
};

class UnbindableSpec : public AgentError {
 public:
  using AgentError::AgentError;
};

class MalformedPatch : public AgentError {
 public:
  using AgentError::AgentError;
};

class ScopeViolation : public AgentError {
 public:
  explicit ScopeViolation(std::vector<std::string> paths);
  const std::vector<std::string>& paths() const { return paths_; }

 private:
  std::vector<std::string> paths_;
};

// Implementations must tolerate concurrent calls from different sessions.
class Backend {
 public:
  virtual ~Backend() = default;
  // Throws BackendError. `context` must be non-empty.
  virtual AgentTurn respond(AgentRole role, std::span<const ContextBlock> context,
                            const Transcript& transcript) = 0;
};

// "### <name>" heading, the text, and a blank line per block.
std::string render_context(std::span<const ContextBlock> context);

// 16-hex-digit digest of render_context(context).
std::string context_digest(std::span<const ContextBlock> context);

// Rough size estimate for backends that report no usage: ceil(chars / 4).
long long estimate_tokens(std::string_view text);

// Replays fixture files from <dir>/<defect>/<role>/ where role is
// "architect", "engineer" or "fixer". If <dir>/<defect>/<role>/<mode>/
// exists it is used instead. A file by-digest/<context digest>.txt, when
// present, answers that exact context; otherwise the n-th call for the role
// in a transcript gets the n-th file in name order. Files may open with a
// front-matter block:
//   ---
//   prompt_tokens: 100
//   completion_tokens: 50
//   duration_s: 1.5
//   ---
// Missing token counts are estimated; missing duration is 0.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::filesystem::path fixtures_dir);
  AgentTurn respond(AgentRole role, std::span<const ContextBlock> context, const Transcript& transcript) override;

 private:
  std::filesystem::path dir_;
};

struct ScriptedFixture {
  std::string response;
  std::optional<long long> prompt_tokens;
  std::optional<long long> completion_tokens;
  std::optional<double> duration_s;
};

ScriptedFixture parse_fixture(std::string_view file_text);

inline constexpr int kFormatRepairAttempts = 2;

struct ArchitectOutput {
  std::string root_cause_analysis;
  gherkin::FeatureSpec spec;
};

// Well-formed iff there is non-blank analysis text followed by exactly one
// ```gherkin fenced block that parses. Throws MalformedOutput.
ArchitectOutput parse_architect_response(std::string_view response);

// Failure report, failing-test sources, scoped production source, and any
// extra blocks (e.g. feedback from a rejected attempt), in that order.
std::vector<ContextBlock> architect_context(const harness::FailureReport& report,
                                            std::span<const ContextBlock> sources,
                                            std::span<const ContextBlock> extra = {});

// Appends every turn to `transcript`; re-asks up to twice on a malformed
// response, then throws MalformedOutput.
ArchitectOutput architect_infer(const harness::FailureReport& report, std::span<const ContextBlock> sources,
                                Backend& backend, Transcript& transcript,
                                std::span<const ContextBlock> extra = {});

// Sources shown to agents: "test:<path>" blocks for the defect's test
// files, then "source:<modified_files[0]>".
std::vector<ContextBlock> defect_sources(const harness::DefectRecord& defect, const harness::Workspace& ws);

// Accepts a bare JSON document or one inside a ```json fence.
runtime::StepBindingSet parse_engineer_response(std::string_view response);

// Harness artifacts the engineer leaves in the workspace.
inline constexpr std::string_view kHarnessDir = ".anvil";

// Writes .anvil/spec.feature and .anvil/bindings.json into the workspace,
// then checks that every step binds. Re-asks up to twice, then throws
// UnbindableSpec.
runtime::StepBindingSet engineer_build(const gherkin::FeatureSpec& spec, const harness::Workspace& ws,
                                       Backend& backend, Transcript& transcript);

// Blind when `spec` is empty.
struct FixerGuidance {
  std::optional<gherkin::FeatureSpec> spec;
};

// Blind: instructions, failure report, test sources, scoped source.
// With a spec: the same blocks followed by one "specification" block.
std::vector<ContextBlock> fixer_context(const harness::DefectRecord& defect, const harness::Workspace& ws,
                                        const FixerGuidance& guidance, const harness::FailureReport& report);

// Response format: optional rationale, then for each file a line
// "--- file: <path>" followed by a fenced block with the full new content.
harness::Patch parse_fixer_response(std::string_view response);

// Re-asks up to twice on a malformed response (MalformedPatch). The patch
// is scope-checked before it is returned (ScopeViolation).
harness::Patch fixer_repair(const harness::DefectRecord& defect, const harness::Workspace& ws,
                            const FixerGuidance& guidance, const harness::FailureReport& report,
                            Backend& backend, Transcript& transcript);

CostRecord account(const Transcript& transcript, AgentRole role);

// Chat-completion endpoint client.
struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8'000};

  std::chrono::milliseconds delay_for(int retry) const;
};

struct RemoteChatConfig {
  // Full URL of the chat-completions resource, e.g.
  // "https://host/v1/chat/completions".
  std::string endpoint;
  std::string model;
  std::string api_key;
  RetryPolicy retry;
  std::chrono::seconds timeout{300};
};

// One POST per turn with {"model", "messages": [system, user]} where the
// system message names the role and the user message is render_context().
// Reads choices[0].message.content and usage.{prompt,completion}_tokens.
// Transport failures, 429 and 5xx are retried; other statuses fail at once.
class RemoteChatBackend : public Backend {
 public:
  explicit RemoteChatBackend(RemoteChatConfig config);
  AgentTurn respond(AgentRole role, std::span<const ContextBlock> context, const Transcript& transcript) override;

 private:
  RemoteChatConfig config_;
};

std::string system_prompt(AgentRole role);

}  // namespace anvil::agents
