#pragma once

// Executable semantics for Gherkin scenarios. Each step is matched to a
// binding whose command template runs as an operating-system process in
// the workspace; exit code 0 passes the step.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "anvil/gherkin.hpp"

namespace anvil::runtime {

class TokenizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Splits a command template into argv tokens:
//   - ASCII whitespace (space, tab, CR, LF) outside quotes separates tokens;
//   - '...' groups literally, no escapes inside;
//   - "..." groups, and inside it a backslash escapes only '"' and '\';
//   - outside quotes a backslash makes the next character literal;
//   - adjacent quoted and unquoted pieces join into one token, and "" or ''
//     alone yields an empty token.
// An unterminated quote or a trailing lone backslash is a TokenizeError.
std::vector<std::string> tokenize(std::string_view command);

// Replaces {1}..{n} with captures[0..n-1] and {name} with vars[name] in a
// single left-to-right pass; substituted text is never rescanned. Braces
// that do not form a known placeholder are kept verbatim.
std::string substitute(std::string_view token, const std::vector<std::string>& captures,
                       const std::map<std::string, std::string>& vars);

// Highest {n} index used in a template, 0 if none.
std::size_t max_placeholder_index(std::string_view command);

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepBinding {
  std::string pattern;
  std::string command_template;
  std::chrono::milliseconds timeout{60'000};
  std::optional<gherkin::StepRole> role_constraint;

  // Compiles the pattern and checks placeholder indices against the
  // capture-group count. Throws ManifestError.
  static StepBinding make(std::string pattern, std::string command,
                          std::chrono::milliseconds timeout = std::chrono::seconds(60),
                          std::optional<gherkin::StepRole> role = std::nullopt);

  const std::regex& regex() const { return regex_; }

 private:
  std::regex regex_;
};

struct StepBindingSet {
  std::vector<StepBinding> bindings;
  std::map<std::string, std::string> environment;
};

// bindings.json: {"bindings": [{"pattern", "command", "timeout_s"?, "role"?}],
//                 "env": {...}}
StepBindingSet parse_manifest(std::string_view json_text);
std::string render_manifest(const StepBindingSet& set);

class BindingError : public std::runtime_error {
 public:
  BindingError(std::size_t scenario_index, std::size_t step_index, std::string step_text);

  std::size_t scenario_index() const { return scenario_index_; }
  std::size_t step_index() const { return step_index_; }
  const std::string& step_text() const { return step_text_; }

 private:
  std::size_t scenario_index_;
  std::size_t step_index_;
  std::string step_text_;
};

struct BoundStep {
  gherkin::Step step;
  std::size_t binding_index = 0;
  std::vector<std::string> argv_template;
  std::vector<std::string> captures;
  std::chrono::milliseconds timeout{60'000};
};

struct BoundScenario {
  std::string title;
  std::vector<BoundStep> steps;
};

struct BoundFeature {
  std::string title;
  std::vector<BoundScenario> scenarios;
  std::map<std::string, std::string> environment;
};

// Each step binds to the first binding whose pattern matches the whole
// step text and whose role constraint, if any, equals the step's role.
BoundFeature bind(const gherkin::FeatureSpec& spec, const StepBindingSet& bindings);

enum class ScenarioStatus { Pass, AssertionFail, SetupError };

std::string_view to_string(ScenarioStatus s);

struct StepLog {
  std::string command;
  int exit_code = -1;
  std::string output;

  bool operator==(const StepLog&) const = default;
};

struct ScenarioResult {
  std::string scenario_title;
  ScenarioStatus status = ScenarioStatus::Pass;
  std::optional<std::size_t> failed_step_index;
  // "exit", "timeout" or "spawn" when a step failed.
  std::string failure_tag;
  std::vector<StepLog> step_logs;

  bool operator==(const ScenarioResult&) const = default;
};

struct FeatureRunReport {
  std::string feature_title;
  std::vector<ScenarioResult> scenario_results;
  std::chrono::milliseconds wall_time{0};
};

// Runs scenarios in order, steps as processes with the workspace as working
// directory. A scenario stops at its first failing step. {workspace} in a
// template expands to the absolute workspace root. Concurrent execution in
// the same workspace throws std::logic_error.
FeatureRunReport execute(const BoundFeature& bound, const std::filesystem::path& workspace);

enum class SpecOutcome { AllPass, AnyAssertionFail, Error };

std::string_view to_string(SpecOutcome o);

// Error dominates AnyAssertionFail, which dominates AllPass.
SpecOutcome outcome(const FeatureRunReport& report);

}  // namespace anvil::runtime
