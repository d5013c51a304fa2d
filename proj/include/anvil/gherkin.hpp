#pragma once

// Gherkin subset used for executable repair specifications: a single
// Feature with an optional free-text description, followed by Scenarios
// made of Given/When/Then/And/But steps. Background, Scenario Outline,
// tables, doc-strings and tags are rejected.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace anvil::gherkin {

enum class Keyword { Given, When, Then, And, But };

enum class StepRole { Context, Action, Assertion };

std::string_view to_string(Keyword k);
std::string_view to_string(StepRole r);
std::optional<StepRole> parse_role(std::string_view name);

struct Step {
  Keyword keyword = Keyword::Given;
  std::string text;
  StepRole role = StepRole::Context;

  bool operator==(const Step&) const = default;
};

struct Scenario {
  std::string title;
  std::vector<Step> steps;

  bool operator==(const Scenario&) const = default;
};

struct SourceSpan {
  std::string path;
  int first_line = 0;
  int last_line = 0;
};

struct FeatureSpec {
  std::string title;
  // Lines joined with '\n'; an empty line separates paragraphs.
  std::string description;
  std::vector<Scenario> scenarios;
  // Diagnostics only; ignored by equality.
  std::optional<SourceSpan> source_span;

  friend bool operator==(const FeatureSpec& a, const FeatureSpec& b) {
    return a.title == b.title && a.description == b.description && a.scenarios == b.scenarios;
  }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, std::string reason);

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& reason() const { return reason_; }

 private:
  int line_;
  int column_;
  std::string reason_;
};

// Given/When/Then fix the role; And/But inherit the previous step's role.
// Throws std::invalid_argument for And/But without a previous step.
StepRole resolve_role(Keyword keyword, std::optional<StepRole> previous);

// Throws ParseError on: missing Feature header, more than one Feature,
// zero scenarios, a scenario with zero steps, And/But as first step,
// duplicate scenario titles, an unknown keyword at step position, and
// unsupported constructs. A non-keyword line indented deeper than the
// preceding step continues that step's text.
FeatureSpec parse(std::string_view text, std::string_view source_path = {});

// Throws std::invalid_argument when `spec` violates a type invariant or
// holds text that cannot be rendered back to the same structure.
void validate(const FeatureSpec& spec);

// Canonical form: "Feature: <title>", description lines indented by two
// spaces, a blank line before every scenario, scenarios at two spaces and
// steps at four. Always LF, with a trailing newline.
std::string render(const FeatureSpec& spec);

enum class Severity { Warning, Error };

std::string_view to_string(Severity s);

// Closed set of lint codes.
inline constexpr std::string_view kBroadScenario = "BROAD_SCENARIO";
inline constexpr std::string_view kNoAssertion = "NO_ASSERTION";
inline constexpr std::string_view kVacuousAssertion = "VACUOUS_ASSERTION";

struct LintFinding {
  Severity severity = Severity::Warning;
  std::string code;
  std::optional<std::size_t> scenario_index;
  std::string message;

  bool operator==(const LintFinding&) const = default;
};

struct LintOptions {
  std::size_t broad_scenario_steps = 8;
};

// Findings are ordered by scenario, then by rule (BROAD_SCENARIO,
// NO_ASSERTION, VACUOUS_ASSERTION), then by step.
std::vector<LintFinding> lint(const FeatureSpec& spec, const LintOptions& options = {});

// Assertion texts treated as trivially true, matched case-insensitively
// against the whole step text.
const std::vector<std::string>& vacuous_assertion_patterns();

}  // namespace anvil::gherkin
