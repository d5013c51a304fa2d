#pragma once

// Requirement quality assurance: a specification is accepted only if it
// fails on the buggy tree (negative side) and passes on the fixed tree
// (positive side). The negative side always runs first; the fixed tree is
// never materialized when the buggy side already decides the verdict.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "anvil/gherkin.hpp"
#include "anvil/harness.hpp"
#include "anvil/step_runtime.hpp"

namespace anvil::rqa {

enum class VerdictKind { Validated, SpecTooWeak, SpecMisaligned, HarnessError };
enum class Side { Buggy, Fixed };

std::string_view to_string(VerdictKind k);
std::string_view to_string(Side s);

struct Verdict {
  VerdictKind kind = VerdictKind::HarnessError;
  std::string detail;
  // Set iff kind == HarnessError.
  std::optional<Side> side;
};

// Verdict lattice. `fixed` may be absent only when the buggy outcome is
// AllPass or Error (std::invalid_argument otherwise).
Verdict classify(runtime::SpecOutcome buggy, std::optional<runtime::SpecOutcome> fixed);

struct RQAResult {
  Verdict verdict;
  runtime::FeatureRunReport buggy_report;
  // Absent iff the verdict is SpecTooWeak or HarnessError on the buggy side.
  std::optional<runtime::FeatureRunReport> fixed_report;
  int attempt_index = 1;
};

// Produces the run report for one side; throwing maps to HarnessError.
using SideRunner = std::function<runtime::FeatureRunReport(Side)>;

RQAResult sandwich_verify(const SideRunner& run_side);

// Binds, then runs the negative side on a fresh buggy checkout and, unless
// short-circuited, the positive side on a fresh fixed checkout.
RQAResult sandwich_verify(const gherkin::FeatureSpec& spec, const runtime::StepBindingSet& bindings,
                          const harness::DefectRecord& defect, const harness::Corpus& corpus);

inline constexpr std::string_view kNegativeOnly = "negative-only";

// Buggy side only. A spec that fails there is provisionally accepted and
// reported as Validated with detail "negative-only".
Verdict negative_only_verify(const SideRunner& run_side);
Verdict negative_only_verify(const gherkin::FeatureSpec& spec, const runtime::StepBindingSet& bindings,
                             const harness::DefectRecord& defect, const harness::Corpus& corpus);

struct ValidatedSpec {
  gherkin::FeatureSpec spec;
  runtime::StepBindingSet bindings;
  RQAResult result;
  std::vector<RQAResult> history;
};

struct Exhausted {
  std::vector<RQAResult> history;
  // Ended by a repeated harness failure rather than by the attempt cap.
  bool harness_failure = false;
  std::optional<gherkin::FeatureSpec> last_spec;
};

using LoopOutcome = std::variant<ValidatedSpec, Exhausted>;

// Synthesizes a spec for an attempt; `previous` is the last verification
// result, if any.
using ArchitectFn = std::function<gherkin::FeatureSpec(int attempt, const RQAResult* previous)>;
// Synthesizes bindings; throwing is treated as a harness failure.
using EngineerFn = std::function<runtime::StepBindingSet(const gherkin::FeatureSpec&)>;
using VerifyFn = std::function<RQAResult(const gherkin::FeatureSpec&, const runtime::StepBindingSet&)>;

// Regeneration loop. Each attempt asks the architect for a spec and the
// engineer for bindings, then verifies. Returns on the first Validated.
// A HarnessError does not consume an attempt the first time it occurs on a
// given side: the same spec is kept and only the bindings are rebuilt. A
// second HarnessError on that side ends the loop with harness_failure set.
LoopOutcome rqa_loop(const ArchitectFn& architect, const EngineerFn& engineer, const VerifyFn& verify,
                     int max_attempts = 3);

LoopOutcome rqa_loop(const harness::DefectRecord& defect, const harness::Corpus& corpus,
                     const ArchitectFn& architect, const EngineerFn& engineer, int max_attempts = 3);

}  // namespace anvil::rqa
