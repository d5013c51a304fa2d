#include "anvil/rqa.hpp"

#include <stdexcept>

namespace anvil::rqa {

using runtime::SpecOutcome;

namespace {

struct SideRun {
  runtime::FeatureRunReport report;
  SpecOutcome outcome = SpecOutcome::Error;
  std::string error;
};

SideRun run_guarded(const SideRunner& run_side, Side side, const std::string& title) {
  SideRun r;
  try {
    r.report = run_side(side);
    r.outcome = runtime::outcome(r.report);
  } catch (const std::exception& e) {
    r.report = runtime::FeatureRunReport{title, {}, {}};
    r.outcome = SpecOutcome::Error;
    r.error = e.what();
  }
  return r;
}

std::string failing_scenarios(const runtime::FeatureRunReport& report, runtime::ScenarioStatus status) {
  std::string out;
  for (const auto& r : report.scenario_results) {
    if (r.status != status) continue;
    if (!out.empty()) out += ", ";
    out += "'" + r.scenario_title + "'";
    if (!r.failure_tag.empty() && status == runtime::ScenarioStatus::SetupError) out += " (" + r.failure_tag + ")";
  }
  return out;
}

std::string explain(const Verdict& v, const SideRun& buggy, const SideRun* fixed) {
  using runtime::ScenarioStatus;
  switch (v.kind) {
    case VerdictKind::Validated:
      return "fails on buggy (" + failing_scenarios(buggy.report, ScenarioStatus::AssertionFail) +
             ") and passes on fixed";
    case VerdictKind::SpecTooWeak: return "every scenario passes on the buggy tree";
    case VerdictKind::SpecMisaligned:
      return "assertions also fail on the fixed tree: " +
             failing_scenarios(fixed->report, ScenarioStatus::AssertionFail);
    case VerdictKind::HarnessError: {
      const SideRun& side = v.side == Side::Fixed ? *fixed : buggy;
      if (!side.error.empty()) return side.error;
      return "setup failure on " + std::string(to_string(*v.side)) + " side: " +
             failing_scenarios(side.report, ScenarioStatus::SetupError);
    }
  }
  return {};
}

runtime::FeatureRunReport run_on(const runtime::BoundFeature& bound, const harness::DefectRecord& defect,
                                 const harness::Corpus& corpus, Side side) {
  auto variant = side == Side::Buggy ? harness::Variant::Buggy : harness::Variant::Fixed;
  auto ws = corpus.checkout(defect, variant, harness::AccessPurpose::Verification);
  return runtime::execute(bound, ws.root());
}

RQAResult binding_failure(const gherkin::FeatureSpec& spec, const std::exception& e) {
  RQAResult r;
  r.verdict = {VerdictKind::HarnessError, std::string("bindings do not cover the spec: ") + e.what(), Side::Buggy};
  r.buggy_report.feature_title = spec.title;
  return r;
}

}  // namespace

std::string_view to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Validated: return "Validated";
    case VerdictKind::SpecTooWeak: return "SpecTooWeak";
    case VerdictKind::SpecMisaligned: return "SpecMisaligned";
    case VerdictKind::HarnessError: return "HarnessError";
  }
  return "?";
}

std::string_view to_string(Side s) { return s == Side::Buggy ? "Buggy" : "Fixed"; }

Verdict classify(SpecOutcome buggy, std::optional<SpecOutcome> fixed) {
  if (buggy == SpecOutcome::Error) return {VerdictKind::HarnessError, {}, Side::Buggy};
  if (buggy == SpecOutcome::AllPass) return {VerdictKind::SpecTooWeak, {}, std::nullopt};
  if (!fixed) throw std::invalid_argument("the fixed-side outcome is required once the buggy side fails");
  switch (*fixed) {
    case SpecOutcome::AllPass: return {VerdictKind::Validated, {}, std::nullopt};
    case SpecOutcome::AnyAssertionFail: return {VerdictKind::SpecMisaligned, {}, std::nullopt};
    case SpecOutcome::Error: return {VerdictKind::HarnessError, {}, Side::Fixed};
  }
  return {};
}

RQAResult sandwich_verify(const SideRunner& run_side) {
  RQAResult result;
  auto buggy = run_guarded(run_side, Side::Buggy, {});
  result.buggy_report = buggy.report;
  if (buggy.outcome != SpecOutcome::AnyAssertionFail) {
    result.verdict = classify(buggy.outcome, std::nullopt);
    result.verdict.detail = explain(result.verdict, buggy, nullptr);
    return result;
  }
  auto fixed = run_guarded(run_side, Side::Fixed, buggy.report.feature_title);
  result.fixed_report = fixed.report;
  result.verdict = classify(buggy.outcome, fixed.outcome);
  result.verdict.detail = explain(result.verdict, buggy, &fixed);
  return result;
}

RQAResult sandwich_verify(const gherkin::FeatureSpec& spec, const runtime::StepBindingSet& bindings,
                          const harness::DefectRecord& defect, const harness::Corpus& corpus) {
  runtime::BoundFeature bound;
  try {
    bound = runtime::bind(spec, bindings);
  } catch (const std::exception& e) {
    return binding_failure(spec, e);
  }
  auto result = sandwich_verify([&](Side side) { return run_on(bound, defect, corpus, side); });
  if (result.buggy_report.feature_title.empty()) result.buggy_report.feature_title = spec.title;
  return result;
}

Verdict negative_only_verify(const SideRunner& run_side) {
  auto buggy = run_guarded([&](Side) { return run_side(Side::Buggy); }, Side::Buggy, {});
  if (buggy.outcome == SpecOutcome::AnyAssertionFail) {
    return {VerdictKind::Validated, std::string(kNegativeOnly), std::nullopt};
  }
  Verdict v = classify(buggy.outcome, std::nullopt);
  v.detail = explain(v, buggy, nullptr);
  return v;
}

Verdict negative_only_verify(const gherkin::FeatureSpec& spec, const runtime::StepBindingSet& bindings,
                             const harness::DefectRecord& defect, const harness::Corpus& corpus) {
  runtime::BoundFeature bound;
  try {
    bound = runtime::bind(spec, bindings);
  } catch (const std::exception& e) {
    return binding_failure(spec, e).verdict;
  }
  return negative_only_verify([&](Side) { return run_on(bound, defect, corpus, Side::Buggy); });
}

LoopOutcome rqa_loop(const ArchitectFn& architect, const EngineerFn& engineer, const VerifyFn& verify,
                     int max_attempts) {
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be at least 1");
  Exhausted exhausted;
  bool tolerated[2] = {false, false};
  int attempt = 1;
  std::optional<gherkin::FeatureSpec> spec;
  while (attempt <= max_attempts) {
    const RQAResult* previous = exhausted.history.empty() ? nullptr : &exhausted.history.back();
    bool retry_harness = previous && previous->verdict.kind == VerdictKind::HarnessError;
    if (!spec || !retry_harness) spec = architect(attempt, previous);
    exhausted.last_spec = spec;

    RQAResult result;
    std::optional<runtime::StepBindingSet> bindings;
    try {
      bindings = engineer(*spec);
    } catch (const std::exception& e) {
      result.verdict = {VerdictKind::HarnessError, std::string("engineer could not build bindings: ") + e.what(),
                        Side::Buggy};
      result.buggy_report.feature_title = spec->title;
    }
    if (bindings) result = verify(*spec, *bindings);
    result.attempt_index = attempt;
    exhausted.history.push_back(result);

    if (result.verdict.kind == VerdictKind::Validated) {
      return ValidatedSpec{*spec, std::move(*bindings), result, std::move(exhausted.history)};
    }
    if (result.verdict.kind == VerdictKind::HarnessError) {
      int side = result.verdict.side == Side::Fixed ? 1 : 0;
      if (tolerated[side]) {
        exhausted.harness_failure = true;
        return exhausted;
      }
      tolerated[side] = true;
      continue;
    }
    ++attempt;
  }
  return exhausted;
}

LoopOutcome rqa_loop(const harness::DefectRecord& defect, const harness::Corpus& corpus,
                     const ArchitectFn& architect, const EngineerFn& engineer, int max_attempts) {
  return rqa_loop(
      architect, engineer,
      [&](const gherkin::FeatureSpec& spec, const runtime::StepBindingSet& bindings) {
        return sandwich_verify(spec, bindings, defect, corpus);
      },
      max_attempts);
}

}  // namespace anvil::rqa
