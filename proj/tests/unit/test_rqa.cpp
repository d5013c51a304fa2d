#include <gtest/gtest.h>

#include <mutex>

#include "anvil/rqa.hpp"
#include "support/support.hpp"

namespace anvil::rqa {
namespace {

using runtime::FeatureRunReport;
using runtime::ScenarioResult;
using runtime::ScenarioStatus;
using runtime::SpecOutcome;
using anvil::testing::TempDir;

FeatureRunReport report_with(SpecOutcome o) {
  FeatureRunReport r;
  r.feature_title = "F";
  ScenarioResult s;
  s.scenario_title = "S";
  switch (o) {
    case SpecOutcome::AllPass: s.status = ScenarioStatus::Pass; break;
    case SpecOutcome::AnyAssertionFail: s.status = ScenarioStatus::AssertionFail; break;
    case SpecOutcome::Error:
      s.status = ScenarioStatus::SetupError;
      s.failure_tag = "exit";
      break;
  }
  r.scenario_results.push_back(s);
  return r;
}

constexpr SpecOutcome kOutcomes[] = {SpecOutcome::AllPass, SpecOutcome::AnyAssertionFail, SpecOutcome::Error};

TEST(Classify, FullLattice) {
  for (auto b : kOutcomes) {
    for (auto f : kOutcomes) {
      auto v = classify(b, f);
      if (b == SpecOutcome::Error) {
        EXPECT_EQ(v.kind, VerdictKind::HarnessError);
        EXPECT_EQ(v.side, Side::Buggy);
      } else if (b == SpecOutcome::AllPass) {
        EXPECT_EQ(v.kind, VerdictKind::SpecTooWeak);
        EXPECT_FALSE(v.side);
      } else if (f == SpecOutcome::AllPass) {
        EXPECT_EQ(v.kind, VerdictKind::Validated);
      } else if (f == SpecOutcome::AnyAssertionFail) {
        EXPECT_EQ(v.kind, VerdictKind::SpecMisaligned);
      } else {
        EXPECT_EQ(v.kind, VerdictKind::HarnessError);
        EXPECT_EQ(v.side, Side::Fixed);
      }
      EXPECT_EQ(v.side.has_value(), v.kind == VerdictKind::HarnessError);
    }
  }
}

TEST(Classify, FixedSideRequiredAfterBuggyFailure) {
  EXPECT_THROW(classify(SpecOutcome::AnyAssertionFail, std::nullopt), std::invalid_argument);
  EXPECT_EQ(classify(SpecOutcome::AllPass, std::nullopt).kind, VerdictKind::SpecTooWeak);
  EXPECT_EQ(classify(SpecOutcome::Error, std::nullopt).kind, VerdictKind::HarnessError);
}

TEST(Sandwich, ShortCircuitSkipsFixedSide) {
  for (auto b : kOutcomes) {
    for (auto f : kOutcomes) {
      int fixed_runs = 0;
      auto r = sandwich_verify([&](Side s) {
        if (s == Side::Fixed) ++fixed_runs;
        return report_with(s == Side::Buggy ? b : f);
      });
      bool needs_fixed = b == SpecOutcome::AnyAssertionFail;
      EXPECT_EQ(fixed_runs, needs_fixed ? 1 : 0);
      EXPECT_EQ(r.fixed_report.has_value(), needs_fixed);
      EXPECT_EQ(r.verdict.kind, classify(b, needs_fixed ? std::optional(f) : std::nullopt).kind);
      EXPECT_FALSE(r.verdict.detail.empty());
    }
  }
}

TEST(Sandwich, ThrowingRunnerIsHarnessError) {
  auto r = sandwich_verify([](Side s) -> FeatureRunReport {
    if (s == Side::Buggy) return report_with(SpecOutcome::AnyAssertionFail);
    throw std::runtime_error("checkout exploded");
  });
  EXPECT_EQ(r.verdict.kind, VerdictKind::HarnessError);
  EXPECT_EQ(r.verdict.side, Side::Fixed);
  EXPECT_EQ(r.verdict.detail, "checkout exploded");
}

TEST(NegativeOnly, NeverRunsFixedSide) {
  int fixed_runs = 0;
  auto runner = [&](SpecOutcome b) {
    return [&, b](Side s) {
      if (s == Side::Fixed) ++fixed_runs;
      return report_with(b);
    };
  };
  auto v = negative_only_verify(runner(SpecOutcome::AnyAssertionFail));
  EXPECT_EQ(v.kind, VerdictKind::Validated);
  EXPECT_EQ(v.detail, kNegativeOnly);
  EXPECT_EQ(negative_only_verify(runner(SpecOutcome::AllPass)).kind, VerdictKind::SpecTooWeak);
  EXPECT_EQ(negative_only_verify(runner(SpecOutcome::Error)).kind, VerdictKind::HarnessError);
  EXPECT_EQ(fixed_runs, 0);
}

gherkin::FeatureSpec spec_titled(const std::string& title) {
  gherkin::FeatureSpec s;
  s.title = title;
  return s;
}

RQAResult result_of(VerdictKind k, std::optional<Side> side = std::nullopt) {
  RQAResult r;
  r.verdict = {k, "d", side};
  return r;
}

struct LoopScript {
  explicit LoopScript(std::vector<RQAResult> v) : verdicts(std::move(v)) {}

  std::vector<RQAResult> verdicts;
  int architect_calls = 0;
  int engineer_calls = 0;
  std::vector<int> attempts_seen;
  std::vector<bool> had_previous;
  std::size_t next = 0;

  ArchitectFn architect() {
    return [this](int attempt, const RQAResult* previous) {
      ++architect_calls;
      attempts_seen.push_back(attempt);
      had_previous.push_back(previous != nullptr);
      return spec_titled("spec " + std::to_string(attempt));
    };
  }
  EngineerFn engineer() {
    return [this](const gherkin::FeatureSpec&) {
      ++engineer_calls;
      return runtime::StepBindingSet{};
    };
  }
  VerifyFn verify() {
    return [this](const gherkin::FeatureSpec&, const runtime::StepBindingSet&) { return verdicts.at(next++); };
  }
  LoopOutcome run(int max_attempts = 3) { return rqa_loop(architect(), engineer(), verify(), max_attempts); }
};

TEST(Loop, ValidatedFirstTime) {
  LoopScript s{{result_of(VerdictKind::Validated)}};
  auto out = s.run();
  ASSERT_TRUE(std::holds_alternative<ValidatedSpec>(out));
  const auto& v = std::get<ValidatedSpec>(out);
  EXPECT_EQ(v.spec.title, "spec 1");
  EXPECT_EQ(v.history.size(), 1u);
  EXPECT_EQ(s.had_previous, std::vector<bool>{false});
}

TEST(Loop, RegeneratesWithFeedback) {
  LoopScript s{{result_of(VerdictKind::SpecTooWeak), result_of(VerdictKind::SpecMisaligned),
                result_of(VerdictKind::Validated)}};
  auto out = s.run();
  ASSERT_TRUE(std::holds_alternative<ValidatedSpec>(out));
  const auto& v = std::get<ValidatedSpec>(out);
  EXPECT_EQ(v.spec.title, "spec 3");
  EXPECT_EQ(v.result.attempt_index, 3);
  ASSERT_EQ(v.history.size(), 3u);
  EXPECT_EQ(v.history[0].verdict.kind, VerdictKind::SpecTooWeak);
  EXPECT_EQ(s.attempts_seen, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(s.had_previous, (std::vector<bool>{false, true, true}));
}

TEST(Loop, ExhaustsAfterCap) {
  LoopScript s{{result_of(VerdictKind::SpecTooWeak), result_of(VerdictKind::SpecTooWeak),
                result_of(VerdictKind::SpecMisaligned)}};
  auto out = s.run();
  ASSERT_TRUE(std::holds_alternative<Exhausted>(out));
  const auto& e = std::get<Exhausted>(out);
  EXPECT_EQ(e.history.size(), 3u);
  EXPECT_FALSE(e.harness_failure);
  ASSERT_TRUE(e.last_spec);
  EXPECT_EQ(e.last_spec->title, "spec 3");
}

TEST(Loop, SingleAttemptCap) {
  LoopScript s{{result_of(VerdictKind::SpecTooWeak)}};
  auto out = s.run(1);
  ASSERT_TRUE(std::holds_alternative<Exhausted>(out));
  EXPECT_EQ(std::get<Exhausted>(out).history.size(), 1u);
  EXPECT_THROW(s.run(0), std::invalid_argument);
}

TEST(Loop, FirstHarnessErrorKeepsSpecAndAttempt) {
  LoopScript s{{result_of(VerdictKind::HarnessError, Side::Buggy), result_of(VerdictKind::Validated)}};
  auto out = s.run(1);
  ASSERT_TRUE(std::holds_alternative<ValidatedSpec>(out));
  EXPECT_EQ(s.architect_calls, 1);
  EXPECT_EQ(s.engineer_calls, 2);
  const auto& v = std::get<ValidatedSpec>(out);
  ASSERT_EQ(v.history.size(), 2u);
  EXPECT_EQ(v.history[0].attempt_index, 1);
  EXPECT_EQ(v.history[1].attempt_index, 1);
}

TEST(Loop, SecondHarnessErrorOnSameSideEndsLoop) {
  LoopScript s{{result_of(VerdictKind::HarnessError, Side::Buggy), result_of(VerdictKind::SpecTooWeak),
                result_of(VerdictKind::HarnessError, Side::Buggy), result_of(VerdictKind::Validated)}};
  auto out = s.run();
  ASSERT_TRUE(std::holds_alternative<Exhausted>(out));
  const auto& e = std::get<Exhausted>(out);
  EXPECT_TRUE(e.harness_failure);
  EXPECT_EQ(e.history.size(), 3u);
}

TEST(Loop, EachSideToleratedOnce) {
  LoopScript s{{result_of(VerdictKind::HarnessError, Side::Buggy), result_of(VerdictKind::HarnessError, Side::Fixed),
                result_of(VerdictKind::Validated)}};
  auto out = s.run(1);
  ASSERT_TRUE(std::holds_alternative<ValidatedSpec>(out));
  EXPECT_EQ(s.architect_calls, 1);
  EXPECT_EQ(s.engineer_calls, 3);
}

TEST(Loop, EngineerFailureIsHarnessError) {
  int verify_calls = 0;
  auto out = rqa_loop([](int, const RQAResult*) { return spec_titled("s"); },
                      [](const gherkin::FeatureSpec&) -> runtime::StepBindingSet {
                        throw std::runtime_error("no bindings");
                      },
                      [&](const gherkin::FeatureSpec&, const runtime::StepBindingSet&) {
                        ++verify_calls;
                        return result_of(VerdictKind::Validated);
                      });
  ASSERT_TRUE(std::holds_alternative<Exhausted>(out));
  const auto& e = std::get<Exhausted>(out);
  EXPECT_TRUE(e.harness_failure);
  EXPECT_EQ(e.history.size(), 2u);
  EXPECT_EQ(verify_calls, 0);
  EXPECT_NE(e.history[0].verdict.detail.find("no bindings"), std::string::npos);
}

class ToySandwich : public ::testing::Test {
 protected:
  ToySandwich() : corpus(anvil::testing::toy_corpus(tmp.path())) {
    corpus.set_access_observer([this](const harness::AccessEvent& e) {
      std::lock_guard lock(mu);
      events.push_back(e);
    });
    bindings = runtime::parse_manifest(anvil::testing::read(anvil::testing::toy_corpus_dir() / "specs/bindings.json"));
  }

  gherkin::FeatureSpec spec(const std::string& name) {
    return gherkin::parse(anvil::testing::read(anvil::testing::toy_corpus_dir() / "specs" / name));
  }

  int fixed_accesses() const {
    int n = 0;
    for (const auto& e : events) n += e.variant == harness::Variant::Fixed;
    return n;
  }

  TempDir tmp;
  harness::Corpus corpus;
  runtime::StepBindingSet bindings;
  std::mutex mu;
  std::vector<harness::AccessEvent> events;
};

TEST_F(ToySandwich, DiscriminatingSpecIsValidated) {
  auto r = sandwich_verify(spec("calc-4.feature"), bindings, corpus.find("calc-4"), corpus);
  EXPECT_EQ(r.verdict.kind, VerdictKind::Validated) << r.verdict.detail;
  ASSERT_TRUE(r.fixed_report);
  EXPECT_EQ(runtime::outcome(r.buggy_report), SpecOutcome::AnyAssertionFail);
  EXPECT_EQ(runtime::outcome(*r.fixed_report), SpecOutcome::AllPass);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].variant, harness::Variant::Buggy);
  EXPECT_EQ(events[1].variant, harness::Variant::Fixed);
  for (const auto& e : events) EXPECT_EQ(e.purpose, harness::AccessPurpose::Verification);
}

TEST_F(ToySandwich, VacuousSpecIsTooWeakWithoutFixedCheckout) {
  auto r = sandwich_verify(spec("calc-4-vacuous.feature"), bindings, corpus.find("calc-4"), corpus);
  EXPECT_EQ(r.verdict.kind, VerdictKind::SpecTooWeak);
  EXPECT_FALSE(r.fixed_report);
  EXPECT_EQ(fixed_accesses(), 0);
}

TEST_F(ToySandwich, MisalignedSpec) {
  auto r = sandwich_verify(spec("text-4-misaligned.feature"), bindings, corpus.find("text-4"), corpus);
  EXPECT_EQ(r.verdict.kind, VerdictKind::SpecMisaligned) << r.verdict.detail;
}

TEST_F(ToySandwich, ExpectedExceptionSpec) {
  auto r = sandwich_verify(spec("calc-2-raises.feature"), bindings, corpus.find("calc-2"), corpus);
  EXPECT_EQ(r.verdict.kind, VerdictKind::Validated) << r.verdict.detail;
}

TEST_F(ToySandwich, UnboundStepIsBuggySideHarnessError) {
  auto s = spec("calc-4.feature");
  s.scenarios[0].steps[0].text = "a step nobody bound";
  auto r = sandwich_verify(s, bindings, corpus.find("calc-4"), corpus);
  EXPECT_EQ(r.verdict.kind, VerdictKind::HarnessError);
  EXPECT_EQ(r.verdict.side, Side::Buggy);
  EXPECT_TRUE(events.empty());
}

TEST_F(ToySandwich, NegativeOnlyTouchesOnlyBuggyTree) {
  auto v = negative_only_verify(spec("calc-4.feature"), bindings, corpus.find("calc-4"), corpus);
  EXPECT_EQ(v.kind, VerdictKind::Validated);
  EXPECT_EQ(v.detail, kNegativeOnly);
  EXPECT_EQ(fixed_accesses(), 0);
  EXPECT_EQ(negative_only_verify(spec("calc-4-vacuous.feature"), bindings, corpus.find("calc-4"), corpus).kind,
            VerdictKind::SpecTooWeak);
}

}  // namespace
}  // namespace anvil::rqa
