#include <gtest/gtest.h>

#include <future>

#include "anvil/gherkin.hpp"
#include "anvil/step_runtime.hpp"
#include "support/support.hpp"

using namespace anvil::runtime;
using anvil::gherkin::parse;
using anvil::gherkin::StepRole;
using namespace std::chrono_literals;

namespace {

StepBindingSet set_of(std::vector<StepBinding> b) { return {std::move(b), {}}; }

}  // namespace

TEST(Tokenize, Rules) {
  EXPECT_EQ(tokenize("a  b\tc"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(tokenize("'a b' \"c d\""), (std::vector<std::string>{"a b", "c d"}));
  EXPECT_EQ(tokenize(R"("a \"q\" \\ \n")"), (std::vector<std::string>{R"(a "q" \ \n)"}));
  EXPECT_EQ(tokenize(R"('no \escape')"), (std::vector<std::string>{R"(no \escape)"}));
  EXPECT_EQ(tokenize(R"(a\ b)"), (std::vector<std::string>{"a b"}));
  EXPECT_EQ(tokenize("x'y z'\"w\""), (std::vector<std::string>{"xy zw"}));
  EXPECT_EQ(tokenize("'' \"\""), (std::vector<std::string>{"", ""}));
  EXPECT_TRUE(tokenize("   ").empty());
  EXPECT_THROW(tokenize("'open"), TokenizeError);
  EXPECT_THROW(tokenize("\"open"), TokenizeError);
  EXPECT_THROW(tokenize("a\\"), TokenizeError);
}

TEST(Substitute, SinglePassAndUnknownBraces) {
  std::map<std::string, std::string> vars{{"workspace", "/ws"}};
  EXPECT_EQ(substitute("{1}-{2}", {"a", "b"}, vars), "a-b");
  EXPECT_EQ(substitute("{1}", {"{2}"}, vars), "{2}");
  EXPECT_EQ(substitute("{workspace}/x", {}, vars), "/ws/x");
  EXPECT_EQ(substitute("{3}{other}{", {"a"}, vars), "{3}{other}{");
  EXPECT_EQ(max_placeholder_index("{1} {12} {x}"), 12u);
}

TEST(StepBinding, Validation) {
  EXPECT_THROW(StepBinding::make("(", "true"), ManifestError);
  EXPECT_THROW(StepBinding::make("^a (b)$", "echo {2}"), ManifestError);
  EXPECT_THROW(StepBinding::make("^a$", "  "), ManifestError);
  EXPECT_THROW(StepBinding::make("^a$", "echo 'x"), ManifestError);
  EXPECT_NO_THROW(StepBinding::make("^a (b)$", "echo {1} {workspace}"));
}

TEST(Manifest, ParseAndRender) {
  auto set = parse_manifest(R"({"bindings": [{"pattern": "^x (\\d+)$", "command": "echo {1}", "timeout_s": 2.5,
                                                "role": "Assertion"}], "env": {"K": "V"}})");
  ASSERT_EQ(set.bindings.size(), 1u);
  EXPECT_EQ(set.bindings[0].timeout, 2500ms);
  EXPECT_EQ(set.bindings[0].role_constraint, StepRole::Assertion);
  EXPECT_EQ(set.environment.at("K"), "V");
  auto again = parse_manifest(render_manifest(set));
  EXPECT_EQ(render_manifest(again), render_manifest(set));
  EXPECT_THROW(parse_manifest("{"), ManifestError);
  EXPECT_THROW(parse_manifest("{}"), ManifestError);
  EXPECT_THROW(parse_manifest(R"({"bindings": [{"pattern": "a"}]})"), ManifestError);
  EXPECT_THROW(parse_manifest(R"({"bindings": [{"pattern": "a", "command": "b", "role": "Oracle"}]})"),
               ManifestError);
  EXPECT_THROW(parse_manifest(R"({"bindings": [], "env": {"a": 1}})"), ManifestError);
}

TEST(Bind, QuotedCaptureFromDelegateStep) {
  auto spec = parse(
      "Feature: f\n  Scenario: s\n    Given the delegate throws an \"ArgumentsAreDifferent\" exception\n");
  auto set = set_of({StepBinding::make(R"re(^the delegate throws an "(.+)" exception$)re", "raise {1}")});
  auto bound = bind(spec, set);
  ASSERT_EQ(bound.scenarios[0].steps.size(), 1u);
  EXPECT_EQ(bound.scenarios[0].steps[0].captures, std::vector<std::string>{"ArgumentsAreDifferent"});
  EXPECT_EQ(substitute(bound.scenarios[0].steps[0].argv_template[1], bound.scenarios[0].steps[0].captures, {}),
            "ArgumentsAreDifferent");
}

TEST(Bind, EmptySetFailsOnFirstStep) {
  auto spec = parse("Feature: f\n  Scenario: s\n    Given a\n    Then b\n");
  try {
    bind(spec, {});
    FAIL();
  } catch (const BindingError& e) {
    EXPECT_EQ(e.scenario_index(), 0u);
    EXPECT_EQ(e.step_index(), 0u);
    EXPECT_EQ(e.step_text(), "a");
  }
}

TEST(Bind, FirstMatchWinsAndRoleConstraint) {
  auto spec = parse("Feature: f\n  Scenario: s\n    Given x 1\n    Then x 2\n");
  auto set = set_of({StepBinding::make("^x (\\d)$", "first", 60s, StepRole::Assertion),
                     StepBinding::make("^x (\\d)$", "second"), StepBinding::make("^x .*$", "third")});
  auto bound = bind(spec, set);
  EXPECT_EQ(bound.scenarios[0].steps[0].binding_index, 1u);
  EXPECT_EQ(bound.scenarios[0].steps[1].binding_index, 0u);
}

TEST(Bind, WholeTextMatchOnly) {
  auto spec = parse("Feature: f\n  Scenario: s\n    Given abc\n");
  EXPECT_THROW(bind(spec, set_of({StepBinding::make("b", "true")})), BindingError);
}

TEST(Execute, StatusesFollowFailingRole) {
  anvil::testing::TempDir ws;
  auto spec = parse(
      "Feature: f\n"
      "  Scenario: ok\n    Given pass\n    Then pass\n"
      "  Scenario: assertion\n    Given pass\n    Then fail\n    And pass\n"
      "  Scenario: setup\n    Given fail\n    Then pass\n"
      "  Scenario: spawn\n    Given missing\n"
      "  Scenario: timeout\n    Then slow\n");
  auto set = set_of({StepBinding::make("^pass$", "true"), StepBinding::make("^fail$", "false"),
                     StepBinding::make("^missing$", "no-such-binary-anvil"),
                     StepBinding::make("^slow$", "sleep 5", 200ms)});
  auto report = execute(bind(spec, set), ws.path());
  ASSERT_EQ(report.scenario_results.size(), 5u);
  const auto& r = report.scenario_results;
  EXPECT_EQ(r[0].status, ScenarioStatus::Pass);
  EXPECT_FALSE(r[0].failed_step_index);
  EXPECT_EQ(r[1].status, ScenarioStatus::AssertionFail);
  EXPECT_EQ(r[1].failed_step_index, 1u);
  EXPECT_EQ(r[1].step_logs.size(), 2u);
  EXPECT_EQ(r[2].status, ScenarioStatus::SetupError);
  EXPECT_EQ(r[2].failure_tag, "exit");
  EXPECT_EQ(r[3].status, ScenarioStatus::SetupError);
  EXPECT_EQ(r[3].failure_tag, "spawn");
  EXPECT_EQ(r[4].status, ScenarioStatus::SetupError);
  EXPECT_EQ(r[4].failure_tag, "timeout");
  EXPECT_EQ(outcome(report), SpecOutcome::Error);
}

TEST(Execute, WorkspaceIsCwdAndPlaceholderAndEnv) {
  anvil::testing::TempDir ws;
  auto spec = parse("Feature: f\n  Scenario: s\n    When I write hello\n    Then the file says hello\n");
  StepBindingSet set = set_of({StepBinding::make("^I write (\\w+)$", "sh -c 'printf %s \"$1$SUFFIX\" > out.txt' sh {1}"),
                               StepBinding::make("^the file says (\\w+)$", "sh -c 'test \"$(cat {workspace}/out.txt)\" = \"$1!\"' sh {1}")});
  set.environment["SUFFIX"] = "!";
  auto report = execute(bind(spec, set), ws.path());
  EXPECT_EQ(outcome(report), SpecOutcome::AllPass) << report.scenario_results[0].step_logs.back().output;
  EXPECT_EQ(anvil::testing::read(ws / "out.txt"), "hello!");
}

TEST(Execute, ConcurrentUseOfOneWorkspaceIsRejected) {
  anvil::testing::TempDir ws;
  auto spec = parse("Feature: f\n  Scenario: s\n    Given wait\n");
  auto bound = bind(spec, set_of({StepBinding::make("^wait$", "sleep 1")}));
  auto first = std::async(std::launch::async, [&] { return execute(bound, ws.path()); });
  std::this_thread::sleep_for(200ms);
  EXPECT_THROW(execute(bound, ws.path()), std::logic_error);
  EXPECT_EQ(outcome(first.get()), SpecOutcome::AllPass);
  anvil::testing::TempDir other;
  EXPECT_NO_THROW(execute(bound, other.path()));
}

TEST(Outcome, Dominance) {
  auto make = [](std::vector<ScenarioStatus> statuses) {
    FeatureRunReport r;
    for (auto s : statuses) r.scenario_results.push_back({"s", s, {}, "", {}});
    return outcome(r);
  };
  EXPECT_EQ(make({ScenarioStatus::Pass, ScenarioStatus::Pass}), SpecOutcome::AllPass);
  EXPECT_EQ(make({ScenarioStatus::Pass, ScenarioStatus::AssertionFail}), SpecOutcome::AnyAssertionFail);
  EXPECT_EQ(make({ScenarioStatus::SetupError, ScenarioStatus::AssertionFail}), SpecOutcome::Error);
  EXPECT_EQ(make({ScenarioStatus::AssertionFail, ScenarioStatus::SetupError}), SpecOutcome::Error);
}

TEST(Execute, ReproducibleModuloWallTime) {
  anvil::testing::TempDir ws;
  auto spec = parse("Feature: f\n  Scenario: s\n    Given a\n    Then b\n");
  auto bound = bind(spec, set_of({StepBinding::make("^a$", "echo a"), StepBinding::make("^b$", "false")}));
  auto r1 = execute(bound, ws.path());
  auto r2 = execute(bound, ws.path());
  EXPECT_EQ(r1.scenario_results, r2.scenario_results);
}
