#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "anvil/metrics.hpp"
#include "support/support.hpp"

namespace anvil::metrics {
namespace {

using anvil::testing::fixtures_dir;

struct PaperRow {
  const char* project;
  std::uint64_t bugs, blind_success, blind_fail, rescued, total;
  const char* rate;
};

// Per-project counts and displayed rates as published.
const PaperRow kTable1[] = {
    {"Cli", 39, 39, 0, 0, 39, "100.0"},          {"JacksonCore", 26, 26, 0, 0, 26, "100.0"},
    {"Chart", 26, 23, 3, 3, 26, "100.0"},        {"Mockito", 38, 32, 6, 6, 38, "100.0"},
    {"Gson", 18, 12, 6, 6, 18, "100.0"},         {"JxPath", 22, 20, 2, 2, 22, "100.0"},
    {"Time", 26, 20, 6, 5, 25, "96.2"},          {"Collections", 28, 22, 6, 5, 27, "96.4"},
    {"JacksonDatabind", 110, 103, 7, 6, 109, "99.1"}, {"Lang", 61, 59, 2, 1, 60, "98.4"},
    {"Codec", 18, 11, 7, 5, 16, "88.9"},         {"Csv", 16, 15, 1, 0, 15, "93.8"},
    {"JacksonXml", 6, 2, 4, 2, 4, "66.7"},       {"Compress", 47, 29, 18, 14, 43, "91.5"},
    {"Math", 106, 48, 58, 39, 87, "82.1"},       {"Jsoup", 93, 59, 34, 25, 84, "90.3"},
};

std::vector<OutcomeRecord> replay() { return load_outcomes(fixtures_dir() / "table1-replay/outcomes.jsonl"); }

OutcomeRecord rec(std::string project, bool blind, bool attempted, bool enl, bool degraded = false) {
  static int n = 0;
  return {"d" + std::to_string(++n), std::move(project), blind, attempted, enl, degraded};
}

TEST(Rate, DisplayRoundsHalfUp) {
  EXPECT_EQ((Rate{119, 160}).display(1), "74.4");
  EXPECT_EQ((Rate{119, 160}).display(3), "74.375");
  EXPECT_EQ((Rate{15, 16}).display(1), "93.8");
  EXPECT_EQ((Rate{639, 680}).display(2), "93.97");
  EXPECT_EQ((Rate{1, 8}).display(1), "12.5");
  EXPECT_EQ((Rate{1, 16}).display(1), "6.3");
  EXPECT_EQ((Rate{0, 5}).display(1), "0.0");
}

TEST(Rate, UndefinedWithoutDenominator) {
  EXPECT_FALSE(fix_rate(0, 0));
  EXPECT_EQ(fix_rate(3, 4), (Rate{3, 4}));
  EXPECT_THROW(fix_rate(5, 4), std::invalid_argument);
  std::vector<OutcomeRecord> all_blind{rec("P", true, false, false)};
  EXPECT_FALSE(rescue_rate(all_blind));
  EXPECT_FALSE(rescue_rate(std::vector<OutcomeRecord>{}));
}

TEST(Replay, ProjectRowsMatchPublishedTable) {
  auto records = replay();
  ASSERT_EQ(records.size(), 680u);
  auto table = project_table(records);
  ASSERT_EQ(table.rows.size(), std::size(kTable1));
  for (const auto& p : kTable1) {
    auto it = std::find_if(table.rows.begin(), table.rows.end(), [&](const auto& r) { return r.project == p.project; });
    ASSERT_NE(it, table.rows.end()) << p.project;
    EXPECT_EQ(*it, (ProjectRow{p.project, p.bugs, p.blind_success, p.blind_fail, p.rescued, p.total})) << p.project;
    EXPECT_EQ(it->rate()->display(1), p.rate) << p.project;
  }
  EXPECT_EQ(table.total, (ProjectRow{"Total", 680, 520, 160, 119, 639}));
  EXPECT_EQ(table.total.rate()->display(2), "93.97");
}

TEST(Replay, RescueRate) {
  auto records = replay();
  auto r = rescue_rate(records);
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, (Rate{119, 160}));
  EXPECT_DOUBLE_EQ(r->percent(), 74.375);
  EXPECT_EQ(r->display(1), "74.4");
}

TEST(Replay, RecordsRoundTrip) {
  auto records = replay();
  std::string text;
  for (const auto& r : records) text += outcome_to_json(r) + "\n";
  EXPECT_EQ(parse_outcomes(text), records);
}

TEST(Records, BadLinesNameTheirLine) {
  std::string ok = outcome_to_json(rec("P", true, false, false));
  try {
    parse_outcomes(ok + "\n\n" + ok + "\n{\"defect_id\": 3}\n");
    FAIL() << "expected RecordError";
  } catch (const RecordError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  EXPECT_THROW(parse_outcomes("not json\n"), RecordError);
  auto inconsistent = R"({"defect_id": "x", "project": "P", "blind_correct": true,
      "enlightened_attempted": true, "enlightened_correct": false})";
  std::string one_line(inconsistent);
  std::replace(one_line.begin(), one_line.end(), '\n', ' ');
  EXPECT_THROW(parse_outcomes(one_line), RecordError);
}

TEST(Degraded, ExcludedUnlessRequested) {
  std::vector<OutcomeRecord> rs{rec("P", false, true, true, true), rec("P", false, true, true, false),
                                rec("P", false, true, false), rec("P", true, false, false)};
  EXPECT_EQ(*rescue_rate(rs), (Rate{1, 3}));
  EXPECT_EQ(*rescue_rate(rs, true), (Rate{2, 3}));
  EXPECT_EQ(project_table(rs).total.total, 2u);
  EXPECT_EQ(project_table(rs, true).total.total, 3u);
}

TEST(Table, RejectsBrokenRecords) {
  std::vector<OutcomeRecord> no_project{rec("", true, false, false)};
  EXPECT_THROW(project_table(no_project), std::invalid_argument);
  std::vector<OutcomeRecord> bad{rec("P", false, false, true)};
  EXPECT_THROW(project_table(bad), std::invalid_argument);
}

TEST(Costs, PublishedAverages) {
  auto c = cost_breakdown(load_cost_averages(fixtures_dir() / "table3-costs.json"));
  ASSERT_TRUE(c);
  EXPECT_EQ(c->sessions, 189u);
  ASSERT_EQ(c->roles.size(), 3u);
  EXPECT_EQ(c->roles[0].ratio.display(1), "6.4");
  EXPECT_EQ(c->roles[1].ratio.display(1), "58.2");
  EXPECT_EQ(c->roles[2].ratio.display(1), "35.4");
  EXPECT_EQ(c->total_duration_s, 1'261'080'000);
  EXPECT_EQ(format_micro(c->total_duration_s, 2), "1261.08");
  EXPECT_EQ(c->total_tokens, 5'782'441 * kMicro);
  EXPECT_EQ(format_micro(c->total_turns, 1), "139.4");
}

TEST(Costs, FromSessionRecords) {
  using agents::AgentRole;
  using agents::CostRecord;
  std::vector<std::vector<CostRecord>> sessions{
      {{AgentRole::Architect, 1.0, 1, 100}, {AgentRole::Fixer, 3.0, 1, 300}},
      {{AgentRole::Fixer, 2.0, 2, 600}},
  };
  auto c = cost_breakdown(sessions);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->sessions, 2u);
  ASSERT_EQ(c->roles.size(), 2u);
  EXPECT_EQ(c->roles[0].avg_tokens, 50 * kMicro);
  EXPECT_EQ(c->roles[1].avg_tokens, 450 * kMicro);
  EXPECT_EQ(c->roles[1].avg_duration_s, to_micro(2.5));
  EXPECT_EQ(c->roles[1].ratio, (Rate{900, 1000}));
  EXPECT_EQ(c->total_tokens, 500 * kMicro);

  EXPECT_FALSE(cost_breakdown(std::span<const std::vector<CostRecord>>{}));
  std::vector<std::vector<CostRecord>> silent{{{AgentRole::Fixer, 1.0, 1, 0}}};
  EXPECT_FALSE(cost_breakdown(silent));
}

TEST(Costs, ParseErrors) {
  EXPECT_THROW(parse_cost_averages("{}"), std::invalid_argument);
  EXPECT_THROW(parse_cost_averages(R"({"sessions": 1, "roles": [{"role": "Oracle", "avg_duration_s": 1,
      "avg_turns": 1, "avg_tokens": 1}]})"),
               std::invalid_argument);
}

TEST(Report, MarkdownShowsPublishedRows) {
  ReportInput in{replay(), cost_breakdown(load_cost_averages(fixtures_dir() / "table3-costs.json")), false};
  auto md = render_report(in, Format::Markdown);
  EXPECT_NE(md.find("| Math | 106 | 48 | 58 | 39 | 87 | 82.1% |"), std::string::npos);
  EXPECT_NE(md.find("| **Total** | 680 | 520 | 160 | 119 | 639 | 93.97% |"), std::string::npos);
  EXPECT_NE(md.find("Rescued 119 of 160 blind failures: 74.4% (exact 119/160)."), std::string::npos);
  EXPECT_NE(md.find("| Architect | 136.77 | 24.26 | 372,107 | 6.4% |"), std::string::npos);
  EXPECT_NE(md.find("| **Total** | 1261.08 | 139.40 | 5,782,441 | 100.0% |"), std::string::npos);
  EXPECT_EQ(md, render_report(in, Format::Markdown));
}

TEST(Report, CsvCarriesSameNumbers) {
  ReportInput in{replay(), cost_breakdown(load_cost_averages(fixtures_dir() / "table3-costs.json")), false};
  auto csv = render_report(in, Format::Csv);
  EXPECT_NE(csv.find("Math,106,48,58,39,87,82.1\n"), std::string::npos);
  EXPECT_NE(csv.find("Total,680,520,160,119,639,93.97\n"), std::string::npos);
  EXPECT_NE(csv.find("rescue_rate,119,160,74.4\n"), std::string::npos);
  EXPECT_NE(csv.find("Engineer,671.67,70.23,3365986,58.2\n"), std::string::npos);
}

TEST(Report, EmptyInputSaysNoSessions) {
  EXPECT_NE(render_report({}, Format::Markdown).find("no sessions"), std::string::npos);
  EXPECT_NE(render_report({}, Format::Csv).find("no sessions"), std::string::npos);
}

TEST(Table, IndependentOfRecordOrder) {
  auto records = replay();
  auto by_name = [](const ProjectTable& t) {
    std::map<std::string, ProjectRow> m;
    for (const auto& r : t.rows) m[r.project] = r;
    return m;
  };
  auto expected = by_name(project_table(records));
  std::mt19937 rng(7);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(records.begin(), records.end(), rng);
    auto table = project_table(records);
    EXPECT_EQ(by_name(table), expected);
    EXPECT_EQ(table.total, (ProjectRow{"Total", 680, 520, 160, 119, 639}));
    EXPECT_EQ(*rescue_rate(records), (Rate{119, 160}));
  }
}

TEST(Format, Parse) {
  EXPECT_EQ(parse_format("csv"), Format::Csv);
  EXPECT_EQ(parse_format("Markdown"), Format::Markdown);
  EXPECT_EQ(parse_format("md"), Format::Markdown);
  EXPECT_FALSE(parse_format("html"));
}

}  // namespace
}  // namespace anvil::metrics
