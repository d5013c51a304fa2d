#include "anvil/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "anvil/cli/config.hpp"
#include "anvil/cli/session_log.hpp"
#include "anvil/metrics.hpp"
#include "anvil/text.hpp"

namespace anvil::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string summarize(const runtime::FeatureRunReport& report) {
  std::string out;
  for (const auto& r : report.scenario_results) {
    out += "  " + std::string(runtime::to_string(r.status)) + "  " + r.scenario_title;
    if (!r.failure_tag.empty()) out += " [" + r.failure_tag + "]";
    out += "\n";
  }
  if (out.empty()) out = "  (no scenarios ran)\n";
  return out;
}

std::vector<std::vector<agents::CostRecord>> session_costs(const std::vector<pipeline::RepairSession>& sessions) {
  std::vector<std::vector<agents::CostRecord>> out;
  for (const auto& s : sessions) out.push_back(s.costs);
  return out;
}

// ---- corpus validate ----

struct CorpusValidateArgs {
  std::string corpus;
  std::string config;
};

int cmd_corpus_validate(const CorpusValidateArgs& a, std::ostream& out, std::ostream& err) {
  fs::path path = a.corpus;
  if (path.empty()) {
    if (a.config.empty()) throw UsageError("give a corpus manifest or --config");
    path = load_config(a.config).corpus_path;
  }
  if (!fs::exists(path)) throw UsageError("no such corpus manifest: " + path.string());
  harness::Corpus corpus;
  try {
    corpus = harness::Corpus::load(path);
  } catch (const harness::CorpusError& e) {
    for (const auto& f : e.findings()) err << "schema: " << f << "\n";
    return exit_code::kFindings;
  }
  auto findings = harness::audit(corpus);
  for (const auto& d : corpus.defects()) {
    bool bad = std::any_of(findings.begin(), findings.end(), [&](const auto& f) { return f.defect_id == d.id; });
    out << (bad ? "FAIL " : "ok   ") << d.id << "\n";
  }
  for (const auto& f : findings) err << f.defect_id << ": " << f.message << "\n";
  out << corpus.defects().size() << " defect(s), " << findings.size() << " finding(s)\n";
  return findings.empty() ? exit_code::kOk : exit_code::kFindings;
}

// ---- run ----

struct RunArgs {
  std::string defect;
  std::string mode;
  std::string config;
  std::string campaign_id = "adhoc";
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream&) {
  auto mode = pipeline::parse_mode(a.mode);
  if (!mode) throw UsageError("--mode must be blind or enlightened");
  auto config = load_config(a.config);
  auto corpus = harness::Corpus::load(config.corpus_path);
  const harness::DefectRecord* defect = nullptr;
  try {
    defect = &corpus.find(a.defect);
  } catch (const harness::UnknownDefect&) {
    throw UsageError("unknown defect '" + a.defect + "'");
  }
  auto dir = config.run_dir / a.campaign_id;
  auto session = pipeline::run_session(*defect, *mode, corpus, make_backends(config), pipeline_config(config, dir));
  SessionLogWriter(dir / "sessions.jsonl").append(session);

  out << "session " << session.session_id << ": " << pipeline::to_string(session.outcome) << "\n";
  if (session.mode == pipeline::Mode::Enlightened) {
    out << "rqa: " << pipeline::to_string(session.rqa_status) << (session.degraded ? " (degraded)" : "") << "\n";
  }
  for (const auto& e : session.fallback_events) out << "fallback: " << pipeline::to_string(e.kind) << "\n";
  if (!session.detail.empty()) out << "detail: " << session.detail << "\n";
  for (const auto& [name, path] : session.artifacts) out << "artifact " << name << ": " << (dir / path).string() << "\n";
  return exit_code_for(session.outcome);
}

// ---- campaign ----

struct CampaignArgs {
  std::string config;
  bool composite = false;
  int workers = 0;
  std::string campaign_id = "default";
};

int cmd_campaign(const CampaignArgs& a, std::ostream& out, std::ostream&) {
  auto config = load_config(a.config);
  auto corpus = harness::Corpus::load(config.corpus_path);
  auto dir = config.run_dir / a.campaign_id;
  fs::create_directories(dir);

  pipeline::CampaignOptions options;
  options.workers = a.workers > 0 ? a.workers : config.workers;
  options.composite = a.composite;
  auto log_path = dir / "sessions.jsonl";
  for (auto& s : load_sessions(log_path)) {
    auto key = std::make_pair(s.defect_id, s.mode);
    options.prior.insert_or_assign(key, std::move(s));
  }
  std::size_t reused = options.prior.size();
  SessionLogWriter writer(log_path);
  std::size_t executed = 0;
  options.sink = [&](const pipeline::RepairSession& s) {
    writer.append(s);
    ++executed;
  };

  auto result =
      pipeline::run_campaign(corpus, make_backends(config), pipeline_config(config, dir), options);
  auto records = pipeline::to_outcome_records(result);
  std::string outcomes;
  for (const auto& r : records) outcomes += metrics::outcome_to_json(r) + "\n";
  write_text(dir / "outcomes.jsonl", outcomes);

  std::vector<pipeline::RepairSession> all;
  for (const auto& d : result.sessions) {
    all.push_back(d.blind);
    if (d.enlightened) all.push_back(*d.enlightened);
  }
  metrics::ReportInput input{records, metrics::cost_breakdown(session_costs(all)), false};
  write_text(dir / "report.md", metrics::render_report(input, metrics::Format::Markdown));

  const auto& t = result.totals;
  out << "campaign " << a.campaign_id << ": " << executed << " session(s) executed, "
      << std::min(reused, all.size()) << " reused\n";
  out << "blind correct: " << t.blind_correct << "/" << t.defects << "\n";
  if (a.composite) {
    out << "rescued: " << t.rescued << "/" << t.blind_fail;
    if (t.rescued_degraded > 0) out << " (" << t.rescued_degraded << " without a validated spec)";
    out << "\n";
  }
  auto rate = metrics::fix_rate(static_cast<std::uint64_t>(t.total_correct), static_cast<std::uint64_t>(t.defects));
  out << "total: " << t.total_correct << "/" << t.defects << " (" << (rate ? rate->display(1) + "%" : "undefined")
      << ")\n";
  out << "outcomes: " << (dir / "outcomes.jsonl").string() << "\n";
  return exit_code::kOk;
}

// ---- verify-spec ----

struct VerifyArgs {
  std::string defect;
  std::string feature;
  std::string bindings;
  std::string config;
  std::string corpus;
  bool negative_only = false;
};

int cmd_verify_spec(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  fs::path corpus_path = a.corpus;
  if (corpus_path.empty()) {
    if (a.config.empty()) throw UsageError("give --config or --corpus");
    corpus_path = load_config(a.config).corpus_path;
  }
  auto corpus = harness::Corpus::load(corpus_path);
  const harness::DefectRecord* defect = nullptr;
  try {
    defect = &corpus.find(a.defect);
  } catch (const harness::UnknownDefect&) {
    throw UsageError("unknown defect '" + a.defect + "'");
  }
  gherkin::FeatureSpec spec;
  try {
    spec = gherkin::parse(read_text(a.feature), a.feature);
  } catch (const gherkin::ParseError& e) {
    err << a.feature << ": " << e.what() << "\n";
    return exit_code::kSpecParseError;
  }
  runtime::StepBindingSet bindings;
  try {
    bindings = runtime::parse_manifest(read_text(a.bindings));
  } catch (const runtime::ManifestError& e) {
    err << a.bindings << ": " << e.what() << "\n";
    return exit_code::kManifestError;
  }
  runtime::BoundFeature bound;
  try {
    bound = runtime::bind(spec, bindings);
  } catch (const runtime::BindingError& e) {
    err << e.what() << "\n";
    return exit_code::kBindingError;
  }

  rqa::Verdict verdict;
  std::optional<runtime::FeatureRunReport> buggy, fixed;
  if (a.negative_only) {
    verdict = rqa::negative_only_verify([&](rqa::Side) {
      auto ws = corpus.checkout(*defect, harness::Variant::Buggy, harness::AccessPurpose::Verification);
      buggy = runtime::execute(bound, ws.root());
      return *buggy;
    });
  } else {
    auto result = rqa::sandwich_verify(spec, bindings, *defect, corpus);
    verdict = result.verdict;
    buggy = result.buggy_report;
    fixed = result.fixed_report;
  }

  out << "verdict: " << rqa::to_string(verdict.kind);
  if (verdict.side) out << " (" << rqa::to_string(*verdict.side) << " side)";
  out << "\n";
  if (!verdict.detail.empty()) out << "detail: " << verdict.detail << "\n";
  out << "buggy side:\n" << (buggy ? summarize(*buggy) : std::string("  (no scenarios ran)\n"));
  if (fixed) {
    out << "fixed side:\n" << summarize(*fixed);
  } else {
    out << "fixed side: not run" << (a.negative_only ? " (negative-only)" : "") << "\n";
  }
  return exit_code_for(verdict.kind);
}

// ---- report ----

struct ReportArgs {
  std::string replay;
  std::string run;
  std::string costs;
  std::string format = "markdown";
  bool include_degraded = false;
  std::string output;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  auto format = metrics::parse_format(a.format);
  if (!format) throw UsageError("--format must be markdown or csv");
  if (a.replay.empty() == a.run.empty()) throw UsageError("give exactly one of --replay or --run");

  metrics::ReportInput input;
  input.include_degraded = a.include_degraded;
  fs::path outcomes_path = a.replay.empty() ? fs::path(a.run) / "outcomes.jsonl" : fs::path(a.replay);
  if (!fs::exists(outcomes_path)) throw UsageError("no such file: " + outcomes_path.string());
  try {
    input.records = metrics::load_outcomes(outcomes_path);
  } catch (const metrics::RecordError& e) {
    err << outcomes_path.string() << ": " << e.what() << "\n";
    return exit_code::kFindings;
  }
  if (!a.costs.empty()) {
    if (!fs::exists(a.costs)) throw UsageError("no such file: " + a.costs);
    try {
      input.costs = metrics::cost_breakdown(metrics::load_cost_averages(a.costs));
    } catch (const std::invalid_argument& e) {
      err << a.costs << ": " << e.what() << "\n";
      return exit_code::kFindings;
    }
  } else if (!a.run.empty() && fs::exists(fs::path(a.run) / "sessions.jsonl")) {
    try {
      input.costs = metrics::cost_breakdown(session_costs(load_sessions(fs::path(a.run) / "sessions.jsonl")));
    } catch (const std::invalid_argument& e) {
      err << e.what() << "\n";
      return exit_code::kFindings;
    }
  }
  auto doc = metrics::render_report(input, *format);
  if (a.output.empty()) {
    out << doc;
  } else {
    write_text(a.output, doc);
  }
  return exit_code::kOk;
}

}  // namespace

int exit_code_for(pipeline::Outcome o) {
  switch (o) {
    case pipeline::Outcome::CorrectFix: return exit_code::kOk;
    case pipeline::Outcome::PlausibleOnly: return exit_code::kPlausibleOnly;
    case pipeline::Outcome::NoFix: return exit_code::kNoFix;
    case pipeline::Outcome::Error: return exit_code::kSessionError;
  }
  return exit_code::kInfrastructure;
}

int exit_code_for(rqa::VerdictKind k) {
  switch (k) {
    case rqa::VerdictKind::Validated: return exit_code::kOk;
    case rqa::VerdictKind::SpecTooWeak: return exit_code::kSpecTooWeak;
    case rqa::VerdictKind::SpecMisaligned: return exit_code::kSpecMisaligned;
    case rqa::VerdictKind::HarnessError: return exit_code::kHarnessError;
  }
  return exit_code::kInfrastructure;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Specification-guided program repair harness", "spec-anvil"};
  app.require_subcommand(1);

  auto* corpus_cmd = app.add_subcommand("corpus", "Corpus maintenance");
  corpus_cmd->require_subcommand(1);
  CorpusValidateArgs cv;
  auto* validate = corpus_cmd->add_subcommand("validate", "Check the manifest and the buggy/fixed sandwich");
  validate->add_option("corpus", cv.corpus, "corpus.json");
  validate->add_option("--config", cv.config, "Config file naming the corpus");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run one repair session");
  run->add_option("defect", ra.defect, "Defect id")->required();
  run->add_option("--mode", ra.mode, "blind or enlightened")->required();
  run->add_option("--config", ra.config, "Config file")->required();
  run->add_option("--campaign-id", ra.campaign_id, "Directory under run_dir for artifacts");

  CampaignArgs ca;
  auto* campaign = app.add_subcommand("campaign", "Run blind sessions for every defect");
  campaign->add_option("--config", ca.config, "Config file")->required();
  campaign->add_flag("--composite", ca.composite, "Follow blind failures with enlightened sessions");
  campaign->add_option("--workers", ca.workers, "Parallel sessions (overrides config)")->check(CLI::PositiveNumber);
  campaign->add_option("--campaign-id", ca.campaign_id, "Directory under run_dir; reruns resume");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify-spec", "Sandwich-verify a feature file against a defect");
  verify->add_option("defect", va.defect, "Defect id")->required();
  verify->add_option("feature", va.feature, "Feature file")->required();
  verify->add_option("bindings", va.bindings, "bindings.json")->required();
  verify->add_option("--config", va.config, "Config file naming the corpus");
  verify->add_option("--corpus", va.corpus, "corpus.json");
  verify->add_flag("--negative-only", va.negative_only, "Run the buggy side only");

  ReportArgs rp;
  auto* report = app.add_subcommand("report", "Render fix-rate, rescue-rate and cost tables");
  report->add_option("--replay", rp.replay, "outcomes.jsonl to replay");
  report->add_option("--run", rp.run, "Campaign directory");
  report->add_option("--costs", rp.costs, "Per-role cost averages (JSON)");
  report->add_option("--format", rp.format, "markdown or csv");
  report->add_flag("--include-degraded", rp.include_degraded, "Count fixes made without a validated spec as rescues");
  report->add_option("--output", rp.output, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? exit_code::kOk : exit_code::kUsage;
  }

  try {
    if (validate->parsed()) return cmd_corpus_validate(cv, out, err);
    if (run->parsed()) return cmd_run(ra, out, err);
    if (campaign->parsed()) return cmd_campaign(ca, out, err);
    if (verify->parsed()) return cmd_verify_spec(va, out, err);
    if (report->parsed()) return cmd_report(rp, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const ConfigError& e) {
    err << "config: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const harness::CorpusError& e) {
    err << "corpus: " << e.what() << "\n";
    for (const auto& f : e.findings()) err << "  " << f << "\n";
    return exit_code::kInfrastructure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kInfrastructure;
  }
  return exit_code::kUsage;
}

}  // namespace anvil::cli
