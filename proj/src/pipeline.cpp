#include "anvil/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "anvil/text.hpp"

namespace anvil::pipeline {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string verification_feedback(const rqa::RQAResult& previous) {
  return "The previous specification was rejected as " + std::string(rqa::to_string(previous.verdict.kind)) +
         ": " + previous.verdict.detail +
         "\nA usable specification must fail on the current code and describe the intended behaviour.";
}

class ArtifactWriter {
 public:
  ArtifactWriter(const fs::path& base, const std::string& session_id, std::map<std::string, std::string>& index)
      : index_(index) {
    if (base.empty()) return;
    dir_ = base / session_id;
    prefix_ = session_id;
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  void write(const std::string& name, std::string_view content) {
    if (dir_.empty()) return;
    auto path = dir_ / name;
    fs::create_directories(path.parent_path());
    harness::write_file(path, content);
    index_[name] = prefix_ + "/" + name;
  }

 private:
  fs::path dir_;
  std::string prefix_;
  std::map<std::string, std::string>& index_;
};

std::string transcript_jsonl(const agents::Transcript& t) {
  std::string out;
  for (const auto& turn : t.turns) {
    nlohmann::json j = {{"role", agents::to_string(turn.role)},
                        {"request", turn.request_excerpt},
                        {"response", turn.response},
                        {"prompt_tokens", turn.prompt_tokens},
                        {"completion_tokens", turn.completion_tokens},
                        {"duration_s", turn.duration_s}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string rqa_summary(const std::vector<rqa::RQAResult>& history) {
  std::string out;
  for (const auto& r : history) {
    out += "attempt " + std::to_string(r.attempt_index) + ": " + std::string(rqa::to_string(r.verdict.kind));
    if (r.verdict.side) out += " (" + std::string(rqa::to_string(*r.verdict.side)) + " side)";
    if (!r.verdict.detail.empty()) out += ": " + r.verdict.detail;
    out += "\n";
  }
  return out;
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::Blind ? "Blind" : "Enlightened"; }

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::CorrectFix: return "CorrectFix";
    case Outcome::PlausibleOnly: return "PlausibleOnly";
    case Outcome::NoFix: return "NoFix";
    case Outcome::Error: return "Error";
  }
  return "?";
}

std::string_view to_string(FallbackKind k) {
  return k == FallbackKind::EnvironmentPruning ? "EnvironmentPruning" : "StrategyFallback";
}

std::string_view to_string(RqaStatus s) {
  switch (s) {
    case RqaStatus::NotRun: return "NotRun";
    case RqaStatus::Validated: return "Validated";
    case RqaStatus::Exhausted: return "Exhausted";
    case RqaStatus::HarnessFailure: return "HarnessFailure";
    case RqaStatus::ArchitectFailed: return "ArchitectFailed";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
  auto l = text::to_lower(s);
  if (l == "blind") return Mode::Blind;
  if (l == "enlightened") return Mode::Enlightened;
  return std::nullopt;
}

std::optional<Outcome> parse_outcome(std::string_view s) {
  for (auto o : {Outcome::CorrectFix, Outcome::PlausibleOnly, Outcome::NoFix, Outcome::Error}) {
    if (to_string(o) == s) return o;
  }
  return std::nullopt;
}

std::optional<FallbackKind> parse_fallback_kind(std::string_view s) {
  for (auto k : {FallbackKind::EnvironmentPruning, FallbackKind::StrategyFallback}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<RqaStatus> parse_rqa_status(std::string_view s) {
  for (auto v : {RqaStatus::NotRun, RqaStatus::Validated, RqaStatus::Exhausted, RqaStatus::HarnessFailure,
                 RqaStatus::ArchitectFailed}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

agents::Backend& Backends::for_role(agents::AgentRole role) const {
  const auto& b = role == agents::AgentRole::Architect ? architect
                  : role == agents::AgentRole::Engineer ? engineer
                                                        : fixer;
  if (!b) throw agents::BackendError("no backend configured for " + std::string(agents::to_string(role)));
  return *b;
}

std::string session_id(std::string_view defect_id, Mode mode) {
  return std::string(defect_id) + "-" + text::to_lower(to_string(mode));
}

Adjudication adjudicate(const harness::Patch& patch, const harness::DefectRecord& defect,
                        const harness::Corpus& corpus, const PipelineConfig& config,
                        const std::optional<SpecCheck>& spec) {
  try {
    auto scope = harness::scope_check(patch, defect);
    if (!scope.ok()) return {Outcome::NoFix, "patch edits files outside the repair scope", ""};
    auto buggy = corpus.checkout(defect, harness::Variant::Buggy, harness::AccessPurpose::Adjudication);
    std::optional<harness::Workspace> patched;
    try {
      patched.emplace(harness::apply_patch(std::move(buggy), patch));
    } catch (const harness::PatchConflict& e) {
      return {Outcome::NoFix, std::string("patch does not apply: ") + e.what(), ""};
    }
    auto tests = harness::run_tests(*patched, defect.test, corpus.command_vars(patched->root()));
    if (tests.status == harness::TestStatus::Error) return {Outcome::Error, "baseline tests: " + tests.detail, ""};
    if (tests.status == harness::TestStatus::Fail) {
      return {Outcome::NoFix, "baseline tests still fail: " + text::join(tests.failing_test_names, ", "), ""};
    }
    if (spec) {
      auto report = runtime::execute(runtime::bind(spec->spec, spec->bindings), patched->root());
      switch (runtime::outcome(report)) {
        case runtime::SpecOutcome::AllPass: break;
        case runtime::SpecOutcome::AnyAssertionFail:
          return {Outcome::NoFix, "the validated specification fails on the patched tree", ""};
        case runtime::SpecOutcome::Error:
          return {Outcome::Error, "the validated specification could not run on the patched tree", ""};
      }
    }
    auto cmp = harness::compare_with_ground_truth(corpus, defect, *patched, config.use_probes);
    auto detail = cmp.detail.empty() && cmp.equivalent ? "equivalent to the ground-truth fix" : cmp.detail;
    return {cmp.equivalent ? Outcome::CorrectFix : Outcome::PlausibleOnly, detail, cmp.method};
  } catch (const std::exception& e) {
    return {Outcome::Error, e.what(), ""};
  }
}

RepairSession run_session(const harness::DefectRecord& defect, Mode mode, const harness::Corpus& corpus,
                          const Backends& backends, const PipelineConfig& config) {
  RepairSession s;
  s.session_id = session_id(defect.id, mode);
  s.defect_id = defect.id;
  s.project = defect.project;
  s.mode = mode;
  s.started_at = utc_now();
  auto clock_start = std::chrono::steady_clock::now();

  agents::Transcript transcript{s.session_id, defect.id, mode == Mode::Blind ? "blind" : "enlightened", {}};
  std::optional<ArtifactWriter> artifacts;

  try {
    artifacts.emplace(config.artifacts_dir, s.session_id, s.artifacts);
    auto ws = corpus.checkout(defect, harness::Variant::Buggy, harness::AccessPurpose::Repair);
    auto baseline = harness::run_tests(ws, defect.test, corpus.command_vars(ws.root()));
    if (baseline.status != harness::TestStatus::Fail) {
      throw std::runtime_error(baseline.status == harness::TestStatus::Pass
                                   ? "the buggy tree passes its tests; nothing to repair"
                                   : "baseline test run failed: " + baseline.detail);
    }
    auto report = harness::collect_failure_report(baseline);
    artifacts->write("failure_report.txt", report.render());

    agents::FixerGuidance guidance;
    std::optional<SpecCheck> check;
    if (mode == Mode::Enlightened) {
      auto sources = agents::defect_sources(defect, ws);
      std::vector<rqa::RQAResult> seen;
      std::optional<std::string> backend_failure;

      rqa::ArchitectFn architect = [&](int, const rqa::RQAResult* previous) {
        std::vector<agents::ContextBlock> extra;
        if (previous) extra.push_back({"verification_feedback", verification_feedback(*previous)});
        return agents::architect_infer(report, sources, backends.for_role(agents::AgentRole::Architect), transcript,
                                       extra)
            .spec;
      };
      rqa::EngineerFn engineer = [&](const gherkin::FeatureSpec& spec) {
        try {
          return agents::engineer_build(spec, ws, backends.for_role(agents::AgentRole::Engineer), transcript);
        } catch (const agents::BackendError& e) {
          backend_failure = e.what();
          throw;
        }
      };
      rqa::VerifyFn verify = [&](const gherkin::FeatureSpec& spec, const runtime::StepBindingSet& bindings) {
        auto r = rqa::sandwich_verify(spec, bindings, defect, corpus);
        seen.push_back(r);
        return r;
      };

      try {
        auto loop = rqa::rqa_loop(architect, engineer, verify, config.max_rqa_attempts);
        if (backend_failure) throw agents::BackendError(*backend_failure);
        if (auto* v = std::get_if<rqa::ValidatedSpec>(&loop)) {
          s.rqa_status = RqaStatus::Validated;
          s.rqa = v->history;
          s.spec = v->spec;
          guidance.spec = v->spec;
          check = SpecCheck{v->spec, v->bindings};
          artifacts->write("bindings.json", runtime::render_manifest(v->bindings));
        } else {
          auto& ex = std::get<rqa::Exhausted>(loop);
          s.rqa = ex.history;
          s.degraded = true;
          if (ex.harness_failure) {
            s.rqa_status = RqaStatus::HarnessFailure;
            auto harness_dir = ws.root() / agents::kHarnessDir;
            if (fs::is_regular_file(harness_dir / "bindings.json")) {
              artifacts->write("bindings.json", harness::read_file(harness_dir / "bindings.json"));
            }
            fs::remove_all(harness_dir);
            s.fallback_events.push_back(
                {FallbackKind::EnvironmentPruning, "removed generated harness artifacts (" +
                                                       std::string(agents::kHarnessDir) + "/) from the workspace"});
            s.fallback_events.push_back(
                {FallbackKind::StrategyFallback, "adjudicating with the baseline test command only"});
            s.spec = ex.last_spec;
            guidance.spec = ex.last_spec;
          } else {
            s.rqa_status = RqaStatus::Exhausted;
          }
        }
      } catch (const agents::MalformedOutput& e) {
        if (backend_failure) throw agents::BackendError(*backend_failure);
        s.rqa_status = RqaStatus::ArchitectFailed;
        s.rqa = seen;
        s.degraded = true;
        s.detail = e.what();
        fs::remove_all(ws.root() / agents::kHarnessDir);
      }
      if (s.rqa) artifacts->write("rqa.txt", rqa_summary(*s.rqa));
      if (s.spec) artifacts->write("spec.feature", gherkin::render(*s.spec));
      if (s.rqa_status == RqaStatus::Exhausted) fs::remove_all(ws.root() / agents::kHarnessDir);
    }

    s.fixer_prompt = agents::render_context(agents::fixer_context(defect, ws, guidance, report));
    artifacts->write("fixer_prompt.md", s.fixer_prompt);
    s.tree_before_fix = harness::tree_digest(ws.root());
    std::optional<harness::Patch> patch;
    try {
      patch = agents::fixer_repair(defect, ws, guidance, report, backends.for_role(agents::AgentRole::Fixer),
                                   transcript);
    } catch (const agents::ScopeViolation& e) {
      s.scope_violations = e.paths();
      s.outcome = Outcome::NoFix;
      s.detail = e.what();
    } catch (const agents::MalformedPatch& e) {
      s.outcome = Outcome::NoFix;
      s.detail = e.what();
    }
    s.tree_after_fix = harness::tree_digest(ws.root());

    if (patch) {
      s.patch = patch;
      std::string listing = patch->rationale + "\n";
      for (const auto& e : patch->edits) {
        artifacts->write("patch/" + e.path, e.content);
        listing += "--- file: " + e.path + "\n";
      }
      artifacts->write("patch.txt", listing);
      auto adj = adjudicate(*patch, defect, corpus, config, check);
      s.outcome = adj.outcome;
      std::string method = adj.method.empty() ? "" : " [" + adj.method + "]";
      s.detail = s.detail.empty() ? adj.detail + method : s.detail + "; " + adj.detail + method;
    }
  } catch (const std::exception& e) {
    s.outcome = Outcome::Error;
    s.detail = e.what();
  }

  for (auto role : agents::kAllRoles) {
    auto cost = agents::account(transcript, role);
    if (cost.turns > 0) s.costs.push_back(cost);
  }
  try {
    if (artifacts) artifacts->write("transcript.jsonl", transcript_jsonl(transcript));
  } catch (const std::exception&) {
  }
  s.finished_at = utc_now();
  s.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return s;
}

CampaignTotals compute_totals(const std::vector<DefectSessions>& sessions) {
  CampaignTotals t;
  long long correct_anywhere = 0;
  for (const auto& d : sessions) {
    ++t.defects;
    bool blind_ok = d.blind.outcome == Outcome::CorrectFix;
    if (blind_ok) {
      ++t.blind_correct;
      if (d.enlightened) throw std::logic_error(d.blind.defect_id + ": enlightened session after a blind success");
    } else {
      ++t.blind_fail;
    }
    if (d.enlightened && d.enlightened->outcome == Outcome::CorrectFix) {
      ++t.rescued;
      if (d.enlightened->degraded) ++t.rescued_degraded;
    }
    if (blind_ok || (d.enlightened && d.enlightened->outcome == Outcome::CorrectFix)) ++correct_anywhere;
  }
  t.total_correct = t.blind_correct + t.rescued;
  if (t.total_correct != correct_anywhere) throw std::logic_error("composite identity violated");
  return t;
}

CampaignResult run_campaign(const harness::Corpus& corpus, const Backends& backends, const PipelineConfig& config,
                            const CampaignOptions& options) {
  if (options.workers < 1) throw std::invalid_argument("workers must be at least 1");
  const auto& defects = corpus.defects();
  CampaignResult result;
  result.sessions.resize(defects.size());
  std::mutex sink_mutex;

  auto obtain = [&](const harness::DefectRecord& d, Mode mode) {
    auto it = options.prior.find({d.id, mode});
    if (it != options.prior.end()) return it->second;
    auto s = run_session(d, mode, corpus, backends, config);
    if (options.sink) {
      std::lock_guard lock(sink_mutex);
      options.sink(s);
    }
    return s;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < defects.size(); i = next++) {
      DefectSessions ds{obtain(defects[i], Mode::Blind), std::nullopt};
      if (options.composite && ds.blind.outcome != Outcome::CorrectFix) {
        ds.enlightened = obtain(defects[i], Mode::Enlightened);
      }
      result.sessions[i] = std::move(ds);
    }
  };
  {
    std::vector<std::jthread> pool;
    auto n = std::min<std::size_t>(static_cast<std::size_t>(options.workers), std::max<std::size_t>(defects.size(), 1));
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  result.totals = compute_totals(result.sessions);
  return result;
}

metrics::OutcomeRecord to_outcome_record(const DefectSessions& d) {
  metrics::OutcomeRecord r;
  r.defect_id = d.blind.defect_id;
  r.project = d.blind.project;
  r.blind_correct = d.blind.outcome == Outcome::CorrectFix;
  r.enlightened_attempted = d.enlightened.has_value();
  r.enlightened_correct = d.enlightened && d.enlightened->outcome == Outcome::CorrectFix;
  r.enlightened_degraded = d.enlightened && d.enlightened->degraded;
  return r;
}

std::vector<metrics::OutcomeRecord> to_outcome_records(const CampaignResult& result) {
  std::vector<metrics::OutcomeRecord> out;
  out.reserve(result.sessions.size());
  for (const auto& d : result.sessions) out.push_back(to_outcome_record(d));
  return out;
}

}  // namespace anvil::pipeline
