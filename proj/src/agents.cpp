#include "anvil/agents.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "anvil/text.hpp"

namespace anvil::agents {

namespace fs = std::filesystem;

namespace {

struct Fence {
  std::string info;
  std::string content;
  std::size_t begin = 0;  // offset of the opening fence line
  std::size_t end = 0;    // offset just past the closing fence line
};

// Fenced blocks delimited by lines starting with ``` (opening line may
// carry an info string). An unclosed fence runs to the end of the text.
std::vector<Fence> find_fences(std::string_view text) {
  std::vector<Fence> fences;
  std::size_t pos = 0;
  std::optional<Fence> open;
  std::vector<std::string> body;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t line_end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(pos, line_end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t next = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    std::string_view trimmed = text::trim(line);
    if (!open) {
      if (trimmed.starts_with("```")) {
        open = Fence{};
        open->info = text::to_lower(text::trim(trimmed.substr(3)));
        open->begin = pos;
        body.clear();
      }
    } else if (trimmed == "```") {
      open->content = body.empty() ? std::string() : text::join(body, "\n") + "\n";
      open->end = std::min(next, text.size());
      fences.push_back(std::move(*open));
      open.reset();
    } else {
      body.emplace_back(line);
    }
    pos = next;
  }
  if (open) {
    open->content = body.empty() ? std::string() : text::join(body, "\n") + "\n";
    open->end = text.size();
    fences.push_back(std::move(*open));
  }
  return fences;
}

std::string excerpt(std::span<const ContextBlock> context) {
  std::string names;
  for (const auto& b : context) {
    if (!names.empty()) names += ", ";
    names += b.name;
  }
  return names;
}

std::vector<ContextBlock> with_feedback(std::span<const ContextBlock> context, const std::string& error) {
  std::vector<ContextBlock> out(context.begin(), context.end());
  out.push_back({"format_feedback", "The previous reply could not be used: " + error +
                                        "\nReply again, following the required format exactly."});
  return out;
}

AgentTurn ask(Backend& backend, AgentRole role, std::span<const ContextBlock> context, Transcript& transcript) {
  if (context.empty()) throw std::invalid_argument("agent context must not be empty");
  AgentTurn turn = backend.respond(role, context, transcript);
  turn.role = role;
  transcript.turns.push_back(turn);
  return turn;
}

const char* kArchitectInstructions =
    "Role: Architect.\n"
    "Work in two stages.\n"
    "1. Root cause analysis: explain which expected behaviour the failing test checks, what the code does "
    "instead, and where the two diverge.\n"
    "2. Specification: state the intended behaviour as Gherkin.\n"
    "Reply with the analysis as plain text, then exactly one ```gherkin fenced block containing one Feature "
    "with one or more Scenarios built from Given/When/Then/And/But steps. Background, Scenario Outline, "
    "tables, doc-strings and tags are not accepted. Keep each scenario small and make its Then steps "
    "observable.";

const char* kEngineerInstructions =
    "Role: Engineer.\n"
    "Make every step of the specification executable. Reply with a bindings.json document:\n"
    "{\"bindings\": [{\"pattern\": \"^regex with (groups)$\", \"command\": \"program args {1}\", "
    "\"timeout_s\": 60, \"role\": \"Context|Action|Assertion\"}], \"env\": {}}\n"
    "The first binding whose pattern matches the whole step text (and whose role, if given, equals the "
    "step's role) is used. Commands run without a shell, with the workspace as working directory; {n} "
    "expands to capture n and {workspace} to the workspace root. A step passes iff its command exits 0. "
    "Then steps must fail on the defective code.";

std::string fixer_instructions(const harness::DefectRecord& defect) {
  return "Role: Fixer.\n"
         "Repair defect " + defect.id + " by rewriting " + defect.scope_file() +
         ". That file is the only one you may change.\n"
         "If a specification block is present, the repaired code must satisfy every scenario in it.\n"
         "Reply with a short rationale, then a line \"--- file: " + defect.scope_file() +
         "\" followed by a fenced block holding the complete new content of the file.";
}

std::vector<std::string> list_files(const fs::path& root) {
  std::vector<std::string> files;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(root, ec); it != fs::recursive_directory_iterator(); ++it) {
    auto rel = fs::relative(it->path(), root).generic_string();
    if (it->is_directory() && (rel == kHarnessDir || rel.starts_with("__pycache__") || rel.ends_with("/__pycache__"))) {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::string_view to_string(AgentRole r) {
  switch (r) {
    case AgentRole::Architect: return "Architect";
    case AgentRole::Engineer: return "Engineer";
    case AgentRole::Fixer: return "Fixer";
  }
  return "?";
}

std::optional<AgentRole> parse_agent_role(std::string_view name) {
  for (auto r : kAllRoles) {
    if (text::to_lower(to_string(r)) == text::to_lower(name)) return r;
  }
  return std::nullopt;
}

std::size_t Transcript::turns_for(AgentRole role) const {
  return static_cast<std::size_t>(
      std::count_if(turns.begin(), turns.end(), [&](const AgentTurn& t) { return t.role == role; }));
}

ScopeViolation::ScopeViolation(std::vector<std::string> paths)
    : AgentError("patch edits files outside the repair scope: " + text::join(paths, ", ")),
      paths_(std::move(paths)) {}

std::string render_context(std::span<const ContextBlock> context) {
  std::string out;
  for (const auto& b : context) {
    out += "### " + b.name + "\n";
    out += b.text;
    if (!b.text.empty() && b.text.back() != '\n') out += '\n';
    out += '\n';
  }
  return out;
}

std::string context_digest(std::span<const ContextBlock> context) {
  return text::hex(text::fnv1a(render_context(context)));
}

long long estimate_tokens(std::string_view s) { return static_cast<long long>((s.size() + 3) / 4); }

ScriptedFixture parse_fixture(std::string_view file_text) {
  ScriptedFixture f;
  auto lines = text::split_lines(file_text);
  if (lines.empty() || text::trim(lines[0]) != "---") {
    f.response = std::string(file_text);
    return f;
  }
  std::size_t i = 1;
  for (; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (line == "---") break;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) throw BackendError("malformed fixture header line '" + std::string(line) + "'");
    auto key = text::trim(line.substr(0, colon));
    std::string value(text::trim(line.substr(colon + 1)));
    try {
      if (key == "prompt_tokens") {
        f.prompt_tokens = std::stoll(value);
      } else if (key == "completion_tokens") {
        f.completion_tokens = std::stoll(value);
      } else if (key == "duration_s") {
        f.duration_s = std::stod(value);
      } else {
        throw BackendError("unknown fixture header '" + std::string(key) + "'");
      }
    } catch (const std::logic_error&) {
      throw BackendError("bad value for fixture header '" + std::string(key) + "'");
    }
  }
  if (i == lines.size()) throw BackendError("fixture header is not closed by ---");
  std::size_t pos = 0;
  for (std::size_t n = 0; n <= i; ++n) pos = file_text.find('\n', pos) + 1;
  f.response = pos == 0 ? std::string() : std::string(file_text.substr(std::min(pos, file_text.size())));
  if ((f.prompt_tokens && *f.prompt_tokens < 0) || (f.completion_tokens && *f.completion_tokens < 0) ||
      (f.duration_s && *f.duration_s < 0)) {
    throw BackendError("fixture usage values must be non-negative");
  }
  return f;
}

ScriptedBackend::ScriptedBackend(fs::path fixtures_dir) : dir_(std::move(fixtures_dir)) {}

AgentTurn ScriptedBackend::respond(AgentRole role, std::span<const ContextBlock> context,
                                   const Transcript& transcript) {
  fs::path role_dir = dir_ / transcript.defect_id / text::to_lower(to_string(role));
  if (!transcript.mode.empty() && fs::is_directory(role_dir / transcript.mode)) role_dir /= transcript.mode;

  fs::path chosen;
  auto digest = role_dir / "by-digest" / (context_digest(context) + ".txt");
  if (fs::is_regular_file(digest)) {
    chosen = digest;
  } else {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(role_dir, ec)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::size_t index = transcript.turns_for(role);
    if (index >= files.size()) {
      throw BackendError("scripted fixtures exhausted for " + transcript.defect_id + "/" +
                         std::string(to_string(role)) + " (call " + std::to_string(index + 1) + ", " +
                         std::to_string(files.size()) + " fixture(s) in " + role_dir.string() + ")");
    }
    chosen = files[index];
  }
  auto fixture = parse_fixture(harness::read_file(chosen));
  AgentTurn turn;
  turn.role = role;
  turn.request_excerpt = excerpt(context);
  turn.response = fixture.response;
  turn.prompt_tokens = fixture.prompt_tokens.value_or(estimate_tokens(render_context(context)));
  turn.completion_tokens = fixture.completion_tokens.value_or(estimate_tokens(fixture.response));
  turn.duration_s = fixture.duration_s.value_or(0.0);
  return turn;
}

ArchitectOutput parse_architect_response(std::string_view response) {
  auto fences = find_fences(response);
  std::vector<const Fence*> gherkin;
  for (const auto& f : fences) {
    if (f.info == "gherkin") gherkin.push_back(&f);
  }
  if (gherkin.size() != 1) {
    throw MalformedOutput("expected exactly one ```gherkin block, found " + std::to_string(gherkin.size()));
  }
  std::string analysis(text::trim(response.substr(0, gherkin.front()->begin)));
  if (analysis.empty()) throw MalformedOutput("the root cause analysis must precede the specification");
  try {
    return {analysis, gherkin::parse(gherkin.front()->content)};
  } catch (const gherkin::ParseError& e) {
    throw MalformedOutput(std::string("the specification does not parse: ") + e.what());
  }
}

std::vector<ContextBlock> architect_context(const harness::FailureReport& report,
                                            std::span<const ContextBlock> sources,
                                            std::span<const ContextBlock> extra) {
  std::vector<ContextBlock> ctx{{"instructions", kArchitectInstructions}, {"failure_report", report.render()}};
  ctx.insert(ctx.end(), sources.begin(), sources.end());
  ctx.insert(ctx.end(), extra.begin(), extra.end());
  return ctx;
}

ArchitectOutput architect_infer(const harness::FailureReport& report, std::span<const ContextBlock> sources,
                                Backend& backend, Transcript& transcript, std::span<const ContextBlock> extra) {
  auto context = architect_context(report, sources, extra);
  std::string last_error;
  for (int i = 0; i <= kFormatRepairAttempts; ++i) {
    auto ctx = i == 0 ? context : with_feedback(context, last_error);
    auto turn = ask(backend, AgentRole::Architect, ctx, transcript);
    try {
      return parse_architect_response(turn.response);
    } catch (const MalformedOutput& e) {
      last_error = e.what();
    }
  }
  throw MalformedOutput("architect output still malformed after " + std::to_string(kFormatRepairAttempts) +
                        " re-asks: " + last_error);
}

std::vector<ContextBlock> defect_sources(const harness::DefectRecord& defect, const harness::Workspace& ws) {
  std::vector<ContextBlock> blocks;
  for (const auto& t : defect.test_files) {
    auto path = ws.root() / t;
    if (fs::is_regular_file(path)) blocks.push_back({"test:" + t, harness::read_file(path)});
  }
  auto scope = ws.root() / defect.scope_file();
  blocks.push_back({"source:" + defect.scope_file(),
                    fs::is_regular_file(scope) ? harness::read_file(scope) : std::string("(file does not exist yet)\n")});
  return blocks;
}

runtime::StepBindingSet parse_engineer_response(std::string_view response) {
  auto fences = find_fences(response);
  for (const auto& f : fences) {
    if (f.info == "json") return runtime::parse_manifest(f.content);
  }
  return runtime::parse_manifest(text::trim(response));
}

runtime::StepBindingSet engineer_build(const gherkin::FeatureSpec& spec, const harness::Workspace& ws,
                                       Backend& backend, Transcript& transcript) {
  auto layout = harness::detect_layout(ws.root());
  std::ostringstream layout_text;
  layout_text << "source roots: " << (layout.source_roots.empty() ? "(none)" : text::join(layout.source_roots, ", "))
              << "\ntest roots: " << (layout.test_roots.empty() ? "(none)" : text::join(layout.test_roots, ", "))
              << "\nfiles:\n";
  for (const auto& f : list_files(ws.root())) layout_text << "  " << f << "\n";

  std::vector<ContextBlock> context{{"instructions", kEngineerInstructions},
                                    {"specification", gherkin::render(spec)},
                                    {"workspace_layout", layout_text.str()}};
  auto harness_dir = ws.root() / kHarnessDir;
  fs::create_directories(harness_dir);
  harness::write_file(harness_dir / "spec.feature", gherkin::render(spec));

  std::string last_error;
  for (int i = 0; i <= kFormatRepairAttempts; ++i) {
    auto ctx = i == 0 ? context : with_feedback(context, last_error);
    auto turn = ask(backend, AgentRole::Engineer, ctx, transcript);
    harness::write_file(harness_dir / "bindings.json", turn.response);
    try {
      auto set = parse_engineer_response(turn.response);
      runtime::bind(spec, set);
      harness::write_file(harness_dir / "bindings.json", runtime::render_manifest(set));
      return set;
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  throw UnbindableSpec("bindings still unusable after " + std::to_string(kFormatRepairAttempts) +
                       " re-asks: " + last_error);
}

std::vector<ContextBlock> fixer_context(const harness::DefectRecord& defect, const harness::Workspace& ws,
                                        const FixerGuidance& guidance, const harness::FailureReport& report) {
  std::vector<ContextBlock> ctx{{"instructions", fixer_instructions(defect)}, {"failure_report", report.render()}};
  auto sources = defect_sources(defect, ws);
  ctx.insert(ctx.end(), sources.begin(), sources.end());
  if (guidance.spec) ctx.push_back({"specification", gherkin::render(*guidance.spec)});
  return ctx;
}

harness::Patch parse_fixer_response(std::string_view response) {
  static constexpr std::string_view kMarker = "--- file:";
  harness::Patch patch;
  auto fences = find_fences(response);
  std::size_t pos = 0;
  std::optional<std::size_t> first_marker;
  while (pos < response.size()) {
    std::size_t nl = response.find('\n', pos);
    std::size_t line_end = nl == std::string_view::npos ? response.size() : nl;
    auto line = text::trim(response.substr(pos, line_end - pos));
    bool inside_fence = std::any_of(fences.begin(), fences.end(),
                                    [&](const Fence& f) { return pos > f.begin && pos < f.end; });
    if (!inside_fence && line.starts_with(kMarker)) {
      if (!first_marker) first_marker = pos;
      std::string path(text::trim(line.substr(kMarker.size())));
      std::size_t next = nl == std::string_view::npos ? response.size() : nl + 1;
      auto fence = std::find_if(fences.begin(), fences.end(), [&](const Fence& f) { return f.begin >= next; });
      if (path.empty() || fence == fences.end() || !text::trim(response.substr(next, fence->begin - next)).empty()) {
        throw MalformedPatch("'--- file:' marker must name a path and be followed by a fenced block");
      }
      for (const auto& e : patch.edits) {
        if (e.path == path) throw MalformedPatch("file '" + path + "' appears twice");
      }
      patch.edits.push_back({path, fence->content, false});
      pos = fence->end;
      continue;
    }
    pos = nl == std::string_view::npos ? response.size() : nl + 1;
  }
  if (patch.edits.empty()) throw MalformedPatch("no '--- file: <path>' block in the response");
  patch.rationale = std::string(text::trim(response.substr(0, *first_marker)));
  return patch;
}

harness::Patch fixer_repair(const harness::DefectRecord& defect, const harness::Workspace& ws,
                            const FixerGuidance& guidance, const harness::FailureReport& report,
                            Backend& backend, Transcript& transcript) {
  if (ws.variant() != harness::Variant::Buggy) throw std::invalid_argument("the fixer works on buggy checkouts");
  auto context = fixer_context(defect, ws, guidance, report);
  std::string last_error;
  for (int i = 0; i <= kFormatRepairAttempts; ++i) {
    auto ctx = i == 0 ? context : with_feedback(context, last_error);
    auto turn = ask(backend, AgentRole::Fixer, ctx, transcript);
    harness::Patch patch;
    try {
      patch = parse_fixer_response(turn.response);
    } catch (const MalformedPatch& e) {
      last_error = e.what();
      continue;
    }
    auto scope = harness::scope_check(patch, defect);
    if (!scope.ok()) throw ScopeViolation(scope.violations);
    return patch;
  }
  throw MalformedPatch("fixer output still malformed after " + std::to_string(kFormatRepairAttempts) +
                       " re-asks: " + last_error);
}

CostRecord account(const Transcript& transcript, AgentRole role) {
  CostRecord rec{role, 0.0, 0, 0};
  for (const auto& t : transcript.turns) {
    if (t.role != role) continue;
    rec.turns += 1;
    rec.tokens += t.prompt_tokens + t.completion_tokens;
    rec.duration_s += t.duration_s;
  }
  return rec;
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  double ms = static_cast<double>(initial_delay.count()) * std::pow(multiplier, retry);
  return std::min(max_delay, std::chrono::milliseconds(static_cast<long long>(ms)));
}

std::string system_prompt(AgentRole role) {
  switch (role) {
    case AgentRole::Architect:
      return "You infer the intended behaviour of defective code and write it down as an executable Gherkin "
             "specification.";
    case AgentRole::Engineer:
      return "You make Gherkin specifications executable by writing step bindings for a given workspace.";
    case AgentRole::Fixer:
      return "You repair a single source file so that the failing behaviour is corrected.";
  }
  return {};
}

}  // namespace anvil::agents
