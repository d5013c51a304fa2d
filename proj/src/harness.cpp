#include "anvil/harness.hpp"

#include <stdlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "anvil/process.hpp"
#include "anvil/step_runtime.hpp"
#include "anvil/text.hpp"

namespace anvil::harness {

using nlohmann::json;

namespace {

bool indented(std::string_view line) {
  return !line.empty() && (line.front() == ' ' || line.front() == '\t');
}

struct TraceBlock {
  std::size_t first_line;
  std::string text;
};

std::vector<TraceBlock> trace_blocks(std::string_view log) {
  static const std::regex exception_header(R"(^[A-Za-z_$][\w$.]*(Exception|Error)(:.*)?$)");
  auto lines = text::split_lines(log);
  std::vector<TraceBlock> blocks;
  std::size_t i = 0;
  while (i < lines.size()) {
    std::string_view line = lines[i];
    bool python = line.starts_with("Traceback (most recent call last):");
    bool java = !python && std::regex_match(line.begin(), line.end(), exception_header);
    if (!python && !java) {
      ++i;
      continue;
    }
    std::vector<std::string> block{std::string(line)};
    std::size_t j = i + 1;
    while (j < lines.size() && indented(lines[j])) block.emplace_back(lines[j++]);
    if (python && j < lines.size() && !text::trim(lines[j]).empty()) block.emplace_back(lines[j++]);
    blocks.push_back({i, text::join(block, "\n")});
    i = j;
  }
  return blocks;
}

std::optional<std::string> json_string(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_string()) return std::nullopt;
  return obj[key].get<std::string>();
}

std::vector<std::string> json_string_list(const json& obj, const char* key, bool& ok) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  if (!obj[key].is_array()) {
    ok = false;
    return out;
  }
  for (const auto& v : obj[key]) {
    if (!v.is_string()) {
      ok = false;
      continue;
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::chrono::milliseconds seconds_field(const json& obj, const char* key, std::chrono::milliseconds fallback) {
  if (!obj.contains(key) || !obj[key].is_number()) return fallback;
  return std::chrono::milliseconds(std::llround(obj[key].get<double>() * 1000.0));
}

std::vector<std::string> expand(std::string_view command, const std::map<std::string, std::string>& vars) {
  std::vector<std::string> argv;
  for (const auto& tok : runtime::tokenize(command)) argv.push_back(runtime::substitute(tok, {}, vars));
  return argv;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Buggy: return "buggy";
    case Variant::Fixed: return "fixed";
    case Variant::Patched: return "patched";
  }
  return "?";
}

std::string_view to_string(AccessPurpose p) {
  switch (p) {
    case AccessPurpose::Repair: return "repair";
    case AccessPurpose::Verification: return "verification";
    case AccessPurpose::Adjudication: return "adjudication";
    case AccessPurpose::CorpusValidation: return "corpus-validation";
  }
  return "?";
}

std::string_view to_string(TestStatus s) {
  switch (s) {
    case TestStatus::Pass: return "Pass";
    case TestStatus::Fail: return "Fail";
    case TestStatus::Error: return "Error";
  }
  return "?";
}

CorpusError::CorpusError(std::vector<std::string> findings)
    : std::runtime_error("invalid corpus: " + (findings.empty() ? std::string("unknown") : findings.front()) +
                         (findings.size() > 1 ? " (+" + std::to_string(findings.size() - 1) + " more)" : "")),
      findings_(std::move(findings)) {}

Workspace::Workspace(fs::path root, Variant variant, std::string defect_id)
    : root_(std::move(root)), variant_(variant), defect_id_(std::move(defect_id)) {}

Workspace::Workspace(Workspace&& other) noexcept
    : root_(std::exchange(other.root_, {})),
      variant_(other.variant_),
      defect_id_(std::move(other.defect_id_)),
      patch_id_(std::move(other.patch_id_)) {}

Workspace& Workspace::operator=(Workspace&& other) noexcept {
  if (this != &other) {
    release();
    root_ = std::exchange(other.root_, {});
    variant_ = other.variant_;
    defect_id_ = std::move(other.defect_id_);
    patch_id_ = std::move(other.patch_id_);
  }
  return *this;
}

Workspace::~Workspace() { release(); }

void Workspace::release() {
  if (root_.empty()) return;
  std::error_code ec;
  fs::remove_all(root_, ec);
  root_.clear();
}

Corpus Corpus::load(const fs::path& manifest) {
  std::vector<std::string> findings;
  json doc;
  try {
    doc = json::parse(read_file(manifest));
  } catch (const std::exception& e) {
    throw CorpusError({"cannot read " + manifest.string() + ": " + e.what()});
  }
  if (!doc.is_object() || !doc.contains("defects") || !doc["defects"].is_array()) {
    throw CorpusError({"manifest needs a 'defects' array"});
  }

  Corpus corpus;
  corpus.root_ = fs::absolute(manifest).parent_path();
  corpus.workspace_dir_ = fs::temp_directory_path() / "spec-anvil";
  std::set<std::string> ids;
  std::size_t index = 0;
  for (const auto& d : doc["defects"]) {
    std::string where = "defect #" + std::to_string(index++);
    if (!d.is_object()) {
      findings.push_back(where + ": not an object");
      continue;
    }
    DefectRecord rec;
    auto need = [&](const char* key) {
      auto v = json_string(d, key);
      if (!v || v->empty()) findings.push_back(where + ": missing string field '" + key + "'");
      return v.value_or("");
    };
    rec.id = need("id");
    if (!rec.id.empty()) where = rec.id;
    rec.project = need("project");
    auto buggy = need("buggy_dir");
    auto fixed = need("fixed_dir");
    rec.buggy_source = corpus.root_ / buggy;
    rec.fixed_source = corpus.root_ / fixed;
    if (!buggy.empty() && fs::path(buggy).lexically_normal() == fs::path(fixed).lexically_normal()) {
      findings.push_back(where + ": buggy_dir and fixed_dir must differ");
    }
    bool lists_ok = true;
    if (!d.contains("failing_tests")) findings.push_back(where + ": missing 'failing_tests'");
    if (!d.contains("modified_files")) findings.push_back(where + ": missing 'modified_files'");
    rec.failing_tests = json_string_list(d, "failing_tests", lists_ok);
    rec.modified_files = json_string_list(d, "modified_files", lists_ok);
    rec.test_files = json_string_list(d, "test_files", lists_ok);
    if (!lists_ok) findings.push_back(where + ": list fields must hold strings");
    if (d.contains("modified_files") && rec.modified_files.empty()) {
      findings.push_back(where + ": 'modified_files' must not be empty");
    }
    for (auto& f : rec.modified_files) {
      auto norm = normalize_relative(f);
      if (norm.empty()) findings.push_back(where + ": modified file '" + f + "' is not workspace-relative");
      f = norm;
    }
    if (!d.contains("test") || !d["test"].is_object()) {
      findings.push_back(where + ": missing 'test' object");
    } else {
      const auto& t = d["test"];
      auto cmd = json_string(t, "cmd");
      if (!cmd || text::trim(*cmd).empty()) findings.push_back(where + ": 'test.cmd' must be non-empty");
      rec.test.test = cmd.value_or("");
      rec.test.setup = json_string(t, "setup");
      rec.test.timeout = seconds_field(t, "timeout_s", rec.test.timeout);
    }
    if (d.contains("probes")) {
      const auto& p = d["probes"];
      auto cmd = p.is_object() ? json_string(p, "cmd") : std::nullopt;
      bool ok = true;
      auto inputs = p.is_object() ? json_string_list(p, "inputs", ok) : std::vector<std::string>{};
      if (!cmd || !ok) {
        findings.push_back(where + ": 'probes' needs 'cmd' and string 'inputs'");
      } else {
        rec.probes = ProbeSuite{*cmd, std::move(inputs)};
      }
    }
    if (d.contains("tags") && d["tags"].is_object()) {
      for (const auto& [k, v] : d["tags"].items()) rec.tags[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (!rec.id.empty() && !ids.insert(rec.id).second) findings.push_back(where + ": duplicate id");
    corpus.defects_.push_back(std::move(rec));
  }
  if (!findings.empty()) throw CorpusError(std::move(findings));
  return corpus;
}

const DefectRecord& Corpus::find(std::string_view id) const {
  for (const auto& d : defects_) {
    if (d.id == id) return d;
  }
  throw UnknownDefect("unknown defect '" + std::string(id) + "'");
}

std::map<std::string, std::string> Corpus::command_vars(const fs::path& workspace) const {
  return {{"workspace", fs::absolute(workspace).string()}, {"corpus", root_.string()}};
}

Workspace Corpus::checkout(const DefectRecord& defect, Variant variant, AccessPurpose purpose) const {
  if (variant == Variant::Patched) throw std::invalid_argument("patched trees are produced by apply_patch");
  if (variant == Variant::Fixed && purpose == AccessPurpose::Repair) {
    throw OracleBoundaryError("the fixed tree of " + defect.id + " is not available to repair");
  }
  if (observer_) observer_({defect.id, variant, purpose});

  const fs::path& source = variant == Variant::Buggy ? defect.buggy_source : defect.fixed_source;
  if (!fs::is_directory(source)) {
    throw std::runtime_error("missing corpus path " + source.string() + " for " + defect.id);
  }
  fs::create_directories(workspace_dir_);
  std::string pattern = (workspace_dir_ / (defect.id + "-" + std::string(to_string(variant)) + "-XXXXXX")).string();
  if (::mkdtemp(pattern.data()) == nullptr) {
    throw std::runtime_error("cannot create workspace under " + workspace_dir_.string());
  }
  Workspace ws(pattern, variant, defect.id);
  std::error_code ec;
  fs::copy(source, ws.root(), fs::copy_options::recursive | fs::copy_options::copy_symlinks, ec);
  if (ec) throw std::runtime_error("copying " + source.string() + ": " + ec.message());
  return ws;
}

TestRunResult run_tests(const Workspace& ws, const TestCommand& cmd,
                        const std::map<std::string, std::string>& vars) {
  TestRunResult result;
  auto all_vars = vars;
  all_vars.try_emplace("workspace", fs::absolute(ws.root()).string());
  process::Options options{ws.root(), {}, cmd.timeout};
  try {
    if (cmd.setup && !text::trim(*cmd.setup).empty()) {
      auto setup = process::run(expand(*cmd.setup, all_vars), options);
      result.raw_log += setup.output;
      result.duration += setup.elapsed;
      if (!setup.ok()) {
        result.status = TestStatus::Error;
        result.detail = "setup failed: " + (setup.detail.empty() ? "exit " + std::to_string(setup.exit_code) : setup.detail);
        return result;
      }
    }
    auto run = process::run(expand(cmd.test, all_vars), options);
    result.raw_log += run.output;
    result.duration += run.elapsed;
    switch (run.status) {
      case process::Status::Exited:
      case process::Status::Signaled:
        result.status = run.ok() ? TestStatus::Pass : TestStatus::Fail;
        break;
      case process::Status::TimedOut:
      case process::Status::SpawnFailed:
        result.status = TestStatus::Error;
        result.detail = run.detail;
        return result;
    }
  } catch (const runtime::TokenizeError& e) {
    result.status = TestStatus::Error;
    result.detail = std::string("bad test command: ") + e.what();
    return result;
  }
  if (result.status == TestStatus::Fail) result.failing_test_names = extract_failing_tests(result.raw_log);
  return result;
}

std::vector<std::string> extract_failing_tests(std::string_view log) {
  static const std::regex listed(R"(^\s*-\s+(\S+)\s*$)");
  static const std::regex header(R"(^\s*Failing tests:\s*\d+\s*$)");
  static const std::regex fail_line(R"(^\s*(?:FAIL:|FAILED)\s+(\S+).*$)");
  std::vector<std::string> names;
  auto add = [&](std::string name) {
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
  };
  auto lines = text::split_lines(log);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line(lines[i]);
    std::smatch m;
    if (std::regex_match(line, header)) {
      while (i + 1 < lines.size()) {
        std::string next(lines[i + 1]);
        if (!std::regex_match(next, m, listed)) break;
        add(m[1].str());
        ++i;
      }
    } else if (std::regex_match(line, m, fail_line)) {
      add(m[1].str());
    }
  }
  return names;
}

std::vector<AssertionDiff> extract_assertion_diffs(std::string_view log) {
  static const std::regex junit(R"(expected:<(.*?)> but was:<(.*?)>)");
  static const std::regex plain(R"(\bexpected\s*[:=]?\s*(\S+?),?\s+actual\s*[:=]?\s*(\S+))", std::regex::icase);
  std::vector<AssertionDiff> diffs;
  for (auto line_view : text::split_lines(log)) {
    std::string line(line_view);
    std::vector<std::pair<std::ptrdiff_t, AssertionDiff>> found;
    for (const auto* re : {&junit, &plain}) {
      for (auto it = std::sregex_iterator(line.begin(), line.end(), *re); it != std::sregex_iterator(); ++it) {
        found.push_back({it->position(), {(*it)[1].str(), (*it)[2].str()}});
      }
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& f : found) diffs.push_back(std::move(f.second));
  }
  return diffs;
}

std::vector<std::string> extract_trace_blocks(std::string_view log) {
  std::vector<std::string> out;
  for (auto& b : trace_blocks(log)) out.push_back(std::move(b.text));
  return out;
}

std::string FailureReport::render() const {
  std::ostringstream out;
  out << "Failing tests:\n";
  if (failing_test_names.empty()) out << "  (none recognized)\n";
  for (const auto& n : failing_test_names) out << "  - " << n << "\n";
  if (!assertion_diffs.empty()) {
    out << "Assertion differences:\n";
    for (const auto& d : assertion_diffs) out << "  - expected <" << d.expected << ">, actual <" << d.actual << ">\n";
  }
  if (!stack_excerpt.empty()) {
    out << "Stack excerpt:\n" << stack_excerpt << "\n";
  } else {
    auto lines = text::split_lines(raw_log);
    std::size_t from = lines.size() > 40 ? lines.size() - 40 : 0;
    out << "Log tail:\n";
    for (std::size_t i = from; i < lines.size(); ++i) out << lines[i] << "\n";
  }
  return out.str();
}

FailureReport collect_failure_report(const TestRunResult& result) {
  if (result.status != TestStatus::Fail) {
    throw std::invalid_argument("a failure report needs a failing test run, got " +
                                std::string(to_string(result.status)));
  }
  FailureReport report;
  report.raw_log = result.raw_log;
  report.failing_test_names = result.failing_test_names;
  report.assertion_diffs = extract_assertion_diffs(result.raw_log);

  auto blocks = trace_blocks(result.raw_log);
  auto lines = text::split_lines(result.raw_log);
  std::vector<std::string> excerpt;
  std::set<std::size_t> used;
  for (const auto& name : result.failing_test_names) {
    std::size_t mention = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].find(name) != std::string_view::npos) {
        mention = i;
        break;
      }
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (blocks[b].first_line < mention) continue;
      if (used.insert(b).second) excerpt.push_back(blocks[b].text);
      break;
    }
  }
  report.stack_excerpt = text::join(excerpt, "\n\n");
  return report;
}

SourceLayout detect_layout(const fs::path& root) {
  auto probe = [&](const std::vector<std::string>& candidates) {
    std::vector<std::string> found;
    for (const auto& c : candidates) {
      if (c.starts_with("*/")) {
        std::string rest = c.substr(2);
        std::error_code ec;
        if (!fs::is_directory(root, ec)) break;
        for (const auto& entry : fs::directory_iterator(root, ec)) {
          if (!entry.is_directory()) continue;
          if (fs::is_directory(entry.path() / rest)) {
            found.push_back(entry.path().filename().string() + "/" + rest);
          }
        }
        std::sort(found.begin(), found.end());
      } else if (fs::is_directory(root / c)) {
        found.push_back(c);
      }
      if (!found.empty()) break;
    }
    return found;
  };
  return {probe({"src/main/java", "*/src/main/java", "src/java", "src"}),
          probe({"src/test/java", "*/src/test/java", "src/test", "test", "tests"})};
}

std::string Patch::id() const {
  std::vector<const FileEdit*> sorted;
  for (const auto& e : edits) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->path < b->path; });
  std::uint64_t h = text::fnv1a("patch");
  for (const auto* e : sorted) {
    h = text::fnv1a(e->path, h);
    h = text::fnv1a(std::string_view("\0", 1), h);
    h = text::fnv1a(e->content, h);
    h = text::fnv1a(std::string_view("\0", 1), h);
  }
  return text::hex(h);
}

std::string normalize_relative(std::string_view path) {
  fs::path p(path);
  if (path.empty() || p.is_absolute()) return {};
  std::vector<std::string> parts;
  for (const auto& part : p) {
    auto s = part.string();
    if (s.empty() || s == ".") continue;
    if (s == "..") return {};
    parts.push_back(s);
  }
  return text::join(parts, "/");
}

Workspace apply_patch(Workspace ws, const Patch& patch) {
  if (ws.variant() != Variant::Buggy) throw std::invalid_argument("patches apply to buggy checkouts only");
  std::set<std::string> seen;
  std::vector<std::pair<fs::path, const FileEdit*>> targets;
  for (const auto& edit : patch.edits) {
    auto rel = normalize_relative(edit.path);
    if (rel.empty()) throw PatchConflict("path '" + edit.path + "' is outside the workspace");
    if (!seen.insert(rel).second) throw PatchConflict("path '" + rel + "' is edited twice");
    fs::path target = ws.root() / rel;
    if (!fs::is_regular_file(target) && !edit.create) {
      throw PatchConflict("path '" + rel + "' does not exist and the edit is not flagged as a creation");
    }
    targets.emplace_back(target, &edit);
  }
  for (const auto& [target, edit] : targets) {
    fs::create_directories(target.parent_path());
    write_file(target, edit->content);
  }
  ws.variant_ = Variant::Patched;
  ws.patch_id_ = patch.id();
  return ws;
}

ScopeCheck scope_check(const Patch& patch, const DefectRecord& defect) {
  ScopeCheck check;
  const std::string scope = defect.modified_files.empty() ? std::string() : normalize_relative(defect.scope_file());
  for (const auto& edit : patch.edits) {
    auto rel = normalize_relative(edit.path);
    if (rel.empty() || rel != scope) check.violations.push_back(edit.path);
  }
  return check;
}

std::string tree_digest(const fs::path& root) {
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      files.emplace_back(fs::relative(entry.path(), root).generic_string(), entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = text::fnv1a("tree");
  for (const auto& [rel, path] : files) {
    h = text::fnv1a(rel, h);
    h = text::fnv1a(std::string_view("\0", 1), h);
    auto content = read_file(path);
    h = text::fnv1a(std::to_string(content.size()), h);
    h = text::fnv1a(content, h);
  }
  return text::hex(h);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::vector<ProbeOutput> run_probes(const Corpus& corpus, const DefectRecord& defect, const Workspace& ws) {
  std::vector<ProbeOutput> outputs;
  if (!defect.probes) return outputs;
  auto vars = corpus.command_vars(ws.root());
  auto base = expand(defect.probes->command, vars);
  for (const auto& input : defect.probes->inputs) {
    auto argv = base;
    argv.push_back(input);
    auto run = process::run(argv, {ws.root(), {}, defect.test.timeout});
    int code = run.status == process::Status::Exited || run.status == process::Status::Signaled ? run.exit_code : -1;
    outputs.push_back({input, code, run.output});
  }
  return outputs;
}

GroundTruthComparison compare_with_ground_truth(const Corpus& corpus, const DefectRecord& defect,
                                                const Workspace& patched, bool use_probes) {
  auto fixed = corpus.checkout(defect, Variant::Fixed, AccessPurpose::Adjudication);
  GroundTruthComparison cmp;
  if (use_probes && defect.probes && !defect.probes->inputs.empty()) {
    cmp.method = "probes";
    auto expected = run_probes(corpus, defect, fixed);
    auto actual = run_probes(corpus, defect, patched);
    cmp.equivalent = true;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (expected[i] == actual[i]) continue;
      cmp.equivalent = false;
      cmp.detail = "probe '" + expected[i].input + "' diverges: expected " + std::string(text::trim(expected[i].output)) +
                   ", got " + std::string(text::trim(actual[i].output));
      break;
    }
    return cmp;
  }
  cmp.method = "identity";
  const auto& scope = defect.scope_file();
  std::error_code ec;
  bool both = fs::is_regular_file(fixed.root() / scope, ec) && fs::is_regular_file(patched.root() / scope, ec);
  cmp.equivalent = both && read_file(fixed.root() / scope) == read_file(patched.root() / scope);
  if (!cmp.equivalent) cmp.detail = scope + " differs from the ground-truth fix";
  return cmp;
}

std::vector<DefectFinding> audit(const Corpus& corpus) {
  std::vector<DefectFinding> findings;
  for (const auto& d : corpus.defects()) {
    auto flag = [&](std::string msg) { findings.push_back({d.id, std::move(msg)}); };
    if (!fs::is_directory(d.buggy_source)) flag("buggy tree missing: " + d.buggy_source.string());
    if (!fs::is_directory(d.fixed_source)) flag("fixed tree missing: " + d.fixed_source.string());
    if (!fs::is_directory(d.buggy_source) || !fs::is_directory(d.fixed_source)) continue;
    const auto& scope = d.scope_file();
    auto buggy_file = d.buggy_source / scope;
    auto fixed_file = d.fixed_source / scope;
    if (!fs::is_regular_file(buggy_file) || !fs::is_regular_file(fixed_file)) {
      flag("modified file " + scope + " missing from a tree");
    } else if (read_file(buggy_file) == read_file(fixed_file)) {
      flag("buggy and fixed trees are identical at " + scope);
    }
    for (const auto& t : d.test_files) {
      if (!fs::is_regular_file(d.buggy_source / t)) flag("test file " + t + " missing from buggy tree");
    }
    try {
      auto buggy = corpus.checkout(d, Variant::Buggy, AccessPurpose::CorpusValidation);
      auto result = run_tests(buggy, d.test, corpus.command_vars(buggy.root()));
      if (result.status != TestStatus::Fail) {
        flag("buggy tree should fail its tests, got " + std::string(to_string(result.status)) +
             (result.detail.empty() ? "" : " (" + result.detail + ")"));
      } else {
        std::set<std::string> expected(d.failing_tests.begin(), d.failing_tests.end());
        std::set<std::string> actual(result.failing_test_names.begin(), result.failing_test_names.end());
        if (expected != actual) flag("failing tests reported by the buggy run differ from the manifest");
      }
      auto fixed = corpus.checkout(d, Variant::Fixed, AccessPurpose::CorpusValidation);
      auto fixed_result = run_tests(fixed, d.test, corpus.command_vars(fixed.root()));
      if (fixed_result.status != TestStatus::Pass) {
        flag("fixed tree should pass its tests, got " + std::string(to_string(fixed_result.status)));
      }
    } catch (const std::exception& e) {
      flag(std::string("cannot run tests: ") + e.what());
    }
  }
  return findings;
}

}  // namespace anvil::harness
