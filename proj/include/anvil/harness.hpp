#pragma once

// Defect corpora, isolated workspaces, baseline test runs, failure-report
// extraction, patch application and the single-file repair scope.
//
// Every checkout names a purpose. The fixed (ground-truth) tree may only be
// materialized for sandwich verification, post-repair adjudication, or
// corpus validation; a Repair-purpose checkout of it throws.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace anvil::harness {

namespace fs = std::filesystem;

enum class Variant { Buggy, Fixed, Patched };
enum class AccessPurpose { Repair, Verification, Adjudication, CorpusValidation };

std::string_view to_string(Variant v);
std::string_view to_string(AccessPurpose p);

struct TestCommand {
  std::optional<std::string> setup;
  std::string test;
  std::chrono::milliseconds timeout{300'000};
};

// Hidden differential inputs. Each input is appended to the tokenized
// command as one extra argument; stdout+stderr and the exit code form the
// observable output.
struct ProbeSuite {
  std::string command;
  std::vector<std::string> inputs;
};

struct DefectRecord {
  std::string id;
  std::string project;
  fs::path buggy_source;
  fs::path fixed_source;
  std::vector<std::string> failing_tests;
  // Ordered; the first entry is the repair scope.
  std::vector<std::string> modified_files;
  // Workspace-relative sources of the failing tests, shown to agents.
  std::vector<std::string> test_files;
  TestCommand test;
  std::optional<ProbeSuite> probes;
  std::map<std::string, std::string> tags;

  const std::string& scope_file() const { return modified_files.front(); }
};

class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(std::vector<std::string> findings);
  const std::vector<std::string>& findings() const { return findings_; }

 private:
  std::vector<std::string> findings_;
};

class UnknownDefect : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OracleBoundaryError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class PatchConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Patch;

// A materialized source tree, removed when the owning object is destroyed.
class Workspace {
 public:
  Workspace(fs::path root, Variant variant, std::string defect_id);
  Workspace(Workspace&& other) noexcept;
  Workspace& operator=(Workspace&& other) noexcept;
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
  ~Workspace();

  const fs::path& root() const { return root_; }
  Variant variant() const { return variant_; }
  const std::string& defect_id() const { return defect_id_; }
  // Digest of the patch a Patched workspace was produced from.
  const std::optional<std::string>& patch_id() const { return patch_id_; }

 private:
  friend Workspace apply_patch(Workspace ws, const Patch& patch);

  void release();

  fs::path root_;
  Variant variant_;
  std::string defect_id_;
  std::optional<std::string> patch_id_;
};

struct AccessEvent {
  std::string defect_id;
  Variant variant;
  AccessPurpose purpose;
};

using AccessObserver = std::function<void(const AccessEvent&)>;

class Corpus {
 public:
  // Reads corpus.json; paths are resolved against its directory. Throws
  // CorpusError listing every schema problem found.
  static Corpus load(const fs::path& manifest);

  const std::vector<DefectRecord>& defects() const { return defects_; }
  const DefectRecord& find(std::string_view id) const;
  const fs::path& root() const { return root_; }

  // Isolated copy of the requested tree under the workspace directory.
  Workspace checkout(const DefectRecord& defect, Variant variant, AccessPurpose purpose) const;

  // Called for every checkout, possibly from several threads.
  void set_access_observer(AccessObserver observer) { observer_ = std::move(observer); }
  void set_workspace_dir(fs::path dir) { workspace_dir_ = std::move(dir); }

  // Placeholders available to test and probe commands.
  std::map<std::string, std::string> command_vars(const fs::path& workspace) const;

 private:
  fs::path root_;
  fs::path workspace_dir_;
  std::vector<DefectRecord> defects_;
  AccessObserver observer_;
};

enum class TestStatus { Pass, Fail, Error };

std::string_view to_string(TestStatus s);

struct TestRunResult {
  TestStatus status = TestStatus::Error;
  std::vector<std::string> failing_test_names;
  std::string raw_log;
  std::chrono::milliseconds duration{0};
  std::string detail;
};

// Setup (if any) then test, both with the workspace as working directory.
// Exit 0 is Pass, any other exit is Fail, timeout or spawn failure is Error.
TestRunResult run_tests(const Workspace& ws, const TestCommand& cmd,
                        const std::map<std::string, std::string>& vars = {});

// Failing-test names recognized in a log, in first-seen order:
//   1. entries "  - <name>" following a "Failing tests: <n>" line;
//   2. lines "FAIL: <name>" or "FAILED <name>".
// Unrecognized formats give an empty list.
std::vector<std::string> extract_failing_tests(std::string_view log);

struct AssertionDiff {
  std::string expected;
  std::string actual;

  bool operator==(const AssertionDiff&) const = default;
};

// Patterns "expected:<E> but was:<A>" and "expected E actual A" (optional
// ':' or '=' after either word, optional ',' between).
std::vector<AssertionDiff> extract_assertion_diffs(std::string_view log);

// A trace block starts at "Traceback (most recent call last):" or at a
// line "<qualified.Name>(Exception|Error)[: ...]" and continues over the
// following indented lines; a Traceback block also takes the first
// unindented line after its frames (the exception summary).
std::vector<std::string> extract_trace_blocks(std::string_view log);

struct FailureReport {
  std::string raw_log;
  std::vector<std::string> failing_test_names;
  std::string stack_excerpt;
  std::vector<AssertionDiff> assertion_diffs;

  std::string render() const;
};

// Requires result.status == Fail (std::invalid_argument otherwise).
// stack_excerpt holds, for each failing test, the first trace block at or
// after the first log line naming it; distinct blocks are joined by a
// blank line.
FailureReport collect_failure_report(const TestRunResult& result);

struct SourceLayout {
  std::vector<std::string> source_roots;
  std::vector<std::string> test_roots;

  bool operator==(const SourceLayout&) const = default;
};

// Probes candidates in order and keeps every match of the first candidate
// that matches. Sources: src/main/java, */src/main/java, src/java, src.
// Tests: src/test/java, */src/test/java, src/test, test, tests.
SourceLayout detect_layout(const fs::path& root);

struct FileEdit {
  std::string path;
  std::string content;
  bool create = false;

  bool operator==(const FileEdit&) const = default;
};

struct Patch {
  std::vector<FileEdit> edits;
  std::string rationale;

  std::string id() const;
};

// Whole-file replacement on a Buggy workspace. All edits are checked
// before any file is written. PatchConflict on an unsafe or duplicate path
// or on a missing file whose edit is not flagged `create`.
Workspace apply_patch(Workspace ws, const Patch& patch);

struct ScopeCheck {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Ok iff every edit targets modified_files[0].
ScopeCheck scope_check(const Patch& patch, const DefectRecord& defect);

// Lexically normalized, '/'-separated; empty when the path is absolute or
// escapes its root.
std::string normalize_relative(std::string_view path);

// Digest over sorted (relative path, content) pairs of every regular file.
std::string tree_digest(const fs::path& root);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view content);

struct ProbeOutput {
  std::string input;
  int exit_code = -1;
  std::string output;

  bool operator==(const ProbeOutput&) const = default;
};

std::vector<ProbeOutput> run_probes(const Corpus& corpus, const DefectRecord& defect,
                                    const Workspace& ws);

struct GroundTruthComparison {
  bool equivalent = false;
  std::string method;  // "probes" or "identity"
  std::string detail;
};

// Correctness oracle for a patched tree: with probes enabled and a probe
// suite present, identical probe outputs on the patched and fixed trees;
// otherwise byte-identical content of modified_files[0].
GroundTruthComparison compare_with_ground_truth(const Corpus& corpus, const DefectRecord& defect,
                                                const Workspace& patched, bool use_probes);

struct DefectFinding {
  std::string defect_id;
  std::string message;
};

// Paths exist, buggy and fixed differ at modified_files[0], the buggy tree
// fails and the fixed tree passes its test command, and the buggy run names
// the listed failing tests.
std::vector<DefectFinding> audit(const Corpus& corpus);

}  // namespace anvil::harness
