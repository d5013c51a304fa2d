#include "support.hpp"

#include <stdlib.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "anvil/cli/cli.hpp"
#include "anvil/text.hpp"

namespace anvil::testing {

fs::path fixtures_dir() { return ANVIL_FIXTURES_DIR; }
fs::path toy_corpus_dir() { return fixtures_dir() / "toy-corpus"; }
fs::path cli_path() { return ANVIL_CLI_PATH; }

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "anvil-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

harness::Corpus toy_corpus(const fs::path& workspace_dir) {
  auto corpus = harness::Corpus::load(toy_corpus_dir() / "corpus.json");
  corpus.set_workspace_dir(workspace_dir);
  return corpus;
}

pipeline::Backends scripted_backends(const fs::path& scripts_dir) {
  auto b = std::make_shared<agents::ScriptedBackend>(scripts_dir);
  return {b, b, b};
}

pipeline::Backends toy_backends(const std::string& scripts) { return scripted_backends(toy_corpus_dir() / scripts); }

fs::path write_toy_config(const fs::path& dir, const std::string& scripts, int max_rqa_attempts, int workers) {
  nlohmann::json backend = {{"kind", "scripted"}, {"fixtures_dir", (toy_corpus_dir() / scripts).string()}};
  nlohmann::json cfg = {{"corpus_path", (toy_corpus_dir() / "corpus.json").string()},
                        {"backends", {{"architect", backend}, {"engineer", backend}, {"fixer", backend}}},
                        {"max_rqa_attempts", max_rqa_attempts},
                        {"workers", workers},
                        {"run_dir", (dir / "runs").string()},
                        {"adjudication", {{"probes", "on"}}}};
  auto path = dir / "config.json";
  write(path, cfg.dump(2));
  return path;
}

CliResult cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"spec-anvil"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

namespace {

const std::vector<std::string> kWords{"the", "parser", "returns", "value", "\"quoted\"", "42", "-1", "(x)", "list",
                                      "empty", "string", "raises", "ValueError", "a", "calls", "is", "not",
                                      "3.14", "[1,", "2]", "'single'", "key=value", "path/to/file", "unicode:é"};

std::string phrase(std::mt19937& rng, int min_words, int max_words) {
  std::uniform_int_distribution<int> count(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::string out;
  for (int i = count(rng); i > 0; --i) {
    if (!out.empty()) out += ' ';
    out += kWords[pick(rng)];
  }
  return out;
}

}  // namespace

gherkin::FeatureSpec random_feature(std::mt19937& rng) {
  using gherkin::Keyword;
  auto roll = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  gherkin::FeatureSpec spec;
  spec.title = phrase(rng, 1, 6);
  std::vector<std::string> lines;
  for (int p = roll(0, 2); p > 0; --p) {
    if (!lines.empty()) lines.push_back("");
    for (int l = roll(1, 3); l > 0; --l) lines.push_back(phrase(rng, 1, 7));
  }
  for (std::size_t i = 0; i < lines.size(); ++i) spec.description += (i ? "\n" : "") + lines[i];

  const Keyword leading[] = {Keyword::Given, Keyword::When, Keyword::Then};
  const Keyword any[] = {Keyword::Given, Keyword::When, Keyword::Then, Keyword::And, Keyword::But};
  for (int sc = roll(1, 4); sc > 0; --sc) {
    gherkin::Scenario scenario;
    scenario.title = "case " + std::to_string(spec.scenarios.size() + 1);
    if (auto extra = phrase(rng, 0, 4); !extra.empty()) scenario.title += " " + extra;
    std::optional<gherkin::StepRole> previous;
    for (int st = roll(1, 9); st > 0; --st) {
      Keyword k = previous ? any[roll(0, 4)] : leading[roll(0, 2)];
      auto role = gherkin::resolve_role(k, previous);
      scenario.steps.push_back({k, phrase(rng, 1, 10), role});
      previous = role;
    }
    spec.scenarios.push_back(std::move(scenario));
  }
  return spec;
}

const std::vector<std::string>& malformed_features() {
  static const std::vector<std::string> cases{
      "",
      "\n\n# only a comment\n",
      "Scenario: s\n  Given a\n",
      "Feature: f\n",
      "Feature: f\n  some description\n",
      "Feature: f\n  Scenario: s\n",
      "Feature: f\n  Scenario: s\n    And a\n",
      "Feature: f\n  Scenario: s\n    But a\n",
      "Feature: f\n  Scenario: s\n    Given a\n  Scenario: s\n    Given b\n",
      "Feature: f\n  Scenario: s\n    Whenever a\n",
      "Feature: f\nFeature: g\n  Scenario: s\n    Given a\n",
      "Feature: f\n  Background:\n    Given a\n  Scenario: s\n    Given a\n",
      "Feature: f\n  Scenario Outline: s\n    Given <a>\n    Examples:\n      | a |\n",
      "Feature: f\n  Scenario: s\n    Given a\n      | x |\n",
      "Feature: f\n  Scenario: s\n    Given a\n    \"\"\"\n    x\n    \"\"\"\n",
      "Feature: f\n  @tag\n  Scenario: s\n    Given a\n",
      "@tag\nFeature: f\n  Scenario: s\n    Given a\n",
      "Feature: f\n  Scenario: s\n    Given\n",
      "Feature: f\n  Rule: r\n  Scenario: s\n    Given a\n",
      "Feature f\n  Scenario: s\n    Given a\n",
      "\xff\xfe\x00F\x00",
  };
  return cases;
}

std::string mutate(const std::string& text, std::mt19937& rng) {
  auto roll = [&](std::size_t hi) { return std::uniform_int_distribution<std::size_t>(0, hi)(rng); };
  std::vector<std::string> lines;
  for (auto l : text::split_lines(text)) lines.emplace_back(l);
  if (lines.empty()) lines.emplace_back();
  for (int edits = static_cast<int>(roll(3)) + 1; edits > 0; --edits) {
    std::size_t i = roll(lines.size() - 1);
    switch (roll(5)) {
      case 0: lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(i)); break;
      case 1: lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(i), lines[i]); break;
      case 2: std::swap(lines[i], lines[roll(lines.size() - 1)]); break;
      case 3: lines[i] = lines[i].substr(0, roll(lines[i].size())); break;
      case 4:
        if (!lines[i].empty()) lines[i][roll(lines[i].size() - 1)] = static_cast<char>(roll(255));
        break;
      default: lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(i), std::string(roll(8), ' ') + "|"); break;
    }
    if (lines.empty()) lines.emplace_back();
  }
  return text::join(lines, "\n");
}

}  // namespace anvil::testing
