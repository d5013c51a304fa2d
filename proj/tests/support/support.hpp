#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "anvil/gherkin.hpp"
#include "anvil/harness.hpp"
#include "anvil/pipeline.hpp"

namespace anvil::testing {

namespace fs = std::filesystem;

fs::path fixtures_dir();
fs::path toy_corpus_dir();
fs::path cli_path();

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const fs::path& p) const { return path_ / p; }

 private:
  fs::path path_;
};

std::string read(const fs::path& path);
void write(const fs::path& path, const std::string& content);

// Toy corpus with checkouts placed under `workspace_dir`.
harness::Corpus toy_corpus(const fs::path& workspace_dir);

pipeline::Backends scripted_backends(const fs::path& scripts_dir);
pipeline::Backends toy_backends(const std::string& scripts = "scripts");

// Writes a config for the toy corpus into `dir` (run_dir = dir/runs).
fs::path write_toy_config(const fs::path& dir, const std::string& scripts = "scripts", int max_rqa_attempts = 3,
                          int workers = 1);

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// In-process.
CliResult cli(const std::vector<std::string>& args);

// Valid spec with 1-4 scenarios of 1-9 steps; And/But never lead a scenario.
gherkin::FeatureSpec random_feature(std::mt19937& rng);

// Inputs that must be rejected with ParseError.
const std::vector<std::string>& malformed_features();

// Line-level edits (drop, duplicate, swap, truncate, byte flips) of `text`.
std::string mutate(const std::string& text, std::mt19937& rng);

}  // namespace anvil::testing

namespace anvil::testing {

// Mockito-5 feature as published, with its wrapped lines.
inline constexpr const char* kVerificationOverTimeFeature = R"(Feature: VerificationOverTimeImpl should
  not strictly depend on JUnit

  To ensure Mockito can be used in
  environments without JUnit (e.g.,
  TestNG, pure Java apps), internal
  classes must not have hard references
  to JUnit classes in their signatures
  or catch blocks that prevent class
  loading when JUnit is absent.

  Scenario: Loading without JUnit
    Given a class loader that explicitly
      excludes "junit" packages
    When I load "VerificationOverTimeImpl"
    Then the class should load successfully
    And no "NoClassDefFoundError" should
      be thrown

  Scenario: Retrying on assertion errors
    Given a verification mode wrapped in
      VerificationOverTimeImpl with timeout
    And the delegate throws an
      "ArgumentsAreDifferent" exception
    When verify is called
    Then the exception should be caught
    And verification should be retried
      until timeout expires
)";

}  // namespace anvil::testing
