#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace anvil::process {

struct Options {
  std::filesystem::path cwd;
  // Applied on top of the parent environment.
  std::map<std::string, std::string> env;
  std::chrono::milliseconds timeout{60'000};
};

enum class Status { Exited, Signaled, TimedOut, SpawnFailed };

struct Result {
  Status status = Status::SpawnFailed;
  int exit_code = -1;
  // stdout and stderr, interleaved as written.
  std::string output;
  std::string detail;
  std::chrono::milliseconds elapsed{0};

  bool ok() const { return status == Status::Exited && exit_code == 0; }
};

// Runs argv[0] (looked up on PATH) directly, without a shell. The child
// gets its own process group, which is killed on timeout.
Result run(std::span<const std::string> argv, const Options& options);

}  // namespace anvil::process
