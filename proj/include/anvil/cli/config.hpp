#pragma once

// JSON configuration file:
//   {
//     "corpus_path": "corpus/corpus.json",
//     "backends": {
//       "architect": {"kind": "scripted", "fixtures_dir": "scripts"},
//       "engineer":  {"kind": "scripted", "fixtures_dir": "scripts"},
//       "fixer":     {"kind": "remote", "endpoint": "https://host/v1/chat/completions", "model": "m"}
//     },
//     "max_rqa_attempts": 3,
//     "workers": 1,
//     "run_dir": "runs",
//     "adjudication": {"probes": "on"}
//   }
// Relative paths resolve against the directory holding the file. Remote
// backends read their key from SPEC_ANVIL_API_KEY.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "anvil/agents.hpp"
#include "anvil/pipeline.hpp"

namespace anvil::cli {

namespace fs = std::filesystem;

inline constexpr const char* kApiKeyEnv = "SPEC_ANVIL_API_KEY";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendConfig {
  std::string kind;  // "scripted" or "remote"
  fs::path fixtures_dir;
  std::string endpoint;
  std::string model;
};

struct Config {
  fs::path corpus_path;
  std::map<agents::AgentRole, BackendConfig> backends;
  int max_rqa_attempts = 3;
  int workers = 1;
  fs::path run_dir = "runs";
  bool probes = true;
};

Config parse_config(std::string_view json_text, const fs::path& base_dir);
Config load_config(const fs::path& path);

// Scripted backends sharing a fixtures directory share one instance.
pipeline::Backends make_backends(const Config& config);

pipeline::PipelineConfig pipeline_config(const Config& config, const fs::path& artifacts_dir);

}  // namespace anvil::cli
