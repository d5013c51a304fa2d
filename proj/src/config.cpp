#include "anvil/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace anvil::cli {

using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

int positive_int(const json& doc, const char* key, int fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc[key].is_number_integer() || doc[key].get<int>() < 1) {
    throw ConfigError(std::string("'") + key + "' must be a positive integer");
  }
  return doc[key].get<int>();
}

}  // namespace

Config parse_config(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  Config c;
  if (!doc.contains("corpus_path") || !doc["corpus_path"].is_string()) {
    throw ConfigError("'corpus_path' is required");
  }
  c.corpus_path = resolve(base_dir, doc["corpus_path"].get<std::string>());
  if (doc.contains("run_dir")) {
    if (!doc["run_dir"].is_string()) throw ConfigError("'run_dir' must be a string");
    c.run_dir = doc["run_dir"].get<std::string>();
  }
  c.run_dir = resolve(base_dir, c.run_dir.string());
  c.max_rqa_attempts = positive_int(doc, "max_rqa_attempts", 3);
  c.workers = positive_int(doc, "workers", 1);
  if (doc.contains("adjudication")) {
    const auto& adj = doc["adjudication"];
    if (!adj.is_object()) throw ConfigError("'adjudication' must be an object");
    if (adj.contains("probes")) {
      auto p = adj["probes"].is_string() ? adj["probes"].get<std::string>() : "";
      if (p != "on" && p != "off") throw ConfigError("'adjudication.probes' must be \"on\" or \"off\"");
      c.probes = p == "on";
    }
  }
  if (!doc.contains("backends") || !doc["backends"].is_object()) throw ConfigError("'backends' is required");
  for (auto role : agents::kAllRoles) {
    std::string key = std::string(agents::to_string(role));
    for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (!doc["backends"].contains(key)) throw ConfigError("no backend configured for role '" + key + "'");
    const auto& b = doc["backends"][key];
    if (!b.is_object()) throw ConfigError("backend '" + key + "' must be an object");
    BackendConfig bc;
    bc.kind = b.value("kind", "");
    if (bc.kind == "scripted") {
      if (!b.contains("fixtures_dir") || !b["fixtures_dir"].is_string()) {
        throw ConfigError("scripted backend '" + key + "' needs fixtures_dir");
      }
      bc.fixtures_dir = resolve(base_dir, b["fixtures_dir"].get<std::string>());
    } else if (bc.kind == "remote") {
      bc.endpoint = b.value("endpoint", "");
      bc.model = b.value("model", "");
      if (bc.endpoint.empty() || bc.model.empty()) {
        throw ConfigError("remote backend '" + key + "' needs endpoint and model");
      }
    } else {
      throw ConfigError("backend '" + key + "' has unknown kind '" + bc.kind + "'");
    }
    c.backends[role] = bc;
  }
  return c;
}

Config load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_config(ss.str(), fs::absolute(base));
}

pipeline::Backends make_backends(const Config& config) {
  std::map<fs::path, std::shared_ptr<agents::Backend>> scripted;
  auto make = [&](agents::AgentRole role) -> std::shared_ptr<agents::Backend> {
    const auto& bc = config.backends.at(role);
    if (bc.kind == "scripted") {
      auto& slot = scripted[bc.fixtures_dir];
      if (!slot) slot = std::make_shared<agents::ScriptedBackend>(bc.fixtures_dir);
      return slot;
    }
    agents::RemoteChatConfig rc;
    rc.endpoint = bc.endpoint;
    rc.model = bc.model;
    const char* key = std::getenv(kApiKeyEnv);
    if (!key || !*key) throw ConfigError(std::string("remote backends need ") + kApiKeyEnv + " to be set");
    rc.api_key = key;
    return std::make_shared<agents::RemoteChatBackend>(rc);
  };
  return {make(agents::AgentRole::Architect), make(agents::AgentRole::Engineer), make(agents::AgentRole::Fixer)};
}

pipeline::PipelineConfig pipeline_config(const Config& config, const fs::path& artifacts_dir) {
  pipeline::PipelineConfig pc;
  pc.max_rqa_attempts = config.max_rqa_attempts;
  pc.use_probes = config.probes;
  pc.artifacts_dir = artifacts_dir;
  return pc;
}

}  // namespace anvil::cli
