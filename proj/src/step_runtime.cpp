#include "anvil/step_runtime.hpp"

#include <cmath>
#include <condition_variable>
#include <mutex>
#include <set>

#include <nlohmann/json.hpp>

#include "anvil/process.hpp"
#include "anvil/text.hpp"

namespace anvil::runtime {

using nlohmann::json;

namespace {

bool is_token_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Registry of workspaces with a feature currently executing.
class BusyWorkspaces {
 public:
  class Guard {
   public:
    Guard(BusyWorkspaces& owner, std::string key) : owner_(owner), key_(std::move(key)) {}
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;
    ~Guard() {
      std::lock_guard lock(owner_.mu_);
      owner_.busy_.erase(key_);
    }

   private:
    BusyWorkspaces& owner_;
    std::string key_;
  };

  Guard acquire(const std::filesystem::path& root) {
    std::error_code ec;
    auto canonical = std::filesystem::weakly_canonical(root, ec);
    std::string key = ec ? root.string() : canonical.string();
    std::lock_guard lock(mu_);
    if (!busy_.insert(key).second) {
      throw std::logic_error("a feature is already executing in workspace " + key);
    }
    return Guard(*this, key);
  }

 private:
  std::mutex mu_;
  std::set<std::string> busy_;
};

BusyWorkspaces& busy_workspaces() {
  static BusyWorkspaces registry;
  return registry;
}

std::string display_command(const std::vector<std::string>& argv) {
  std::string out;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (i) out += ' ';
    bool plain = !argv[i].empty() && argv[i].find_first_of(" \t\n\"'\\") == std::string::npos;
    if (plain) {
      out += argv[i];
      continue;
    }
    out += '"';
    for (char c : argv[i]) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    out += '"';
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view command) {
  std::vector<std::string> tokens;
  std::string current;
  bool in_token = false;
  for (std::size_t i = 0; i < command.size(); ++i) {
    char c = command[i];
    if (is_token_space(c)) {
      if (in_token) tokens.push_back(std::move(current));
      current.clear();
      in_token = false;
      continue;
    }
    in_token = true;
    if (c == '\\') {
      if (i + 1 >= command.size()) throw TokenizeError("trailing backslash");
      current += command[++i];
    } else if (c == '\'') {
      auto close = command.find('\'', i + 1);
      if (close == std::string_view::npos) throw TokenizeError("unterminated single quote");
      current.append(command.substr(i + 1, close - i - 1));
      i = close;
    } else if (c == '"') {
      std::size_t j = i + 1;
      for (;; ++j) {
        if (j >= command.size()) throw TokenizeError("unterminated double quote");
        char d = command[j];
        if (d == '"') break;
        if (d == '\\' && j + 1 < command.size() && (command[j + 1] == '"' || command[j + 1] == '\\')) {
          current += command[++j];
          continue;
        }
        current += d;
      }
      i = j;
    } else {
      current += c;
    }
  }
  if (in_token) tokens.push_back(std::move(current));
  return tokens;
}

std::string substitute(std::string_view token, const std::vector<std::string>& captures,
                       const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t i = 0;
  while (i < token.size()) {
    if (token[i] == '{') {
      auto close = token.find('}', i + 1);
      if (close != std::string_view::npos) {
        std::string_view name = token.substr(i + 1, close - i - 1);
        bool numeric = !name.empty() && name.size() < 6 &&
                       name.find_first_not_of("0123456789") == std::string_view::npos;
        if (numeric) {
          std::size_t index = std::stoul(std::string(name));
          if (index >= 1 && index <= captures.size()) {
            out += captures[index - 1];
            i = close + 1;
            continue;
          }
        } else if (auto it = vars.find(std::string(name)); it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += token[i++];
  }
  return out;
}

std::size_t max_placeholder_index(std::string_view command) {
  std::size_t highest = 0;
  std::size_t i = 0;
  while ((i = command.find('{', i)) != std::string_view::npos) {
    auto close = command.find('}', i + 1);
    if (close == std::string_view::npos) break;
    std::string_view name = command.substr(i + 1, close - i - 1);
    if (!name.empty() && name.size() < 6 &&
        name.find_first_not_of("0123456789") == std::string_view::npos) {
      highest = std::max<std::size_t>(highest, std::stoul(std::string(name)));
    }
    i = close + 1;
  }
  return highest;
}

StepBinding StepBinding::make(std::string pattern, std::string command,
                              std::chrono::milliseconds timeout,
                              std::optional<gherkin::StepRole> role) {
  StepBinding b;
  try {
    b.regex_ = std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ManifestError("pattern '" + pattern + "' does not compile: " + e.what());
  }
  if (text::trim(command).empty()) throw ManifestError("binding for '" + pattern + "' has an empty command");
  try {
    tokenize(command);
  } catch (const TokenizeError& e) {
    throw ManifestError("command for '" + pattern + "': " + e.what());
  }
  std::size_t groups = b.regex_.mark_count();
  if (max_placeholder_index(command) > groups) {
    throw ManifestError("command for '" + pattern + "' uses a placeholder beyond its " +
                        std::to_string(groups) + " capture group(s)");
  }
  if (timeout.count() <= 0) throw ManifestError("binding for '" + pattern + "' has a non-positive timeout");
  b.pattern = std::move(pattern);
  b.command_template = std::move(command);
  b.timeout = timeout;
  b.role_constraint = role;
  return b;
}

StepBindingSet parse_manifest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ManifestError(std::string("bindings manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("bindings") || !doc["bindings"].is_array()) {
    throw ManifestError("bindings manifest needs a 'bindings' array");
  }
  StepBindingSet set;
  for (const auto& entry : doc["bindings"]) {
    if (!entry.is_object() || !entry.contains("pattern") || !entry.contains("command") ||
        !entry["pattern"].is_string() || !entry["command"].is_string()) {
      throw ManifestError("each binding needs string 'pattern' and 'command'");
    }
    auto timeout = std::chrono::milliseconds(60'000);
    if (entry.contains("timeout_s")) {
      if (!entry["timeout_s"].is_number()) throw ManifestError("'timeout_s' must be a number");
      timeout = std::chrono::milliseconds(std::llround(entry["timeout_s"].get<double>() * 1000.0));
    }
    std::optional<gherkin::StepRole> role;
    if (entry.contains("role") && !entry["role"].is_null()) {
      if (!entry["role"].is_string()) throw ManifestError("'role' must be a string");
      role = gherkin::parse_role(entry["role"].get<std::string>());
      if (!role) throw ManifestError("unknown role '" + entry["role"].get<std::string>() + "'");
    }
    set.bindings.push_back(StepBinding::make(entry["pattern"].get<std::string>(),
                                             entry["command"].get<std::string>(), timeout, role));
  }
  if (doc.contains("env")) {
    if (!doc["env"].is_object()) throw ManifestError("'env' must be an object");
    for (const auto& [k, v] : doc["env"].items()) {
      if (!v.is_string()) throw ManifestError("env value for '" + k + "' must be a string");
      set.environment[k] = v.get<std::string>();
    }
  }
  return set;
}

std::string render_manifest(const StepBindingSet& set) {
  json doc;
  doc["bindings"] = json::array();
  for (const auto& b : set.bindings) {
    json entry{{"pattern", b.pattern}, {"command", b.command_template}};
    entry["timeout_s"] = static_cast<double>(b.timeout.count()) / 1000.0;
    if (b.role_constraint) entry["role"] = std::string(gherkin::to_string(*b.role_constraint));
    doc["bindings"].push_back(std::move(entry));
  }
  doc["env"] = json::object();
  for (const auto& [k, v] : set.environment) doc["env"][k] = v;
  return doc.dump(2) + "\n";
}

BindingError::BindingError(std::size_t scenario_index, std::size_t step_index, std::string step_text)
    : std::runtime_error("no binding matches step '" + step_text + "' (scenario " +
                         std::to_string(scenario_index) + ", step " + std::to_string(step_index) + ")"),
      scenario_index_(scenario_index),
      step_index_(step_index),
      step_text_(std::move(step_text)) {}

BoundFeature bind(const gherkin::FeatureSpec& spec, const StepBindingSet& bindings) {
  BoundFeature bound;
  bound.title = spec.title;
  bound.environment = bindings.environment;
  for (std::size_t si = 0; si < spec.scenarios.size(); ++si) {
    const auto& sc = spec.scenarios[si];
    BoundScenario bsc{sc.title, {}};
    for (std::size_t ti = 0; ti < sc.steps.size(); ++ti) {
      const auto& step = sc.steps[ti];
      bool matched = false;
      for (std::size_t bi = 0; bi < bindings.bindings.size() && !matched; ++bi) {
        const auto& b = bindings.bindings[bi];
        if (b.role_constraint && *b.role_constraint != step.role) continue;
        std::smatch m;
        if (!std::regex_match(step.text, m, b.regex())) continue;
        BoundStep bs;
        bs.step = step;
        bs.binding_index = bi;
        bs.argv_template = tokenize(b.command_template);
        for (std::size_t g = 1; g < m.size(); ++g) bs.captures.push_back(m[g].str());
        bs.timeout = b.timeout;
        bsc.steps.push_back(std::move(bs));
        matched = true;
      }
      if (!matched) throw BindingError(si, ti, step.text);
    }
    bound.scenarios.push_back(std::move(bsc));
  }
  return bound;
}

std::string_view to_string(ScenarioStatus s) {
  switch (s) {
    case ScenarioStatus::Pass: return "Pass";
    case ScenarioStatus::AssertionFail: return "AssertionFail";
    case ScenarioStatus::SetupError: return "SetupError";
  }
  return "?";
}

std::string_view to_string(SpecOutcome o) {
  switch (o) {
    case SpecOutcome::AllPass: return "AllPass";
    case SpecOutcome::AnyAssertionFail: return "AnyAssertionFail";
    case SpecOutcome::Error: return "Error";
  }
  return "?";
}

FeatureRunReport execute(const BoundFeature& bound, const std::filesystem::path& workspace) {
  auto started = std::chrono::steady_clock::now();
  auto root = std::filesystem::absolute(workspace);
  auto guard = busy_workspaces().acquire(root);
  const std::map<std::string, std::string> vars{{"workspace", root.string()}};

  FeatureRunReport report;
  report.feature_title = bound.title;
  for (const auto& sc : bound.scenarios) {
    ScenarioResult result;
    result.scenario_title = sc.title;
    for (std::size_t i = 0; i < sc.steps.size(); ++i) {
      const auto& step = sc.steps[i];
      std::vector<std::string> argv;
      for (const auto& tok : step.argv_template) argv.push_back(substitute(tok, step.captures, vars));
      auto run = process::run(argv, {root, bound.environment, step.timeout});
      result.step_logs.push_back({display_command(argv), run.exit_code, run.output + run.detail});
      if (run.ok()) continue;
      result.failed_step_index = i;
      if (run.status == process::Status::TimedOut) {
        result.status = ScenarioStatus::SetupError;
        result.failure_tag = "timeout";
      } else if (run.status == process::Status::SpawnFailed) {
        result.status = ScenarioStatus::SetupError;
        result.failure_tag = "spawn";
      } else {
        result.status = step.step.role == gherkin::StepRole::Assertion ? ScenarioStatus::AssertionFail
                                                                       : ScenarioStatus::SetupError;
        result.failure_tag = "exit";
      }
      break;
    }
    report.scenario_results.push_back(std::move(result));
  }
  report.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return report;
}

SpecOutcome outcome(const FeatureRunReport& report) {
  bool assertion_failed = false;
  for (const auto& r : report.scenario_results) {
    if (r.status == ScenarioStatus::SetupError) return SpecOutcome::Error;
    assertion_failed |= r.status == ScenarioStatus::AssertionFail;
  }
  return assertion_failed ? SpecOutcome::AnyAssertionFail : SpecOutcome::AllPass;
}

}  // namespace anvil::runtime
