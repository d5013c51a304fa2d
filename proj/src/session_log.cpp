#include "anvil/cli/session_log.hpp"

#include <sstream>

#include "anvil/text.hpp"

namespace anvil::cli {

using nlohmann::json;
using pipeline::RepairSession;

namespace {

template <typename T>
T parse_enum(const json& j, const char* key, std::optional<T> (*parse)(std::string_view)) {
  auto v = parse(j.at(key).get<std::string>());
  if (!v) throw std::invalid_argument(std::string("bad value for '") + key + "'");
  return *v;
}

}  // namespace

json session_to_json(const RepairSession& s) {
  json j;
  j["session_id"] = s.session_id;
  j["defect_id"] = s.defect_id;
  j["project"] = s.project;
  j["mode"] = pipeline::to_string(s.mode);
  j["outcome"] = pipeline::to_string(s.outcome);
  j["detail"] = s.detail;
  j["degraded"] = s.degraded;
  j["rqa_status"] = pipeline::to_string(s.rqa_status);
  if (s.rqa) {
    json verdicts = json::array();
    for (const auto& r : *s.rqa) {
      verdicts.push_back({{"attempt", r.attempt_index},
                          {"kind", rqa::to_string(r.verdict.kind)},
                          {"side", r.verdict.side ? json(rqa::to_string(*r.verdict.side)) : json(nullptr)},
                          {"detail", r.verdict.detail}});
    }
    j["verdicts"] = verdicts;
  }
  j["spec"] = s.spec ? json(gherkin::render(*s.spec)) : json(nullptr);
  if (s.patch) {
    json files = json::array();
    for (const auto& e : s.patch->edits) files.push_back({{"path", e.path}, {"content", e.content}});
    j["patch"] = {{"rationale", s.patch->rationale}, {"files", files}};
  } else {
    j["patch"] = nullptr;
  }
  json events = json::array();
  for (const auto& e : s.fallback_events) events.push_back({{"kind", pipeline::to_string(e.kind)}, {"detail", e.detail}});
  j["fallback_events"] = events;
  j["scope_violations"] = s.scope_violations;
  json costs = json::array();
  for (const auto& c : s.costs) {
    costs.push_back({{"role", agents::to_string(c.role)},
                     {"duration_s", c.duration_s},
                     {"turns", c.turns},
                     {"tokens", c.tokens}});
  }
  j["costs"] = costs;
  j["started_at"] = s.started_at;
  j["finished_at"] = s.finished_at;
  j["elapsed_s"] = s.elapsed_s;
  j["tree_before_fix"] = s.tree_before_fix;
  j["tree_after_fix"] = s.tree_after_fix;
  j["artifacts"] = s.artifacts;
  return j;
}

RepairSession session_from_json(const json& j) {
  try {
    RepairSession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.defect_id = j.at("defect_id").get<std::string>();
    s.project = j.at("project").get<std::string>();
    s.mode = parse_enum<pipeline::Mode>(j, "mode", pipeline::parse_mode);
    s.outcome = parse_enum<pipeline::Outcome>(j, "outcome", pipeline::parse_outcome);
    s.detail = j.value("detail", "");
    s.degraded = j.value("degraded", false);
    s.rqa_status = parse_enum<pipeline::RqaStatus>(j, "rqa_status", pipeline::parse_rqa_status);
    if (j.contains("verdicts")) {
      std::vector<rqa::RQAResult> history;
      for (const auto& v : j["verdicts"]) {
        rqa::RQAResult r;
        r.attempt_index = v.at("attempt").get<int>();
        auto kind = v.at("kind").get<std::string>();
        bool found = false;
        for (auto k : {rqa::VerdictKind::Validated, rqa::VerdictKind::SpecTooWeak, rqa::VerdictKind::SpecMisaligned,
                       rqa::VerdictKind::HarnessError}) {
          if (rqa::to_string(k) == kind) {
            r.verdict.kind = k;
            found = true;
          }
        }
        if (!found) throw std::invalid_argument("bad verdict kind '" + kind + "'");
        if (!v.at("side").is_null()) {
          r.verdict.side = v["side"].get<std::string>() == "Fixed" ? rqa::Side::Fixed : rqa::Side::Buggy;
        }
        r.verdict.detail = v.value("detail", "");
        history.push_back(std::move(r));
      }
      s.rqa = std::move(history);
    }
    if (j.contains("spec") && !j["spec"].is_null()) s.spec = gherkin::parse(j["spec"].get<std::string>());
    if (j.contains("patch") && !j["patch"].is_null()) {
      harness::Patch p;
      p.rationale = j["patch"].value("rationale", "");
      for (const auto& f : j["patch"].at("files")) {
        p.edits.push_back({f.at("path").get<std::string>(), f.at("content").get<std::string>(), false});
      }
      s.patch = std::move(p);
    }
    for (const auto& e : j.value("fallback_events", json::array())) {
      s.fallback_events.push_back(
          {parse_enum<pipeline::FallbackKind>(e, "kind", pipeline::parse_fallback_kind), e.value("detail", "")});
    }
    s.scope_violations = j.value("scope_violations", std::vector<std::string>{});
    for (const auto& c : j.value("costs", json::array())) {
      auto role = agents::parse_agent_role(c.at("role").get<std::string>());
      if (!role) throw std::invalid_argument("bad cost role");
      s.costs.push_back({*role, c.at("duration_s").get<double>(), c.at("turns").get<long long>(),
                         c.at("tokens").get<long long>()});
    }
    s.started_at = j.value("started_at", "");
    s.finished_at = j.value("finished_at", "");
    s.elapsed_s = j.value("elapsed_s", 0.0);
    s.tree_before_fix = j.value("tree_before_fix", "");
    s.tree_after_fix = j.value("tree_after_fix", "");
    s.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed session record: ") + e.what());
  } catch (const gherkin::ParseError& e) {
    throw std::invalid_argument(std::string("session record holds an unparsable spec: ") + e.what());
  }
}

std::vector<RepairSession> parse_sessions(std::string_view jsonl) {
  std::vector<RepairSession> out;
  auto lines = text::split_lines(jsonl);
  bool unterminated = !jsonl.empty() && jsonl.back() != '\n';
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      out.push_back(session_from_json(json::parse(lines[i])));
    } catch (const std::exception& e) {
      if (unterminated && i + 1 == lines.size()) break;
      throw std::invalid_argument("sessions log line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RepairSession> load_sessions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sessions(ss.str());
}

SessionLogWriter::SessionLogWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Drop a record cut short by an interrupted run before appending.
  std::error_code ec;
  if (std::filesystem::is_regular_file(path, ec)) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    auto content = ss.str();
    if (!content.empty() && content.back() != '\n') {
      auto keep = content.rfind('\n');
      std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
    }
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for appending");
}

void SessionLogWriter::append(const RepairSession& s) {
  std::lock_guard lock(mutex_);
  out_ << session_to_json(s).dump() << '\n';
  out_.flush();
}

}  // namespace anvil::cli
