#include "anvil/metrics.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "anvil/text.hpp"

namespace anvil::metrics {

using nlohmann::json;

namespace {

bool get_bool(const json& obj, const char* key, bool required) {
  if (!obj.contains(key)) {
    if (required) throw std::invalid_argument(std::string("missing field '") + key + "'");
    return false;
  }
  if (!obj[key].is_boolean()) throw std::invalid_argument(std::string("field '") + key + "' must be a boolean");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_string() || obj[key].get<std::string>().empty()) {
    throw std::invalid_argument(std::string("field '") + key + "' must be a non-empty string");
  }
  return obj[key].get<std::string>();
}

void check_invariants(const OutcomeRecord& r) {
  if (r.enlightened_correct && !r.enlightened_attempted) {
    throw std::invalid_argument(r.defect_id + ": enlightened_correct without enlightened_attempted");
  }
  if (r.enlightened_attempted && r.blind_correct) {
    throw std::invalid_argument(r.defect_id + ": enlightened attempt on a blind success");
  }
  if (r.enlightened_degraded && !r.enlightened_attempted) {
    throw std::invalid_argument(r.defect_id + ": enlightened_degraded without enlightened_attempted");
  }
}

bool counts_as_rescue(const OutcomeRecord& r, bool include_degraded) {
  return !r.blind_correct && r.enlightened_correct && (include_degraded || !r.enlightened_degraded);
}

Micro round_div(std::int64_t num, std::int64_t den) {
  // Half-up for non-negative operands.
  return (2 * num + den) / (2 * den);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string rate_cell(const std::optional<Rate>& r, int places, bool percent_sign) {
  if (!r) return "undefined";
  return r->display(places) + (percent_sign ? "%" : "");
}

std::size_t count_degraded(std::span<const OutcomeRecord> records) {
  std::size_t n = 0;
  for (const auto& r : records) n += (!r.blind_correct && r.enlightened_correct && r.enlightened_degraded) ? 1 : 0;
  return n;
}

}  // namespace

RecordError::RecordError(std::size_t line, const std::string& reason)
    : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line) {}

std::vector<OutcomeRecord> parse_outcomes(std::string_view jsonl) {
  std::vector<OutcomeRecord> out;
  auto lines = text::split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      auto obj = json::parse(lines[i]);
      if (!obj.is_object()) throw std::invalid_argument("record must be a JSON object");
      OutcomeRecord r;
      r.defect_id = get_string(obj, "defect_id");
      r.project = get_string(obj, "project");
      r.blind_correct = get_bool(obj, "blind_correct", true);
      r.enlightened_attempted = get_bool(obj, "enlightened_attempted", true);
      r.enlightened_correct = get_bool(obj, "enlightened_correct", true);
      r.enlightened_degraded = get_bool(obj, "enlightened_degraded", false);
      check_invariants(r);
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw RecordError(i + 1, e.what());
    } catch (const std::invalid_argument& e) {
      throw RecordError(i + 1, e.what());
    }
  }
  return out;
}

std::vector<OutcomeRecord> load_outcomes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_outcomes(ss.str());
}

std::string outcome_to_json(const OutcomeRecord& r) {
  json obj = {{"defect_id", r.defect_id},
              {"project", r.project},
              {"blind_correct", r.blind_correct},
              {"enlightened_attempted", r.enlightened_attempted},
              {"enlightened_correct", r.enlightened_correct},
              {"enlightened_degraded", r.enlightened_degraded}};
  return obj.dump();
}

std::string Rate::display(int places) const { return text::format_ratio(num * 100, den, places); }

std::optional<Rate> fix_rate(std::uint64_t correct, std::uint64_t total) {
  if (total == 0) return std::nullopt;
  if (correct > total) throw std::invalid_argument("correct count exceeds total");
  return Rate{correct, total};
}

std::optional<Rate> rescue_rate(std::span<const OutcomeRecord> records, bool include_degraded) {
  std::uint64_t num = 0, den = 0;
  for (const auto& r : records) {
    if (r.blind_correct) continue;
    ++den;
    if (counts_as_rescue(r, include_degraded)) ++num;
  }
  if (den == 0) return std::nullopt;
  return Rate{num, den};
}

ProjectTable project_table(std::span<const OutcomeRecord> records, bool include_degraded) {
  ProjectTable table;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    if (r.project.empty()) throw std::invalid_argument("record " + r.defect_id + " has no project");
    check_invariants(r);
    auto [it, inserted] = index.try_emplace(r.project, table.rows.size());
    if (inserted) table.rows.push_back(ProjectRow{r.project});
    for (ProjectRow* row : {&table.rows[it->second], &table.total}) {
      row->bugs += 1;
      if (r.blind_correct) {
        row->blind_success += 1;
      } else {
        row->blind_fail += 1;
      }
      if (counts_as_rescue(r, include_degraded)) row->rescued += 1;
      row->total = row->blind_success + row->rescued;
    }
  }
  return table;
}

Micro to_micro(double value) { return static_cast<Micro>(std::llround(value * static_cast<double>(kMicro))); }

std::string format_micro(Micro value, int places) {
  if (value < 0) return "-" + format_micro(-value, places);
  return text::format_ratio(static_cast<std::uint64_t>(value), kMicro, places);
}

std::optional<CostBreakdown> cost_breakdown(std::span<const std::vector<agents::CostRecord>> sessions) {
  if (sessions.empty()) return std::nullopt;
  struct Sums {
    Micro duration = 0;
    std::int64_t turns = 0;
    std::int64_t tokens = 0;
    bool seen = false;
  };
  std::map<agents::AgentRole, Sums> sums;
  std::int64_t grand_tokens = 0;
  for (const auto& session : sessions) {
    for (const auto& c : session) {
      auto& s = sums[c.role];
      s.seen = true;
      s.duration += to_micro(c.duration_s);
      s.turns += c.turns;
      s.tokens += c.tokens;
      grand_tokens += c.tokens;
    }
  }
  if (grand_tokens <= 0) return std::nullopt;
  auto n = static_cast<std::int64_t>(sessions.size());
  CostBreakdown out;
  out.sessions = sessions.size();
  for (auto role : agents::kAllRoles) {
    auto it = sums.find(role);
    if (it == sums.end()) continue;
    RoleCost rc;
    rc.role = role;
    rc.avg_duration_s = round_div(it->second.duration, n);
    rc.avg_turns = round_div(it->second.turns * kMicro, n);
    rc.avg_tokens = round_div(it->second.tokens * kMicro, n);
    rc.ratio = Rate{static_cast<std::uint64_t>(it->second.tokens), static_cast<std::uint64_t>(grand_tokens)};
    out.total_duration_s += rc.avg_duration_s;
    out.total_turns += rc.avg_turns;
    out.total_tokens += rc.avg_tokens;
    out.roles.push_back(rc);
  }
  return out;
}

CostAverages parse_cost_averages(std::string_view json_text) {
  CostAverages out;
  try {
    auto doc = json::parse(json_text);
    out.sessions = doc.at("sessions").get<std::uint64_t>();
    for (const auto& r : doc.at("roles")) {
      RoleAverages ra;
      auto role = agents::parse_agent_role(r.at("role").get<std::string>());
      if (!role) throw std::invalid_argument("unknown role '" + r.at("role").get<std::string>() + "'");
      ra.role = *role;
      ra.avg_duration_s = r.at("avg_duration_s").get<double>();
      ra.avg_turns = r.at("avg_turns").get<double>();
      ra.avg_tokens = r.at("avg_tokens").get<double>();
      if (ra.avg_duration_s < 0 || ra.avg_turns < 0 || ra.avg_tokens < 0) {
        throw std::invalid_argument("averages must be non-negative");
      }
      for (const auto& seen : out.roles) {
        if (seen.role == ra.role) throw std::invalid_argument("role listed twice");
      }
      out.roles.push_back(ra);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("cost file: ") + e.what());
  }
  return out;
}

CostAverages load_cost_averages(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_cost_averages(ss.str());
}

std::optional<CostBreakdown> cost_breakdown(const CostAverages& averages) {
  if (averages.roles.empty()) return std::nullopt;
  CostBreakdown out;
  out.sessions = averages.sessions;
  Micro grand_tokens = 0;
  for (const auto& r : averages.roles) grand_tokens += to_micro(r.avg_tokens);
  if (grand_tokens <= 0) return std::nullopt;
  for (auto role : agents::kAllRoles) {
    for (const auto& r : averages.roles) {
      if (r.role != role) continue;
      RoleCost rc;
      rc.role = role;
      rc.avg_duration_s = to_micro(r.avg_duration_s);
      rc.avg_turns = to_micro(r.avg_turns);
      rc.avg_tokens = to_micro(r.avg_tokens);
      rc.ratio = Rate{static_cast<std::uint64_t>(rc.avg_tokens), static_cast<std::uint64_t>(grand_tokens)};
      out.total_duration_s += rc.avg_duration_s;
      out.total_turns += rc.avg_turns;
      out.total_tokens += rc.avg_tokens;
      out.roles.push_back(rc);
    }
  }
  return out;
}

std::optional<Format> parse_format(std::string_view s) {
  auto l = text::to_lower(s);
  if (l == "markdown" || l == "md") return Format::Markdown;
  if (l == "csv") return Format::Csv;
  return std::nullopt;
}

std::string render_report(const ReportInput& input, Format format) {
  std::ostringstream out;
  const auto& records = input.records;
  bool md = format == Format::Markdown;
  if (md) out << "# Repair campaign report\n\n";

  if (records.empty()) {
    out << (md ? "Outcomes: no sessions recorded.\n" : "# no sessions\n");
  } else {
    auto table = project_table(records, input.include_degraded);
    auto rescue = rescue_rate(records, input.include_degraded);
    auto degraded = count_degraded(records);
    if (md) {
      out << "## Fix rate by project\n\n"
          << "| Project | Bugs | Blind Succ. | Blind Fail | Enl. Rescue | Total | Rate |\n"
          << "|---|---:|---:|---:|---:|---:|---:|\n";
      auto row = [&](const ProjectRow& r, const std::string& name, int places) {
        out << "| " << name << " | " << r.bugs << " | " << r.blind_success << " | " << r.blind_fail << " | "
            << r.rescued << " | " << r.total << " | " << rate_cell(r.rate(), places, true) << " |\n";
      };
      for (const auto& r : table.rows) row(r, r.project, 1);
      row(table.total, "**Total**", 2);
      out << "\n## Rescue rate\n\n";
      if (rescue) {
        out << "Rescued " << rescue->num << " of " << rescue->den << " blind failures: " << rescue->display(1)
            << "% (exact " << rescue->num << "/" << rescue->den << ").\n";
      } else {
        out << "Rescue rate: undefined (no blind failures).\n";
      }
      out << "Enlightened fixes without a validated spec: " << degraded << " ("
          << (input.include_degraded ? "included" : "excluded") << ").\n";
    } else {
      out << "project,bugs,blind_success,blind_fail,rescued,total,rate_percent\n";
      auto row = [&](const ProjectRow& r, const std::string& name, int places) {
        out << csv_field(name) << "," << r.bugs << "," << r.blind_success << "," << r.blind_fail << ","
            << r.rescued << "," << r.total << "," << rate_cell(r.rate(), places, false) << "\n";
      };
      for (const auto& r : table.rows) row(r, r.project, 1);
      row(table.total, "Total", 2);
      out << "\nmetric,numerator,denominator,percent\n";
      if (rescue) {
        out << "rescue_rate," << rescue->num << "," << rescue->den << "," << rescue->display(1) << "\n";
      } else {
        out << "rescue_rate,0,0,undefined\n";
      }
      out << "degraded_fixes," << degraded << ",," << (input.include_degraded ? "included" : "excluded") << "\n";
    }
  }

  if (input.costs) {
    const auto& c = *input.costs;
    if (md) {
      out << "\n## Cost breakdown (averages over " << c.sessions << " sessions)\n\n"
          << "| Role | Avg. Duration (s) | Avg. Turns | Avg. Tokens | Cost Ratio |\n"
          << "|---|---:|---:|---:|---:|\n";
      for (const auto& r : c.roles) {
        out << "| " << agents::to_string(r.role) << " | " << format_micro(r.avg_duration_s, 2) << " | "
            << format_micro(r.avg_turns, 2) << " | "
            << text::group_thousands(round_div(r.avg_tokens, kMicro)) << " | " << r.ratio.display(1) << "% |\n";
      }
      out << "| **Total** | " << format_micro(c.total_duration_s, 2) << " | " << format_micro(c.total_turns, 2)
          << " | " << text::group_thousands(round_div(c.total_tokens, kMicro)) << " | 100.0% |\n";
    } else {
      out << "\nrole,avg_duration_s,avg_turns,avg_tokens,cost_ratio_percent\n";
      for (const auto& r : c.roles) {
        out << agents::to_string(r.role) << "," << format_micro(r.avg_duration_s, 2) << ","
            << format_micro(r.avg_turns, 2) << "," << round_div(r.avg_tokens, kMicro) << ","
            << r.ratio.display(1) << "\n";
      }
      out << "Total," << format_micro(c.total_duration_s, 2) << "," << format_micro(c.total_turns, 2) << ","
          << round_div(c.total_tokens, kMicro) << ",100.0\n";
    }
  }
  return out.str();
}

}  // namespace anvil::metrics
