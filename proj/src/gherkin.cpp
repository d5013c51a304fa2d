#include "anvil/gherkin.hpp"

#include <array>
#include <regex>
#include <set>
#include <utility>

#include "anvil/text.hpp"

namespace anvil::gherkin {

namespace {

constexpr std::array<std::pair<std::string_view, Keyword>, 5> kKeywords{{
    {"Given", Keyword::Given},
    {"When", Keyword::When},
    {"Then", Keyword::Then},
    {"And", Keyword::And},
    {"But", Keyword::But},
}};

constexpr std::array<std::string_view, 8> kUnsupportedHeaders{
    "Background:", "Scenario Outline:", "Scenario Template:", "Examples:",
    "Scenarios:",  "Rule:",             "Example:",           "Feature:",
};

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

int indentation(std::string_view raw) {
  int n = 0;
  for (char c : raw) {
    if (c != ' ' && c != '\t') break;
    ++n;
  }
  return n;
}

std::optional<std::pair<Keyword, std::string_view>> match_keyword(std::string_view line) {
  for (const auto& [word, kw] : kKeywords) {
    if (!starts_with(line, word)) continue;
    std::string_view rest = line.substr(word.size());
    if (rest.empty()) return std::pair{kw, rest};
    if (rest.front() == ' ' || rest.front() == '\t') return std::pair{kw, text::trim(rest)};
  }
  return std::nullopt;
}

struct OpenScenario {
  Scenario scenario;
  int header_line = 0;
  int header_column = 0;
  int last_step_indent = -1;
};

class Parser {
 public:
  explicit Parser(std::string_view input) : input_(input) {}

  FeatureSpec run(std::string_view source_path) {
    if (starts_with(input_, "\xEF\xBB\xBF")) input_.remove_prefix(3);
    auto lines = text::split_lines(input_);
    int last_content_line = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      int lineno = static_cast<int>(i) + 1;
      std::string_view raw = lines[i];
      std::string_view line = text::trim(raw);
      int column = indentation(raw) + 1;
      if (line.empty()) {
        if (state_ == State::Description && !description_.empty()) pending_blank_ = true;
        continue;
      }
      if (line.front() == '#') continue;
      last_content_line = lineno;
      handle(line, lineno, column);
    }
    if (state_ == State::Start) throw ParseError(1, 1, "missing 'Feature:' header");
    close_scenario();
    if (spec_.scenarios.empty()) {
      throw ParseError(last_content_line, 1, "feature has no scenarios");
    }
    while (!description_.empty() && description_.back().empty()) description_.pop_back();
    spec_.description = text::join(description_, "\n");
    if (!source_path.empty()) {
      spec_.source_span = SourceSpan{std::string(source_path), feature_line_, last_content_line};
    }
    return std::move(spec_);
  }

 private:
  enum class State { Start, Description, Scenario };

  void handle(std::string_view line, int lineno, int column) {
    if (state_ == State::Start) {
      if (!starts_with(line, "Feature:")) {
        throw ParseError(lineno, column, "expected 'Feature:' header");
      }
      spec_.title = text::collapse_whitespace(line.substr(8));
      feature_line_ = lineno;
      state_ = State::Description;
      return;
    }
    if (starts_with(line, "Feature:")) {
      throw ParseError(lineno, column, "only one Feature per file is supported");
    }
    if (starts_with(line, "Scenario:")) {
      open_scenario(text::collapse_whitespace(line.substr(9)), lineno, column);
      return;
    }
    for (auto header : kUnsupportedHeaders) {
      if (starts_with(line, header)) {
        throw ParseError(lineno, column, "unsupported construct '" + std::string(header) + "'");
      }
    }
    if (line.front() == '|' || line.front() == '@' || starts_with(line, "\"\"\"") || starts_with(line, "```")) {
      throw ParseError(lineno, column, "tables, doc-strings and tags are not supported");
    }
    if (state_ == State::Description) {
      if (pending_blank_) description_.emplace_back();
      pending_blank_ = false;
      description_.push_back(text::collapse_whitespace(line));
      return;
    }
    step_line(line, lineno, column);
  }

  void open_scenario(std::string title, int lineno, int column) {
    close_scenario();
    if (!titles_.insert(title).second) {
      throw ParseError(lineno, column, "duplicate scenario title '" + title + "'");
    }
    current_ = OpenScenario{};
    current_->scenario.title = std::move(title);
    current_->header_line = lineno;
    current_->header_column = column;
    state_ = State::Scenario;
  }

  void close_scenario() {
    if (!current_) return;
    if (current_->scenario.steps.empty()) {
      throw ParseError(current_->header_line, current_->header_column,
                       "scenario '" + current_->scenario.title + "' has no steps");
    }
    spec_.scenarios.push_back(std::move(current_->scenario));
    current_.reset();
  }

  void step_line(std::string_view line, int lineno, int column) {
    auto& steps = current_->scenario.steps;
    if (auto kw = match_keyword(line)) {
      if (kw->second.empty()) throw ParseError(lineno, column, "step has no text");
      std::optional<StepRole> previous;
      if (!steps.empty()) previous = steps.back().role;
      if (!previous && (kw->first == Keyword::And || kw->first == Keyword::But)) {
        throw ParseError(lineno, column,
                         std::string(to_string(kw->first)) + " cannot be the first step of a scenario");
      }
      steps.push_back(Step{kw->first, text::collapse_whitespace(kw->second), resolve_role(kw->first, previous)});
      current_->last_step_indent = column - 1;
      return;
    }
    if (!steps.empty() && column - 1 > current_->last_step_indent) {
      steps.back().text += ' ';
      steps.back().text += text::collapse_whitespace(line);
      return;
    }
    std::string word(line.substr(0, line.find_first_of(" \t")));
    throw ParseError(lineno, column, "unknown keyword '" + word + "' at step position");
  }

  std::string_view input_;
  State state_ = State::Start;
  FeatureSpec spec_;
  int feature_line_ = 0;
  std::vector<std::string> description_;
  bool pending_blank_ = false;
  std::optional<OpenScenario> current_;
  std::set<std::string> titles_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid feature: " + what);
}

bool is_clean_line(std::string_view s) {
  return text::collapse_whitespace(s) == s;
}

}  // namespace

ParseError::ParseError(int line, int column, std::string reason)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + reason),
      line_(line),
      column_(column),
      reason_(std::move(reason)) {}

std::string_view to_string(Keyword k) {
  switch (k) {
    case Keyword::Given: return "Given";
    case Keyword::When: return "When";
    case Keyword::Then: return "Then";
    case Keyword::And: return "And";
    case Keyword::But: return "But";
  }
  return "?";
}

std::string_view to_string(StepRole r) {
  switch (r) {
    case StepRole::Context: return "Context";
    case StepRole::Action: return "Action";
    case StepRole::Assertion: return "Assertion";
  }
  return "?";
}

std::optional<StepRole> parse_role(std::string_view name) {
  for (auto r : {StepRole::Context, StepRole::Action, StepRole::Assertion}) {
    if (text::to_lower(to_string(r)) == text::to_lower(name)) return r;
  }
  return std::nullopt;
}

std::string_view to_string(Severity s) { return s == Severity::Error ? "Error" : "Warning"; }

StepRole resolve_role(Keyword keyword, std::optional<StepRole> previous) {
  switch (keyword) {
    case Keyword::Given: return StepRole::Context;
    case Keyword::When: return StepRole::Action;
    case Keyword::Then: return StepRole::Assertion;
    case Keyword::And:
    case Keyword::But:
      if (!previous) throw std::invalid_argument("And/But without a preceding step");
      return *previous;
  }
  return StepRole::Context;
}

FeatureSpec parse(std::string_view text, std::string_view source_path) {
  return Parser(text).run(source_path);
}

void validate(const FeatureSpec& spec) {
  require(is_clean_line(spec.title), "title must be a single trimmed line");
  require(!spec.scenarios.empty(), "at least one scenario is required");
  if (!spec.description.empty()) {
    auto lines = text::split_lines(spec.description);
    require(!lines.front().empty() && !lines.back().empty(),
            "description must not start or end with a blank line");
    bool previous_blank = false;
    for (auto line : lines) {
      require(!(line.empty() && previous_blank), "description has consecutive blank lines");
      previous_blank = line.empty();
      if (line.empty()) continue;
      require(text::collapse_whitespace(line) == line, "description line is not normalized");
      require(line.front() != '#', "description line would read as a comment");
      require(line.front() != '|' && line.front() != '@' && !line.starts_with("\"\"\"") && !line.starts_with("```"),
              "description line would read as a table, tag or doc-string");
      require(!line.starts_with("Scenario:"), "description line would open a scenario");
      for (auto header : kUnsupportedHeaders) {
        require(!line.starts_with(header), "description line starts with a reserved header");
      }
    }
  }
  std::set<std::string> titles;
  for (const auto& sc : spec.scenarios) {
    require(is_clean_line(sc.title), "scenario title must be a single trimmed line");
    require(titles.insert(sc.title).second, "duplicate scenario title '" + sc.title + "'");
    require(!sc.steps.empty(), "scenario '" + sc.title + "' has no steps");
    std::optional<StepRole> previous;
    for (const auto& step : sc.steps) {
      require(!step.text.empty() && is_clean_line(step.text), "step text must be a non-empty trimmed line");
      require(previous || (step.keyword != Keyword::And && step.keyword != Keyword::But),
              "And/But cannot start a scenario");
      require(resolve_role(step.keyword, previous) == step.role, "step role does not match keyword");
      previous = step.role;
    }
  }
}

std::string render(const FeatureSpec& spec) {
  std::string out = spec.title.empty() ? "Feature:" : "Feature: " + spec.title;
  out += '\n';
  if (!spec.description.empty()) {
    for (auto line : text::split_lines(spec.description)) {
      if (!line.empty()) {
        out += "  ";
        out += line;
      }
      out += '\n';
    }
  }
  for (const auto& sc : spec.scenarios) {
    out += '\n';
    out += sc.title.empty() ? "  Scenario:" : "  Scenario: " + sc.title;
    out += '\n';
    for (const auto& step : sc.steps) {
      out += "    ";
      out += to_string(step.keyword);
      out += ' ';
      out += step.text;
      out += '\n';
    }
  }
  return out;
}

const std::vector<std::string>& vacuous_assertion_patterns() {
  static const std::vector<std::string> patterns{
      R"(true)",
      R"((it|this|that|everything) (works|passes|succeeds|is fine))",
      R"(the (test|tests|build|code|program|system) (passes|pass|succeeds|succeed|runs|compiles|works))",
      R"(no (error|errors|exception|exceptions) (occurs|occur|is thrown|are thrown|happens?))",
      R"(nothing (happens|fails|breaks))",
      R"(the (result|output|value) is (returned|produced|computed))",
  };
  return patterns;
}

std::vector<LintFinding> lint(const FeatureSpec& spec, const LintOptions& options) {
  static const std::vector<std::regex> vacuous = [] {
    std::vector<std::regex> out;
    for (const auto& p : vacuous_assertion_patterns()) {
      out.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
    }
    return out;
  }();

  std::vector<LintFinding> findings;
  for (std::size_t i = 0; i < spec.scenarios.size(); ++i) {
    const auto& sc = spec.scenarios[i];
    if (sc.steps.size() > options.broad_scenario_steps) {
      findings.push_back({Severity::Warning, std::string(kBroadScenario), i,
                          "scenario '" + sc.title + "' has " + std::to_string(sc.steps.size()) +
                              " steps (limit " + std::to_string(options.broad_scenario_steps) + ")"});
    }
    bool has_assertion = false;
    for (const auto& step : sc.steps) has_assertion |= step.role == StepRole::Assertion;
    if (!has_assertion) {
      findings.push_back({Severity::Error, std::string(kNoAssertion), i,
                          "scenario '" + sc.title + "' has no Then step"});
    }
    for (const auto& step : sc.steps) {
      if (step.role != StepRole::Assertion) continue;
      for (const auto& re : vacuous) {
        if (std::regex_match(step.text, re)) {
          findings.push_back({Severity::Warning, std::string(kVacuousAssertion), i,
                              "assertion '" + step.text + "' is trivially true"});
          break;
        }
      }
    }
  }
  return findings;
}

}  // namespace anvil::gherkin
