#include "pdedev/tasks/description.hpp"

#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "pdedev/error.hpp"

namespace pdedev::tasks {

namespace {

struct Line {
  int number;
  std::string_view text;
};

std::vector<Line> lines_of(std::string_view text) {
  std::vector<Line> out;
  int n = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    std::string_view line =
        text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back({++n, line});
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

bool is_fence(std::string_view line) { return trim(line).starts_with("```"); }

// Level-1 heading text, or nullopt.
std::optional<std::string_view> heading_of(std::string_view line) {
  if (line.size() >= 2 && line[0] == '#' && line[1] == ' ') return trim(line.substr(2));
  return std::nullopt;
}

std::string join_trimmed(const std::vector<Line>& lines, std::size_t from, std::size_t to) {
  while (from < to && trim(lines[from].text).empty()) ++from;
  while (to > from && trim(lines[to - 1].text).empty()) --to;
  std::string out;
  for (std::size_t k = from; k < to; ++k) {
    if (k > from) out += '\n';
    out += lines[k].text;
  }
  return out;
}

struct Section {
  std::string_view name;
  std::size_t begin;  // first line after the heading
  std::size_t end;
  int heading_line;
};

std::vector<Section> split_sections(const std::vector<Line>& lines) {
  std::vector<Section> out;
  bool in_fence = false;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (is_fence(lines[k].text)) in_fence = !in_fence;
    if (in_fence) continue;
    if (auto h = heading_of(lines[k].text)) {
      if (!out.empty()) out.back().end = k;
      out.push_back({*h, k + 1, lines.size(), lines[k].number});
    }
  }
  return out;
}

double parse_value(std::string_view text, int line) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ParseError(line, fmt::format("'{}' is not a finite number", text));
  }
  return v;
}

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  }
  return true;
}

void parse_acceptance(const std::vector<Line>& lines, const Section& s, TaskDescription& d) {
  for (std::size_t k = s.begin; k < s.end; ++k) {
    std::string_view t = trim(lines[k].text);
    if (t.empty()) continue;
    const int no = lines[k].number;
    if (t.starts_with("- ") || t.starts_with("* ")) t = trim(t.substr(2));
    if (t.starts_with("set ")) {
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) throw ParseError(no, "expected 'set <name> = <value>'");
      const std::string_view name = trim(t.substr(4, eq - 4));
      if (!valid_name(name)) throw ParseError(no, fmt::format("invalid parameter name '{}'", name));
      d.parameters.emplace_back(std::string(name), parse_value(t.substr(eq + 1), no));
      continue;
    }
    AcceptanceCheck c;
    auto pos = t.find("<=");
    c.op = AcceptanceCheck::Op::le;
    if (pos == std::string_view::npos) {
      pos = t.find(">=");
      c.op = AcceptanceCheck::Op::ge;
    }
    if (pos == std::string_view::npos) {
      throw ParseError(no, "expected '<metric> <= <value>', '<metric> >= <value>' or 'set ...'");
    }
    c.name = std::string(trim(t.substr(0, pos)));
    if (!valid_name(c.name)) throw ParseError(no, fmt::format("invalid metric name '{}'", c.name));
    c.threshold = parse_value(t.substr(pos + 2), no);
    d.checks.push_back(std::move(c));
  }
}

void parse_tester(const std::vector<Line>& lines, const Section& s, TaskDescription& d) {
  std::optional<std::size_t> open;
  std::optional<std::size_t> close;
  for (std::size_t k = s.begin; k < s.end; ++k) {
    const std::string_view t = trim(lines[k].text);
    if (!open && t == "```config") {
      open = k;
    } else if (open && !close && t == "```") {
      close = k;
    }
  }
  if (!open || !close) {
    throw ParseError(lines[s.begin - 1].number, "Tester section needs a ```config block");
  }
  std::string config_text;
  for (std::size_t k = *open + 1; k < *close; ++k) {
    config_text += lines[k].text;
    config_text += '\n';
  }
  try {
    d.config = parse_config(config_text);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("Tester section (line {}): {}", lines[*open].number, e.what()));
  }
  std::string before = join_trimmed(lines, s.begin, *open);
  std::string after = join_trimmed(lines, *close + 1, s.end);
  d.tester_notes = before;
  if (!after.empty()) d.tester_notes += (before.empty() ? "" : "\n\n") + after;
}

}  // namespace

bool AcceptanceCheck::passes(double measured) const {
  if (!std::isfinite(measured)) return false;
  return op == Op::le ? measured <= threshold : measured >= threshold;
}

double TaskDescription::parameter(std::string_view name, double fallback) const {
  for (const auto& [k, v] : parameters) {
    if (k == name) return v;
  }
  return fallback;
}

const AcceptanceCheck* TaskDescription::check(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

TaskDescription parse_description(std::string_view markdown) {
  const auto lines = lines_of(markdown);
  const auto sections = split_sections(lines);
  constexpr std::array<std::string_view, 4> required{kEquationsHeading, kAlgorithmHeading,
                                                     kTesterHeading, kAcceptanceHeading};
  std::array<const Section*, 4> found{};
  for (const auto& s : sections) {
    bool known = false;
    for (std::size_t k = 0; k < required.size(); ++k) {
      if (s.name != required[k]) continue;
      if (found[k]) throw ParseError(s.heading_line, fmt::format("duplicate section '# {}'", s.name));
      found[k] = &s;
      known = true;
    }
    if (!known) throw ParseError(s.heading_line, fmt::format("unexpected section '# {}'", s.name));
  }
  for (std::size_t k = 0; k < required.size(); ++k) {
    if (!found[k]) {
      throw ParseError(static_cast<int>(lines.size()),
                       fmt::format("missing section '# {}'", required[k]));
    }
  }
  TaskDescription d;
  d.equations = join_trimmed(lines, found[0]->begin, found[0]->end);
  d.algorithm = join_trimmed(lines, found[1]->begin, found[1]->end);
  parse_tester(lines, *found[2], d);
  parse_acceptance(lines, *found[3], d);
  return d;
}

TaskDescription load_description(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read description " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_description(ss.str());
}

std::string render_description(const TaskDescription& d) {
  std::string out;
  out += fmt::format("# {}\n\n{}\n\n", kEquationsHeading, d.equations);
  out += fmt::format("# {}\n\n{}\n\n", kAlgorithmHeading, d.algorithm);
  out += fmt::format("# {}\n\n", kTesterHeading);
  if (!d.tester_notes.empty()) out += d.tester_notes + "\n\n";
  out += "```config\n" + render_config(d.config) + "```\n\n";
  out += fmt::format("# {}\n\n", kAcceptanceHeading);
  for (const auto& c : d.checks) {
    out += fmt::format("- {} {} {}\n", c.name, c.op_text(), c.threshold);
  }
  for (const auto& [k, v] : d.parameters) out += fmt::format("- set {} = {}\n", k, v);
  return out;
}

std::string section_text(std::string_view markdown, std::string_view heading) {
  const auto lines = lines_of(markdown);
  for (const auto& s : split_sections(lines)) {
    if (s.name == heading) return join_trimmed(lines, s.begin, s.end);
  }
  return {};
}

}  // namespace pdedev::tasks
