#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdedev/tasks/config.hpp"

namespace pdedev::tasks {

// One line of the Acceptance section: "<metric> <= <value>" or ">=".
struct AcceptanceCheck {
  enum class Op { le, ge };

  std::string name;
  Op op = Op::le;
  double threshold = 0.0;

  bool passes(double measured) const;
  std::string_view op_text() const { return op == Op::le ? "<=" : ">="; }

  friend bool operator==(const AcceptanceCheck&, const AcceptanceCheck&) = default;
};

// A Math-Algo description: markdown with exactly the level-1 sections
// Equations, Algorithm, Tester and Acceptance. The Tester section carries
// the run configuration in a ```config fenced block; the Acceptance section
// holds one check per line plus "set <name> = <value>" detector parameters.
struct TaskDescription {
  std::string equations;
  std::string algorithm;
  std::string tester_notes;
  SimulationConfig config;
  std::vector<AcceptanceCheck> checks;
  std::vector<std::pair<std::string, double>> parameters;

  double parameter(std::string_view name, double fallback) const;
  const AcceptanceCheck* check(std::string_view name) const;

  friend bool operator==(const TaskDescription&, const TaskDescription&) = default;
};

inline constexpr std::string_view kEquationsHeading = "Equations";
inline constexpr std::string_view kAlgorithmHeading = "Algorithm";
inline constexpr std::string_view kTesterHeading = "Tester";
inline constexpr std::string_view kAcceptanceHeading = "Acceptance";

// Throws ParseError (with line number) on structural problems and
// ConfigError on an invalid configuration block.
TaskDescription parse_description(std::string_view markdown);
TaskDescription load_description(const std::string& path);
std::string render_description(const TaskDescription& description);

// Raw text of one level-1 section, without its heading; empty if absent.
std::string section_text(std::string_view markdown, std::string_view heading);

}  // namespace pdedev::tasks
