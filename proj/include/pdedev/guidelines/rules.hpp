#pragma once

#include <filesystem>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdedev/pipeline/artifact.hpp"

namespace pdedev::guidelines {

// Rules file, one rule per line, tab separated:
//   prompt      ID  text
//   advisory    ID  text
//   lint        ID  matcher  message
//   remediation ID  action   message
// Matchers: call:NAME, import:MODULE, word:NAME, regex:PATTERN.
// Actions: rename:FROM:TO, placeholder:NAME[@FILE].
// Blank lines and lines starting with '#' are skipped.
struct Rule {
  enum class Kind { prompt, advisory, lint, remediation };

  std::string id;
  Kind kind = Kind::prompt;
  std::string message;
  std::string spec;  // matcher or action, empty for text rules

  bool in_prompt() const { return kind != Kind::remediation; }
};

std::string_view to_string(Rule::Kind k);

struct RuleSet {
  std::vector<Rule> rules;
  std::string source;  // path, or "<default>"

  const Rule* find(const std::string& id) const;
  std::vector<const Rule*> of_kind(Rule::Kind k) const;
};

// The built-in set: the two forbidden-usage lints, the output-format rule,
// advisory text for the omega and PeriodicBC cases and their remediations.
RuleSet default_rules();

// ParseError (with line) on malformed lines, unknown kinds, duplicate ids
// or matchers that do not compile. The einsum, jmp and output-format rules
// are appended from the defaults when the file does not define them.
RuleSet parse_rules(const std::string& text, const std::string& source = "<memory>");
RuleSet load_rules(const std::string& path);
std::string render_rules_file(const RuleSet& set);

// Numbered list of prompt, advisory and lint messages; empty set gives "".
std::string render_guidelines(const RuleSet& set);

struct Violation {
  std::string rule_id;
  std::string file;
  int line = 0;
  std::string message;
  std::string text;  // offending line

  bool operator==(const Violation&) const = default;
};

// The regex a lint matcher stands for. ParseError on unknown matcher kinds.
std::regex compile_matcher(const std::string& matcher);

// Sorted by (file, line, rule id); at most one violation per rule and line.
std::vector<Violation> lint(const std::vector<pipeline::SourceFile>& files, const RuleSet& rules);
std::vector<Violation> lint(const pipeline::CodeArtifact& artifact, const RuleSet& rules);
// Files under a directory (or a single file), names relative to `root`.
std::vector<pipeline::SourceFile> read_sources(const std::filesystem::path& root);

nlohmann::json violations_to_json(const std::vector<Violation>& v);

struct RenameResult {
  std::vector<pipeline::SourceFile> files;
  int count = 0;
};

// Whole-word replacement. PreconditionError for identifiers that are not
// word tokens; CollisionError when `to` already occurs as a word.
RenameResult remediate_rename(const std::vector<pipeline::SourceFile>& files, const std::string& from,
                              const std::string& to);
int remediate_rename(pipeline::CodeArtifact& artifact, const std::string& from, const std::string& to);
// In place over every text file below `dir`.
int remediate_rename(const std::filesystem::path& dir, const std::string& from, const std::string& to);

struct PlaceholderResult {
  bool injected = false;
  std::string warning;
};

// Empty declaration for the target file's language, chosen by extension.
// ConfigError for an unsupported extension.
std::string placeholder_text(const std::string& name, const std::string& target_file);

// Appends the placeholder to codebase/target_file. IoError if the target is
// missing; no-op with a warning when the file already defines the name.
PlaceholderResult inject_placeholder(const std::filesystem::path& codebase, const std::string& name,
                                     const std::string& target_file);

}  // namespace pdedev::guidelines
