#include "pdedev/guidelines/rules.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "pdedev/error.hpp"

namespace pdedev::guidelines {

namespace fs = std::filesystem;
using pipeline::SourceFile;

namespace {

const std::regex kIdentifier(R"(^[A-Za-z_]\w*$)");

std::string escape_regex(const std::string& s) {
  static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
  return std::regex_replace(s, special, R"(\$&)");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string join_from(const std::vector<std::string>& parts, std::size_t first) {
  std::string out;
  for (std::size_t k = first; k < parts.size(); ++k) {
    if (k > first) out += '\t';
    out += parts[k];
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool is_identifier(const std::string& s) { return std::regex_match(s, kIdentifier); }

std::regex word_regex(const std::string& name) { return std::regex("\\b" + escape_regex(name) + "\\b"); }

void check_action(const std::string& action) {
  const auto parts = split(action, ':');
  if (parts[0] == "rename") {
    if (parts.size() != 3 || !is_identifier(parts[1]) || !is_identifier(parts[2])) {
      throw ConfigError("rename action must be rename:FROM:TO with identifiers");
    }
  } else if (parts[0] == "placeholder") {
    if (parts.size() != 2) throw ConfigError("placeholder action must be placeholder:NAME[@FILE]");
    const auto at = parts[1].find('@');
    if (!is_identifier(parts[1].substr(0, at))) throw ConfigError("placeholder name is not an identifier");
  } else {
    throw ConfigError("unknown remediation action '" + parts[0] + "'");
  }
}

Rule::Kind parse_kind(const std::string& s, int line) {
  if (s == "prompt") return Rule::Kind::prompt;
  if (s == "advisory") return Rule::Kind::advisory;
  if (s == "lint") return Rule::Kind::lint;
  if (s == "remediation") return Rule::Kind::remediation;
  throw ParseError(line, "unknown rule kind '" + s + "'");
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

struct Language {
  std::vector<std::string> extensions;
  std::string templ;    // {name}
  std::string defined;  // regex, {name}
};

const std::vector<Language>& languages() {
  static const std::vector<Language> langs = {
      {{".py"}, "\n\nclass {name}:\n    pass\n", R"(^\s*(class|def)\s+{name}\b|^\s*{name}\s*=)"},
      {{".h", ".hh", ".hpp", ".hxx", ".c", ".cc", ".cpp", ".cxx"},
       "\nstruct {name} {{}};\n",
       R"(\b(struct|class|using)\s+{name}\b)"},
      {{".js", ".mjs", ".ts"}, "\nexport class {name} {{}}\n", R"(\b(class|function|const|let|var)\s+{name}\b)"},
      {{".jl"}, "\nstruct {name} end\n", R"(^\s*(mutable\s+)?struct\s+{name}\b)"},
  };
  return langs;
}

const Language& language_for(const std::string& target_file) {
  const std::string ext = fs::path(target_file).extension().string();
  for (const auto& lang : languages()) {
    if (std::find(lang.extensions.begin(), lang.extensions.end(), ext) != lang.extensions.end()) return lang;
  }
  throw ConfigError("no placeholder template for '" + target_file + "'");
}

}  // namespace

std::string_view to_string(Rule::Kind k) {
  switch (k) {
    case Rule::Kind::prompt: return "prompt";
    case Rule::Kind::advisory: return "advisory";
    case Rule::Kind::lint: return "lint";
    case Rule::Kind::remediation: return "remediation";
  }
  return "?";
}

const Rule* RuleSet::find(const std::string& id) const {
  for (const auto& r : rules) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<const Rule*> RuleSet::of_kind(Rule::Kind k) const {
  std::vector<const Rule*> out;
  for (const auto& r : rules) {
    if (r.kind == k) out.push_back(&r);
  }
  return out;
}

RuleSet default_rules() {
  using K = Rule::Kind;
  RuleSet set;
  set.source = "<default>";
  set.rules = {
      {"forbidden-einsum", K::lint, "Do not use the function einsum().", "call:einsum"},
      {"forbidden-import-jmp", K::lint, "Do not import library jmp.", "import:jmp"},
      {"output-format-vtk", K::prompt, "You must produce the .vtk, .vtu files for evaluation.", ""},
      {"omega-supplied", K::advisory, "Pass omega explicitly to every solver that needs it.", ""},
      {"omega-float", K::advisory, "Assign omega a floating-point value.", ""},
      {"periodicbc-import", K::advisory,
       "PeriodicBC is not defined in the boundary-condition module; do not import it.", ""},
      {"rename-omega", K::remediation, "Rename omega to freq_val in the codebase and in generated code.",
       "rename:omega:freq_val"},
      {"placeholder-periodicbc", K::remediation, "Define an empty PeriodicBC so that imports of it resolve.",
       "placeholder:PeriodicBC@src/boundary_conditions.py"},
  };
  return set;
}

std::regex compile_matcher(const std::string& matcher) {
  const auto colon = matcher.find(':');
  if (colon == std::string::npos) throw ConfigError("matcher needs a kind prefix: " + matcher);
  const std::string kind = matcher.substr(0, colon);
  const std::string arg = matcher.substr(colon + 1);
  if (arg.empty()) throw ConfigError("empty matcher argument: " + matcher);
  if (kind == "regex") return std::regex(arg);
  if (kind == "word") return word_regex(arg);
  if (kind == "call") return std::regex("\\b" + escape_regex(arg) + "\\s*\\(");
  if (kind == "import") {
    const std::string m = escape_regex(arg) + R"((\.[\w.]+)?(?![\w]))";
    return std::regex(R"(^\s*import\s+([\w.]+(\s+as\s+\w+)?\s*,\s*)*)" + m + R"(|^\s*from\s+)" + m +
                      R"(\s+import\b|^\s*#\s*include\s*[<"])" + escape_regex(arg) + R"(\b)");
  }
  throw ConfigError("unknown matcher kind '" + kind + "'");
}

RuleSet parse_rules(const std::string& text, const std::string& source) {
  RuleSet set;
  set.source = source;
  std::set<std::string> ids;
  const auto lines = split_lines(text);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const int lineno = static_cast<int>(k) + 1;
    const std::string& line = lines[k];
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    const auto parts = split(line, '\t');
    if (parts.size() < 3) throw ParseError(lineno, "expected KIND<TAB>ID<TAB>PAYLOAD");
    Rule r;
    r.kind = parse_kind(parts[0], lineno);
    r.id = parts[1];
    if (r.id.empty()) throw ParseError(lineno, "empty rule id");
    if (!ids.insert(r.id).second) throw ParseError(lineno, "duplicate rule id '" + r.id + "'");
    if (r.kind == Rule::Kind::lint || r.kind == Rule::Kind::remediation) {
      if (parts.size() < 4) throw ParseError(lineno, "lint and remediation rules need a spec and a message");
      r.spec = parts[2];
      r.message = join_from(parts, 3);
      try {
        if (r.kind == Rule::Kind::lint) {
          compile_matcher(r.spec);
        } else {
          check_action(r.spec);
        }
      } catch (const std::regex_error& e) {
        throw ParseError(lineno, "matcher does not compile: " + std::string(e.what()));
      } catch (const ConfigError& e) {
        throw ParseError(lineno, e.what());
      }
    } else {
      r.message = join_from(parts, 2);
    }
    if (r.message.empty()) throw ParseError(lineno, "empty rule message");
    set.rules.push_back(std::move(r));
  }
  const auto defaults = default_rules();
  for (const char* id : {"forbidden-einsum", "forbidden-import-jmp", "output-format-vtk"}) {
    if (set.find(id) == nullptr) set.rules.push_back(*defaults.find(id));
  }
  return set;
}

RuleSet load_rules(const std::string& path) { return parse_rules(read_text(path), path); }

std::string render_rules_file(const RuleSet& set) {
  std::string out;
  for (const auto& r : set.rules) {
    out += fmt::format("{}\t{}\t", to_string(r.kind), r.id);
    if (!r.spec.empty()) out += r.spec + "\t";
    out += r.message + "\n";
  }
  return out;
}

std::string render_guidelines(const RuleSet& set) {
  std::string out;
  int n = 0;
  for (const auto& r : set.rules) {
    if (r.in_prompt()) out += fmt::format("{}. {}\n", ++n, r.message);
  }
  return out;
}

std::vector<Violation> lint(const std::vector<SourceFile>& files, const RuleSet& rules) {
  std::vector<std::pair<const Rule*, std::regex>> matchers;
  for (const Rule* r : rules.of_kind(Rule::Kind::lint)) matchers.emplace_back(r, compile_matcher(r->spec));
  std::vector<Violation> out;
  for (const auto& f : files) {
    const auto lines = split_lines(f.text);
    for (std::size_t k = 0; k < lines.size(); ++k) {
      for (const auto& [rule, re] : matchers) {
        if (std::regex_search(lines[k], re)) {
          out.push_back({rule->id, f.name, static_cast<int>(k) + 1, rule->message, lines[k]});
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    return std::tie(a.file, a.line, a.rule_id) < std::tie(b.file, b.line, b.rule_id);
  });
  return out;
}

std::vector<Violation> lint(const pipeline::CodeArtifact& artifact, const RuleSet& rules) {
  return lint(artifact.all_files(), rules);
}

std::vector<SourceFile> read_sources(const fs::path& root) {
  std::vector<SourceFile> out;
  std::error_code ec;
  if (fs::is_regular_file(root, ec)) {
    out.push_back({root.filename().string(), read_text(root)});
    return out;
  }
  if (!fs::is_directory(root, ec)) throw IoError("no such file or directory: " + root.string());
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    const std::string leaf = it->path().filename().string();
    if (!leaf.empty() && leaf[0] == '.') {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file()) continue;
    std::string text = read_text(it->path());
    if (text.find('\0') != std::string::npos) continue;
    out.push_back({fs::relative(it->path(), root).generic_string(), std::move(text)});
  }
  std::sort(out.begin(), out.end(), [](const SourceFile& a, const SourceFile& b) { return a.name < b.name; });
  return out;
}

nlohmann::json violations_to_json(const std::vector<Violation>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& x : v) {
    arr.push_back({{"rule", x.rule_id}, {"file", x.file}, {"line", x.line}, {"message", x.message},
                   {"text", x.text}});
  }
  return arr;
}

RenameResult remediate_rename(const std::vector<SourceFile>& files, const std::string& from,
                              const std::string& to) {
  if (!is_identifier(from) || !is_identifier(to)) {
    throw PreconditionError("rename needs identifier tokens, got '" + from + "' -> '" + to + "'");
  }
  RenameResult result;
  result.files = files;
  if (from == to) return result;
  const std::regex target = word_regex(to);
  for (const auto& f : files) {
    if (std::regex_search(f.text, target)) {
      throw CollisionError(fmt::format("cannot rename {} to {}: {} already uses {}", from, to, f.name, to));
    }
  }
  const std::regex source = word_regex(from);
  for (auto& f : result.files) {
    const auto n = std::distance(std::sregex_iterator(f.text.begin(), f.text.end(), source), std::sregex_iterator());
    if (n == 0) continue;
    result.count += static_cast<int>(n);
    f.text = std::regex_replace(f.text, source, to);
  }
  return result;
}

int remediate_rename(pipeline::CodeArtifact& artifact, const std::string& from, const std::string& to) {
  auto result = remediate_rename(artifact.all_files(), from, to);
  artifact.tester = result.files.back();
  result.files.pop_back();
  artifact.module_files = std::move(result.files);
  return result.count;
}

int remediate_rename(const fs::path& dir, const std::string& from, const std::string& to) {
  const auto before = read_sources(dir);
  const auto result = remediate_rename(before, from, to);
  for (std::size_t k = 0; k < before.size(); ++k) {
    if (result.files[k].text != before[k].text) write_text(dir / result.files[k].name, result.files[k].text);
  }
  return result.count;
}

std::string placeholder_text(const std::string& name, const std::string& target_file) {
  if (!is_identifier(name)) throw PreconditionError("placeholder name is not an identifier: " + name);
  return fmt::format(fmt::runtime(language_for(target_file).templ), fmt::arg("name", name));
}

PlaceholderResult inject_placeholder(const fs::path& codebase, const std::string& name,
                                     const std::string& target_file) {
  const fs::path path = codebase / target_file;
  if (!fs::is_regular_file(path)) throw IoError("placeholder target does not exist: " + path.string());
  const std::string addition = placeholder_text(name, target_file);
  std::string text = read_text(path);
  std::string defined = language_for(target_file).defined;
  for (std::size_t pos; (pos = defined.find("{name}")) != std::string::npos;) {
    defined.replace(pos, 6, escape_regex(name));
  }
  const std::regex def(defined);
  for (const auto& line : split_lines(text)) {
    if (std::regex_search(line, def)) {
      return {false, fmt::format("{} is already defined in {}; nothing injected", name, target_file)};
    }
  }
  if (!text.empty() && text.back() != '\n') text += '\n';
  write_text(path, text + addition);
  return {true, ""};
}

}  // namespace pdedev::guidelines
