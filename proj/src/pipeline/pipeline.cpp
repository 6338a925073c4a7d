#include "pdedev/pipeline/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "pdedev/error.hpp"

namespace pdedev::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using oracle::ErrorClass;

namespace {

constexpr std::string_view kInspectorSystem =
    "You are an inspector. Check that the code implements the equations exactly. "
    "Answer with CONSISTENT or INCONSISTENT on the first line, then your findings.";

constexpr std::string_view kFormatNote =
    "Answer with complete files. Start each file with a line 'File: <path>' followed by a fenced code block.";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fence_for(const std::string& text) {
  std::string fence = "```";
  while (text.find(fence) != std::string::npos) fence += '`';
  return fence;
}

void write_text(const fs::path& p, const std::string& text) {
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

std::string equations_block(const tasks::TaskSpec& task) {
  return "# Equations\n\n" + trim(task.description.equations) + "\n";
}

// Sandbox paths differ per run; the prompt sees them relative to the workdir.
std::string relative_to_workdir(std::string line, const std::string& workdir) {
  if (workdir.empty()) return line;
  for (const std::string& prefix : {workdir + "/", workdir}) {
    for (std::size_t pos; (pos = line.find(prefix)) != std::string::npos;) {
      line.replace(pos, prefix.size(), prefix.back() == '/' ? "" : ".");
    }
  }
  return line;
}

oracle::ValidationReport failure_report(const tasks::TaskSpec& task, ErrorClass c, const std::string& note) {
  oracle::ValidationReport r;
  r.task = task.name;
  r.error_class = c;
  r.success = false;
  r.notes.push_back(note);
  return r;
}

// Drives one attempt. Each stage method returns the next stage.
class Attempt {
 public:
  Attempt(const tasks::TaskSpec& task, const ChatBackend& backend, const PipelineConfig& config)
      : task_(task), backend_(backend), config_(config) {
    if (!config.codebase.empty()) codebase_ = guidelines::read_sources(config.codebase);
    guidelines_text_ = guidelines::render_guidelines(config.rules);
  }

  PipelineResult run() {
    config_.limits.validate();
    gen_request_ = generator_request(task_, config_, codebase_);
    enter(Stage::generating);
    try {
      while (state_.stage != Stage::done && state_.stage != Stage::failed) {
        switch (state_.stage) {
          case Stage::generating: enter(generate()); break;
          case Stage::inspecting1: enter(inspect(1)); break;
          case Stage::checking: enter(check()); break;
          case Stage::debugging: enter(debug()); break;
          case Stage::inspecting2: enter(inspect(2)); break;
          case Stage::packing: enter(pack()); break;
          default: break;
        }
      }
    } catch (const BackendError& e) {
      fail_infrastructure(fmt::format("backend failure in {}: {}", to_string(state_.stage), e.what()));
    } catch (const InfrastructureError& e) {
      fail_infrastructure(std::string("sandbox failure: ") + e.what());
    } catch (const CollisionError& e) {
      fail_infrastructure(std::string("packing collision: ") + e.what());
    } catch (const IoError& e) {
      fail_infrastructure(std::string("I/O failure: ") + e.what());
    }
    PipelineResult result;
    result.state = std::move(state_);
    result.report = std::move(report_);
    return result;
  }

 private:
  void enter(Stage s) {
    state_.stage = s;
    state_.history.push_back(s);
  }

  Stage fail(ErrorClass c, const std::string& reason) {
    state_.failure_reason = reason;
    report_ = failure_report(task_, c, reason);
    return Stage::failed;
  }

  void fail_infrastructure(const std::string& reason) {
    state_.infrastructure_failure = true;
    fail(ErrorClass::syntactic, reason);
    enter(Stage::failed);
  }

  std::string call(ChatRequest request) {
    request.attempt = config_.attempt;
    const std::string completion = backend_.complete(request);
    state_.transcript.push_back({request.agent, request.call, request.system, request.messages, completion});
    return completion;
  }

  int next_call(const std::string& agent) { return ++calls_[agent]; }

  // Applies rename remediations; a conflict is noted and skipped.
  void remediate(CodeArtifact& artifact) {
    if (!config_.apply_remediations) return;
    for (const auto* rule : config_.rules.of_kind(guidelines::Rule::Kind::remediation)) {
      if (rule->spec.rfind("rename:", 0) != 0) continue;
      const auto first = rule->spec.find(':', 7);
      const std::string from = rule->spec.substr(7, first - 7);
      const std::string to = rule->spec.substr(first + 1);
      try {
        const int n = guidelines::remediate_rename(artifact, from, to);
        if (n > 0) state_.notes.push_back(fmt::format("{}: renamed {} occurrence(s) of {}", rule->id, n, from));
      } catch (const CollisionError& e) {
        state_.notes.push_back(fmt::format("{}: skipped, {}", rule->id, e.what()));
      }
    }
  }

  // A parse failure of an agent's completion ends the attempt.
  template <typename F>
  std::optional<Stage> parse_or_fail(const std::string& what, F&& f) {
    try {
      f();
      return std::nullopt;
    } catch (const FormatError& e) {
      return fail(ErrorClass::syntactic, fmt::format("{} format error: {}", what, e.what()));
    }
  }

  Stage generate() {
    ChatRequest req = gen_request_;
    req.call = next_call("generator");
    const std::string completion = call(req);
    if (auto s = parse_or_fail("generation", [&] { state_.artifact = parse_artifact(completion, config_.tester_name); })) {
      return *s;
    }
    state_.artifact.generator = "generator";
    state_.artifact.iteration = req.call;
    remediate(state_.artifact);
    gen_request_.messages.push_back({"assistant", completion});
    return Stage::inspecting1;
  }

  Stage inspect(int which) {
    const std::string agent = which == 1 ? "inspector1" : "inspector2";
    ChatRequest req = inspector_request(state_.artifact, task_, which);
    req.call = next_call(agent);
    const std::string completion = call(req);
    InspectionReport verdict;
    if (auto s = parse_or_fail("inspection", [&] { verdict = parse_inspection(completion); })) return *s;
    int& rounds = which == 1 ? state_.inspect1_rounds : state_.inspect2_rounds;
    ++rounds;
    if (verdict.consistent) {
      findings_.clear();
      return Stage::checking;
    }
    const int cap = which == 1 ? config_.limits.max_inspect1 : config_.limits.max_inspect2;
    if (rounds >= cap) {
      return fail(ErrorClass::misinterpretation,
                  fmt::format("inspector {} still reports inconsistencies after {} rounds: {}", which, rounds,
                              verdict.findings));
    }
    if (which == 1) {
      gen_request_.messages.push_back({"user", "Inspector findings:\n" + verdict.findings +
                                                   "\n\nRegenerate the module and tester."});
      return Stage::generating;
    }
    if (state_.debug_rounds >= config_.limits.max_debug) {
      return fail(ErrorClass::syntactic, fmt::format("debug cap of {} rounds reached", config_.limits.max_debug));
    }
    findings_ = verdict.findings;
    return Stage::debugging;
  }

  Stage check() {
    state_.inspect2_rounds = 0;
    state_.last_lint = guidelines::lint(state_.artifact, config_.rules);
    auto exec = sandbox::execute_tester(state_.artifact, config_.codebase, config_.sandbox);
    state_.last_exec = exec;
    if (exec.failed()) {
      if (!config_.keep_workdirs) sandbox::remove_workdir(exec);
      if (state_.debug_rounds >= config_.limits.max_debug) {
        return fail(ErrorClass::syntactic,
                    fmt::format("tester still fails after {} debug rounds", state_.debug_rounds));
      }
      return Stage::debugging;
    }
    const auto& out = task_.config().output_dir;
    const fs::path dir = fs::path(out).is_absolute() ? fs::path(out) : fs::path(exec.workdir) / out;
    report_ = oracle::validate_dir(task_, exec, dir.string());
    if (!config_.keep_workdirs) sandbox::remove_workdir(exec);
    if (!report_.success) {
      state_.failure_reason = fmt::format("validation failed: {}", oracle::to_string(report_.error_class));
      return Stage::failed;
    }
    return Stage::packing;
  }

  Stage debug() {
    ++state_.debug_rounds;
    ChatRequest req = debugger_request(state_.artifact, *state_.last_exec, guidelines_text_, codebase_,
                                       state_.last_lint, findings_);
    req.call = next_call("debugger");
    const std::string completion = call(req);
    CodeArtifact next;
    if (auto s = parse_or_fail("debugger", [&] { next = parse_artifact(completion, config_.tester_name); })) {
      return *s;
    }
    next.generator = "debugger";
    next.iteration = req.call;
    remediate(next);
    state_.artifact = std::move(next);
    findings_.clear();
    return Stage::inspecting2;
  }

  Stage pack() {
    if (config_.pack_into.empty()) {
      state_.notes.push_back("no pack target configured; module files not merged");
    } else {
      state_.packed_files = packer_merge(state_.artifact, config_.pack_into, config_.sandbox.module_subdir);
    }
    return Stage::done;
  }

  const tasks::TaskSpec& task_;
  const ChatBackend& backend_;
  const PipelineConfig& config_;
  std::vector<SourceFile> codebase_;
  std::string guidelines_text_;
  ChatRequest gen_request_;
  std::map<std::string, int> calls_;
  std::string findings_;
  PipelineState state_;
  oracle::ValidationReport report_;
};

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::generating: return "generating";
    case Stage::inspecting1: return "inspecting1";
    case Stage::checking: return "checking";
    case Stage::debugging: return "debugging";
    case Stage::inspecting2: return "inspecting2";
    case Stage::packing: return "packing";
    case Stage::done: return "done";
    case Stage::failed: return "failed";
  }
  return "?";
}

void PipelineLimits::validate() const {
  if (max_inspect1 < 1 || max_inspect2 < 1 || max_debug < 1) {
    throw ConfigError(fmt::format("pipeline limits must be >= 1, got {}/{}/{}", max_inspect1, max_inspect2, max_debug));
  }
}

std::vector<TranscriptEntry> PipelineState::transcript_of(const std::string& agent) const {
  std::vector<TranscriptEntry> out;
  for (const auto& e : transcript) {
    if (e.agent == agent) out.push_back(e);
  }
  return out;
}

CodeArtifact parse_artifact(const std::string& completion, const std::string& tester_name) {
  static const std::regex header(R"(^\s*(?:#+\s*|\*\*)?File:(?:\*\*)?\s*`?([^`*\s]+)`?(?:\*\*)?\s*$)");
  static const std::regex fence_open(R"(^\s*(`{3,}|~{3,})[\w+.-]*\s*$)");
  std::vector<std::string> lines;
  std::istringstream in(completion);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  CodeArtifact artifact;
  bool have_tester = false;
  int blocks = 0;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    std::smatch m;
    if (!std::regex_match(lines[k], m, header)) continue;
    const std::string name = m[1];
    std::size_t j = k + 1;
    while (j < lines.size() && trim(lines[j]).empty()) ++j;
    std::smatch f;
    if (j >= lines.size() || !std::regex_match(lines[j], f, fence_open)) continue;
    const std::string fence = f[1];
    std::string text;
    std::size_t e = j + 1;
    for (; e < lines.size(); ++e) {
      if (trim(lines[e]) == fence) break;
      text += lines[e] + "\n";
    }
    if (e >= lines.size()) throw FormatError("unterminated code block for " + name);
    ++blocks;
    if (name == tester_name) {
      if (have_tester) throw FormatError("tester file given twice");
      artifact.tester = {name, text};
      have_tester = true;
    } else {
      artifact.module_files.push_back({name, text});
    }
    k = e;
  }
  if (blocks == 0) throw FormatError("completion contains no 'File:' code blocks");
  if (!have_tester) throw FormatError("completion has no tester file " + tester_name);
  artifact.validate();
  return artifact;
}

std::string render_sources(const std::vector<SourceFile>& files) {
  std::string out;
  for (const auto& f : files) {
    const std::string fence = fence_for(f.text);
    out += fmt::format("File: {}\n{}\n{}", f.name, fence, f.text);
    if (!f.text.empty() && f.text.back() != '\n') out += '\n';
    out += fence + "\n\n";
  }
  return out;
}

std::string render_artifact(const CodeArtifact& artifact) { return render_sources(artifact.all_files()); }

InspectionReport parse_inspection(const std::string& completion) {
  std::istringstream in(completion);
  std::string first;
  while (std::getline(in, first) && trim(first).empty()) {
  }
  first = trim(first);
  InspectionReport r;
  std::string rest;
  auto token = [&](std::string_view t) {
    if (first.rfind(t, 0) != 0) return false;
    if (first.size() > t.size() && (std::isalnum(static_cast<unsigned char>(first[t.size()])) || first[t.size()] == '_')) {
      return false;
    }
    rest = trim(first.substr(t.size()));
    if (!rest.empty() && rest[0] == ':') rest = trim(rest.substr(1));
    return true;
  };
  if (token("INCONSISTENT")) {
    r.consistent = false;
  } else if (token("CONSISTENT")) {
    r.consistent = true;
  } else {
    throw FormatError("inspector verdict missing; first line is '" + first + "'");
  }
  std::ostringstream tail;
  tail << in.rdbuf();
  const std::string more = trim(tail.str());
  r.findings = rest.empty() ? more : (more.empty() ? rest : rest + "\n" + more);
  return r;
}

ChatRequest generator_request(const tasks::TaskSpec& task, const PipelineConfig& config,
                              const std::vector<SourceFile>& codebase) {
  ChatRequest req;
  req.agent = "generator";
  req.system = "Target codebase:\n\n" + render_sources(codebase);
  if (!config.code_conduct.empty()) req.system += "Code conduct:\n" + config.code_conduct + "\n";
  std::string user = tasks::render_description(task.description);
  user += fmt::format("\nWrite the module and a single tester file named {}.\n", config.tester_name);
  if (!config.tester_template.empty()) user += "\nTester template:\n" + config.tester_template + "\n";
  user += std::string(kFormatNote) + "\n";
  req.messages.push_back({"user", user});
  return req;
}

ChatRequest inspector_request(const CodeArtifact& artifact, const tasks::TaskSpec& task, int which) {
  if (which != 1 && which != 2) throw PreconditionError("inspector must be 1 or 2");
  ChatRequest req;
  req.agent = which == 1 ? "inspector1" : "inspector2";
  req.system = std::string(kInspectorSystem);
  req.messages.push_back({"user", equations_block(task) + "\nCode:\n\n" + render_artifact(artifact)});
  return req;
}

ChatRequest debugger_request(const CodeArtifact& artifact, const sandbox::ExecutionReport& exec,
                             const std::string& guidelines_text, const std::vector<SourceFile>& codebase,
                             const std::vector<guidelines::Violation>& lint,
                             const std::string& inspector_findings) {
  if (exec.captured_errors.empty()) throw PreconditionError("debugger needs at least one captured error");
  ChatRequest req;
  req.agent = "debugger";
  req.system = "Target codebase:\n\n" + render_sources(codebase) + "Guidelines:\n" + guidelines_text;
  std::string user = "The tester failed.\n\n" + render_artifact(artifact) + "Errors:\n";
  for (const auto& line : exec.captured_errors) user += relative_to_workdir(line, exec.workdir) + "\n";
  if (!lint.empty()) {
    user += "\nGuideline violations:\n";
    for (const auto& v : lint) user += fmt::format("{}:{}: [{}] {}\n", v.file, v.line, v.rule_id, v.message);
  }
  if (!inspector_findings.empty()) user += "\nInspector findings:\n" + inspector_findings + "\n";
  user += "\nRegenerate the whole module and tester. " + std::string(kFormatNote) + "\n";
  req.messages.push_back({"user", user});
  return req;
}

std::vector<std::string> packer_merge(const CodeArtifact& artifact, const std::string& target,
                                      const std::string& subdir) {
  const fs::path base = subdir.empty() ? fs::path(target) : fs::path(target) / subdir;
  for (const auto& f : artifact.module_files) {
    if (fs::exists(base / f.name)) throw CollisionError("module file already exists: " + (base / f.name).string());
  }
  // Stage everything first so a failed write leaves the target untouched.
  std::error_code ec;
  fs::create_directories(target, ec);
  std::string staging = (fs::path(target) / ".pack-XXXXXX").string();
  if (::mkdtemp(staging.data()) == nullptr) throw IoError("cannot create staging directory in " + target);
  std::vector<std::string> written;
  std::vector<fs::path> moved;
  try {
    for (const auto& f : artifact.module_files) write_text(fs::path(staging) / f.name, f.text);
    for (const auto& f : artifact.module_files) {
      const fs::path dest = base / f.name;
      fs::create_directories(dest.parent_path());
      fs::rename(fs::path(staging) / f.name, dest);
      moved.push_back(dest);
      written.push_back((subdir.empty() ? fs::path(f.name) : fs::path(subdir) / f.name).generic_string());
    }
  } catch (const std::exception& e) {
    for (const auto& p : moved) fs::remove(p, ec);
    fs::remove_all(staging, ec);
    throw IoError(std::string("packing failed: ") + e.what());
  }
  fs::remove_all(staging, ec);
  return written;
}

PipelineResult run_pipeline(const tasks::TaskSpec& task, const ChatBackend& backend, const PipelineConfig& config) {
  Attempt attempt(task, backend, config);
  return attempt.run();
}

json transcript_entry_to_json(const TranscriptEntry& e) {
  json msgs = json::array();
  for (const auto& m : e.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"agent", e.agent}, {"call", e.call}, {"system", e.system}, {"messages", msgs}, {"completion", e.completion}};
}

json state_to_json(const PipelineState& s) {
  json history = json::array();
  for (auto st : s.history) history.push_back(std::string(to_string(st)));
  json j = {{"stage", std::string(to_string(s.stage))},
            {"history", history},
            {"inspect1_rounds", s.inspect1_rounds},
            {"inspect2_rounds", s.inspect2_rounds},
            {"debug_rounds", s.debug_rounds},
            {"calls", s.transcript.size()},
            {"failure_reason", s.failure_reason},
            {"infrastructure_failure", s.infrastructure_failure},
            {"notes", s.notes},
            {"packed_files", s.packed_files},
            {"lint", guidelines::violations_to_json(s.last_lint)}};
  if (s.last_exec) {
    j["last_exec"] = {{"exit_status", s.last_exec->exit_status},
                      {"timed_out", s.last_exec->timed_out},
                      {"captured_errors", s.last_exec->captured_errors}};
  }
  return j;
}

void write_attempt(const std::string& dir, const PipelineResult& result) {
  const fs::path root(dir);
  std::string lines;
  for (const auto& e : result.state.transcript) lines += transcript_entry_to_json(e).dump() + "\n";
  write_text(root / "transcript.jsonl", lines);
  write_text(root / "state.json", state_to_json(result.state).dump(2) + "\n");
  write_text(root / "report.json", oracle::report_to_json(result.report).dump(2) + "\n");
  for (const auto& f : result.state.artifact.all_files()) {
    if (!f.name.empty()) write_text(root / "artifact" / f.name, f.text);
  }
}

}  // namespace pdedev::pipeline
