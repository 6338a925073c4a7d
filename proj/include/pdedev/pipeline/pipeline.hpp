#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdedev/guidelines/rules.hpp"
#include "pdedev/oracle/oracle.hpp"
#include "pdedev/pipeline/artifact.hpp"
#include "pdedev/pipeline/backend.hpp"
#include "pdedev/sandbox/sandbox.hpp"
#include "pdedev/tasks/tasks.hpp"

namespace pdedev::pipeline {

enum class Stage { generating, inspecting1, checking, debugging, inspecting2, packing, done, failed };
std::string_view to_string(Stage s);

struct PipelineLimits {
  int max_inspect1 = 3;
  int max_inspect2 = 3;
  int max_debug = 8;

  // ConfigError unless all are >= 1.
  void validate() const;
  // Upper bound on backend calls for one attempt.
  int max_calls() const { return max_inspect1 + max_debug * (max_inspect2 + 1) + 3; }
};

struct TranscriptEntry {
  std::string agent;
  int call = 0;
  std::string system;
  std::vector<ChatMessage> messages;
  std::string completion;
};

struct InspectionReport {
  bool consistent = false;
  std::string findings;
};

struct PipelineState {
  Stage stage = Stage::generating;
  CodeArtifact artifact;
  int inspect1_rounds = 0;
  int inspect2_rounds = 0;  // since the last checking stage
  int debug_rounds = 0;
  std::vector<Stage> history;
  // Calls in the order they were made; see transcript_of for one agent.
  std::vector<TranscriptEntry> transcript;
  std::optional<sandbox::ExecutionReport> last_exec;
  std::vector<guidelines::Violation> last_lint;
  std::string failure_reason;
  bool infrastructure_failure = false;  // backend, sandbox or packing trouble
  std::vector<std::string> notes;
  std::vector<std::string> packed_files;

  std::vector<TranscriptEntry> transcript_of(const std::string& agent) const;
};

struct PipelineConfig {
  PipelineLimits limits;
  sandbox::SandboxOptions sandbox;
  std::string codebase;          // directory; may be empty
  std::string code_conduct;      // appended to the Generator system prompt
  std::string tester_template;   // appended to the Generator user prompt
  std::string tester_name = "test_case.py";
  guidelines::RuleSet rules = guidelines::default_rules();
  bool apply_remediations = true;  // rename rules on every new artifact
  // Packer target; module files go to pack_into/<sandbox.module_subdir>.
  // Empty skips the write (the packing stage is still recorded).
  std::string pack_into;
  bool keep_workdirs = false;
  int attempt = 1;
};

struct PipelineResult {
  PipelineState state;
  oracle::ValidationReport report;

  bool success() const { return state.stage == Stage::done; }
};

// "File: <name>" header lines, each followed by a fenced block. FormatError
// when there are no such blocks or the tester is missing.
CodeArtifact parse_artifact(const std::string& completion, const std::string& tester_name);
std::string render_artifact(const CodeArtifact& artifact);
std::string render_sources(const std::vector<SourceFile>& files);

// First non-empty line must start with CONSISTENT or INCONSISTENT.
InspectionReport parse_inspection(const std::string& completion);

// Prompt assembly, exposed for tests.
ChatRequest generator_request(const tasks::TaskSpec& task, const PipelineConfig& config,
                              const std::vector<SourceFile>& codebase);
ChatRequest inspector_request(const CodeArtifact& artifact, const tasks::TaskSpec& task, int which);
// PreconditionError when the report holds no captured error.
ChatRequest debugger_request(const CodeArtifact& artifact, const sandbox::ExecutionReport& exec,
                             const std::string& guidelines_text, const std::vector<SourceFile>& codebase,
                             const std::vector<guidelines::Violation>& lint,
                             const std::string& inspector_findings);

// Writes the module files to target/subdir. CollisionError (nothing
// written) when any of them already exists; IoError on write failure.
std::vector<std::string> packer_merge(const CodeArtifact& artifact, const std::string& target,
                                      const std::string& subdir);

PipelineResult run_pipeline(const tasks::TaskSpec& task, const ChatBackend& backend,
                            const PipelineConfig& config);

nlohmann::json transcript_entry_to_json(const TranscriptEntry& e);
nlohmann::json state_to_json(const PipelineState& s);

// Writes transcript.jsonl, state.json, report.json and artifact/ under dir.
void write_attempt(const std::string& dir, const PipelineResult& result);

}  // namespace pdedev::pipeline
