#pragma once

#include <exception>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdedev/pipeline/pipeline.hpp"

namespace pdedev::cli {

// Exit codes shared by every command.
enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kInfrastructure = 3 };

// Maps an exception to the exit code: config/parse/precondition errors are
// usage errors, I/O, sandbox and backend errors are infrastructure errors.
int exit_code_for(const std::exception& e);

// Built-in task name, or a path to a task markdown file, or a config file.
// ConfigError when it is none of these.
tasks::TaskSpec resolve_task(const std::string& name_or_path);

// "key=value" overrides applied to the task's config (then revalidated).
void apply_overrides(tasks::TaskSpec& task, const std::vector<std::string>& overrides);

struct RunTesterOptions {
  std::string task;
  std::vector<std::string> overrides;
  std::optional<std::string> output_dir;
  bool validate = true;  // false: exit 0 once the run completes
};
int cmd_run_tester(const RunTesterOptions& opt, std::ostream& out, std::ostream& err);

struct ValidateOptions {
  std::string output_dir;
  std::string task;
  std::vector<std::string> overrides;
};
int cmd_validate(const ValidateOptions& opt, std::ostream& out, std::ostream& err);

struct PipelineOptions {
  std::string description;
  std::string backend = "scripted:fixtures";  // scripted:DIR or http:MODEL
  std::string codebase;
  std::string out_dir;  // attempt directory; default attempts/<task>
  std::string rules_file;
  std::string conduct_file;
  std::string template_file;
  std::string run_command = "python3 {tester}";
  std::string tester_name = "test_case.py";
  std::string module_subdir;
  std::string pack_into;  // default <out_dir>/packed
  double timeout_s = 300.0;
  pipeline::PipelineLimits limits;
  int attempt = 1;
};

std::unique_ptr<pipeline::ChatBackend> make_backend(const std::string& spec);
pipeline::PipelineConfig make_pipeline_config(const PipelineOptions& opt, const std::string& attempt_dir);
// "3,3,8" -> limits. ConfigError on malformed input.
pipeline::PipelineLimits parse_limits(const std::string& text);

struct AttemptOutcome {
  int attempt = 0;
  bool success = false;
  std::string error_class;  // "pass" on success
  std::string stage;
  std::string failure_reason;
  bool infrastructure_failure = false;
  double duration = 0.0;
};

// One pipeline attempt written under attempt_dir.
AttemptOutcome run_attempt(const tasks::TaskSpec& task, const pipeline::ChatBackend& backend,
                           const PipelineOptions& opt, int attempt, const std::string& attempt_dir);

int cmd_pipeline(const PipelineOptions& opt, std::ostream& out, std::ostream& err);

struct BatchResult {
  std::string task;
  int attempts = 0;
  int successes = 0;
  std::vector<AttemptOutcome> per_attempt;

  std::string success_rate() const;  // "7/10"
  double success_fraction() const;
};

nlohmann::json outcome_to_json(const AttemptOutcome& o);
nlohmann::json batch_to_json(const BatchResult& b);

struct BatchOptions {
  PipelineOptions pipeline;
  int attempts = 10;
  int parallel = 1;
};
// Attempt k is written to <out_dir>/attempt_<kk>; a batch.jsonl line per
// attempt is appended in attempt order.
BatchResult run_batch(const BatchOptions& opt);
int cmd_batch(const BatchOptions& opt, std::ostream& out, std::ostream& err);

struct LintOptions {
  std::string path;
  std::string rules_file;
};
int cmd_lint(const LintOptions& opt, std::ostream& out, std::ostream& err);

int cmd_rename(const std::string& dir, const std::string& from, const std::string& to, std::ostream& out,
               std::ostream& err);
int cmd_placeholder(const std::string& dir, const std::string& name, const std::string& target_file,
                    std::ostream& out, std::ostream& err);
int cmd_guidelines(const std::string& rules_file, std::ostream& out, std::ostream& err);
// Markdown description of a built-in task, to stdout or a file.
int cmd_describe(const std::string& task, const std::string& out_file, std::ostream& out, std::ostream& err);

}  // namespace pdedev::cli
