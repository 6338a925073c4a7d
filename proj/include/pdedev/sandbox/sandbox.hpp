#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdedev/oracle/oracle.hpp"
#include "pdedev/pipeline/artifact.hpp"
#include "pdedev/sandbox/report.hpp"

namespace pdedev::sandbox {

struct SandboxOptions {
  // Run through /bin/sh -c with the workdir as cwd. {workdir} and {tester}
  // are replaced by the absolute workdir and the tester's relative path.
  std::string run_command = "python3 {tester}";
  double timeout_s = 300.0;
  std::size_t capture_limit = 64 * 1024;
  // Module files land here inside the workdir; the tester sits at the root.
  std::string module_subdir;
  // Parent of the per-run temporary directories; empty means the system
  // temp directory.
  std::string temp_root;
  // Extra variables for the child, applied after credential filtering.
  std::map<std::string, std::string> extra_env;
};

// Copies `codebase` (a directory, may be empty) plus the artifact into a
// fresh temporary directory and runs the tester there. The workdir is left
// in place for the caller to inspect; see remove_workdir.
// InfrastructureError if the sandbox cannot be set up or spawned.
ExecutionReport execute_tester(const pipeline::CodeArtifact& artifact, const std::string& codebase,
                               const SandboxOptions& options = {});

void remove_workdir(const ExecutionReport& report);

// Names dropped from the child's environment: LLM_API_KEY and anything
// ending in _API_KEY, _TOKEN or _SECRET.
bool is_credential_variable(const std::string& name);

// Substitutes {workdir} and {tester}. ConfigError on an unknown placeholder.
std::string expand_command(const std::string& templ, const std::string& workdir,
                           const std::string& tester);

// Diagnostics from stderr, one entry each: whole Python tracebacks,
// "...Error:" lines and compiler "error:" lines. When the exit status is
// nonzero and nothing matches, the last ten non-empty stderr lines form one
// entry, or a synthetic status line stands in.
std::vector<std::string> capture_errors(const std::string& stderr_text, int exit_status,
                                        bool timed_out, double timeout_s);

// Keeps the first `limit` bytes and appends a marker naming the dropped count.
std::string truncate_capture(const std::string& text, std::size_t limit);

oracle::ErrorClass classify_exec(const ExecutionReport& report,
                                 const std::optional<oracle::ValidationReport>& validation = std::nullopt);

}  // namespace pdedev::sandbox
