#pragma once

#include <string>
#include <vector>

namespace pdedev::sandbox {

struct ExecutionReport {
  int exit_status = 0;  // 137 after a timeout kill, 128+signal for other signals
  std::string stdout_text;
  std::string stderr_text;
  double duration = 0.0;  // seconds
  bool timed_out = false;
  std::string workdir;
  std::vector<std::string> captured_errors;

  bool failed() const { return exit_status != 0 || timed_out; }
};

}  // namespace pdedev::sandbox
