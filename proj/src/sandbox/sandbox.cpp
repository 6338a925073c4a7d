#include "pdedev/sandbox/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "pdedev/error.hpp"

extern char** environ;

namespace pdedev::sandbox {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string make_workdir(const std::string& temp_root) {
  std::error_code ec;
  const fs::path root = temp_root.empty() ? fs::temp_directory_path(ec) : fs::path(temp_root);
  if (ec) throw InfrastructureError("no temporary directory: " + ec.message());
  fs::create_directories(root, ec);
  std::string templ = (root / "pdedev-sbx-XXXXXX").string();
  if (::mkdtemp(templ.data()) == nullptr) {
    throw InfrastructureError(fmt::format("mkdtemp in {} failed: {}", root.string(), std::strerror(errno)));
  }
  return templ;
}

void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InfrastructureError("cannot write " + path.string());
  out << text;
  if (!out) throw InfrastructureError("write failed for " + path.string());
}

std::vector<std::string> child_environment(const std::map<std::string, std::string>& extra) {
  std::vector<std::string> env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    const std::string name = entry.substr(0, eq);
    if (is_credential_variable(name) || extra.count(name) > 0) continue;
    env.push_back(entry);
  }
  for (const auto& [k, v] : extra) env.push_back(k + "=" + v);
  return env;
}

// Reads into `buf` up to `limit` bytes, counting the rest in `dropped`.
struct Capture {
  std::string buf;
  std::size_t dropped = 0;
  bool open = true;
};

void drain(int fd, Capture& cap, std::size_t limit) {
  std::array<char, 8192> chunk{};
  const ssize_t n = ::read(fd, chunk.data(), chunk.size());
  if (n <= 0) {
    if (n == 0 || (errno != EINTR && errno != EAGAIN)) cap.open = false;
    return;
  }
  const auto got = static_cast<std::size_t>(n);
  const std::size_t room = cap.buf.size() < limit ? limit - cap.buf.size() : 0;
  cap.buf.append(chunk.data(), std::min(room, got));
  if (got > room) cap.dropped += got - room;
}

std::string finish(const Capture& cap) {
  if (cap.dropped == 0) return cap.buf;
  return cap.buf + fmt::format("\n[... truncated {} bytes]\n", cap.dropped);
}

void materialize(const pipeline::CodeArtifact& artifact, const std::string& codebase,
                 const SandboxOptions& options, const fs::path& work) {
  if (!codebase.empty()) {
    std::error_code ec;
    if (!fs::is_directory(codebase, ec)) {
      throw InfrastructureError("codebase is not a directory: " + codebase);
    }
    fs::copy(codebase, work, fs::copy_options::recursive | fs::copy_options::copy_symlinks, ec);
    if (ec) throw InfrastructureError("cannot copy codebase: " + ec.message());
  }
  const fs::path modules = options.module_subdir.empty() ? work : work / options.module_subdir;
  for (const auto& f : artifact.module_files) write_file(modules / f.name, f.text);
  write_file(work / artifact.tester.name, artifact.tester.text);
}

}  // namespace

bool is_credential_variable(const std::string& name) {
  return name == "LLM_API_KEY" || ends_with(name, "_API_KEY") || ends_with(name, "_TOKEN") ||
         ends_with(name, "_SECRET");
}

std::string expand_command(const std::string& templ, const std::string& workdir,
                           const std::string& tester) {
  std::string out;
  std::size_t pos = 0;
  while (pos < templ.size()) {
    const auto open = templ.find('{', pos);
    if (open == std::string::npos) {
      out += templ.substr(pos);
      break;
    }
    out += templ.substr(pos, open - pos);
    const auto close = templ.find('}', open);
    if (close == std::string::npos) throw ConfigError("run_command: unterminated '{' in " + templ);
    const std::string key = templ.substr(open + 1, close - open - 1);
    if (key == "workdir") {
      out += shell_quote(workdir);
    } else if (key == "tester") {
      out += shell_quote(tester);
    } else {
      throw ConfigError("run_command: unknown placeholder {" + key + "}");
    }
    pos = close + 1;
  }
  return out;
}

std::string truncate_capture(const std::string& text, std::size_t limit) {
  if (text.size() <= limit) return text;
  return text.substr(0, limit) + fmt::format("\n[... truncated {} bytes]\n", text.size() - limit);
}

std::vector<std::string> capture_errors(const std::string& stderr_text, int exit_status,
                                        bool timed_out, double timeout_s) {
  static const std::regex diag(
      R"(^\s*[A-Za-z_][\w.]*(Error|Exception)\b|\b(error|fatal error)\s*:|^\s*(ERROR|FATAL|Error)\b|\bSegmentation fault\b)");
  std::vector<std::string> out;
  std::vector<std::string> lines;
  std::istringstream in(stderr_text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  auto join = [](const std::vector<std::string>& block) {
    std::string s;
    for (const auto& l : block) s += (s.empty() ? "" : "\n") + l;
    return s;
  };
  // A traceback is kept whole, up to and including its exception line
  // (the first unindented one).
  std::vector<std::string> block;
  for (const auto& line : lines) {
    if (line.rfind("Traceback (most recent call last)", 0) == 0) {
      if (!block.empty()) out.push_back(join(block));
      block = {line};
      continue;
    }
    if (!block.empty()) {
      block.push_back(line);
      if (!line.empty() && line[0] != ' ' && line[0] != '\t') {
        out.push_back(join(block));
        block.clear();
      }
      continue;
    }
    if (std::regex_search(line, diag)) out.push_back(line);
  }
  if (!block.empty()) out.push_back(join(block));
  if (out.empty() && exit_status != 0) {
    std::vector<std::string> tail;
    for (auto it = lines.rbegin(); it != lines.rend() && tail.size() < 10; ++it) {
      if (it->find_first_not_of(" \t") != std::string::npos) tail.insert(tail.begin(), *it);
    }
    if (!tail.empty()) {
      out.push_back(join(tail));
    } else if (!timed_out) {
      out.push_back(fmt::format("process exited with status {}", exit_status));
    }
  }
  if (timed_out) out.push_back(fmt::format("timed out after {:g} s", timeout_s));
  return out;
}

ExecutionReport execute_tester(const pipeline::CodeArtifact& artifact, const std::string& codebase,
                               const SandboxOptions& options) {
  if (!(options.timeout_s > 0.0)) throw ConfigError("sandbox timeout must be > 0");
  artifact.validate();
  ExecutionReport report;
  report.workdir = make_workdir(options.temp_root);
  const fs::path work(report.workdir);
  try {
    materialize(artifact, codebase, options, work);
  } catch (...) {
    remove_workdir(report);
    throw;
  }

  const std::string command = expand_command(options.run_command, report.workdir, artifact.tester.name);
  const auto env = child_environment(options.extra_env);
  std::vector<char*> envp;
  for (const auto& e : env) envp.push_back(const_cast<char*>(e.c_str()));
  envp.push_back(nullptr);
  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};

  int out_pipe[2];
  int err_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw InfrastructureError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw InfrastructureError(std::string("pipe: ") + std::strerror(errno));
  }

  const auto start = Clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
    throw InfrastructureError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);
    if (::chdir(report.workdir.c_str()) != 0) ::_exit(126);
    ::execve(argv[0], const_cast<char* const*>(argv), envp.data());
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  Capture out_cap;
  Capture err_cap;
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(options.timeout_s));
  // After a kill, give the pipes a short while to reach EOF.
  auto drain_deadline = deadline;
  while (out_cap.open || err_cap.open) {
    const auto now = Clock::now();
    if (!report.timed_out && now >= deadline) {
      report.timed_out = true;
      ::kill(-pid, SIGKILL);
      drain_deadline = now + std::chrono::seconds(2);
    }
    if (report.timed_out && now >= drain_deadline) break;
    const auto until = report.timed_out ? drain_deadline : deadline;
    const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(until - now).count();
    pollfd fds[2];
    nfds_t n = 0;
    if (out_cap.open) fds[n++] = {out_pipe[0], POLLIN, 0};
    if (err_cap.open) fds[n++] = {err_pipe[0], POLLIN, 0};
    const int ready = ::poll(fds, n, static_cast<int>(std::clamp<long long>(wait_ms, 1, 1000)));
    if (ready < 0 && errno != EINTR) break;
    for (nfds_t k = 0; k < n && ready > 0; ++k) {
      if ((fds[k].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
      if (fds[k].fd == out_pipe[0]) {
        drain(out_pipe[0], out_cap, options.capture_limit);
      } else {
        drain(err_pipe[0], err_cap, options.capture_limit);
      }
    }
  }
  ::close(out_pipe[0]);
  ::close(err_pipe[0]);

  int status = 0;
  if (report.timed_out) ::kill(-pid, SIGKILL);
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  // Stray processes left in the group once the shell has gone.
  ::kill(-pid, SIGKILL);
  report.duration = std::chrono::duration<double>(Clock::now() - start).count();

  if (report.timed_out) {
    report.exit_status = 128 + SIGKILL;
  } else if (WIFEXITED(status)) {
    report.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    report.exit_status = 128 + WTERMSIG(status);
  } else {
    report.exit_status = 1;
  }
  report.stdout_text = finish(out_cap);
  report.stderr_text = finish(err_cap);
  report.captured_errors =
      capture_errors(report.stderr_text, report.exit_status, report.timed_out, options.timeout_s);
  return report;
}

void remove_workdir(const ExecutionReport& report) {
  if (report.workdir.empty()) return;
  std::error_code ec;
  fs::remove_all(report.workdir, ec);
}

oracle::ErrorClass classify_exec(const ExecutionReport& report,
                                 const std::optional<oracle::ValidationReport>& validation) {
  if (validation && validation->error_class == oracle::ErrorClass::unstable) {
    return oracle::ErrorClass::unstable;
  }
  if (report.failed()) return oracle::ErrorClass::syntactic;
  if (validation) return validation->error_class;
  return oracle::ErrorClass::pass;
}

}  // namespace pdedev::sandbox
