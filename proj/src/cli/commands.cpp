#include "pdedev/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "pdedev/error.hpp"
#include "pdedev/guidelines/rules.hpp"
#include "pdedev/oracle/oracle.hpp"
#include "pdedev/sandbox/sandbox.hpp"
#include "pdedev/tasks/tasks.hpp"

namespace pdedev::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Runs `body`, turning exceptions into an exit code and a message on err.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const ParameterRangeError*>(&e) ||
      dynamic_cast<const FormatError*>(&e)) {
    return kUsage;
  }
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const InfrastructureError*>(&e) ||
      dynamic_cast<const BackendError*>(&e)) {
    return kInfrastructure;
  }
  if (dynamic_cast<const Error*>(&e)) return kFailure;
  return kInfrastructure;
}

tasks::TaskSpec resolve_task(const std::string& name_or_path) {
  const auto names = tasks::builtin_task_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return tasks::builtin_task(name_or_path);
  if (!fs::is_regular_file(name_or_path)) {
    throw ConfigError(fmt::format("unknown task '{}' (built-in tasks: {})", name_or_path, fmt::join(names, ", ")));
  }
  if (fs::path(name_or_path).extension() == ".md") return tasks::load_task(name_or_path);
  // A bare config file; checks come from the built-in task of the same name.
  tasks::TaskSpec t;
  const auto config = tasks::load_config(name_or_path);
  if (std::find(names.begin(), names.end(), config.task) != names.end()) t = tasks::builtin_task(config.task);
  t.name = config.task;
  t.description_path = name_or_path;
  t.description.config = config;
  return t;
}

void apply_overrides(tasks::TaskSpec& task, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + o);
    tasks::set_config_value(task.config(), o.substr(0, eq), o.substr(eq + 1));
  }
  tasks::validate_config(task.config());
  task.name = task.config().task;
}

int cmd_run_tester(const RunTesterOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto task = resolve_task(opt.task);
    apply_overrides(task, opt.overrides);
    tasks::RunOptions ro;
    ro.output_dir = opt.output_dir;
    const std::string dir = opt.output_dir.value_or(task.config().output_dir);
    sandbox::ExecutionReport exec;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      tasks::run_tester(task, ro);
    } catch (const InstabilityError& e) {
      err << "error: " << e.what() << "\n";
      exec.exit_status = 1;
    }
    exec.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!opt.validate) {
      err << fmt::format("{}: finished in {:.2f} s\n", task.name, exec.duration);
      return exec.exit_status == 0 ? kOk : kFailure;
    }
    const auto report = oracle::validate_dir(task, exec, dir);
    out << oracle::report_to_json(report).dump(2) << "\n";
    err << fmt::format("{}: {} in {:.2f} s\n", task.name, oracle::to_string(report.error_class), exec.duration);
    return report.success ? kOk : kFailure;
  });
}

int cmd_validate(const ValidateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto task = resolve_task(opt.task);
    apply_overrides(task, opt.overrides);
    if (!fs::is_directory(opt.output_dir)) throw IoError("no such directory: " + opt.output_dir);
    const auto report = oracle::validate_dir(task, sandbox::ExecutionReport{}, opt.output_dir);
    out << oracle::report_to_json(report).dump(2) << "\n";
    return report.success ? kOk : kFailure;
  });
}

std::unique_ptr<pipeline::ChatBackend> make_backend(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "scripted") {
    if (arg.empty()) throw ConfigError("scripted backend needs a fixture directory: scripted:DIR");
    return std::make_unique<pipeline::ScriptedBackend>(arg);
  }
  if (kind == "http") return std::make_unique<pipeline::HttpBackend>(pipeline::http_options_from_env(arg));
  throw ConfigError("backend must be scripted:DIR or http:MODEL, got " + spec);
}

pipeline::PipelineLimits parse_limits(const std::string& text) {
  pipeline::PipelineLimits l;
  int* fields[] = {&l.max_inspect1, &l.max_inspect2, &l.max_debug};
  std::istringstream in(text);
  std::string part;
  int k = 0;
  while (std::getline(in, part, ',')) {
    if (k >= 3) throw ConfigError("limits take three values: inspect1,inspect2,debug");
    try {
      std::size_t used = 0;
      *fields[k] = std::stoi(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw ConfigError("limit is not an integer: " + part);
    }
    ++k;
  }
  if (k != 3) throw ConfigError("limits take three values: inspect1,inspect2,debug");
  l.validate();
  return l;
}

pipeline::PipelineConfig make_pipeline_config(const PipelineOptions& opt, const std::string& attempt_dir) {
  pipeline::PipelineConfig c;
  c.limits = opt.limits;
  c.limits.validate();
  c.codebase = opt.codebase;
  if (!c.codebase.empty() && !fs::is_directory(c.codebase)) throw ConfigError("codebase is not a directory: " + c.codebase);
  if (!opt.rules_file.empty()) c.rules = guidelines::load_rules(opt.rules_file);
  if (!opt.conduct_file.empty()) c.code_conduct = read_text(opt.conduct_file);
  if (!opt.template_file.empty()) c.tester_template = read_text(opt.template_file);
  c.tester_name = opt.tester_name;
  c.sandbox.run_command = opt.run_command;
  c.sandbox.timeout_s = opt.timeout_s;
  c.sandbox.module_subdir = opt.module_subdir;
  c.pack_into = opt.pack_into.empty() ? (fs::path(attempt_dir) / "packed").string() : opt.pack_into;
  c.attempt = opt.attempt;
  return c;
}

AttemptOutcome run_attempt(const tasks::TaskSpec& task, const pipeline::ChatBackend& backend,
                           const PipelineOptions& opt, int attempt, const std::string& attempt_dir) {
  PipelineOptions o = opt;
  o.attempt = attempt;
  auto config = make_pipeline_config(o, attempt_dir);
  // A stale attempt directory would make the packer report collisions.
  std::error_code ec;
  fs::remove_all(attempt_dir, ec);
  fs::create_directories(attempt_dir, ec);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = pipeline::run_pipeline(task, backend, config);
  AttemptOutcome outcome;
  outcome.attempt = attempt;
  outcome.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  outcome.success = result.success();
  outcome.error_class = outcome.success ? "pass" : std::string(oracle::to_string(result.report.error_class));
  outcome.stage = std::string(pipeline::to_string(result.state.stage));
  outcome.failure_reason = result.state.failure_reason;
  outcome.infrastructure_failure = result.state.infrastructure_failure;
  pipeline::write_attempt(attempt_dir, result);
  return outcome;
}

int cmd_pipeline(const PipelineOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto task = resolve_task(opt.description);
    const auto backend = make_backend(opt.backend);
    const std::string dir = opt.out_dir.empty() ? (fs::path("attempts") / task.name).string() : opt.out_dir;
    const auto outcome = run_attempt(task, *backend, opt, opt.attempt, dir);
    out << outcome_to_json(outcome).dump() << "\n";
    if (outcome.success) return kOk;
    err << fmt::format("attempt failed ({}): {}\n", outcome.error_class, outcome.failure_reason);
    return outcome.infrastructure_failure ? kInfrastructure : kFailure;
  });
}

std::string BatchResult::success_rate() const { return fmt::format("{}/{}", successes, attempts); }

double BatchResult::success_fraction() const {
  return attempts > 0 ? static_cast<double>(successes) / attempts : 0.0;
}

json outcome_to_json(const AttemptOutcome& o) {
  return {{"attempt", o.attempt},
          {"success", o.success},
          {"error_class", o.error_class},
          {"stage", o.stage},
          {"failure_reason", o.failure_reason},
          {"infrastructure_failure", o.infrastructure_failure},
          {"duration", o.duration}};
}

json batch_to_json(const BatchResult& b) {
  json per = json::array();
  for (const auto& o : b.per_attempt) per.push_back(outcome_to_json(o));
  return {{"task", b.task},
          {"attempts", b.attempts},
          {"successes", b.successes},
          {"success_rate", b.success_rate()},
          {"success_fraction", b.success_fraction()},
          {"per_attempt", per}};
}

BatchResult run_batch(const BatchOptions& opt) {
  if (opt.attempts < 1) throw ConfigError("--attempts must be >= 1");
  if (opt.parallel < 1) throw ConfigError("--parallel must be >= 1");
  const auto task = resolve_task(opt.pipeline.description);
  const auto backend = make_backend(opt.pipeline.backend);
  const fs::path root = opt.pipeline.out_dir.empty() ? fs::path("batches") / task.name : fs::path(opt.pipeline.out_dir);
  // Fail early on bad options rather than once per attempt.
  make_pipeline_config(opt.pipeline, root.string());

  BatchResult result;
  result.task = task.name;
  result.attempts = opt.attempts;
  result.per_attempt.resize(static_cast<std::size_t>(opt.attempts));
  std::atomic<int> next{1};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (int k = next++; k <= opt.attempts; k = next++) {
      try {
        const std::string dir = (root / fmt::format("attempt_{:02d}", k)).string();
        result.per_attempt[static_cast<std::size_t>(k - 1)] = run_attempt(task, *backend, opt.pipeline, k, dir);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int threads = std::min(opt.parallel, opt.attempts);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::string lines;
  for (const auto& o : result.per_attempt) {
    if (o.success) ++result.successes;
    lines += outcome_to_json(o).dump() + "\n";
  }
  write_text(root / "batch.jsonl", lines);
  write_text(root / "batch.json", batch_to_json(result).dump(2) + "\n");
  return result;
}

int cmd_batch(const BatchOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto result = run_batch(opt);
    out << batch_to_json(result).dump(2) << "\n";
    err << fmt::format("{}: success rate {}\n", result.task, result.success_rate());
    return kOk;
  });
}

int cmd_lint(const LintOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!fs::exists(opt.path)) throw ConfigError("no such file or directory: " + opt.path);
    const auto rules = opt.rules_file.empty() ? guidelines::default_rules() : guidelines::load_rules(opt.rules_file);
    const auto violations = guidelines::lint(guidelines::read_sources(opt.path), rules);
    out << guidelines::violations_to_json(violations).dump(2) << "\n";
    return violations.empty() ? kOk : kFailure;
  });
}

int cmd_rename(const std::string& dir, const std::string& from, const std::string& to, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
    const int n = guidelines::remediate_rename(fs::path(dir), from, to);
    out << json{{"from", from}, {"to", to}, {"replacements", n}}.dump() << "\n";
    return kOk;
  });
}

int cmd_placeholder(const std::string& dir, const std::string& name, const std::string& target_file,
                    std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto r = guidelines::inject_placeholder(dir, name, target_file);
    if (!r.warning.empty()) err << "warning: " << r.warning << "\n";
    out << json{{"name", name}, {"file", target_file}, {"injected", r.injected}}.dump() << "\n";
    return kOk;
  });
}

int cmd_guidelines(const std::string& rules_file, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto rules = rules_file.empty() ? guidelines::default_rules() : guidelines::load_rules(rules_file);
    out << guidelines::render_guidelines(rules);
    return kOk;
  });
}

int cmd_describe(const std::string& task, const std::string& out_file, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t = resolve_task(task);
    const std::string text = tasks::render_description(t.description);
    if (out_file.empty()) {
      out << text;
    } else {
      write_text(out_file, text);
    }
    return kOk;
  });
}

}  // namespace pdedev::cli
