#include <iostream>

#include <CLI11.hpp>

#include "pdedev/cli/commands.hpp"

using namespace pdedev::cli;

int main(int argc, char** argv) {
  CLI::App app{"pdedev: lattice Boltzmann testers, output validation and the agent pipeline"};
  app.require_subcommand(1);

  RunTesterOptions run;
  std::string run_out;
  long run_steps = -1;
  auto* run_cmd = app.add_subcommand("run-tester", "Run a reference tester and validate its output");
  run_cmd->add_option("task", run.task, "Built-in task name, task markdown or config file")->required();
  run_cmd->add_option("--set", run.overrides, "Config override key=value (repeatable)");
  run_cmd->add_option("--steps", run_steps, "Override the step count");
  run_cmd->add_option("-o,--output", run_out, "Output directory");
  bool run_no_validate = false;
  run_cmd->add_flag("--no-validate", run_no_validate, "Only run; skip the oracle checks");

  ValidateOptions val;
  auto* val_cmd = app.add_subcommand("validate", "Validate a tester output directory");
  val_cmd->add_option("output_dir", val.output_dir)->required();
  val_cmd->add_option("--task", val.task, "Task name or markdown file")->required();
  val_cmd->add_option("--set", val.overrides, "Config override key=value");

  PipelineOptions pipe;
  std::string limits;
  auto add_pipeline_options = [&](CLI::App* cmd) {
    cmd->add_option("description", pipe.description, "Task markdown file or built-in task")->required();
    cmd->add_option("--backend", pipe.backend, "scripted:DIR or http:MODEL");
    cmd->add_option("--codebase", pipe.codebase, "Target codebase directory");
    cmd->add_option("--out", pipe.out_dir, "Attempt (or batch) directory");
    cmd->add_option("--rules", pipe.rules_file, "Guidelines rules file");
    cmd->add_option("--conduct", pipe.conduct_file, "Code-conduct note for the Generator");
    cmd->add_option("--template", pipe.template_file, "Tester template");
    cmd->add_option("--run-command", pipe.run_command, "Tester command; {workdir} and {tester} expand");
    cmd->add_option("--tester-name", pipe.tester_name);
    cmd->add_option("--module-subdir", pipe.module_subdir, "Where module files go in the codebase");
    cmd->add_option("--pack-into", pipe.pack_into, "Packer target (default <out>/packed)");
    cmd->add_option("--timeout", pipe.timeout_s, "Tester timeout in seconds");
    cmd->add_option("--limits", limits, "inspect1,inspect2,debug caps (default 3,3,8)");
  };
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run one pipeline attempt");
  add_pipeline_options(pipe_cmd);
  pipe_cmd->add_option("--attempt", pipe.attempt, "Attempt number (selects attempt_NN fixtures)");

  BatchOptions batch;
  auto* batch_cmd = app.add_subcommand("batch", "Run several attempts and report the success rate");
  add_pipeline_options(batch_cmd);
  batch_cmd->add_option("--attempts", batch.attempts, "Number of attempts");
  batch_cmd->add_option("--parallel", batch.parallel, "Attempts run at once");

  LintOptions lint;
  auto* lint_cmd = app.add_subcommand("lint", "Check sources against the lint rules");
  lint_cmd->add_option("path", lint.path, "File or directory")->required();
  lint_cmd->add_option("--rules", lint.rules_file);

  std::string rem_dir, rem_from, rem_to;
  auto* rename_cmd = app.add_subcommand("rename", "Whole-word identifier rename across a directory");
  rename_cmd->add_option("dir", rem_dir)->required();
  rename_cmd->add_option("--from", rem_from)->required();
  rename_cmd->add_option("--to", rem_to)->required();

  std::string ph_dir, ph_name, ph_file;
  auto* ph_cmd = app.add_subcommand("placeholder", "Append an empty declaration to a codebase file");
  ph_cmd->add_option("dir", ph_dir)->required();
  ph_cmd->add_option("--name", ph_name)->required();
  ph_cmd->add_option("--file", ph_file, "Target file relative to dir")->required();

  std::string gl_rules;
  auto* gl_cmd = app.add_subcommand("guidelines", "Print the Debugger guidelines text");
  gl_cmd->add_option("--rules", gl_rules);

  std::string desc_task, desc_out;
  auto* desc_cmd = app.add_subcommand("describe", "Print a task description");
  desc_cmd->add_option("task", desc_task)->required();
  desc_cmd->add_option("-o,--output", desc_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*run_cmd) {
    if (run_steps >= 0) run.overrides.push_back("steps=" + std::to_string(run_steps));
    if (!run_out.empty()) run.output_dir = run_out;
    run.validate = !run_no_validate;
    return cmd_run_tester(run, std::cout, std::cerr);
  }
  if (*val_cmd) return cmd_validate(val, std::cout, std::cerr);
  if (*pipe_cmd || *batch_cmd) {
    if (!limits.empty()) {
      try {
        pipe.limits = parse_limits(limits);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
      }
    }
    if (*pipe_cmd) return cmd_pipeline(pipe, std::cout, std::cerr);
    batch.pipeline = pipe;
    return cmd_batch(batch, std::cout, std::cerr);
  }
  if (*lint_cmd) return cmd_lint(lint, std::cout, std::cerr);
  if (*rename_cmd) return cmd_rename(rem_dir, rem_from, rem_to, std::cout, std::cerr);
  if (*ph_cmd) return cmd_placeholder(ph_dir, ph_name, ph_file, std::cout, std::cerr);
  if (*gl_cmd) return cmd_guidelines(gl_rules, std::cout, std::cerr);
  if (*desc_cmd) return cmd_describe(desc_task, desc_out, std::cout, std::cerr);
  return kUsage;
}
