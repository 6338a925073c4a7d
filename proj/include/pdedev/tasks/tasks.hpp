#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdedev/tasks/config.hpp"
#include "pdedev/tasks/description.hpp"
#include "pdedev/tasks/manifest.hpp"

namespace pdedev::tasks {

struct TaskSpec {
  std::string name;
  std::string description_path;  // empty for built-in tasks
  TaskDescription description;

  const SimulationConfig& config() const { return description.config; }
  SimulationConfig& config() { return description.config; }
};

TaskSpec task_ad_gaussian();
TaskSpec task_bc_mixed();
TaskSpec task_fisher_kpp();
// Lid speed 1.0 exceeds the lattice sound speed; the default run uses 0.1.
TaskSpec task_cavity_powerlaw(double lid_speed = 0.1);

std::vector<std::string> builtin_task_names();
// ConfigError for an unknown name.
TaskSpec builtin_task(const std::string& name);
// Loads a Math-Algo markdown file.
TaskSpec load_task(const std::string& path);

struct SimulationOutput {
  std::string task;
  SimulationConfig::Solver solver = SimulationConfig::Solver::scalar;
  lbm::ScalarField scalar;     // phi, or rho for fluid runs
  lbm::VectorField velocity;   // advecting (physical units) or flow velocity
  long steps = 0;
  double time = 0.0;
  std::optional<SteadyInfo> steady;
  Manifest manifest;
  std::string output_dir;
};

struct RunOptions {
  std::optional<std::string> output_dir;  // overrides config.output_dir
  bool write_files = true;
  // Called after every snapshot with (step, output so far); may be empty.
  std::function<void(long)> on_snapshot;
};

// Snapshot names: <task>_<step, 7 digits>.vtk
std::string snapshot_name(const std::string& task, long step);
std::string_view scalar_field_name(SimulationConfig::Solver solver);

// Runs the step loop, writing a VTK snapshot at t = 0, every output_every
// steps and at the final step, plus manifest.json. On instability the
// manifest is written with status "unstable" before InstabilityError is
// rethrown.
SimulationOutput run_tester(const SimulationConfig& config, const RunOptions& options = {});
SimulationOutput run_tester(const TaskSpec& task, const RunOptions& options = {});

}  // namespace pdedev::tasks
