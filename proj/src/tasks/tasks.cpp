#include "pdedev/tasks/tasks.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>

#include <fmt/format.h>

#include "pdedev/error.hpp"
#include "pdedev/lbm/solver.hpp"
#include "pdedev/tasks/vtk.hpp"

namespace pdedev::tasks {

namespace fs = std::filesystem;

namespace {

constexpr const char* kScalarAlgorithm =
    "D2Q9 lattice, BGK collision with f_i^eq = w_i phi (1 + 3 e_i.u).\n"
    "Relaxation frequency freq_val = 1 / (3 D + 1/2).\n"
    "Each step: collide, add the source w_i R(phi), stream (periodic push),\n"
    "apply boundary rules (anti-bounce-back for Dirichlet, bounce-back for\n"
    "Neumann), then phi = sum_i f_i. Abort on any non-finite population.";

constexpr const char* kFluidAlgorithm =
    "D2Q9 lattice, BGK collision with the second-order equilibrium.\n"
    "Strain rate from the non-equilibrium moment:\n"
    "E = -(3 freq_val / (2 rho)) sum_i e_i e_i (f_i - f_i^eq), shear = sqrt(2 E:E).\n"
    "Viscosity nu = K max(shear, 1e-12)^(n-1) clamped so that freq_val stays in\n"
    "[0.05, 1.95], lagged by one step; freq_val = 1 / (3 nu + 1/2).\n"
    "Walls: halfway bounce-back, moving lid adds -6 w_i rho_w e_i.u_w.\n"
    "Run until the max-norm change of u over 100 steps is at most 1e-8.";

SimulationConfig base_scalar(const std::string& task) {
  SimulationConfig c;
  c.task = task;
  c.solver = SimulationConfig::Solver::scalar;
  c.output_dir = "out/" + task;
  return c;
}

TaskSpec finish(std::string name, TaskDescription d) {
  validate_config(d.config);
  return TaskSpec{std::move(name), {}, std::move(d)};
}

}  // namespace

TaskSpec task_ad_gaussian() {
  TaskDescription d;
  d.equations =
      "$$\\partial_t \\phi + \\mathbf{u} \\cdot \\nabla \\phi = D \\nabla^2 \\phi$$\n\n"
      "Initial condition $\\phi_0 = \\exp(-|\\mathbf{x} - \\mathbf{x}_0|^2 / (2\\sigma^2))$, "
      "doubly periodic domain.";
  d.algorithm = kScalarAlgorithm;
  d.tester_notes =
      "100 x 100 periodic box, u = (0.1, 0), D = 0.01, Gaussian sigma = 10 centred in the box,\n"
      "500 steps of unit size. The peak should move 50 cells in +x and decay to\n"
      "sigma^2 / (sigma^2 + 2 D t).";
  SimulationConfig& c = d.config;
  c = base_scalar("ad_gaussian");
  c.nx = 100;
  c.ny = 100;
  c.steps = 500;
  c.diffusivity = 0.01;
  c.velocity = {0.1, 0.0};
  c.init = InitSpec::gaussian(10.0);
  c.output_every = 100;
  d.checks = {{"peak_amplitude_rel_error", AcceptanceCheck::Op::le, 0.02},
              {"peak_position_error", AcceptanceCheck::Op::le, 1.0}};
  d.parameters = {{"missing_advection_fraction", 0.25}};
  return finish("ad_gaussian", std::move(d));
}

TaskSpec task_bc_mixed() {
  TaskDescription d;
  d.equations =
      "$$\\partial_t \\phi + \\mathbf{u} \\cdot \\nabla \\phi = D \\nabla^2 \\phi$$\n\n"
      "Dirichlet: $\\phi = \\phi_c$ on the top and left edges.\n"
      "Homogeneous Neumann: $\\nabla \\phi \\cdot \\mathbf{n} = 0$ on the bottom and right edges.";
  d.algorithm = kScalarAlgorithm;
  d.tester_notes =
      "100 x 100 box, u = (0.1, 0.2), D = 1.0, phi = 0 on top, phi = 1 on the left,\n"
      "Neumann bottom and right, phi = 1 initially. Run to steady state.";
  SimulationConfig& c = d.config;
  c = base_scalar("bc_mixed");
  c.nx = 100;
  c.ny = 100;
  c.steps = 200000;
  c.stop = SimulationConfig::Stop::steady;
  c.diffusivity = 1.0;
  c.velocity = {0.1, 0.2};
  c.bc = {bc::BcRule::dirichlet(bc::Edge::top, 0.0), bc::BcRule::neumann(bc::Edge::bottom),
          bc::BcRule::dirichlet(bc::Edge::left, 1.0), bc::BcRule::neumann(bc::Edge::right)};
  c.init = InitSpec::uniform(1.0);
  c.output_every = 1000;
  d.checks = {{"top_band_mean", AcceptanceCheck::Op::le, 0.1},
              {"left_band_mean", AcceptanceCheck::Op::ge, 0.9},
              {"steady_residual", AcceptanceCheck::Op::le, 1e-8}};
  d.parameters = {{"bc_swap_miss", 0.25}, {"bc_swap_match", 0.1}};
  return finish("bc_mixed", std::move(d));
}

TaskSpec task_fisher_kpp() {
  TaskDescription d;
  d.equations =
      "$$\\partial_t \\phi = D \\nabla^2 \\phi + r \\phi (1 - \\phi)$$\n\n"
      "with D = 1. Fronts invade the unstable state phi = 0 at speed $2\\sqrt{rD}$.";
  d.algorithm = kScalarAlgorithm;
  d.tester_notes =
      "r = 0.1, D = 1, Gaussian sigma = 12.5 centred, periodic, no flow.\n"
      "A 4096 x 16 strip keeps the fronts away from their periodic images up to t = 3000;\n"
      "dt = 0.5 per lattice step (dx = 1) keeps the lattice front speed within 2%.\n"
      "The phi = 0.5 radius along the centre row is fitted against t on [1000, 3000].";
  SimulationConfig& c = d.config;
  c = base_scalar("fisher_kpp");
  c.nx = 4096;
  c.ny = 16;
  c.steps = 6000;
  c.dt = 0.5;
  c.diffusivity = 1.0;
  c.reaction = lbm::ReactionTerm::logistic(0.1);
  c.init = InitSpec::gaussian(12.5);
  c.output_every = 1000;
  d.checks = {{"front_speed_rel_error", AcceptanceCheck::Op::le, 0.05}};
  d.parameters = {{"fit_t_min", 1000.0}, {"fit_t_max", 3000.0}, {"front_level", 0.5}};
  return finish("fisher_kpp", std::move(d));
}

TaskSpec task_cavity_powerlaw(double lid_speed) {
  TaskDescription d;
  d.equations =
      "$$\\nabla \\cdot \\mathbf{u} = 0, \\quad \\rho (\\partial_t \\mathbf{u} + \\mathbf{u} "
      "\\cdot \\nabla \\mathbf{u}) = -\\nabla p + \\nabla \\cdot (2 \\mu \\mathbf{E})$$\n\n"
      "$$\\mu = K \\dot\\gamma^{n-1}, \\quad \\dot\\gamma = \\sqrt{2 \\mathbf{E} : \\mathbf{E}}, "
      "\\quad \\mathbf{E} = (\\nabla \\mathbf{u} + \\nabla \\mathbf{u}^T) / 2$$";
  d.algorithm = kFluidAlgorithm;
  d.tester_notes = fmt::format(
      "100 x 100 cavity, K = 1.0, n = 1.25, quiescent start, no-slip walls,\n"
      "lid moving at ({}, 0). A lid speed of 1.0 exceeds the lattice sound speed\n"
      "and is unstable with plain BGK.",
      lid_speed);
  SimulationConfig& c = d.config;
  c.task = "cavity_powerlaw";
  c.solver = SimulationConfig::Solver::fluid;
  c.output_dir = "out/cavity_powerlaw";
  c.nx = 100;
  c.ny = 100;
  c.steps = 200000;
  c.stop = SimulationConfig::Stop::steady;
  c.rheology = lbm::FluidSetup::Rheology::power_law;
  c.consistency_K = 1.0;
  c.behavior_n = 1.25;
  c.bc = {bc::BcRule::moving_wall(bc::Edge::top, {lid_speed, 0.0}),
          bc::BcRule::noslip(bc::Edge::bottom), bc::BcRule::noslip(bc::Edge::left),
          bc::BcRule::noslip(bc::Edge::right)};
  c.init = InitSpec::quiescent();
  c.output_every = 5000;
  d.checks = {{"centerline_min_ux_ratio", AcceptanceCheck::Op::le, -0.05},
              {"max_speed_ratio", AcceptanceCheck::Op::le, 1.0},
              {"steady_residual", AcceptanceCheck::Op::le, 1e-8}};
  return finish("cavity_powerlaw", std::move(d));
}

std::vector<std::string> builtin_task_names() {
  return {"ad_gaussian", "bc_mixed", "fisher_kpp", "cavity_powerlaw"};
}

TaskSpec builtin_task(const std::string& name) {
  if (name == "ad_gaussian") return task_ad_gaussian();
  if (name == "bc_mixed") return task_bc_mixed();
  if (name == "fisher_kpp") return task_fisher_kpp();
  if (name == "cavity_powerlaw") return task_cavity_powerlaw();
  throw ConfigError(fmt::format("unknown task '{}'", name));
}

TaskSpec load_task(const std::string& path) {
  TaskSpec t;
  t.description = load_description(path);
  t.name = t.description.config.task;
  t.description_path = path;
  return t;
}

std::string snapshot_name(const std::string& task, long step) {
  return fmt::format("{}_{:07d}.vtk", task, step);
}

std::string_view scalar_field_name(SimulationConfig::Solver solver) {
  return solver == SimulationConfig::Solver::scalar ? "phi" : "rho";
}

namespace {

// Removes snapshots and manifest left by an earlier run of the same task.
void clear_previous(const fs::path& dir, const std::string& task) {
  const std::regex pattern(std::regex_replace(task, std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)") +
                           R"(_\d{7}\.vtk)");
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, pattern)) fs::remove(entry.path());
  }
  fs::remove(dir / Manifest::kFileName);
}

class Runner {
 public:
  Runner(const SimulationConfig& c, const RunOptions& o) : c_(c), opt_(o) {
    dir_ = o.output_dir.value_or(c.output_dir);
    manifest_.task = c.task;
    manifest_.solver = std::string(to_string(c.solver));
    manifest_.nx = c.nx;
    manifest_.ny = c.ny;
    manifest_.dt = c.dt;
    if (opt_.write_files) {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory " + dir_);
      clear_previous(dir_, c.task);
    }
  }

  // `residual_of` selects the field whose change decides steadiness.
  template <typename Solver, typename ResidualOf>
  SimulationOutput run(Solver& solver, ResidualOf residual_of) {
    long step = 0;
    long last_snapshot = -1;
    auto snapshot = [&] {
      write_snapshot(step, scalar_of(solver.state()), velocity_of(solver.state()));
      last_snapshot = step;
    };
    lbm::DenormalGuard guard;
    try {
      snapshot();
      auto previous = residual_of(solver.state());
      while (step < c_.steps) {
        solver.step();
        ++step;
        if (c_.stop == SimulationConfig::Stop::steady && step % c_.check_every == 0) {
          const auto& now = residual_of(solver.state());
          steady_.residual = lbm::max_abs_difference(now, previous);
          steady_.steps = step;
          previous = now;
          if (steady_.residual <= c_.steady_tol) {
            steady_.converged = true;
            break;
          }
        }
        if (step % c_.output_every == 0) snapshot();
      }
      if (last_snapshot != step) snapshot();
    } catch (const InstabilityError& e) {
      fail(e.step(), e.what());
      throw;
    } catch (const DegenerateDensityError& e) {
      fail(step + 1, e.what());
      throw InstabilityError(step + 1, e.what());
    }
    SimulationOutput out;
    out.task = c_.task;
    out.solver = c_.solver;
    out.scalar = scalar_of(solver.state());
    out.velocity = velocity_of(solver.state());
    out.steps = step;
    out.time = static_cast<double>(step) * c_.dt;
    manifest_.steps = step;
    if (c_.stop == SimulationConfig::Stop::steady) {
      steady_.steps = step;
      if (step < c_.check_every) steady_.residual = std::numeric_limits<double>::infinity();
      manifest_.steady = steady_;
      out.steady = steady_;
    }
    if (opt_.write_files) write_manifest(dir_, manifest_);
    out.manifest = manifest_;
    out.output_dir = dir_;
    return out;
  }

 private:
  const lbm::ScalarField& scalar_of(const lbm::ScalarState& s) const { return s.phi; }
  const lbm::ScalarField& scalar_of(const lbm::FluidState& s) const { return s.rho; }
  lbm::VectorField velocity_of(const lbm::ScalarState& s) const { return s.velocity; }
  lbm::VectorField velocity_of(const lbm::FluidState& s) const { return s.u; }

  void write_snapshot(long step, const lbm::ScalarField& scalar, lbm::VectorField velocity) {
    if (c_.solver == SimulationConfig::Solver::scalar && c_.dt != 1.0) {
      for (double& v : velocity.data()) v /= c_.dt;
    }
    const std::string name = snapshot_name(c_.task, step);
    const std::vector<std::string> fields{std::string(scalar_field_name(c_.solver)), "velocity"};
    if (opt_.write_files) {
      const auto data = make_dataset(scalar, fields[0], velocity, fields[1]);
      const std::string path = (fs::path(dir_) / name).string();
      write_vtk(path, data, fmt::format("{} step {}", c_.task, step));
      manifest_.files.push_back(
          {step, static_cast<double>(step) * c_.dt, name, fields, checksum_of_file(path)});
    } else {
      manifest_.files.push_back({step, static_cast<double>(step) * c_.dt, name, fields, {}});
    }
    if (opt_.on_snapshot) opt_.on_snapshot(step);
  }

  void fail(long step, const std::string& what) {
    manifest_.status = "unstable";
    manifest_.instability_step = step;
    manifest_.steps = step;
    manifest_.message = what;
    if (opt_.write_files) write_manifest(dir_, manifest_);
  }

  const SimulationConfig& c_;
  const RunOptions& opt_;
  std::string dir_;
  Manifest manifest_;
  SteadyInfo steady_;
};

}  // namespace

SimulationOutput run_tester(const SimulationConfig& config, const RunOptions& options) {
  validate_config(config);
  Runner runner(config, options);
  if (config.solver == SimulationConfig::Solver::scalar) {
    lbm::ScalarSolver solver(scalar_setup(config),
                             lbm::init_scalar_state(initial_scalar(config), initial_velocity(config)));
    return runner.run(solver, [](const lbm::ScalarState& s) -> const lbm::ScalarField& { return s.phi; });
  }
  const lbm::FluidSetup setup = fluid_setup(config);
  lbm::FluidSolver solver(setup, lbm::init_fluid_state(initial_scalar(config),
                                                       initial_velocity(config), setup));
  return runner.run(solver, [](const lbm::FluidState& s) -> const lbm::VectorField& { return s.u; });
}

SimulationOutput run_tester(const TaskSpec& task, const RunOptions& options) {
  return run_tester(task.config(), options);
}

}  // namespace pdedev::tasks
