#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pdedev/bc/boundary.hpp"
#include "pdedev/lbm/kernels.hpp"
#include "pdedev/lbm/solver.hpp"

namespace pdedev::tasks {

using lbm::ScalarField;
using lbm::Vec2;
using lbm::VectorField;

struct InitSpec {
  enum class Kind { gaussian, uniform, quiescent };

  Kind kind = Kind::quiescent;
  double sigma = 1.0;
  // Centre defaults to the domain centre (nx/2, ny/2) when not given.
  bool has_center = false;
  Vec2 center;
  double amplitude = 1.0;
  double value = 0.0;  // uniform

  static InitSpec gaussian(double sigma);
  static InitSpec gaussian_at(double sigma, Vec2 center, double amplitude = 1.0);
  static InitSpec uniform(double value);
  static InitSpec quiescent() { return {}; }

  Vec2 center_for(int nx, int ny) const;

  friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

// gaussian:<sigma>[,<xc>,<yc>[,<amp>]] | uniform:<v> | quiescent
InitSpec parse_init(std::string_view text);
std::string format_init(const InitSpec& init);

// none | logistic:<r> | table:<lo>:<hi>:<v0>,<v1>,...
lbm::ReactionTerm parse_reaction(std::string_view text);
std::string format_reaction(const lbm::ReactionTerm& reaction);

struct SimulationConfig {
  enum class Solver { scalar, fluid };
  enum class Stop { steps, steady };

  std::string task = "custom";
  Solver solver = Solver::scalar;
  int nx = 100;
  int ny = 100;
  // Lattice steps; an upper bound when stop = steady.
  long steps = 500;
  // Physical time per lattice step (dx = 1). Scalar runs only.
  double dt = 1.0;

  double diffusivity = 0.01;
  Vec2 velocity;
  lbm::ReactionTerm reaction;

  lbm::FluidSetup::Rheology rheology = lbm::FluidSetup::Rheology::newtonian;
  double viscosity = 1.0 / 6.0;
  double consistency_K = 1.0;
  double behavior_n = 1.0;
  int viscosity_iterations = 1;

  std::vector<bc::BcRule> bc;  // ordered top, bottom, left, right; periodic omitted
  InitSpec init;

  long output_every = 100;
  std::string output_dir = "out";

  Stop stop = Stop::steps;
  double steady_tol = 1e-8;
  long check_every = 100;

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

std::string_view to_string(SimulationConfig::Solver solver);
std::string_view to_string(SimulationConfig::Stop stop);

// Flat key=value lines; '#' starts a comment. Unknown or repeated keys are
// errors. The result is validated.
SimulationConfig parse_config(std::string_view text);
SimulationConfig load_config(const std::string& path);
// Every key, one per line, in a fixed order; parse_config(render_config(c)) == c.
std::string render_config(const SimulationConfig& config);

// Throws ConfigError describing the first violated constraint.
void validate_config(const SimulationConfig& config);

// Applies one "key=value" override on top of an existing config.
void set_config_value(SimulationConfig& config, std::string_view key, std::string_view value);

// Lattice-unit setups derived from a validated config.
bc::BoundaryPass boundary_pass(const SimulationConfig& config);
lbm::ScalarSetup scalar_setup(const SimulationConfig& config);
lbm::FluidSetup fluid_setup(const SimulationConfig& config);
ScalarField initial_scalar(const SimulationConfig& config);
// Advecting velocity in lattice units.
VectorField initial_velocity(const SimulationConfig& config);

}  // namespace pdedev::tasks
