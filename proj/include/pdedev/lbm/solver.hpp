#pragma once

#include "pdedev/bc/boundary.hpp"
#include "pdedev/lbm/kernels.hpp"

namespace pdedev::lbm {

// Flushes subnormal results to zero while alive and restores the previous
// floating-point mode afterwards. No-op off x86.
class DenormalGuard {
 public:
  DenormalGuard();
  ~DenormalGuard();
  DenormalGuard(const DenormalGuard&) = delete;
  DenormalGuard& operator=(const DenormalGuard&) = delete;

 private:
  unsigned saved_ = 0;
};

// Advection-diffusion(-reaction) of a passive scalar.
struct ScalarSetup {
  double diffusivity = 0.0;
  ReactionTerm reaction;
  bc::BoundaryPass boundary;
};

struct ScalarState {
  DistributionField f;
  ScalarField phi;
  VectorField velocity;  // prescribed advecting flow
  long step = 0;
};

// Populations start at the scalar equilibrium of (phi0, velocity).
ScalarState init_scalar_state(const ScalarField& phi0, const VectorField& velocity);

struct FluidSetup {
  enum class Rheology { newtonian, power_law };

  Rheology rheology = Rheology::newtonian;
  double viscosity = 1.0 / 6.0;  // newtonian
  PowerLawModel power_law;
  // Strain/viscosity fixed-point sweeps per step for power-law fluids.
  int viscosity_iterations = 1;
  bc::BoundaryPass boundary;
};

struct FluidState {
  DistributionField f;
  ScalarField rho;
  VectorField u;
  ScalarField freq;  // per-node relaxation frequency used by the last collision
  long step = 0;
};

FluidState init_fluid_state(const ScalarField& rho0, const VectorField& u0, const FluidSetup& setup);

// Scratch buffers reused between steps.
struct StepWorkspace {
  DistributionField feq;
  DistributionField post;
  DistributionField streamed;
  TensorField strain;
  ScalarField nu;
};

// collide -> reaction source -> stream -> boundary pass -> moments.
// Throws InstabilityError if any population turns non-finite.
void advance_scalar(ScalarState& state, const ScalarSetup& setup, StepWorkspace& work);
ScalarState step_scalar(const ScalarState& state, const ScalarSetup& setup);

// For power-law fluids the per-node frequency is refreshed from the strain
// rate of the incoming populations (lagged viscosity) before collision.
void advance_fluid(FluidState& state, const FluidSetup& setup, StepWorkspace& work);
FluidState step_fluid(const FluidState& state, const FluidSetup& setup);

struct SteadyResult {
  long steps = 0;
  double residual = 0.0;
  bool converged = false;
};

class ScalarSolver {
 public:
  ScalarSolver(ScalarSetup setup, ScalarState state);

  void step() { advance_scalar(state_, setup_, work_); }
  void run(long steps);
  // Stops once the max-norm change of phi over `check_every` steps is <= tol.
  SteadyResult run_until_steady(double tol, long max_steps, long check_every = 100);

  const ScalarState& state() const { return state_; }
  const ScalarSetup& setup() const { return setup_; }
  RelaxationParam relaxation() const;

 private:
  ScalarSetup setup_;
  ScalarState state_;
  StepWorkspace work_;
};

class FluidSolver {
 public:
  FluidSolver(FluidSetup setup, FluidState state);

  void step() { advance_fluid(state_, setup_, work_); }
  void run(long steps);
  // Stops once the max-norm change of u over `check_every` steps is <= tol.
  SteadyResult run_until_steady(double tol, long max_steps, long check_every = 100);

  const FluidState& state() const { return state_; }
  const FluidSetup& setup() const { return setup_; }

 private:
  FluidSetup setup_;
  FluidState state_;
  StepWorkspace work_;
};

}  // namespace pdedev::lbm
