#include "pdedev/lbm/solver.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define PDEDEV_HAVE_MXCSR 1
#endif

namespace pdedev::lbm {

namespace {

// Push-streaming destination of the 9 populations of node (x, y), with
// periodic wrap-around.
struct Neighbours {
  int nx, ny;
  std::array<std::size_t, kQ> dest{};

  void at(int x, int y) {
    const int xs[3] = {x == 0 ? nx - 1 : x - 1, x, x == nx - 1 ? 0 : x + 1};
    const int ys[3] = {y == 0 ? ny - 1 : y - 1, y, y == ny - 1 ? 0 : y + 1};
    for (int i = 0; i < kQ; ++i) {
      const std::size_t node =
          static_cast<std::size_t>(xs[kD2Q9.ex(i) + 1]) * ny + ys[kD2Q9.ey(i) + 1];
      dest[i] = node * kQ + i;
    }
  }
  // Away from the y edges the destinations advance by kQ per node.
  void shift(std::ptrdiff_t d) {
    for (auto& v : dest) v = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(v) + d);
  }
};

void ensure(DistributionField& f, int nx, int ny) {
  if (!f.same_shape(nx, ny)) f = DistributionField(nx, ny);
}

}  // namespace

ScalarState init_scalar_state(const ScalarField& phi0, const VectorField& velocity) {
  require_same_shape(phi0, velocity, "init_scalar_state");
  if (!phi0.all_finite() || !velocity.all_finite()) {
    throw ParameterRangeError("initial scalar state must be finite");
  }
  ScalarState s;
  s.phi = phi0;
  s.velocity = velocity;
  s.f = equilibrium_scalar(phi0, velocity);
  return s;
}

FluidState init_fluid_state(const ScalarField& rho0, const VectorField& u0, const FluidSetup& setup) {
  require_same_shape(rho0, u0, "init_fluid_state");
  FluidState s;
  s.rho = rho0;
  s.u = u0;
  s.f = equilibrium_fluid(rho0, u0);
  double freq = 0.0;
  if (setup.rheology == FluidSetup::Rheology::newtonian) {
    freq = relaxation_from_viscosity(setup.viscosity).freq_val;
  } else {
    setup.power_law.validate();
    // Equilibrium populations carry no strain; start from the floored shear rate.
    freq = relaxation_from_viscosity(powerlaw_viscosity_at(0.0, setup.power_law)).freq_val;
  }
  s.freq = ScalarField(rho0.nx(), rho0.ny(), freq);
  return s;
}

// Fused equivalent of equilibrium_scalar -> collide_bgk -> add_reaction_source
// -> stream, followed by the boundary pass and moments_scalar. The arithmetic
// matches the separate kernels operation for operation.
void advance_scalar(ScalarState& state, const ScalarSetup& setup, StepWorkspace& work) {
  const int nx = state.f.nx();
  const int ny = state.f.ny();
  require_same_shape(state.f, state.phi, "advance_scalar");
  require_same_shape(state.f, state.velocity, "advance_scalar");
  const double w = relaxation_from_diffusivity(setup.diffusivity).freq_val;
  const bool react = setup.reaction.kind() != ReactionTerm::Kind::none;
  ensure(work.post, nx, ny);
  ensure(work.streamed, nx, ny);
  Neighbours nb{nx, ny};
  // Boundary rules only read post-collision populations on edge nodes.
  const bool keep_post = !setup.boundary.fully_periodic();
  const double* f = state.f.data().data();
  const double* phi = state.phi.data().data();
  const double* vel = state.velocity.data().data();
  double* post = work.post.data().data();
  double* out = work.streamed.data().data();
  for (int x = 0; x < nx; ++x) {
    const bool edge_column = x == 0 || x == nx - 1;
    for (int y = 0; y < ny; ++y) {
      const std::size_t k = static_cast<std::size_t>(x) * ny + y;
      if (y <= 1 || y == ny - 1) {
        nb.at(x, y);
      } else {
        nb.shift(kQ);
      }
      const bool store_post = keep_post && (edge_column || y == 0 || y == ny - 1);
      const double p = phi[k];
      const double ux = vel[2 * k];
      const double uy = vel[2 * k + 1];
      double r = 0.0;
      if (react) {
        r = setup.reaction(p);
        if (!std::isfinite(r)) {
          throw InstabilityError(state.step, fmt::format("reaction term is not finite at phi = {:g}", p));
        }
      }
      for (int i = 0; i < kQ; ++i) {
        const double eu = kD2Q9.ex(i) * ux + kD2Q9.ey(i) * uy;
        const double feq = kD2Q9.weights[i] * p * (1.0 + 3.0 * eu);
        const double fi = f[k * kQ + i];
        double v = fi - w * (fi - feq);
        if (react) v += kD2Q9.weights[i] * r;
        if (store_post) post[k * kQ + i] = v;
        out[nb.dest[i]] = v;
      }
    }
  }
  setup.boundary.apply_scalar(work.post, work.streamed);
  std::swap(state.f, work.streamed);
  ++state.step;
  const double* g = state.f.data().data();
  double* p = state.phi.data().data();
  const std::size_t n = state.f.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i = 0; i < kQ; ++i) s += g[k * kQ + i];
    if (!std::isfinite(s)) throw InstabilityError(state.step, "non-finite scalar populations");
    p[k] = s;
  }
}

ScalarState step_scalar(const ScalarState& state, const ScalarSetup& setup) {
  ScalarState next = state;
  StepWorkspace work;
  advance_scalar(next, setup, work);
  return next;
}

// Fused equivalent of equilibrium_fluid -> [strain_rate_noneq ->
// powerlaw_viscosity] -> collide_bgk -> stream, then the boundary pass and
// moments_fluid.
void advance_fluid(FluidState& state, const FluidSetup& setup, StepWorkspace& work) {
  const int nx = state.f.nx();
  const int ny = state.f.ny();
  require_same_shape(state.f, state.rho, "advance_fluid");
  require_same_shape(state.f, state.u, "advance_fluid");
  require_same_shape(state.f, state.freq, "advance_fluid");
  const bool power_law = setup.rheology == FluidSetup::Rheology::power_law;
  const int sweeps = std::max(1, setup.viscosity_iterations);
  double newtonian_freq = 0.0;
  if (power_law) {
    setup.power_law.validate();
  } else {
    newtonian_freq = relaxation_from_viscosity(setup.viscosity).freq_val;
  }
  ensure(work.post, nx, ny);
  ensure(work.streamed, nx, ny);
  Neighbours nb{nx, ny};
  // Boundary rules only read post-collision populations on edge nodes.
  const bool keep_post = !setup.boundary.fully_periodic();
  const double* f = state.f.data().data();
  const double* rho = state.rho.data().data();
  const double* vel = state.u.data().data();
  double* freq = state.freq.data().data();
  double* post = work.post.data().data();
  double* out = work.streamed.data().data();
  double feq[kQ];
  for (int x = 0; x < nx; ++x) {
    const bool edge_column = x == 0 || x == nx - 1;
    for (int y = 0; y < ny; ++y) {
      const std::size_t k = static_cast<std::size_t>(x) * ny + y;
      if (y <= 1 || y == ny - 1) {
        nb.at(x, y);
      } else {
        nb.shift(kQ);
      }
      const bool store_post = keep_post && (edge_column || y == 0 || y == ny - 1);
      const double r = rho[k];
      if (!(r > 0.0)) {
        throw DegenerateDensityError("advance_fluid: non-positive density at node " +
                                     std::to_string(k));
      }
      const double ux = vel[2 * k];
      const double uy = vel[2 * k + 1];
      const double usq = 1.5 * (ux * ux + uy * uy);
      for (int i = 0; i < kQ; ++i) {
        const double eu = 3.0 * (kD2Q9.ex(i) * ux + kD2Q9.ey(i) * uy);
        feq[i] = kD2Q9.weights[i] * r * (1.0 + eu + 0.5 * eu * eu - usq);
      }
      double w = newtonian_freq;
      if (power_law) {
        for (int s = 0; s < sweeps; ++s) {
          double pxx = 0.0;
          double pxy = 0.0;
          double pyx = 0.0;
          double pyy = 0.0;
          for (int i = 0; i < kQ; ++i) {
            const double neq = f[k * kQ + i] - feq[i];
            const double ex = kD2Q9.ex(i);
            const double ey = kD2Q9.ey(i);
            pxx += ex * ex * neq;
            pxy += ex * ey * neq;
            pyx += ey * ex * neq;
            pyy += ey * ey * neq;
          }
          const double scale = -1.5 * freq[k] / r;
          const double nu = powerlaw_viscosity_at(
              shear_rate(scale * pxx, scale * pxy, scale * pyx, scale * pyy), setup.power_law);
          freq[k] = 1.0 / (3.0 * nu + 0.5);
        }
        w = freq[k];
      }
      if (!(w > 0.0 && w < 2.0)) {
        throw ParameterRangeError("relaxation frequency must lie in (0, 2), got " +
                                  std::to_string(w));
      }
      for (int i = 0; i < kQ; ++i) {
        const double fi = f[k * kQ + i];
        const double v = fi - w * (fi - feq[i]);
        if (store_post) post[k * kQ + i] = v;
        out[nb.dest[i]] = v;
      }
    }
  }
  setup.boundary.apply_fluid(work.post, work.streamed);
  std::swap(state.f, work.streamed);
  ++state.step;
  const double* g = state.f.data().data();
  double* rr = state.rho.data().data();
  double* uu = state.u.data().data();
  const std::size_t n = state.f.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    double jx = 0.0;
    double jy = 0.0;
    for (int i = 0; i < kQ; ++i) {
      const double fi = g[k * kQ + i];
      s += fi;
      jx += kD2Q9.ex(i) * fi;
      jy += kD2Q9.ey(i) * fi;
    }
    if (!std::isfinite(s) || !std::isfinite(jx) || !std::isfinite(jy)) {
      throw InstabilityError(state.step, "non-finite flow populations");
    }
    if (!(s > 0.0)) {
      throw DegenerateDensityError("non-positive density " + std::to_string(s) + " at step " +
                                   std::to_string(state.step));
    }
    rr[k] = s;
    uu[2 * k] = jx / s;
    uu[2 * k + 1] = jy / s;
  }
}

FluidState step_fluid(const FluidState& state, const FluidSetup& setup) {
  FluidState next = state;
  StepWorkspace work;
  advance_fluid(next, setup, work);
  return next;
}

ScalarSolver::ScalarSolver(ScalarSetup setup, ScalarState state)
    : setup_(std::move(setup)), state_(std::move(state)) {
  relaxation_from_diffusivity(setup_.diffusivity);
  if (setup_.boundary.has_fluid_rules()) {
    throw ConfigError("scalar solver given a velocity-wall boundary rule");
  }
}

RelaxationParam ScalarSolver::relaxation() const {
  return relaxation_from_diffusivity(setup_.diffusivity);
}

#ifdef PDEDEV_HAVE_MXCSR
DenormalGuard::DenormalGuard() : saved_(_mm_getcsr()) {
  // FTZ (bit 15) and DAZ (bit 6)
  _mm_setcsr(saved_ | 0x8040u);
}
DenormalGuard::~DenormalGuard() { _mm_setcsr(saved_); }
#else
DenormalGuard::DenormalGuard() = default;
DenormalGuard::~DenormalGuard() = default;
#endif

void ScalarSolver::run(long steps) {
  DenormalGuard guard;
  for (long k = 0; k < steps; ++k) step();
}

SteadyResult ScalarSolver::run_until_steady(double tol, long max_steps, long check_every) {
  SteadyResult result;
  ScalarField previous = state_.phi;
  while (result.steps < max_steps) {
    const long chunk = std::min(check_every, max_steps - result.steps);
    run(chunk);
    result.steps += chunk;
    result.residual = max_abs_difference(state_.phi, previous);
    if (chunk == check_every && result.residual <= tol) {
      result.converged = true;
      break;
    }
    previous = state_.phi;
  }
  return result;
}

FluidSolver::FluidSolver(FluidSetup setup, FluidState state)
    : setup_(std::move(setup)), state_(std::move(state)) {
  if (setup_.rheology == FluidSetup::Rheology::newtonian) {
    relaxation_from_viscosity(setup_.viscosity);
  } else {
    setup_.power_law.validate();
  }
  if (setup_.boundary.has_scalar_rules()) {
    throw ConfigError("fluid solver given a scalar boundary rule");
  }
}

void FluidSolver::run(long steps) {
  DenormalGuard guard;
  for (long k = 0; k < steps; ++k) step();
}

SteadyResult FluidSolver::run_until_steady(double tol, long max_steps, long check_every) {
  SteadyResult result;
  VectorField previous = state_.u;
  while (result.steps < max_steps) {
    const long chunk = std::min(check_every, max_steps - result.steps);
    run(chunk);
    result.steps += chunk;
    result.residual = max_abs_difference(state_.u, previous);
    if (chunk == check_every && result.residual <= tol) {
      result.converged = true;
      break;
    }
    previous = state_.u;
  }
  return result;
}

}  // namespace pdedev::lbm
