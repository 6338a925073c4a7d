#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define HAVE_MXCSR 1
#endif

#include "pdedev/error.hpp"
#include "pdedev/lbm/solver.hpp"
#include "support.hpp"

using namespace pdedev;
using namespace pdedev::lbm;
using testsupport::total;

namespace {

ScalarField gaussian(int nx, int ny, double sigma, double amp = 1.0) {
  ScalarField f(nx, ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      const double dx = x - nx / 2.0, dy = y - ny / 2.0;
      f(x, y) = amp * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    }
  }
  return f;
}

ScalarField noise(int nx, int ny, unsigned seed) {
  ScalarField f(nx, ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      seed = seed * 1664525u + 1013904223u;
      f(x, y) = 0.2 + 0.6 * (seed >> 8) / double(1u << 24);
    }
  }
  return f;
}

// The same step, assembled from the individual kernels.
ScalarState composed_scalar_step(const ScalarState& s, const ScalarSetup& setup) {
  const RelaxationParam relax = relaxation_from_diffusivity(setup.diffusivity);
  DistributionField feq = equilibrium_scalar(s.phi, s.velocity);
  DistributionField post = collide_bgk(s.f, feq, relax);
  if (setup.reaction.kind() != ReactionTerm::Kind::none) {
    post = apply_reaction_source(post, s.phi, setup.reaction);
  }
  DistributionField streamed = stream(post);
  setup.boundary.apply_scalar(post, streamed);
  ScalarState out = s;
  out.f = streamed;
  out.phi = moments_scalar(streamed);
  out.step = s.step + 1;
  return out;
}

FluidState composed_newtonian_step(const FluidState& s, const FluidSetup& setup) {
  DistributionField feq = equilibrium_fluid(s.rho, s.u);
  DistributionField post = collide_bgk(s.f, feq, relaxation_from_viscosity(setup.viscosity));
  DistributionField streamed = stream(post);
  setup.boundary.apply_fluid(post, streamed);
  FluidMoments m = moments_fluid(streamed);
  FluidState out = s;
  out.f = streamed;
  out.rho = m.rho;
  out.u = m.u;
  out.step = s.step + 1;
  return out;
}

}  // namespace

TEST(Lattice, WeightsAndIsotropy) {
  double wsum = 0.0, exx = 0.0, exy = 0.0, eyy = 0.0;
  for (int i = 0; i < kQ; ++i) {
    wsum += kD2Q9.weights[i];
    exx += kD2Q9.weights[i] * kD2Q9.ex(i) * kD2Q9.ex(i);
    exy += kD2Q9.weights[i] * kD2Q9.ex(i) * kD2Q9.ey(i);
    eyy += kD2Q9.weights[i] * kD2Q9.ey(i) * kD2Q9.ey(i);
    const int o = kD2Q9.opposite(i);
    EXPECT_EQ(kD2Q9.ex(o), -kD2Q9.ex(i));
    EXPECT_EQ(kD2Q9.ey(o), -kD2Q9.ey(i));
    EXPECT_EQ(kD2Q9.opposite(o), i);
  }
  EXPECT_NEAR(wsum, 1.0, 1e-15);
  EXPECT_NEAR(exx, kD2Q9.sound_speed_sq, 1e-15);
  EXPECT_NEAR(eyy, kD2Q9.sound_speed_sq, 1e-15);
  EXPECT_EQ(exy, 0.0);
}

TEST(Relaxation, DiffusivityMapping) {
  EXPECT_DOUBLE_EQ(relaxation_from_diffusivity(1.0 / 6.0).freq_val, 1.0);
  EXPECT_DOUBLE_EQ(relaxation_from_diffusivity(0.01).freq_val, 1.0 / (3 * 0.01 + 0.5));
  EXPECT_NEAR(transport_coefficient(relaxation_from_diffusivity(0.37)), 0.37, 1e-15);
  EXPECT_THROW(relaxation_from_diffusivity(-0.1), ParameterRangeError);
  EXPECT_THROW(relaxation_from_diffusivity(0.0), ParameterRangeError);
  EXPECT_THROW(make_relaxation(2.0), ParameterRangeError);
  EXPECT_THROW(make_relaxation(0.0), ParameterRangeError);
  EXPECT_NO_THROW(make_relaxation(1.99));
}

TEST(Equilibrium, ScalarMoments) {
  ScalarField phi = noise(5, 4, 7);
  VectorField u = uniform_velocity(5, 4, {0.08, -0.03});
  DistributionField feq = equilibrium_scalar(phi, u);
  for (int x = 0; x < 5; ++x) {
    for (int y = 0; y < 4; ++y) {
      double m0 = 0, mx = 0, my = 0;
      for (int i = 0; i < kQ; ++i) {
        m0 += feq(x, y, i);
        mx += feq(x, y, i) * kD2Q9.ex(i);
        my += feq(x, y, i) * kD2Q9.ey(i);
      }
      EXPECT_NEAR(m0, phi(x, y), 1e-15);
      EXPECT_NEAR(mx, phi(x, y) * 0.08, 1e-15);
      EXPECT_NEAR(my, phi(x, y) * -0.03, 1e-15);
    }
  }
}

TEST(Equilibrium, FluidMomentsUpToSecondOrder) {
  ScalarField rho(3, 3, 1.2);
  VectorField u = uniform_velocity(3, 3, {0.05, 0.02});
  DistributionField feq = equilibrium_fluid(rho, u);
  double m0 = 0, jx = 0, jy = 0, pxx = 0, pxy = 0, pyy = 0;
  for (int i = 0; i < kQ; ++i) {
    const double f = feq(1, 1, i);
    m0 += f;
    jx += f * kD2Q9.ex(i);
    jy += f * kD2Q9.ey(i);
    pxx += f * kD2Q9.ex(i) * kD2Q9.ex(i);
    pxy += f * kD2Q9.ex(i) * kD2Q9.ey(i);
    pyy += f * kD2Q9.ey(i) * kD2Q9.ey(i);
  }
  EXPECT_NEAR(m0, 1.2, 1e-14);
  EXPECT_NEAR(jx, 1.2 * 0.05, 1e-15);
  EXPECT_NEAR(jy, 1.2 * 0.02, 1e-15);
  EXPECT_NEAR(pxx, 1.2 / 3 + 1.2 * 0.05 * 0.05, 1e-14);
  EXPECT_NEAR(pxy, 1.2 * 0.05 * 0.02, 1e-15);
  EXPECT_NEAR(pyy, 1.2 / 3 + 1.2 * 0.02 * 0.02, 1e-14);
}

TEST(Collision, ConservesLocalScalar) {
  DistributionField f = equilibrium_scalar(noise(6, 6, 11), uniform_velocity(6, 6, {0.1, 0.0}));
  DistributionField feq = equilibrium_scalar(moments_scalar(f), uniform_velocity(6, 6, {0.1, 0.0}));
  DistributionField post = collide_bgk(f, feq, make_relaxation(1.3));
  ScalarField before = moments_scalar(f), after = moments_scalar(post);
  EXPECT_LT(max_abs_difference(before, after), 1e-15);
}

TEST(Collision, ShapeMismatchThrows) {
  DistributionField a(4, 4), b(4, 5);
  EXPECT_THROW(collide_bgk(a, b, make_relaxation(1.0)), ShapeError);
  EXPECT_THROW(GridField<1>(0, 3), ShapeError);
}

TEST(Streaming, PeriodicShiftAndWrap) {
  DistributionField f(4, 3);
  f(3, 2, 5) = 1.0;  // (+1,+1) from the corner wraps to (0,0)
  f(0, 1, 3) = 2.0;  // (-1,0) wraps to x = 3
  DistributionField g = stream(f);
  EXPECT_EQ(g(0, 0, 5), 1.0);
  EXPECT_EQ(g(3, 1, 3), 2.0);
  double s = 0;
  for (double v : g.data()) s += v;
  EXPECT_EQ(s, 3.0);
}

TEST(Reaction, LogisticAndTables) {
  ReactionTerm r = ReactionTerm::logistic(0.1);
  EXPECT_DOUBLE_EQ(r(0.5), 0.1 * 0.5 * 0.5);
  EXPECT_EQ(r(0.0), 0.0);
  EXPECT_EQ(r(1.0), 0.0);

  ReactionTerm t = ReactionTerm::tabulate([](double p) { return 0.1 * p * (1 - p); }, -0.01, 1.01, 2049);
  for (double p : {0.0, 0.13, 0.5, 0.77, 1.0}) EXPECT_NEAR(t(p), r(p), 1e-6);
  EXPECT_TRUE(std::isnan(t(1.5)));

  ScalarField phi(2, 2, 1.5);
  DistributionField f(2, 2);
  EXPECT_THROW(add_reaction_source(f, phi, t), Error);
}

TEST(Reaction, SourceAddsWeightedRate) {
  ScalarField phi(3, 3, 0.25);
  DistributionField f(3, 3);
  add_reaction_source(f, phi, ReactionTerm::logistic(0.4));
  const double rate = 0.4 * 0.25 * 0.75;
  for (int i = 0; i < kQ; ++i) EXPECT_DOUBLE_EQ(f(1, 2, i), kD2Q9.weights[i] * rate);
}

TEST(PowerLaw, ShearRateAndViscosity) {
  // Simple shear du_x/dy = g: E_xy = g/2, shear rate g.
  EXPECT_NEAR(shear_rate(0, 0.05, 0.05, 0), 0.1, 1e-15);
  PowerLawModel n1{0.2, 1.0};
  EXPECT_EQ(powerlaw_viscosity_at(0.0, n1), 0.2);
  EXPECT_EQ(powerlaw_viscosity_at(3.0, n1), 0.2);
  PowerLawModel thick{1.0, 1.25};
  EXPECT_NEAR(powerlaw_viscosity_at(0.01, thick), std::pow(0.01, 0.25), 1e-15);
  EXPECT_EQ(powerlaw_viscosity_at(0.0, thick), thick.nu_min);
  PowerLawModel thin{1.0, 0.5};
  EXPECT_EQ(powerlaw_viscosity_at(1e-9, thin), thin.nu_max);
  PowerLawModel bad{-1.0, 1.0};
  EXPECT_THROW(bad.validate(), ParameterRangeError);
}

TEST(Step, FusedScalarMatchesComposedKernels) {
  const int nx = 17, ny = 11;
  ScalarSetup setup;
  setup.diffusivity = 0.07;
  setup.reaction = ReactionTerm::logistic(0.05);
  const bc::BcRule rules[] = {bc::BcRule::dirichlet(bc::Edge::top, 0.1), bc::BcRule::neumann(bc::Edge::bottom),
                              bc::BcRule::dirichlet(bc::Edge::left, 0.9)};
  setup.boundary = bc::assemble_bc_pass(rules);
  ScalarState fused = init_scalar_state(noise(nx, ny, 5), uniform_velocity(nx, ny, {0.05, -0.04}));
  ScalarState composed = fused;
  StepWorkspace work;
  for (int k = 0; k < 25; ++k) {
    advance_scalar(fused, setup, work);
    composed = composed_scalar_step(composed, setup);
  }
  EXPECT_EQ(fused.f, composed.f);
  EXPECT_EQ(fused.phi, composed.phi);
  EXPECT_EQ(fused.step, 25);
}

TEST(Step, FusedNewtonianFluidMatchesComposedKernels) {
  const int nx = 12, ny = 10;
  FluidSetup setup;
  setup.viscosity = 0.05;
  const bc::BcRule rules[] = {bc::BcRule::moving_wall(bc::Edge::top, {0.05, 0.0}),
                              bc::BcRule::noslip(bc::Edge::bottom), bc::BcRule::noslip(bc::Edge::left),
                              bc::BcRule::noslip(bc::Edge::right)};
  setup.boundary = bc::assemble_bc_pass(rules);
  FluidState fused = init_fluid_state(ScalarField(nx, ny, 1.0), VectorField(nx, ny), setup);
  FluidState composed = fused;
  StepWorkspace work;
  for (int k = 0; k < 30; ++k) {
    advance_fluid(fused, setup, work);
    composed = composed_newtonian_step(composed, setup);
  }
  EXPECT_EQ(fused.f, composed.f);
  EXPECT_EQ(fused.u, composed.u);
  EXPECT_EQ(fused.rho, composed.rho);
}

TEST(Step, PowerLawWithUnitIndexEqualsNewtonian) {
  const int nx = 24, ny = 24;
  const bc::BcRule rules[] = {bc::BcRule::moving_wall(bc::Edge::top, {0.1, 0.0}),
                              bc::BcRule::noslip(bc::Edge::bottom), bc::BcRule::noslip(bc::Edge::left),
                              bc::BcRule::noslip(bc::Edge::right)};
  FluidSetup newt;
  newt.viscosity = 0.1;
  newt.boundary = bc::assemble_bc_pass(rules);
  FluidSetup pl = newt;
  pl.rheology = FluidSetup::Rheology::power_law;
  pl.power_law = {0.1, 1.0};
  FluidSolver a(newt, init_fluid_state(ScalarField(nx, ny, 1.0), VectorField(nx, ny), newt));
  FluidSolver b(pl, init_fluid_state(ScalarField(nx, ny, 1.0), VectorField(nx, ny), pl));
  a.run(300);
  b.run(300);
  EXPECT_LE(max_abs_difference(a.state().u, b.state().u), 1e-12);
}

TEST(Conservation, PeriodicDiffusion) {
  ScalarSetup setup;
  setup.diffusivity = 0.1;
  ScalarSolver solver(setup, init_scalar_state(gaussian(40, 30, 4.0), VectorField(40, 30)));
  const double m0 = total(solver.state().phi);
  solver.run(1000);
  EXPECT_LE(std::abs(total(solver.state().phi) - m0) / m0, 1e-10);
}

TEST(Conservation, NeumannBoxDiffusion) {
  ScalarSetup setup;
  setup.diffusivity = 0.1;
  const bc::BcRule rules[] = {bc::BcRule::neumann(bc::Edge::top), bc::BcRule::neumann(bc::Edge::bottom),
                              bc::BcRule::neumann(bc::Edge::left), bc::BcRule::neumann(bc::Edge::right)};
  setup.boundary = bc::assemble_bc_pass(rules);
  ScalarSolver solver(setup, init_scalar_state(noise(30, 20, 9), VectorField(30, 20)));
  const double m0 = total(solver.state().phi);
  solver.run(1000);
  EXPECT_LE(std::abs(total(solver.state().phi) - m0) / m0, 1e-10);
}

TEST(Conservation, NeumannBoxWithWallNormalFlow) {
  // Zero total flux: advected scalar piles up at the wall but is not lost.
  ScalarSetup setup;
  setup.diffusivity = 0.2;
  const bc::BcRule rules[] = {bc::BcRule::neumann(bc::Edge::left), bc::BcRule::neumann(bc::Edge::right)};
  setup.boundary = bc::assemble_bc_pass(rules);
  ScalarSolver solver(setup, init_scalar_state(ScalarField(30, 6, 1.0), uniform_velocity(30, 6, {0.05, 0.0})));
  solver.run(2000);
  EXPECT_LE(std::abs(total(solver.state().phi) - 180.0) / 180.0, 1e-10);
  EXPECT_GT(solver.state().phi(29, 3), solver.state().phi(0, 3));
}

TEST(Solver, InstabilityIsReported) {
  ScalarSetup setup;
  setup.diffusivity = 0.1;
  setup.reaction = ReactionTerm::logistic(100.0);  // explicit source far past its stability limit
  ScalarSolver solver(setup, init_scalar_state(noise(8, 8, 2), VectorField(8, 8)));
  try {
    solver.run(10000);
    FAIL() << "expected InstabilityError";
  } catch (const InstabilityError& e) {
    EXPECT_GT(e.step(), 0);
    EXPECT_LT(e.step(), 10000);
  }
  ScalarField phi(8, 8, 1.0);
  phi(3, 3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(init_scalar_state(phi, VectorField(8, 8)), Error);
}

TEST(Solver, SteadyStopDetectsConvergence) {
  ScalarSetup setup;
  setup.diffusivity = 0.5;
  const bc::BcRule rules[] = {bc::BcRule::dirichlet(bc::Edge::left, 1.0), bc::BcRule::dirichlet(bc::Edge::right, 0.0)};
  setup.boundary = bc::assemble_bc_pass(rules);
  ScalarSolver solver(setup, init_scalar_state(ScalarField(20, 4, 0.0), VectorField(20, 4)));
  SteadyResult r = solver.run_until_steady(1e-12, 100000, 100);
  ASSERT_TRUE(r.converged);
  // Linear profile between walls at x = -1/2 and x = nx - 1/2.
  for (int x = 0; x < 20; ++x) EXPECT_NEAR(solver.state().phi(x, 2), 1.0 - (x + 0.5) / 20.0, 1e-8);
}

TEST(Strain, ShearWaveMatchesFiniteDifferences) {
  const int nx = 8, ny = 64;
  const double amp = 0.02;
  VectorField u0(nx, ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) u0(x, y, 0) = amp * std::sin(2 * std::numbers::pi * y / ny);
  }
  FluidSetup setup;
  setup.viscosity = 0.1;
  FluidSolver solver(setup, init_fluid_state(ScalarField(nx, ny, 1.0), u0, setup));
  solver.run(200);
  const FluidState& s = solver.state();
  DistributionField feq = equilibrium_fluid(s.rho, s.u);
  TensorField moment = strain_rate_noneq(s.f, feq, s.rho, relaxation_from_viscosity(0.1));
  TensorField fd = testsupport::fd_strain(s.u, true, true);
  EXPECT_LE(testsupport::relative_l2(moment, fd), 0.02);
}

TEST(Denormals, GuardRestoresMode) {
#ifdef HAVE_MXCSR
  const unsigned before = _mm_getcsr();
  {
    DenormalGuard guard;
    EXPECT_EQ(_mm_getcsr() & 0x8040u, 0x8040u);
  }
  EXPECT_EQ(_mm_getcsr(), before);
#else
  GTEST_SKIP() << "no MXCSR on this target";
#endif
}
