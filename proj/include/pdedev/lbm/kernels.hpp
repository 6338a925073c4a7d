#pragma once

#include <functional>
#include <vector>

#include "pdedev/lbm/fields.hpp"

namespace pdedev::lbm {

// Reciprocal of the BGK relaxation time.
struct RelaxationParam {
  double freq_val = 1.0;
};

// Validates 0 < freq_val < 2.
RelaxationParam make_relaxation(double freq_val);

// D (or nu) = c_s^2 (1/freq_val - 1/2) with unit lattice spacing and step.
RelaxationParam relaxation_from_diffusivity(double diffusivity);
RelaxationParam relaxation_from_viscosity(double viscosity);
double transport_coefficient(RelaxationParam relax);

struct TransportParams {
  double diffusivity = 0.0;
  Vec2 velocity;
};

class ReactionTerm {
 public:
  enum class Kind { none, logistic, tabulated };

  // Tabulated terms must cover [-kDomainSlack, 1 + kDomainSlack].
  static constexpr double kDomainSlack = 1e-3;

  ReactionTerm() = default;

  static ReactionTerm none() { return {}; }
  static ReactionTerm logistic(double rate);
  static ReactionTerm tabulated(double lo, double hi, std::vector<double> samples);
  // Samples an arbitrary R(phi) on `samples` evenly spaced points of [lo, hi].
  static ReactionTerm tabulate(const std::function<double(double)>& fn, double lo, double hi,
                               int samples);

  Kind kind() const noexcept { return kind_; }
  double rate() const noexcept { return rate_; }
  double table_lo() const noexcept { return lo_; }
  double table_hi() const noexcept { return hi_; }
  const std::vector<double>& table() const noexcept { return table_; }

  // NaN outside a tabulated range.
  double operator()(double phi) const noexcept;

  friend bool operator==(const ReactionTerm&, const ReactionTerm&) = default;

 private:
  Kind kind_ = Kind::none;
  double rate_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<double> table_;
};

struct PowerLawModel {
  double consistency = 1.0;     // K
  double behavior_index = 1.0;  // n
  double shear_floor = 1e-12;
  // Default bounds correspond to freq_val in [0.05, 1.95].
  double nu_min = (1.0 / 1.95 - 0.5) / 3.0;
  double nu_max = (1.0 / 0.05 - 0.5) / 3.0;

  void validate() const;

  friend bool operator==(const PowerLawModel&, const PowerLawModel&) = default;
};

void equilibrium_scalar_into(const ScalarField& phi, const VectorField& u, DistributionField& out);
DistributionField equilibrium_scalar(const ScalarField& phi, const VectorField& u,
                                     const LatticeD2Q9& lat = kD2Q9);

void equilibrium_fluid_into(const ScalarField& rho, const VectorField& u, DistributionField& out);
DistributionField equilibrium_fluid(const ScalarField& rho, const VectorField& u,
                                    const LatticeD2Q9& lat = kD2Q9);

void collide_bgk_into(const DistributionField& f, const DistributionField& feq,
                      RelaxationParam relax, DistributionField& out);
void collide_bgk_into(const DistributionField& f, const DistributionField& feq,
                      const ScalarField& freq_field, DistributionField& out);
DistributionField collide_bgk(const DistributionField& f, const DistributionField& feq,
                              RelaxationParam relax);
DistributionField collide_bgk(const DistributionField& f, const DistributionField& feq,
                              const ScalarField& freq_field);

// f_i += w_i R(phi) for a unit time step. Throws if R(phi) is not finite.
void add_reaction_source(DistributionField& f, const ScalarField& phi, const ReactionTerm& reaction);
DistributionField apply_reaction_source(DistributionField f, const ScalarField& phi,
                                        const ReactionTerm& reaction,
                                        const LatticeD2Q9& lat = kD2Q9);

// Periodic push streaming: out_i(x + e_i) = in_i(x).
void stream_into(const DistributionField& in, DistributionField& out);
DistributionField stream(const DistributionField& f);

void moments_scalar_into(const DistributionField& f, ScalarField& phi);
ScalarField moments_scalar(const DistributionField& f);

struct FluidMoments {
  ScalarField rho;
  VectorField u;
};

void moments_fluid_into(const DistributionField& f, ScalarField& rho, VectorField& u);
FluidMoments moments_fluid(const DistributionField& f);

// E_ab = -(3 freq / (2 rho)) sum_i e_ia e_ib (f_i - f_i^eq), from the
// pre-collision populations.
void strain_rate_noneq_into(const DistributionField& f, const DistributionField& feq,
                            const ScalarField& rho, const ScalarField& freq_field, TensorField& out);
TensorField strain_rate_noneq(const DistributionField& f, const DistributionField& feq,
                              const ScalarField& rho, const ScalarField& freq_field,
                              const LatticeD2Q9& lat = kD2Q9);
TensorField strain_rate_noneq(const DistributionField& f, const DistributionField& feq,
                              const ScalarField& rho, RelaxationParam relax,
                              const LatticeD2Q9& lat = kD2Q9);

// sqrt(2 E:E)
double shear_rate(double exx, double exy, double eyx, double eyy) noexcept;

// Kinematic viscosity K * max(shear, floor)^(n-1), clamped to [nu_min, nu_max].
double powerlaw_viscosity_at(double shear, const PowerLawModel& model) noexcept;
void powerlaw_viscosity_into(const TensorField& strain, const PowerLawModel& model, ScalarField& nu);
ScalarField powerlaw_viscosity(const TensorField& strain, const PowerLawModel& model);

}  // namespace pdedev::lbm
