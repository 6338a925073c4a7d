#include "pdedev/lbm/kernels.hpp"

#include <cmath>
#include <string>

namespace pdedev::lbm {

namespace {

constexpr double kInvCs2 = 3.0;

void check_freq(double freq) {
  if (!(freq > 0.0 && freq < 2.0)) {
    throw ParameterRangeError("relaxation frequency must lie in (0, 2), got " +
                              std::to_string(freq));
  }
}

void ensure_shape(DistributionField& out, int nx, int ny) {
  if (!out.same_shape(nx, ny)) out = DistributionField(nx, ny);
}

template <int N>
void ensure_shape(GridField<N>& out, int nx, int ny) {
  if (!out.same_shape(nx, ny)) out = GridField<N>(nx, ny);
}

}  // namespace

RelaxationParam make_relaxation(double freq_val) {
  check_freq(freq_val);
  return RelaxationParam{freq_val};
}

RelaxationParam relaxation_from_diffusivity(double diffusivity) {
  if (!(diffusivity > 0.0) || !std::isfinite(diffusivity)) {
    throw ParameterRangeError("diffusivity must be positive and finite, got " +
                              std::to_string(diffusivity));
  }
  return make_relaxation(1.0 / (kInvCs2 * diffusivity + 0.5));
}

RelaxationParam relaxation_from_viscosity(double viscosity) {
  if (!(viscosity > 0.0) || !std::isfinite(viscosity)) {
    throw ParameterRangeError("viscosity must be positive and finite, got " +
                              std::to_string(viscosity));
  }
  return make_relaxation(1.0 / (kInvCs2 * viscosity + 0.5));
}

double transport_coefficient(RelaxationParam relax) {
  return (1.0 / relax.freq_val - 0.5) / kInvCs2;
}

ReactionTerm ReactionTerm::logistic(double rate) {
  if (!std::isfinite(rate)) throw ParameterRangeError("logistic rate must be finite");
  ReactionTerm term;
  term.kind_ = Kind::logistic;
  term.rate_ = rate;
  return term;
}

ReactionTerm ReactionTerm::tabulated(double lo, double hi, std::vector<double> samples) {
  if (samples.size() < 2) throw ParameterRangeError("reaction table needs at least two samples");
  if (!(lo <= -kDomainSlack && hi >= 1.0 + kDomainSlack)) {
    throw ParameterRangeError("reaction table must cover [-" + std::to_string(kDomainSlack) +
                              ", 1+" + std::to_string(kDomainSlack) + "]");
  }
  for (double v : samples) {
    if (!std::isfinite(v)) throw ParameterRangeError("reaction table holds a non-finite sample");
  }
  ReactionTerm term;
  term.kind_ = Kind::tabulated;
  term.lo_ = lo;
  term.hi_ = hi;
  term.table_ = std::move(samples);
  return term;
}

ReactionTerm ReactionTerm::tabulate(const std::function<double(double)>& fn, double lo, double hi,
                                    int samples) {
  if (samples < 2) throw ParameterRangeError("reaction table needs at least two samples");
  std::vector<double> table(static_cast<std::size_t>(samples));
  for (int k = 0; k < samples; ++k) {
    table[k] = fn(lo + (hi - lo) * k / (samples - 1));
  }
  return tabulated(lo, hi, std::move(table));
}

double ReactionTerm::operator()(double phi) const noexcept {
  switch (kind_) {
    case Kind::none:
      return 0.0;
    case Kind::logistic:
      return rate_ * phi * (1.0 - phi);
    case Kind::tabulated: {
      if (!(phi >= lo_ && phi <= hi_)) return std::nan("");
      const double pos = (phi - lo_) / (hi_ - lo_) * static_cast<double>(table_.size() - 1);
      const auto k = std::min(static_cast<std::size_t>(pos), table_.size() - 2);
      const double t = pos - static_cast<double>(k);
      return table_[k] * (1.0 - t) + table_[k + 1] * t;
    }
  }
  return 0.0;
}

void PowerLawModel::validate() const {
  if (!(consistency > 0.0)) throw ParameterRangeError("power-law consistency K must be > 0");
  if (!(behavior_index > 0.0)) throw ParameterRangeError("power-law index n must be > 0");
  if (!(shear_floor > 0.0)) throw ParameterRangeError("shear-rate floor must be > 0");
  if (!(nu_min > 0.0 && nu_min < nu_max)) {
    throw ParameterRangeError("viscosity bounds must satisfy 0 < nu_min < nu_max");
  }
}

void equilibrium_scalar_into(const ScalarField& phi, const VectorField& u, DistributionField& out) {
  require_same_shape(phi, u, "equilibrium_scalar");
  ensure_shape(out, phi.nx(), phi.ny());
  const auto p = phi.data();
  const auto v = u.data();
  auto f = out.data();
  const std::size_t n = phi.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    const double ux = v[2 * k];
    const double uy = v[2 * k + 1];
    for (int i = 0; i < kQ; ++i) {
      const double eu = kD2Q9.ex(i) * ux + kD2Q9.ey(i) * uy;
      f[k * kQ + i] = kD2Q9.weights[i] * p[k] * (1.0 + kInvCs2 * eu);
    }
  }
}

DistributionField equilibrium_scalar(const ScalarField& phi, const VectorField& u,
                                     const LatticeD2Q9&) {
  DistributionField out;
  equilibrium_scalar_into(phi, u, out);
  return out;
}

void equilibrium_fluid_into(const ScalarField& rho, const VectorField& u, DistributionField& out) {
  require_same_shape(rho, u, "equilibrium_fluid");
  ensure_shape(out, rho.nx(), rho.ny());
  const auto r = rho.data();
  const auto v = u.data();
  auto f = out.data();
  const std::size_t n = rho.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    if (!(r[k] > 0.0)) {
      throw DegenerateDensityError("equilibrium_fluid: non-positive density at node " +
                                   std::to_string(k));
    }
    const double ux = v[2 * k];
    const double uy = v[2 * k + 1];
    const double usq = 1.5 * (ux * ux + uy * uy);
    for (int i = 0; i < kQ; ++i) {
      const double eu = kInvCs2 * (kD2Q9.ex(i) * ux + kD2Q9.ey(i) * uy);
      f[k * kQ + i] = kD2Q9.weights[i] * r[k] * (1.0 + eu + 0.5 * eu * eu - usq);
    }
  }
}

DistributionField equilibrium_fluid(const ScalarField& rho, const VectorField& u,
                                    const LatticeD2Q9&) {
  DistributionField out;
  equilibrium_fluid_into(rho, u, out);
  return out;
}

void collide_bgk_into(const DistributionField& f, const DistributionField& feq,
                      RelaxationParam relax, DistributionField& out) {
  require_same_shape(f, feq, "collide_bgk");
  check_freq(relax.freq_val);
  ensure_shape(out, f.nx(), f.ny());
  const auto a = f.data();
  const auto b = feq.data();
  auto o = out.data();
  const double w = relax.freq_val;
  for (std::size_t k = 0; k < a.size(); ++k) o[k] = a[k] - w * (a[k] - b[k]);
}

void collide_bgk_into(const DistributionField& f, const DistributionField& feq,
                      const ScalarField& freq_field, DistributionField& out) {
  require_same_shape(f, feq, "collide_bgk");
  require_same_shape(f, freq_field, "collide_bgk");
  ensure_shape(out, f.nx(), f.ny());
  const auto a = f.data();
  const auto b = feq.data();
  const auto w = freq_field.data();
  auto o = out.data();
  const std::size_t n = f.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    check_freq(w[k]);
    for (int i = 0; i < kQ; ++i) {
      const std::size_t j = k * kQ + i;
      o[j] = a[j] - w[k] * (a[j] - b[j]);
    }
  }
}

DistributionField collide_bgk(const DistributionField& f, const DistributionField& feq,
                              RelaxationParam relax) {
  DistributionField out;
  collide_bgk_into(f, feq, relax, out);
  return out;
}

DistributionField collide_bgk(const DistributionField& f, const DistributionField& feq,
                              const ScalarField& freq_field) {
  DistributionField out;
  collide_bgk_into(f, feq, freq_field, out);
  return out;
}

void add_reaction_source(DistributionField& f, const ScalarField& phi,
                         const ReactionTerm& reaction) {
  if (reaction.kind() == ReactionTerm::Kind::none) return;
  require_same_shape(f, phi, "apply_reaction_source");
  auto d = f.data();
  const auto p = phi.data();
  const std::size_t n = phi.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    const double r = reaction(p[k]);
    if (!std::isfinite(r)) {
      throw ParameterRangeError("reaction term is not finite at phi = " + std::to_string(p[k]));
    }
    for (int i = 0; i < kQ; ++i) d[k * kQ + i] += kD2Q9.weights[i] * r;
  }
}

DistributionField apply_reaction_source(DistributionField f, const ScalarField& phi,
                                        const ReactionTerm& reaction, const LatticeD2Q9&) {
  add_reaction_source(f, phi, reaction);
  return f;
}

void stream_into(const DistributionField& in, DistributionField& out) {
  const int nx = in.nx();
  const int ny = in.ny();
  ensure_shape(out, nx, ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      const auto src = in.node(x, y);
      for (int i = 0; i < kQ; ++i) {
        int xd = x + kD2Q9.ex(i);
        int yd = y + kD2Q9.ey(i);
        if (xd < 0) xd += nx;
        if (xd >= nx) xd -= nx;
        if (yd < 0) yd += ny;
        if (yd >= ny) yd -= ny;
        out(xd, yd, i) = src[i];
      }
    }
  }
}

DistributionField stream(const DistributionField& f) {
  DistributionField out;
  stream_into(f, out);
  return out;
}

void moments_scalar_into(const DistributionField& f, ScalarField& phi) {
  ensure_shape(phi, f.nx(), f.ny());
  const auto d = f.data();
  auto p = phi.data();
  const std::size_t n = f.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i = 0; i < kQ; ++i) s += d[k * kQ + i];
    p[k] = s;
  }
}

ScalarField moments_scalar(const DistributionField& f) {
  ScalarField phi;
  moments_scalar_into(f, phi);
  return phi;
}

void moments_fluid_into(const DistributionField& f, ScalarField& rho, VectorField& u) {
  ensure_shape(rho, f.nx(), f.ny());
  ensure_shape(u, f.nx(), f.ny());
  const auto d = f.data();
  auto r = rho.data();
  auto v = u.data();
  const std::size_t n = f.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    double jx = 0.0;
    double jy = 0.0;
    for (int i = 0; i < kQ; ++i) {
      const double fi = d[k * kQ + i];
      s += fi;
      jx += kD2Q9.ex(i) * fi;
      jy += kD2Q9.ey(i) * fi;
    }
    if (!(s > 0.0)) {
      throw DegenerateDensityError("moments_fluid: non-positive density " + std::to_string(s) +
                                   " at node (" + std::to_string(k / f.ny()) + ", " +
                                   std::to_string(k % f.ny()) + ")");
    }
    r[k] = s;
    v[2 * k] = jx / s;
    v[2 * k + 1] = jy / s;
  }
}

FluidMoments moments_fluid(const DistributionField& f) {
  FluidMoments m;
  moments_fluid_into(f, m.rho, m.u);
  return m;
}

void strain_rate_noneq_into(const DistributionField& f, const DistributionField& feq,
                            const ScalarField& rho, const ScalarField& freq_field,
                            TensorField& out) {
  require_same_shape(f, feq, "strain_rate_noneq");
  require_same_shape(f, rho, "strain_rate_noneq");
  require_same_shape(f, freq_field, "strain_rate_noneq");
  ensure_shape(out, f.nx(), f.ny());
  const auto a = f.data();
  const auto b = feq.data();
  const auto r = rho.data();
  const auto w = freq_field.data();
  auto e = out.data();
  const std::size_t n = f.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    if (!(r[k] > 0.0)) {
      throw DegenerateDensityError("strain_rate_noneq: non-positive density at node " +
                                   std::to_string(k));
    }
    double pxx = 0.0;
    double pxy = 0.0;
    double pyx = 0.0;
    double pyy = 0.0;
    for (int i = 0; i < kQ; ++i) {
      const double neq = a[k * kQ + i] - b[k * kQ + i];
      const double ex = kD2Q9.ex(i);
      const double ey = kD2Q9.ey(i);
      pxx += ex * ex * neq;
      pxy += ex * ey * neq;
      pyx += ey * ex * neq;
      pyy += ey * ey * neq;
    }
    const double scale = -1.5 * w[k] / r[k];
    e[4 * k + 0] = scale * pxx;
    e[4 * k + 1] = scale * pxy;
    e[4 * k + 2] = scale * pyx;
    e[4 * k + 3] = scale * pyy;
  }
}

TensorField strain_rate_noneq(const DistributionField& f, const DistributionField& feq,
                              const ScalarField& rho, const ScalarField& freq_field,
                              const LatticeD2Q9&) {
  TensorField out;
  strain_rate_noneq_into(f, feq, rho, freq_field, out);
  return out;
}

TensorField strain_rate_noneq(const DistributionField& f, const DistributionField& feq,
                              const ScalarField& rho, RelaxationParam relax, const LatticeD2Q9&) {
  check_freq(relax.freq_val);
  TensorField out;
  strain_rate_noneq_into(f, feq, rho, ScalarField(f.nx(), f.ny(), relax.freq_val), out);
  return out;
}

double shear_rate(double exx, double exy, double eyx, double eyy) noexcept {
  return std::sqrt(2.0 * (exx * exx + exy * exy + eyx * eyx + eyy * eyy));
}

double powerlaw_viscosity_at(double shear, const PowerLawModel& model) noexcept {
  const double g = std::max(shear, model.shear_floor);
  const double nu = model.consistency * std::pow(g, model.behavior_index - 1.0);
  return std::clamp(nu, model.nu_min, model.nu_max);
}

void powerlaw_viscosity_into(const TensorField& strain, const PowerLawModel& model,
                             ScalarField& nu) {
  model.validate();
  ensure_shape(nu, strain.nx(), strain.ny());
  const auto e = strain.data();
  auto out = nu.data();
  const std::size_t n = strain.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = powerlaw_viscosity_at(shear_rate(e[4 * k], e[4 * k + 1], e[4 * k + 2], e[4 * k + 3]),
                                   model);
  }
}

ScalarField powerlaw_viscosity(const TensorField& strain, const PowerLawModel& model) {
  ScalarField nu;
  powerlaw_viscosity_into(strain, model, nu);
  return nu;
}

}  // namespace pdedev::lbm
