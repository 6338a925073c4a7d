#include "pdedev/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include <fmt/format.h>

#include "pdedev/error.hpp"
#include "pdedev/tasks/vtk.hpp"

namespace pdedev::oracle {

namespace fs = std::filesystem;
using nlohmann::json;
using tasks::SimulationConfig;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double lid_speed(const SimulationConfig& c) {
  for (const auto& r : c.bc) {
    if (r.edge == bc::Edge::top && r.kind == bc::BcRule::Kind::moving_wall) {
      return std::hypot(r.wall_velocity.x, r.wall_velocity.y);
    }
  }
  return 0.0;
}

bool all_periodic(const SimulationConfig& c) {
  return std::all_of(c.bc.begin(), c.bc.end(),
                     [](const bc::BcRule& r) { return r.kind == bc::BcRule::Kind::periodic; });
}

template <int N>
bool fields_match(const lbm::GridField<N>& a, const lbm::GridField<N>& b, double tol) {
  if (!a.same_shape(b)) return false;
  return lbm::max_abs_difference(a, b) <= tol;
}

}  // namespace

double periodic_offset(double d, double n) {
  double r = std::fmod(d, n);
  if (r < -n / 2.0) r += n;
  if (r >= n / 2.0) r -= n;
  return r;
}

double analytic_ad_gaussian(double x, double y, double t, const lbm::TransportParams& p,
                            const tasks::InitSpec& init, int nx, int ny) {
  if (init.kind != tasks::InitSpec::Kind::gaussian) {
    throw OracleInapplicableError("analytic solution needs a Gaussian initial condition");
  }
  if (!(t >= 0.0)) throw PreconditionError("analytic_ad_gaussian: t must be >= 0");
  const double s2 = init.sigma * init.sigma + 2.0 * p.diffusivity * t;
  if (std::sqrt(s2) > std::min(nx, ny) / 6.0) {
    throw OracleInapplicableError(
        fmt::format("Gaussian width {:.4g} exceeds 1/6 of the box; periodic images overlap",
                    std::sqrt(s2)));
  }
  const Vec2 c = init.center_for(nx, ny);
  const double dx = periodic_offset(x - c.x - p.velocity.x * t, nx);
  const double dy = periodic_offset(y - c.y - p.velocity.y * t, ny);
  const double scale = init.sigma * init.sigma / s2;
  return init.amplitude * scale * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
}

ScalarField analytic_ad_gaussian_field(double t, const lbm::TransportParams& p,
                                       const tasks::InitSpec& init, int nx, int ny) {
  ScalarField out(nx, ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) out(x, y) = analytic_ad_gaussian(x, y, t, p, init, nx, ny);
  }
  return out;
}

Peak measure_peak(const ScalarField& f) {
  if (f.empty() || !f.all_finite()) throw MeasurementError("measure_peak: field is empty or non-finite");
  const int nx = f.nx();
  const int ny = f.ny();
  int bx = 0;
  int by = 0;
  double lo = f(0, 0);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      if (f(x, y) > f(bx, by)) {
        bx = x;
        by = y;
      }
      lo = std::min(lo, f(x, y));
    }
  }
  const double f0 = f(bx, by);
  if (f0 == lo) throw MeasurementError("measure_peak: field is constant, no peak");
  auto refine = [&](double fm, double fp, double& shift) {
    const double curv = fm - 2.0 * f0 + fp;
    shift = curv < 0.0 ? 0.5 * (fm - fp) / curv : 0.0;
    return -0.25 * (fm - fp) * shift;
  };
  double sx = 0.0;
  double sy = 0.0;
  double amp = f0;
  amp += refine(f((bx - 1 + nx) % nx, by), f((bx + 1) % nx, by), sx);
  amp += refine(f(bx, (by - 1 + ny) % ny), f(bx, (by + 1) % ny), sy);
  Peak p;
  p.position = {std::fmod(bx + sx + nx, static_cast<double>(nx)),
                std::fmod(by + sy + ny, static_cast<double>(ny))};
  p.amplitude = amp;
  return p;
}

double periodic_variance(const ScalarField& f, Vec2 center) {
  double lo = std::numeric_limits<double>::infinity();
  for (double v : f.data()) lo = std::min(lo, v);
  double mass = 0.0;
  double second = 0.0;
  for (int x = 0; x < f.nx(); ++x) {
    for (int y = 0; y < f.ny(); ++y) {
      const double w = f(x, y) - lo;
      const double dx = periodic_offset(x - center.x, f.nx());
      const double dy = periodic_offset(y - center.y, f.ny());
      mass += w;
      second += w * (dx * dx + dy * dy);
    }
  }
  return mass > 0.0 ? second / mass : 0.0;
}

double band_mean(const ScalarField& f, bc::Edge edge) {
  double sum = 0.0;
  int n = 0;
  switch (edge) {
    case bc::Edge::top:
    case bc::Edge::bottom: {
      const int y = edge == bc::Edge::top ? f.ny() - 1 : 0;
      for (int x = 0; x < f.nx(); ++x, ++n) sum += f(x, y);
      break;
    }
    case bc::Edge::left:
    case bc::Edge::right: {
      const int x = edge == bc::Edge::right ? f.nx() - 1 : 0;
      for (int y = 0; y < f.ny(); ++y, ++n) sum += f(x, y);
      break;
    }
  }
  return n > 0 ? sum / n : kNaN;
}

double level_set_radius(const ScalarField& f, Vec2 center, double level) {
  const int nx = f.nx();
  const int y = std::clamp(static_cast<int>(std::lround(center.y)), 0, f.ny() - 1);
  const int x0 = static_cast<int>(std::lround(center.x));
  auto at = [&](int x) { return f(((x % nx) + nx) % nx, y); };
  if (!(at(x0) >= level)) {
    throw MeasurementError(fmt::format("level_set_radius: centre value {} is below {}", at(x0), level));
  }
  double radius[2] = {kNaN, kNaN};
  for (int dir = 0; dir < 2; ++dir) {
    const int s = dir == 0 ? 1 : -1;
    for (int k = 0; k < nx / 2; ++k) {
      const double a = at(x0 + s * k);
      const double b = at(x0 + s * (k + 1));
      if (a >= level && b < level) {
        const double cross = x0 + s * (k + (a - level) / (a - b));
        radius[dir] = s * (cross - center.x);
        break;
      }
    }
    if (std::isnan(radius[dir])) throw MeasurementError("level_set_radius: no level crossing found");
  }
  return 0.5 * (radius[0] + radius[1]);
}

double front_speed(const std::vector<std::pair<double, double>>& series) {
  if (series.size() < 5) {
    throw PreconditionError(fmt::format("front_speed needs at least 5 samples, got {}", series.size()));
  }
  for (std::size_t k = 1; k < series.size(); ++k) {
    if (series[k].second < series[k - 1].second) {
      throw MeasurementError("front_speed: radii are not monotone nondecreasing");
    }
  }
  double mt = 0.0;
  double mr = 0.0;
  for (const auto& [t, r] : series) {
    mt += t;
    mr += r;
  }
  mt /= static_cast<double>(series.size());
  mr /= static_cast<double>(series.size());
  double num = 0.0;
  double den = 0.0;
  for (const auto& [t, r] : series) {
    num += (t - mt) * (r - mr);
    den += (t - mt) * (t - mt);
  }
  if (den == 0.0) throw MeasurementError("front_speed: all samples share one time");
  return num / den;
}

LoadedOutput load_output(const std::string& dir, std::string_view scalar_name) {
  LoadedOutput out;
  std::error_code ec;
  if (fs::is_directory(dir, ec)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".vtk" || ext == ".vtu")) ++out.field_files;
    }
  }
  if (!tasks::manifest_exists(dir)) return out;
  out.has_manifest = true;
  out.manifest = tasks::read_manifest(dir);
  out.checksum_mismatches = tasks::verify_manifest(dir, out.manifest);
  for (const auto& e : out.manifest.files) {
    const auto data = tasks::read_field_file((fs::path(dir) / e.filename).string());
    Snapshot s;
    s.timestep = e.timestep;
    s.time = e.time;
    const tasks::VtkArray* scalar = data.find(scalar_name);
    if (!scalar) {
      for (const auto& a : data.arrays) {
        if (a.components == 1) {
          scalar = &a;
          break;
        }
      }
    }
    s.scalar = scalar ? data.scalar(scalar->name) : ScalarField(data.nx, data.ny);
    const tasks::VtkArray* vec = data.find("velocity");
    if (!vec) {
      for (const auto& a : data.arrays) {
        if (a.components == 3) {
          vec = &a;
          break;
        }
      }
    }
    s.velocity = vec ? data.vector(vec->name) : VectorField(data.nx, data.ny);
    out.snapshots.push_back(std::move(s));
  }
  std::stable_sort(out.snapshots.begin(), out.snapshots.end(),
                   [](const Snapshot& a, const Snapshot& b) { return a.timestep < b.timestep; });
  return out;
}

DetectorResult detect_missing_advection(const Snapshot& first, const Snapshot& last,
                                        const SimulationConfig& c, double fraction) {
  DetectorResult r;
  if (c.solver != SimulationConfig::Solver::scalar ||
      c.init.kind != tasks::InitSpec::Kind::gaussian) {
    r.detail = "needs a scalar run with a peaked initial condition";
    return r;
  }
  const double t = last.time - first.time;
  const double ex = periodic_offset(c.velocity.x * t, c.nx);
  const double ey = periodic_offset(c.velocity.y * t, c.ny);
  const double expected = std::hypot(ex, ey);
  if (std::hypot(c.velocity.x, c.velocity.y) == 0.0 || expected < 1.0) {
    r.detail = "no resolvable advective displacement expected";
    return r;
  }
  Peak p0;
  Peak p1;
  try {
    p0 = measure_peak(first.scalar);
    p1 = measure_peak(last.scalar);
  } catch (const MeasurementError& e) {
    r.detail = e.what();
    return r;
  }
  r.applicable = true;
  const double moved = std::hypot(periodic_offset(p1.position.x - p0.position.x, c.nx),
                                  periodic_offset(p1.position.y - p0.position.y, c.ny));
  const double v0 = periodic_variance(first.scalar, p0.position);
  const double v1 = periodic_variance(last.scalar, p1.position);
  const bool diffusing = v1 > v0 * (1.0 + 1e-9);
  r.flagged = diffusing && moved < fraction * expected;
  r.detail = fmt::format("peak moved {:.4g} cells, expected {:.4g}; variance {:.4g} -> {:.4g}",
                         moved, expected, v0, v1);
  return r;
}

DetectorResult detect_bc_swap(const ScalarField& f, const std::vector<bc::BcRule>& rules,
                              double miss, double match) {
  DetectorResult r;
  std::vector<bc::BcRule> dirichlet;
  for (const auto& rule : rules) {
    if (rule.kind == bc::BcRule::Kind::dirichlet_scalar) dirichlet.push_back(rule);
  }
  if (dirichlet.empty()) {
    r.detail = "no Dirichlet edge";
    return r;
  }
  r.applicable = true;
  // Scale by the spread of the imposed values; zero-flux walls can pile
  // up advected scalar far beyond it. Fall back to the field range.
  double vlo = dirichlet.front().value;
  double vhi = vlo;
  for (const auto& rule : dirichlet) {
    vlo = std::min(vlo, rule.value);
    vhi = std::max(vhi, rule.value);
  }
  const auto [lo, hi] = std::minmax_element(f.data().begin(), f.data().end());
  const double range = std::max(vhi > vlo ? vhi - vlo : *hi - *lo, 1e-12);
  std::map<bc::Edge, double> means;
  for (bc::Edge e : bc::kEdgeOrder) means[e] = band_mean(f, e);
  for (const auto& rule : dirichlet) {
    const double m = means[rule.edge];
    if (std::abs(m - rule.value) <= miss * range) continue;
    for (bc::Edge other : bc::kEdgeOrder) {
      if (other == rule.edge) continue;
      if (std::abs(means[other] - rule.value) <= match * range) {
        r.flagged = true;
        r.detail += fmt::format("{} band mean {:.4g} misses {:.4g}; the {} band matches it. ",
                                bc::to_string(rule.edge), m, rule.value, bc::to_string(other));
        break;
      }
    }
  }
  if (!r.flagged) r.detail = "Dirichlet bands match their values";
  return r;
}

DetectorResult detect_spurious(const LoadedOutput& out, double tol) {
  DetectorResult r;
  r.applicable = true;
  auto flag = [&](std::string why) {
    r.flagged = true;
    r.detail = std::move(why);
    return r;
  };
  if (!out.has_manifest) return flag("no manifest");
  if (out.manifest.files.empty() || out.field_files == 0) return flag("no field files written");
  if (out.manifest.steps == 0) return flag("zero timesteps declared");
  if (out.snapshots.size() >= 2) {
    const Snapshot& s0 = out.snapshots.front();
    const bool constant = std::all_of(out.snapshots.begin() + 1, out.snapshots.end(),
                                      [&](const Snapshot& s) {
                                        return fields_match(s.scalar, s0.scalar, tol) &&
                                               fields_match(s.velocity, s0.velocity, tol);
                                      });
    if (constant) return flag("output fields are constant in time");
  }
  r.detail = "output evolves";
  return r;
}

std::string_view to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::pass: return "pass";
    case ErrorClass::syntactic: return "syntactic";
    case ErrorClass::misinterpretation: return "semantic:misinterpretation";
    case ErrorClass::spatial: return "semantic:spatial";
    case ErrorClass::spurious: return "semantic:spurious";
    case ErrorClass::unstable: return "unstable";
  }
  return "pass";
}

std::map<std::string, double> compute_metrics(const tasks::TaskSpec& task, const LoadedOutput& out) {
  std::map<std::string, double> m;
  const SimulationConfig& c = task.config();
  if (out.has_manifest) m["steps"] = static_cast<double>(out.manifest.steps);
  m["snapshots"] = static_cast<double>(out.snapshots.size());
  if (c.stop == SimulationConfig::Stop::steady) {
    m["steady_residual"] = out.has_manifest && out.manifest.steady
                               ? out.manifest.steady->residual
                               : std::numeric_limits<double>::infinity();
  }
  if (out.snapshots.empty()) return m;
  const Snapshot& last = out.snapshots.back();
  if (!last.scalar.same_shape(c.nx, c.ny)) return m;

  if (c.solver == SimulationConfig::Solver::scalar) {
    const bool gaussian = c.init.kind == tasks::InitSpec::Kind::gaussian;
    if (gaussian && c.reaction.kind() == lbm::ReactionTerm::Kind::none && all_periodic(c)) {
      try {
        const lbm::TransportParams p{c.diffusivity, c.velocity};
        const Vec2 ctr = c.init.center_for(c.nx, c.ny);
        const double expected_amp =
            analytic_ad_gaussian(ctr.x + c.velocity.x * last.time, ctr.y + c.velocity.y * last.time,
                                 last.time, p, c.init, c.nx, c.ny);
        const Peak peak = measure_peak(last.scalar);
        m["peak_amplitude"] = peak.amplitude;
        m["peak_amplitude_expected"] = expected_amp;
        m["peak_amplitude_rel_error"] = std::abs(peak.amplitude - expected_amp) / expected_amp;
        m["peak_x"] = peak.position.x;
        m["peak_y"] = peak.position.y;
        m["peak_position_error"] =
            std::hypot(periodic_offset(peak.position.x - ctr.x - c.velocity.x * last.time, c.nx),
                       periodic_offset(peak.position.y - ctr.y - c.velocity.y * last.time, c.ny));
      } catch (const Error&) {
        // Oracle not applicable or no peak: the checks that need these fail.
      }
    }
    for (bc::Edge e : bc::kEdgeOrder) {
      m[fmt::format("{}_band_mean", bc::to_string(e))] = band_mean(last.scalar, e);
    }
    if (c.reaction.kind() == lbm::ReactionTerm::Kind::logistic && gaussian) {
      const double t_min = task.description.parameter("fit_t_min", 0.0);
      const double t_max =
          task.description.parameter("fit_t_max", std::numeric_limits<double>::infinity());
      const double level = task.description.parameter("front_level", 0.5);
      std::vector<std::pair<double, double>> series;
      try {
        for (const auto& s : out.snapshots) {
          if (s.time >= t_min && s.time <= t_max) {
            series.emplace_back(s.time, level_set_radius(s.scalar, c.init.center_for(c.nx, c.ny), level));
          }
        }
        const double speed = front_speed(series);
        const double expected = 2.0 * std::sqrt(c.reaction.rate() * c.diffusivity);
        m["front_speed"] = speed;
        m["front_speed_expected"] = expected;
        m["front_speed_rel_error"] = std::abs(speed - expected) / expected;
      } catch (const Error&) {
      }
    }
  } else {
    const double lid = lid_speed(c);
    if (lid > 0.0) {
      const VectorField& u = last.velocity;
      const int xa = c.nx % 2 == 0 ? c.nx / 2 - 1 : c.nx / 2;
      const int xb = c.nx / 2;
      double min_ux = std::numeric_limits<double>::infinity();
      for (int y = 0; y < c.ny; ++y) min_ux = std::min(min_ux, 0.5 * (u(xa, y, 0) + u(xb, y, 0)));
      double max_speed = 0.0;
      for (int x = 0; x < c.nx; ++x) {
        for (int y = 0; y < c.ny; ++y) max_speed = std::max(max_speed, std::hypot(u(x, y, 0), u(x, y, 1)));
      }
      m["centerline_min_ux_ratio"] = min_ux / lid;
      m["max_speed_ratio"] = max_speed / lid;
    }
  }
  return m;
}

ValidationReport validate(const tasks::TaskSpec& task, const sandbox::ExecutionReport& exec,
                          const LoadedOutput& out) {
  ValidationReport rep;
  rep.task = task.name;
  const auto& d = task.description;
  if (out.has_manifest && out.manifest.unstable()) {
    rep.error_class = ErrorClass::unstable;
    rep.notes.push_back(fmt::format("instability at step {}: {}", out.manifest.instability_step,
                                    out.manifest.message));
    return rep;
  }
  if (exec.failed()) {
    rep.error_class = ErrorClass::syntactic;
    rep.notes.push_back(exec.timed_out ? "execution timed out"
                                       : fmt::format("exit status {}", exec.exit_status));
    return rep;
  }
  for (const auto& f : out.checksum_mismatches) rep.notes.push_back("checksum mismatch: " + f);

  rep.detectors["spurious"] = detect_spurious(out, d.parameter("constancy_tol", 1e-12));
  rep.metrics = compute_metrics(task, out);
  for (const auto& check : d.checks) {
    const auto it = rep.metrics.find(check.name);
    const double measured = it == rep.metrics.end() ? kNaN : it->second;
    rep.checks.push_back({check.name, std::string(check.op_text()), check.threshold, measured,
                          check.passes(measured)});
  }
  if (!out.snapshots.empty()) {
    const auto& c = task.config();
    if (c.solver == SimulationConfig::Solver::scalar) {
      rep.detectors["bc_swap"] = detect_bc_swap(out.snapshots.back().scalar, c.bc,
                                                d.parameter("bc_swap_miss", 0.25),
                                                d.parameter("bc_swap_match", 0.1));
    }
    if (out.snapshots.size() >= 2) {
      rep.detectors["missing_advection"] =
          detect_missing_advection(out.snapshots.front(), out.snapshots.back(), c,
                                   d.parameter("missing_advection_fraction", 0.25));
    }
  }
  auto flagged = [&](const char* name) {
    const auto it = rep.detectors.find(name);
    return it != rep.detectors.end() && it->second.flagged;
  };
  const bool all_pass =
      std::all_of(rep.checks.begin(), rep.checks.end(), [](const CheckResult& r) { return r.pass; });
  if (flagged("spurious")) {
    rep.error_class = ErrorClass::spurious;
  } else if (flagged("bc_swap")) {
    rep.error_class = ErrorClass::spatial;
  } else if (flagged("missing_advection") || !all_pass) {
    rep.error_class = ErrorClass::misinterpretation;
  } else {
    rep.error_class = ErrorClass::pass;
  }
  rep.success = rep.error_class == ErrorClass::pass;
  return rep;
}

ValidationReport validate_dir(const tasks::TaskSpec& task, const sandbox::ExecutionReport& exec,
                              const std::string& dir) {
  return validate(task, exec, load_output(dir, tasks::scalar_field_name(task.config().solver)));
}

json report_to_json(const ValidationReport& r) {
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["task"] = r.task;
  j["error_class"] = std::string(to_string(r.error_class));
  j["success"] = r.success;
  json metrics = json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = num(v);
  j["metrics"] = std::move(metrics);
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"op", c.op},
                      {"threshold", c.threshold},
                      {"measured", num(c.measured)},
                      {"pass", c.pass}});
  }
  j["checks"] = std::move(checks);
  json detectors = json::object();
  for (const auto& [k, v] : r.detectors) {
    detectors[k] = {{"applicable", v.applicable}, {"flagged", v.flagged}, {"detail", v.detail}};
  }
  j["detectors"] = std::move(detectors);
  j["notes"] = r.notes;
  return j;
}

}  // namespace pdedev::oracle
