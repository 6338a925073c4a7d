#include "pdedev/tasks/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pdedev/error.hpp"

namespace pdedev::tasks {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view text, std::string_view key) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, text));
  }
  return v;
}

long to_long(std::string_view text, std::string_view key) {
  text = trim(text);
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, text));
  }
  return v;
}

int to_int(std::string_view text, std::string_view key) {
  const long v = to_long(text, key);
  if (v < -2147483647L || v > 2147483647L) throw ConfigError(fmt::format("{}: out of range", key));
  return static_cast<int>(v);
}

bc::Edge edge_of_key(std::string_view key) { return bc::parse_edge(key.substr(3)); }

}  // namespace

InitSpec InitSpec::gaussian(double sigma) {
  InitSpec s;
  s.kind = Kind::gaussian;
  s.sigma = sigma;
  return s;
}

InitSpec InitSpec::gaussian_at(double sigma, Vec2 center, double amplitude) {
  InitSpec s = gaussian(sigma);
  s.amplitude = amplitude;
  s.has_center = true;
  s.center = center;
  return s;
}

InitSpec InitSpec::uniform(double value) {
  InitSpec s;
  s.kind = Kind::uniform;
  s.value = value;
  return s;
}

Vec2 InitSpec::center_for(int nx, int ny) const {
  return has_center ? center : Vec2{nx / 2.0, ny / 2.0};
}

InitSpec parse_init(std::string_view text) {
  text = trim(text);
  if (text == "quiescent") return InitSpec::quiescent();
  if (text.starts_with("uniform:")) return InitSpec::uniform(to_double(text.substr(8), "init"));
  if (text.starts_with("gaussian:")) {
    const auto parts = split(text.substr(9), ',');
    if (parts.size() == 1) return InitSpec::gaussian(to_double(parts[0], "init"));
    if (parts.size() == 3 || parts.size() == 4) {
      const double amp = parts.size() == 4 ? to_double(parts[3], "init") : 1.0;
      return InitSpec::gaussian_at(to_double(parts[0], "init"),
                                   Vec2{to_double(parts[1], "init"), to_double(parts[2], "init")},
                                   amp);
    }
    throw ConfigError("init: expected gaussian:<sigma>[,<xc>,<yc>[,<amp>]]");
  }
  throw ConfigError(fmt::format("init: unknown kind '{}'", text));
}

std::string format_init(const InitSpec& init) {
  switch (init.kind) {
    case InitSpec::Kind::quiescent: return "quiescent";
    case InitSpec::Kind::uniform: return fmt::format("uniform:{}", init.value);
    case InitSpec::Kind::gaussian:
      if (!init.has_center) return fmt::format("gaussian:{}", init.sigma);
      if (init.amplitude == 1.0) {
        return fmt::format("gaussian:{},{},{}", init.sigma, init.center.x, init.center.y);
      }
      return fmt::format("gaussian:{},{},{},{}", init.sigma, init.center.x, init.center.y,
                         init.amplitude);
  }
  return "quiescent";
}

lbm::ReactionTerm parse_reaction(std::string_view text) {
  text = trim(text);
  try {
    if (text == "none") return lbm::ReactionTerm::none();
    if (text.starts_with("logistic:")) {
      return lbm::ReactionTerm::logistic(to_double(text.substr(9), "reaction"));
    }
    if (text.starts_with("table:")) {
      const auto parts = split(text.substr(6), ':');
      if (parts.size() != 3) throw ConfigError("reaction: expected table:<lo>:<hi>:<v0>,<v1>,...");
      std::vector<double> samples;
      for (auto v : split(parts[2], ',')) samples.push_back(to_double(v, "reaction"));
      return lbm::ReactionTerm::tabulated(to_double(parts[0], "reaction"),
                                          to_double(parts[1], "reaction"), std::move(samples));
    }
  } catch (const ParameterRangeError& e) {
    throw ConfigError(std::string("reaction: ") + e.what());
  }
  throw ConfigError(fmt::format("reaction: unknown kind '{}'", text));
}

std::string format_reaction(const lbm::ReactionTerm& reaction) {
  switch (reaction.kind()) {
    case lbm::ReactionTerm::Kind::none: return "none";
    case lbm::ReactionTerm::Kind::logistic: return fmt::format("logistic:{}", reaction.rate());
    case lbm::ReactionTerm::Kind::tabulated:
      return fmt::format("table:{}:{}:{}", reaction.table_lo(), reaction.table_hi(),
                         fmt::join(reaction.table(), ","));
  }
  return "none";
}

std::string_view to_string(SimulationConfig::Solver solver) {
  return solver == SimulationConfig::Solver::scalar ? "scalar" : "fluid";
}

std::string_view to_string(SimulationConfig::Stop stop) {
  return stop == SimulationConfig::Stop::steps ? "steps" : "steady";
}

void set_config_value(SimulationConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key == "task") {
    if (value.empty()) throw ConfigError("task: name must not be empty");
    c.task = std::string(value);
  } else if (key == "solver") {
    if (value == "scalar") {
      c.solver = SimulationConfig::Solver::scalar;
    } else if (value == "fluid") {
      c.solver = SimulationConfig::Solver::fluid;
    } else {
      throw ConfigError(fmt::format("solver: expected scalar or fluid, got '{}'", value));
    }
  } else if (key == "nx") {
    c.nx = to_int(value, key);
  } else if (key == "ny") {
    c.ny = to_int(value, key);
  } else if (key == "steps") {
    c.steps = to_long(value, key);
  } else if (key == "dt") {
    c.dt = to_double(value, key);
  } else if (key == "diffusivity") {
    c.diffusivity = to_double(value, key);
  } else if (key == "velocity_x") {
    c.velocity.x = to_double(value, key);
  } else if (key == "velocity_y") {
    c.velocity.y = to_double(value, key);
  } else if (key == "reaction") {
    c.reaction = parse_reaction(value);
  } else if (key == "rheology") {
    if (value == "newtonian") {
      c.rheology = lbm::FluidSetup::Rheology::newtonian;
    } else if (value == "power_law") {
      c.rheology = lbm::FluidSetup::Rheology::power_law;
    } else {
      throw ConfigError(fmt::format("rheology: expected newtonian or power_law, got '{}'", value));
    }
  } else if (key == "viscosity") {
    c.viscosity = to_double(value, key);
  } else if (key == "consistency_K") {
    c.consistency_K = to_double(value, key);
  } else if (key == "behavior_n") {
    c.behavior_n = to_double(value, key);
  } else if (key == "viscosity_iterations") {
    c.viscosity_iterations = to_int(value, key);
  } else if (key.starts_with("bc_")) {
    const bc::Edge edge = edge_of_key(key);
    std::erase_if(c.bc, [&](const bc::BcRule& r) { return r.edge == edge; });
    const bc::BcRule rule = bc::parse_bc_value(edge, value);
    if (rule.kind != bc::BcRule::Kind::periodic) c.bc.push_back(rule);
    std::stable_sort(c.bc.begin(), c.bc.end(), [](const bc::BcRule& a, const bc::BcRule& b) {
      return static_cast<int>(a.edge) < static_cast<int>(b.edge);
    });
  } else if (key == "init") {
    c.init = parse_init(value);
  } else if (key == "output_every") {
    c.output_every = to_long(value, key);
  } else if (key == "output_dir") {
    if (value.empty()) throw ConfigError("output_dir must not be empty");
    c.output_dir = std::string(value);
  } else if (key == "stop") {
    if (value == "steps") {
      c.stop = SimulationConfig::Stop::steps;
    } else if (value == "steady") {
      c.stop = SimulationConfig::Stop::steady;
    } else {
      throw ConfigError(fmt::format("stop: expected steps or steady, got '{}'", value));
    }
  } else if (key == "steady_tol") {
    c.steady_tol = to_double(value, key);
  } else if (key == "check_every") {
    c.check_every = to_long(value, key);
  } else {
    throw ConfigError(fmt::format("unknown config key '{}'", key));
  }
}

SimulationConfig parse_config(std::string_view text) {
  SimulationConfig c;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("config line {}: expected key=value", line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!seen.insert(key).second) {
      throw ConfigError(fmt::format("config line {}: key '{}' given twice", line_no, key));
    }
    try {
      set_config_value(c, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
  validate_config(c);
  return c;
}

SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const SimulationConfig& c) {
  std::string out;
  auto put = [&out](std::string_view key, const auto& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  put("task", c.task);
  put("solver", to_string(c.solver));
  put("nx", c.nx);
  put("ny", c.ny);
  put("steps", c.steps);
  put("dt", c.dt);
  put("diffusivity", c.diffusivity);
  put("velocity_x", c.velocity.x);
  put("velocity_y", c.velocity.y);
  put("reaction", format_reaction(c.reaction));
  put("rheology", c.rheology == lbm::FluidSetup::Rheology::newtonian ? "newtonian" : "power_law");
  put("viscosity", c.viscosity);
  put("consistency_K", c.consistency_K);
  put("behavior_n", c.behavior_n);
  put("viscosity_iterations", c.viscosity_iterations);
  for (bc::Edge e : bc::kEdgeOrder) {
    bc::BcRule rule = bc::BcRule::periodic(e);
    for (const auto& r : c.bc) {
      if (r.edge == e) rule = r;
    }
    put(fmt::format("bc_{}", bc::to_string(e)), bc::format_bc_value(rule));
  }
  put("init", format_init(c.init));
  put("output_every", c.output_every);
  put("output_dir", c.output_dir);
  put("stop", to_string(c.stop));
  put("steady_tol", c.steady_tol);
  put("check_every", c.check_every);
  return out;
}

void validate_config(const SimulationConfig& c) {
  if (c.nx < 4 || c.ny < 4) {
    throw ConfigError(fmt::format("grid must be at least 4x4, got {}x{}", c.nx, c.ny));
  }
  if (c.steps < 1) throw ConfigError("steps must be positive");
  if (c.output_every < 1 || c.output_every > c.steps) {
    throw ConfigError("output_every must lie in [1, steps]");
  }
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ConfigError("dt must be positive");
  if (c.stop == SimulationConfig::Stop::steady) {
    if (!(c.steady_tol > 0.0)) throw ConfigError("steady_tol must be positive");
    if (c.check_every < 1) throw ConfigError("check_every must be positive");
  }
  const bc::BoundaryPass pass = bc::assemble_bc_pass(c.bc);
  // Streaming wraps across opposite edges, so periodicity comes in pairs.
  for (auto [a, b] : {std::pair{bc::Edge::top, bc::Edge::bottom}, std::pair{bc::Edge::left, bc::Edge::right}}) {
    const bool pa = pass.effective(a).kind == bc::BcRule::Kind::periodic;
    const bool pb = pass.effective(b).kind == bc::BcRule::Kind::periodic;
    if (pa != pb) {
      throw ConfigError(fmt::format("bc_{} and bc_{} must both be periodic or both be walls",
                                    bc::to_string(a), bc::to_string(b)));
    }
  }
  for (const auto& r : c.bc) {
    const bool ok = c.solver == SimulationConfig::Solver::scalar ? r.is_scalar_kind()
                                                                 : r.is_fluid_kind();
    if (!ok && r.kind != bc::BcRule::Kind::periodic) {
      throw ConfigError(fmt::format("bc_{}: '{}' is not valid for a {} run", bc::to_string(r.edge),
                                    bc::format_bc_value(r), to_string(c.solver)));
    }
  }
  if (c.init.kind == InitSpec::Kind::gaussian) {
    if (!(c.init.sigma > 0.0)) throw ConfigError("init: Gaussian sigma must be positive");
    if (!std::isfinite(c.init.amplitude)) throw ConfigError("init: amplitude must be finite");
  }
  try {
    if (c.solver == SimulationConfig::Solver::scalar) {
      lbm::relaxation_from_diffusivity(c.diffusivity * c.dt);
      if (c.reaction.kind() == lbm::ReactionTerm::Kind::logistic && !std::isfinite(c.reaction.rate())) {
        throw ConfigError("reaction rate must be finite");
      }
    } else {
      if (c.dt != 1.0) throw ConfigError("dt is only supported for scalar runs");
      if (c.init.kind == InitSpec::Kind::gaussian) {
        throw ConfigError("init: fluid runs start quiescent or from a uniform density");
      }
      if (c.init.kind == InitSpec::Kind::uniform && !(c.init.value > 0.0)) {
        throw ConfigError("init: uniform density must be positive");
      }
      if (c.viscosity_iterations < 1) throw ConfigError("viscosity_iterations must be >= 1");
      fluid_setup(c);
    }
  } catch (const ParameterRangeError& e) {
    throw ConfigError(e.what());
  }
}

bc::BoundaryPass boundary_pass(const SimulationConfig& c) { return bc::assemble_bc_pass(c.bc); }

lbm::ScalarSetup scalar_setup(const SimulationConfig& c) {
  lbm::ScalarSetup s;
  s.diffusivity = c.diffusivity * c.dt;
  switch (c.reaction.kind()) {
    case lbm::ReactionTerm::Kind::none:
      break;
    case lbm::ReactionTerm::Kind::logistic:
      s.reaction = lbm::ReactionTerm::logistic(c.reaction.rate() * c.dt);
      break;
    case lbm::ReactionTerm::Kind::tabulated: {
      std::vector<double> table = c.reaction.table();
      for (double& v : table) v *= c.dt;
      s.reaction = lbm::ReactionTerm::tabulated(c.reaction.table_lo(), c.reaction.table_hi(),
                                                std::move(table));
      break;
    }
  }
  s.boundary = boundary_pass(c);
  return s;
}

lbm::FluidSetup fluid_setup(const SimulationConfig& c) {
  lbm::FluidSetup s;
  s.rheology = c.rheology;
  s.viscosity = c.viscosity;
  if (c.rheology == lbm::FluidSetup::Rheology::newtonian) {
    lbm::relaxation_from_viscosity(c.viscosity);
  }
  s.power_law.consistency = c.consistency_K;
  s.power_law.behavior_index = c.behavior_n;
  if (c.rheology == lbm::FluidSetup::Rheology::power_law) s.power_law.validate();
  s.viscosity_iterations = c.viscosity_iterations;
  s.boundary = boundary_pass(c);
  return s;
}

ScalarField initial_scalar(const SimulationConfig& c) {
  ScalarField phi(c.nx, c.ny);
  switch (c.init.kind) {
    case InitSpec::Kind::quiescent:
      if (c.solver == SimulationConfig::Solver::fluid) phi = ScalarField(c.nx, c.ny, 1.0);
      break;
    case InitSpec::Kind::uniform:
      phi = ScalarField(c.nx, c.ny, c.init.value);
      break;
    case InitSpec::Kind::gaussian: {
      const Vec2 ctr = c.init.center_for(c.nx, c.ny);
      const double two_s2 = 2.0 * c.init.sigma * c.init.sigma;
      for (int x = 0; x < c.nx; ++x) {
        for (int y = 0; y < c.ny; ++y) {
          const double dx = x - ctr.x;
          const double dy = y - ctr.y;
          phi(x, y) = c.init.amplitude * std::exp(-(dx * dx + dy * dy) / two_s2);
        }
      }
      break;
    }
  }
  return phi;
}

VectorField initial_velocity(const SimulationConfig& c) {
  if (c.solver == SimulationConfig::Solver::fluid) return VectorField(c.nx, c.ny);
  return lbm::uniform_velocity(c.nx, c.ny, Vec2{c.velocity.x * c.dt, c.velocity.y * c.dt});
}

}  // namespace pdedev::tasks
