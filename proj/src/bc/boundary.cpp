#include "pdedev/bc/boundary.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "pdedev/error.hpp"

namespace pdedev::bc {

using lbm::kD2Q9;
using lbm::kQ;

std::string_view to_string(Edge edge) {
  switch (edge) {
    case Edge::top: return "top";
    case Edge::bottom: return "bottom";
    case Edge::left: return "left";
    case Edge::right: return "right";
  }
  return "?";
}

Edge parse_edge(std::string_view name) {
  for (Edge e : kEdgeOrder) {
    if (to_string(e) == name) return e;
  }
  throw ConfigError("unknown boundary edge '" + std::string(name) + "'");
}

std::array<int, 2> outward_normal(Edge edge) {
  switch (edge) {
    case Edge::top: return {0, 1};
    case Edge::bottom: return {0, -1};
    case Edge::left: return {-1, 0};
    case Edge::right: return {1, 0};
  }
  return {0, 0};
}

namespace {

double parse_number(std::string_view text, std::string_view context) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigError(fmt::format("invalid number '{}' in {}", text, context));
  }
  return v;
}

// Calls fn(x, y, i) for every boundary node of `edge` and every direction i
// leaving the domain through that edge.
template <typename Fn>
void for_each_outgoing(const DistributionField& f, Edge edge, Fn&& fn) {
  const auto n = outward_normal(edge);
  const int nx = f.nx();
  const int ny = f.ny();
  auto visit = [&](int x, int y) {
    for (int i = 1; i < kQ; ++i) {
      if (kD2Q9.ex(i) * n[0] + kD2Q9.ey(i) * n[1] > 0) fn(x, y, i);
    }
  };
  switch (edge) {
    case Edge::top:
      for (int x = 0; x < nx; ++x) visit(x, ny - 1);
      break;
    case Edge::bottom:
      for (int x = 0; x < nx; ++x) visit(x, 0);
      break;
    case Edge::left:
      for (int y = 0; y < ny; ++y) visit(0, y);
      break;
    case Edge::right:
      for (int y = 0; y < ny; ++y) visit(nx - 1, y);
      break;
  }
}

void check_pair(const DistributionField& post, const DistributionField& streamed) {
  lbm::require_same_shape(post, streamed, "boundary condition");
}

}  // namespace

BcRule parse_bc_value(Edge edge, std::string_view text) {
  const std::string context = fmt::format("bc_{}", to_string(edge));
  if (text == "periodic") return BcRule::periodic(edge);
  if (text == "neumann") return BcRule::neumann(edge);
  if (text == "noslip") return BcRule::noslip(edge);
  if (text.starts_with("dirichlet:")) {
    return BcRule::dirichlet(edge, parse_number(text.substr(10), context));
  }
  if (text.starts_with("wall:")) {
    const auto body = text.substr(5);
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) {
      throw ConfigError(fmt::format("{}: wall velocity needs '<ux>,<uy>'", context));
    }
    return BcRule::moving_wall(edge, Vec2{parse_number(body.substr(0, comma), context),
                                          parse_number(body.substr(comma + 1), context)});
  }
  throw ConfigError(fmt::format("{}: unknown boundary kind '{}'", context, text));
}

std::string format_bc_value(const BcRule& rule) {
  switch (rule.kind) {
    case BcRule::Kind::periodic: return "periodic";
    case BcRule::Kind::neumann_zero: return "neumann";
    case BcRule::Kind::noslip: return "noslip";
    case BcRule::Kind::dirichlet_scalar: return fmt::format("dirichlet:{}", rule.value);
    case BcRule::Kind::moving_wall:
      return fmt::format("wall:{},{}", rule.wall_velocity.x, rule.wall_velocity.y);
  }
  return "periodic";
}

void apply_dirichlet_scalar(const DistributionField& post, DistributionField& streamed, Edge edge,
                            double phi_const) {
  check_pair(post, streamed);
  for_each_outgoing(post, edge, [&](int x, int y, int i) {
    streamed(x, y, kD2Q9.opposite(i)) = -post(x, y, i) + 2.0 * kD2Q9.weights[i] * phi_const;
  });
}

void apply_neumann_zero_scalar(const DistributionField& post, DistributionField& streamed,
                               Edge edge) {
  check_pair(post, streamed);
  for_each_outgoing(post, edge, [&](int x, int y, int i) {
    streamed(x, y, kD2Q9.opposite(i)) = post(x, y, i);
  });
}

void apply_noslip(const DistributionField& post, DistributionField& streamed, Edge edge) {
  check_pair(post, streamed);
  for_each_outgoing(post, edge, [&](int x, int y, int i) {
    streamed(x, y, kD2Q9.opposite(i)) = post(x, y, i);
  });
}

void apply_moving_wall(const DistributionField& post, DistributionField& streamed, Edge edge,
                       Vec2 u_wall, double rho_wall) {
  check_pair(post, streamed);
  for_each_outgoing(post, edge, [&](int x, int y, int i) {
    const double eu = kD2Q9.ex(i) * u_wall.x + kD2Q9.ey(i) * u_wall.y;
    streamed(x, y, kD2Q9.opposite(i)) = post(x, y, i) - 6.0 * kD2Q9.weights[i] * rho_wall * eu;
  });
}

BcRule BoundaryPass::effective(Edge edge) const {
  const auto& r = rule(edge);
  return r ? *r : BcRule::periodic(edge);
}

bool BoundaryPass::fully_periodic() const {
  for (Edge e : kEdgeOrder) {
    if (effective(e).kind != BcRule::Kind::periodic) return false;
  }
  return true;
}

bool BoundaryPass::has_scalar_rules() const {
  for (Edge e : kEdgeOrder) {
    if (effective(e).is_scalar_kind()) return true;
  }
  return false;
}

bool BoundaryPass::has_fluid_rules() const {
  for (Edge e : kEdgeOrder) {
    if (effective(e).is_fluid_kind()) return true;
  }
  return false;
}

std::vector<BcRule> BoundaryPass::rules() const {
  std::vector<BcRule> out;
  for (Edge e : kEdgeOrder) {
    if (rule(e)) out.push_back(*rule(e));
  }
  return out;
}

void BoundaryPass::apply_scalar(const DistributionField& post, DistributionField& streamed) const {
  for (Edge e : kEdgeOrder) {
    const BcRule r = effective(e);
    switch (r.kind) {
      case BcRule::Kind::periodic:
        break;
      case BcRule::Kind::dirichlet_scalar:
        apply_dirichlet_scalar(post, streamed, e, r.value);
        break;
      case BcRule::Kind::neumann_zero:
        apply_neumann_zero_scalar(post, streamed, e);
        break;
      case BcRule::Kind::noslip:
      case BcRule::Kind::moving_wall:
        throw ConfigError(fmt::format("bc_{}: velocity wall applied to a scalar field", to_string(e)));
    }
  }
}

void BoundaryPass::apply_fluid(const DistributionField& post, DistributionField& streamed) const {
  for (Edge e : kEdgeOrder) {
    const BcRule r = effective(e);
    switch (r.kind) {
      case BcRule::Kind::periodic:
        break;
      case BcRule::Kind::noslip:
        apply_noslip(post, streamed, e);
        break;
      case BcRule::Kind::moving_wall:
        apply_moving_wall(post, streamed, e, r.wall_velocity, r.wall_density);
        break;
      case BcRule::Kind::dirichlet_scalar:
      case BcRule::Kind::neumann_zero:
        throw ConfigError(fmt::format("bc_{}: scalar condition applied to a flow field", to_string(e)));
    }
  }
}

BoundaryPass assemble_bc_pass(std::span<const BcRule> rules) {
  BoundaryPass pass;
  for (const BcRule& r : rules) {
    auto& slot = pass.rules_[static_cast<int>(r.edge)];
    if (slot) {
      throw ConfigError(fmt::format("boundary edge '{}' assigned more than once", to_string(r.edge)));
    }
    if (r.kind == BcRule::Kind::dirichlet_scalar && !std::isfinite(r.value)) {
      throw ConfigError("Dirichlet value must be finite");
    }
    if (r.kind == BcRule::Kind::moving_wall &&
        !(std::isfinite(r.wall_velocity.x) && std::isfinite(r.wall_velocity.y))) {
      throw ConfigError("wall velocity must be finite");
    }
    slot = r;
  }
  return pass;
}

}  // namespace pdedev::bc
