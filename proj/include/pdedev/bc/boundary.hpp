#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdedev/lbm/fields.hpp"

namespace pdedev::bc {

using lbm::DistributionField;
using lbm::ScalarField;
using lbm::Vec2;
using lbm::VectorField;

// Top is y = ny-1, bottom y = 0, left x = 0, right x = nx-1. Walls sit
// halfway between the outermost node row and a virtual node beyond it.
enum class Edge { top, bottom, left, right };

inline constexpr std::array<Edge, 4> kEdgeOrder{Edge::top, Edge::bottom, Edge::left, Edge::right};

std::string_view to_string(Edge edge);
Edge parse_edge(std::string_view name);

// Unit vector pointing out of the domain through `edge`.
std::array<int, 2> outward_normal(Edge edge);

struct BcRule {
  enum class Kind { periodic, dirichlet_scalar, neumann_zero, noslip, moving_wall };

  Kind kind = Kind::periodic;
  Edge edge = Edge::top;
  double value = 0.0;       // dirichlet_scalar
  Vec2 wall_velocity;       // moving_wall
  double wall_density = 1.0;

  static BcRule make(Kind k, Edge e) {
    BcRule r;
    r.kind = k;
    r.edge = e;
    return r;
  }
  static BcRule periodic(Edge e) { return make(Kind::periodic, e); }
  static BcRule dirichlet(Edge e, double phi) {
    BcRule r = make(Kind::dirichlet_scalar, e);
    r.value = phi;
    return r;
  }
  static BcRule neumann(Edge e) { return make(Kind::neumann_zero, e); }
  static BcRule noslip(Edge e) { return make(Kind::noslip, e); }
  static BcRule moving_wall(Edge e, Vec2 u, double rho = 1.0) {
    BcRule r = make(Kind::moving_wall, e);
    r.wall_velocity = u;
    r.wall_density = rho;
    return r;
  }

  bool is_scalar_kind() const { return kind == Kind::dirichlet_scalar || kind == Kind::neumann_zero; }
  bool is_fluid_kind() const { return kind == Kind::noslip || kind == Kind::moving_wall; }

  friend bool operator==(const BcRule&, const BcRule&) = default;
};

// Config-file spelling: periodic | dirichlet:<v> | neumann | noslip | wall:<ux>,<uy>
BcRule parse_bc_value(Edge edge, std::string_view text);
std::string format_bc_value(const BcRule& rule);

// Each rule overwrites the populations entering the domain through its edge.
// `post` holds the post-collision populations of the step, `streamed` the
// result of periodic streaming; only `streamed` is modified.
void apply_dirichlet_scalar(const DistributionField& post, DistributionField& streamed, Edge edge,
                            double phi_const);
// Bounce-back: no net scalar flux crosses the edge. With a wall-normal
// advecting velocity this is a zero total (advective + diffusive) flux.
void apply_neumann_zero_scalar(const DistributionField& post, DistributionField& streamed,
                               Edge edge);
void apply_noslip(const DistributionField& post, DistributionField& streamed, Edge edge);
void apply_moving_wall(const DistributionField& post, DistributionField& streamed, Edge edge,
                       Vec2 u_wall, double rho_wall = 1.0);

// One rule per edge; unlisted edges are periodic. Applied top, bottom, left,
// right, so at corners the later edge wins.
class BoundaryPass {
 public:
  BoundaryPass() = default;

  const std::optional<BcRule>& rule(Edge edge) const { return rules_[static_cast<int>(edge)]; }
  // The effective rule, periodic when unassigned.
  BcRule effective(Edge edge) const;
  bool fully_periodic() const;
  bool has_scalar_rules() const;
  bool has_fluid_rules() const;
  std::vector<BcRule> rules() const;

  void apply_scalar(const DistributionField& post, DistributionField& streamed) const;
  void apply_fluid(const DistributionField& post, DistributionField& streamed) const;

  friend bool operator==(const BoundaryPass&, const BoundaryPass&) = default;

 private:
  friend BoundaryPass assemble_bc_pass(std::span<const BcRule> rules);
  std::array<std::optional<BcRule>, 4> rules_;
};

// Throws ConfigError on duplicate edge assignment.
BoundaryPass assemble_bc_pass(std::span<const BcRule> rules);

}  // namespace pdedev::bc
