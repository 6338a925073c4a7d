#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "pdedev/bc/boundary.hpp"
#include "pdedev/lbm/fields.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using pdedev::lbm::ScalarField;
using pdedev::lbm::TensorField;
using pdedev::lbm::Vec2;
using pdedev::lbm::VectorField;

class TempDir {
 public:
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "pdedev-test-XXXXXX").string();
    if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// CLI binary path and fixture root, injected by CMake.
inline std::string cli_binary() { return PDEDEV_CLI_PATH; }
inline fs::path fixture_dir() { return fs::path(PDEDEV_FIXTURE_DIR); }

// Sum with a long double accumulator.
inline double total(const ScalarField& f) {
  long double s = 0.0L;
  for (double v : f.data()) s += v;
  return static_cast<double>(s);
}

// Strain rate E = (grad u + grad u^T) / 2 by second-order differences:
// central in the interior (wrapping when periodic), one-sided at walls.
inline TensorField fd_strain(const VectorField& u, bool periodic_x, bool periodic_y) {
  const int nx = u.nx(), ny = u.ny();
  auto deriv = [&](int x, int y, int comp, int axis) {
    const int n = axis == 0 ? nx : ny;
    const int pos = axis == 0 ? x : y;
    const bool periodic = axis == 0 ? periodic_x : periodic_y;
    auto at = [&](int k) {
      if (periodic) k = (k % n + n) % n;
      return axis == 0 ? u(k, y, comp) : u(x, k, comp);
    };
    if (periodic || (pos > 0 && pos < n - 1)) return 0.5 * (at(pos + 1) - at(pos - 1));
    if (pos == 0) return 0.5 * (-3.0 * at(0) + 4.0 * at(1) - at(2));
    return 0.5 * (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3));
  };
  TensorField e(nx, ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      const double dux_dx = deriv(x, y, 0, 0), dux_dy = deriv(x, y, 0, 1);
      const double duy_dx = deriv(x, y, 1, 0), duy_dy = deriv(x, y, 1, 1);
      e(x, y, 0) = dux_dx;
      e(x, y, 1) = 0.5 * (dux_dy + duy_dx);
      e(x, y, 2) = e(x, y, 1);
      e(x, y, 3) = duy_dy;
    }
  }
  return e;
}

// ||a - b||_2 / ||b||_2 over nodes at least `margin` away from every edge.
inline double relative_l2(const TensorField& a, const TensorField& b, int margin = 0) {
  long double num = 0.0L, den = 0.0L;
  for (int x = margin; x < a.nx() - margin; ++x) {
    for (int y = margin; y < a.ny() - margin; ++y) {
      for (int c = 0; c < 4; ++c) {
        const double d = a(x, y, c) - b(x, y, c);
        num += d * d;
        den += b(x, y, c) * b(x, y, c);
      }
    }
  }
  return std::sqrt(static_cast<double>(num / den));
}

// Steady advection-diffusion u . grad(phi) = D lap(phi) on the box
// [-1/2, nx-1/2] x [-1/2, ny-1/2] (walls halfway past the outer nodes),
// cell-centred finite volumes with `refine` cells per lattice spacing.
// Edges: Dirichlet value, zero total flux, or periodic. The result is
// sampled at the lattice nodes.
struct SteadyAdProblem {
  int nx = 0;
  int ny = 0;
  Vec2 velocity;
  double diffusivity = 0.0;
  std::vector<pdedev::bc::BcRule> rules;
  int refine = 4;  // must be even
};

inline ScalarField solve_steady_ad(const SteadyAdProblem& p) {
  using pdedev::bc::BcRule;
  using pdedev::bc::Edge;
  const int mx = p.nx * p.refine, my = p.ny * p.refine;
  const double h = 1.0 / p.refine;
  const double d = p.diffusivity;

  BcRule edge_rule[4];
  for (Edge e : pdedev::bc::kEdgeOrder) edge_rule[static_cast<int>(e)] = BcRule::periodic(e);
  for (const auto& r : p.rules) edge_rule[static_cast<int>(r.edge)] = r;

  auto id = [&](int i, int j) { return static_cast<Eigen::Index>(i) * my + j; };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mx) * my * 5);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mx) * my);

  struct Face {
    int di, dj;
    Edge edge;
    double un;
  };
  const Face faces[4] = {{1, 0, Edge::right, p.velocity.x},
                         {-1, 0, Edge::left, -p.velocity.x},
                         {0, 1, Edge::top, p.velocity.y},
                         {0, -1, Edge::bottom, -p.velocity.y}};

  // Net outward flux per cell (divided by the face length h) is zero.
  for (int i = 0; i < mx; ++i) {
    for (int j = 0; j < my; ++j) {
      const auto row = id(i, j);
      double diag = 0.0;
      for (const Face& f : faces) {
        int ni = i + f.di, nj = j + f.dj;
        const bool outside = ni < 0 || ni >= mx || nj < 0 || nj >= my;
        if (outside) {
          const BcRule& r = edge_rule[static_cast<int>(f.edge)];
          if (r.kind == BcRule::Kind::dirichlet_scalar) {
            // un * phi_b - D (phi_b - phi_P) / (h/2)
            diag += 2.0 * d / h;
            rhs[row] -= (f.un - 2.0 * d / h) * r.value;
            continue;
          }
          if (r.kind != BcRule::Kind::periodic) continue;  // zero total flux
          ni = (ni + mx) % mx;
          nj = (nj + my) % my;
        }
        // un (phi_P + phi_N) / 2 - D (phi_N - phi_P) / h
        diag += 0.5 * f.un + d / h;
        trip.emplace_back(row, id(ni, nj), 0.5 * f.un - d / h);
      }
      trip.emplace_back(row, row, diag);
    }
  }
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(mx) * my, static_cast<Eigen::Index>(mx) * my);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw std::runtime_error("steady oracle: factorization failed");
  Eigen::VectorXd sol = lu.solve(rhs);

  // Node x covers fine cells [x*r, (x+1)*r); its centre sits between the two
  // middle cells.
  ScalarField out(p.nx, p.ny);
  const int half = p.refine / 2;
  for (int x = 0; x < p.nx; ++x) {
    for (int y = 0; y < p.ny; ++y) {
      const int i0 = x * p.refine + half - 1, j0 = y * p.refine + half - 1;
      out(x, y) = 0.25 * (sol[id(i0, j0)] + sol[id(i0 + 1, j0)] + sol[id(i0, j0 + 1)] +
                          sol[id(i0 + 1, j0 + 1)]);
    }
  }
  return out;
}

inline double band_mean_of(const ScalarField& f, pdedev::bc::Edge edge) {
  using pdedev::bc::Edge;
  long double s = 0.0L;
  int n = 0;
  if (edge == Edge::top || edge == Edge::bottom) {
    const int y = edge == Edge::top ? f.ny() - 1 : 0;
    for (int x = 0; x < f.nx(); ++x, ++n) s += f(x, y);
  } else {
    const int x = edge == Edge::right ? f.nx() - 1 : 0;
    for (int y = 0; y < f.ny(); ++y, ++n) s += f(x, y);
  }
  return static_cast<double>(s / n);
}

// u_x on the vertical centre line, averaging the two middle columns of an
// even grid.
inline std::vector<double> centerline_ux(const VectorField& u) {
  std::vector<double> line(u.ny());
  const int a = u.nx() / 2 - 1, b = u.nx() / 2;
  for (int y = 0; y < u.ny(); ++y) {
    line[y] = u.nx() % 2 == 0 ? 0.5 * (u(a, y, 0) + u(b, y, 0)) : u(u.nx() / 2, y, 0);
  }
  return line;
}

}  // namespace testsupport
