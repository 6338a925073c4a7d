#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pdedev/error.hpp"
#include "pdedev/lbm/lattice.hpp"

namespace pdedev::lbm {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Dense nx-by-ny grid with N doubles per node, stored (x, y, component)
// row-major so that the components of one node are contiguous.
template <int N>
class GridField {
 public:
  static constexpr int kComponents = N;

  GridField() = default;
  GridField(int nx, int ny, double fill = 0.0) : nx_(nx), ny_(ny) {
    if (nx <= 0 || ny <= 0) {
      throw ShapeError("grid dimensions must be positive, got " + std::to_string(nx) + "x" +
                       std::to_string(ny));
    }
    data_.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * N, fill);
  }

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  std::size_t nodes() const noexcept { return static_cast<std::size_t>(nx_) * ny_; }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(x) * ny_ + y) * N + c;
  }

  double& operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  double operator()(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<double, N> node(int x, int y) noexcept {
    return std::span<double, N>(data_.data() + index(x, y), N);
  }
  std::span<const double, N> node(int x, int y) const noexcept {
    return std::span<const double, N>(data_.data() + index(x, y), N);
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(int nx, int ny) const noexcept { return nx_ == nx && ny_ == ny; }
  template <int M>
  bool same_shape(const GridField<M>& other) const noexcept {
    return nx_ == other.nx() && ny_ == other.ny();
  }

  bool all_finite() const noexcept {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const GridField&, const GridField&) = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> data_;
};

using ScalarField = GridField<1>;
using VectorField = GridField<2>;
using DistributionField = GridField<kQ>;
// Full 2x2 tensor per node, components (xx, xy, yx, yy).
using TensorField = GridField<4>;

template <int A, int B>
void require_same_shape(const GridField<A>& a, const GridField<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.nx()) + "x" +
                     std::to_string(a.ny()) + " vs " + std::to_string(b.nx()) + "x" +
                     std::to_string(b.ny()) + ")");
  }
}

inline VectorField uniform_velocity(int nx, int ny, Vec2 u) {
  VectorField field(nx, ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      field(x, y, 0) = u.x;
      field(x, y, 1) = u.y;
    }
  }
  return field;
}

template <int N>
double max_abs_difference(const GridField<N>& a, const GridField<N>& b) {
  require_same_shape(a, b, "max_abs_difference");
  double worst = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t k = 0; k < da.size(); ++k) worst = std::max(worst, std::abs(da[k] - db[k]));
  return worst;
}

}  // namespace pdedev::lbm
