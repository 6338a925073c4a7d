#pragma once

#include <array>

namespace pdedev::lbm {

inline constexpr int kQ = 9;

// D2Q9 velocity set. Direction 0 is rest; 1-4 are the axis directions
// (+x, +y, -x, -y); 5-8 the diagonals, counter-clockwise from (+1,+1).
struct LatticeD2Q9 {
  std::array<std::array<int, 2>, kQ> velocities;
  std::array<double, kQ> weights;
  double sound_speed_sq;
  std::array<int, kQ> opposites;

  constexpr int ex(int i) const { return velocities[i][0]; }
  constexpr int ey(int i) const { return velocities[i][1]; }
  constexpr int opposite(int i) const { return opposites[i]; }
};

inline constexpr LatticeD2Q9 kD2Q9{
    {{{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}, {-1, 1}, {-1, -1}, {1, -1}}},
    {4.0 / 9.0, 1.0 / 9.0, 1.0 / 9.0, 1.0 / 9.0, 1.0 / 9.0, 1.0 / 36.0, 1.0 / 36.0, 1.0 / 36.0,
     1.0 / 36.0},
    1.0 / 3.0,
    {0, 3, 4, 1, 2, 7, 8, 5, 6},
};

inline const LatticeD2Q9& d2q9_lattice() { return kD2Q9; }

}  // namespace pdedev::lbm
