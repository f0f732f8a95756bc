#ifndef CYCLEGAS_MEASURE_HPP
#define CYCLEGAS_MEASURE_HPP

#include <stdexcept>
#include <vector>

#include "cyclegas/radial_grid.hpp"

namespace cyclegas {

// Momentum distribution: a possible atom at k = 0 (the condensate) plus a
// density on the radial grid nodes, taken w.r.t. dk/(2pi)^d.
struct MomentumMeasure {
  double condensate = 0.0;
  std::vector<double> continuous;

  static MomentumMeasure zero(const RadialGrid& grid) {
    MomentumMeasure m;
    m.continuous.assign(grid.size(), 0.0);
    return m;
  }

  double continuous_mass(const RadialGrid& grid) const {
    return integrate(continuous, grid);
  }

  double total_mass(const RadialGrid& grid) const {
    return condensate + continuous_mass(grid);
  }

  void validate(const RadialGrid& grid) const {
    if (continuous.size() != grid.size())
      throw std::length_error("measure: node count mismatch");
    if (condensate < 0.0)
      throw std::invalid_argument("measure: condensate must be >= 0");
    for (double v : continuous)
      if (!(v >= 0.0)) throw std::invalid_argument("measure: negative density");
  }
};

}  // namespace cyclegas

#endif  // CYCLEGAS_MEASURE_HPP
