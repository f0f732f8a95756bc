// Ideal Bose gas at reference chemical potential alpha <= 0, dispersion
// eps(k) = dispersion_coefficient * k^2.
//
// Every quantity ships through two independent routes where a closed form
// exists: radial quadrature of the ensemble kernels, and the cycle series
// sum_q e^{beta alpha q} (4 pi beta q c)^{-d/2} obtained by integrating each
// cycle term exactly.

#ifndef CYCLEGAS_FREE_GAS_HPP
#define CYCLEGAS_FREE_GAS_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "cyclegas/ensemble.hpp"
#include "cyclegas/radial_grid.hpp"

namespace cyclegas {

struct FreeGasParams {
  double alpha = -1.0;  // chemical potential, <= 0
  double beta = 1.0;
  int dimension = 3;
  double dispersion_coefficient = 1.0;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("free gas: beta must be > 0");
    if (dimension < 1) throw std::invalid_argument("free gas: dimension must be >= 1");
    if (!(dispersion_coefficient > 0.0))
      throw std::invalid_argument("free gas: dispersion coefficient must be > 0");
    if (alpha > 0.0) throw std::invalid_argument("free gas: alpha must be <= 0");
  }

  double eps(double k) const { return dispersion_coefficient * k * k; }
};

namespace detail {

inline void require_alpha_negative(const FreeGasParams& fp) {
  fp.validate();
  if (!(fp.alpha < 0.0))
    throw std::domain_error("free gas: alpha must be strictly negative here");
}

inline void require_alpha_admissible(const FreeGasParams& fp) {
  fp.validate();
  if (fp.alpha == 0.0 && fp.dimension <= 2)
    throw std::domain_error(
        "free gas: the occupation integral diverges at alpha=0 for d<=2");
}

}  // namespace detail

/// Modified free pressure P0 = int dk/(2pi)^d pi(alpha - eps(k)).
inline double free_modified_pressure(const FreeGasParams& fp,
                                     const ModifiedEnsembleParams& ens,
                                     const RadialGrid& grid) {
  detail::require_alpha_negative(fp);
  ens.validate();
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    vals[i] = pi(fp.alpha - fp.eps(grid.nodes()[i]), ens);
  return integrate(vals, grid);
}

/// Density of particles in cycles of length <= Q, quadrature route:
/// int dk/(2pi)^d sum_{q<=Q} e^{beta q (alpha - eps(k))}.
inline double free_rho_short(const FreeGasParams& fp, int Q, const RadialGrid& grid) {
  detail::require_alpha_admissible(fp);
  if (Q < 1) throw std::invalid_argument("free_rho_short: Q must be >= 1");
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = fp.beta * (fp.alpha - fp.eps(grid.nodes()[i]));
    vals[i] = cyclegas::detail::geometric_partial_sum(u, Q);
  }
  return integrate(vals, grid);
}

/// Same density from the cycle series sum_{q<=Q} e^{beta alpha q}(4 pi beta q c)^{-d/2}.
inline double free_rho_short_series(const FreeGasParams& fp, int Q) {
  detail::require_alpha_admissible(fp);
  double acc = 0.0;
  const double pref = 4.0 * std::numbers::pi * fp.beta * fp.dispersion_coefficient;
  for (int q = Q; q >= 1; --q)
    acc += std::exp(fp.beta * fp.alpha * q) * std::pow(pref * q, -0.5 * fp.dimension);
  return acc;
}

/// nu0_e - free_rho_short(Q), integrated directly as the cycle tail
/// int dk/(2pi)^d w^{Q+1}/(1-w) with w = e^{beta(alpha - eps)}.  Evaluating
/// the tiny gap this way keeps it accurate far below quadrature noise on the
/// two separate quantities.
inline double free_rho_short_gap(const FreeGasParams& fp, int Q, const RadialGrid& grid) {
  detail::require_alpha_admissible(fp);
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = fp.beta * (fp.alpha - fp.eps(grid.nodes()[i]));
    vals[i] = std::exp(u * (Q + 1)) / (-std::expm1(u));
  }
  return integrate(vals, grid);
}

/// Total excited density nu0_e(alpha) = int dk/(2pi)^d 1/(e^{beta(eps-alpha)}-1).
inline double free_density(const FreeGasParams& fp, const RadialGrid& grid) {
  detail::require_alpha_admissible(fp);
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = fp.beta * (fp.alpha - fp.eps(grid.nodes()[i]));
    vals[i] = 1.0 / std::expm1(-u);
  }
  return integrate(vals, grid);
}

struct CriticalDensity {
  double value = 0.0;
  double tail_bound = 0.0;  // bound on the neglected k > k_max contribution
};

/// Free critical density: nu0_e at alpha = 0, finite only for d >= 3.
/// The returned tail bound covers the truncation of the grid at k_max,
/// using 1/(e^x - 1) <= e^{-x/2}/(1 - e^{-x/2}) past the cut.
inline CriticalDensity critical_density(double beta, int d, const RadialGrid& grid) {
  if (d <= 2) throw std::domain_error("critical density requires d >= 3");
  FreeGasParams fp;
  fp.alpha = 0.0;
  fp.beta = beta;
  fp.dimension = d;
  CriticalDensity out;
  out.value = free_density(fp, grid);
  const double x = beta * grid.k_max() * grid.k_max();
  out.tail_bound = gaussian_tail_bound(d, 0.5 * beta, grid.k_max()) /
                   (-std::expm1(-0.5 * x));
  return out;
}

}  // namespace cyclegas

#endif  // CYCLEGAS_FREE_GAS_HPP
