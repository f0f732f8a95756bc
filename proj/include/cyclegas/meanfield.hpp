// Thermodynamic-limit equilibrium of the mean-field Bose gas with mode
// coupling: minimize the grand-potential functional
//
//   E(m) = <eps - mu, m> + (a/2)|m|^2 + (1/2)<m, v m> + int pi_star(m_e)
//
// over momentum measures m = nu_c delta_0 + nu_e(k) dk/(2pi)^d.  The
// stationarity conditions are
//
//   condensed:  mu = a|nu| + (v nu)(0)          (field vanishes at k = 0)
//   everywhere: nu_e(k) = pi_prime(-g(k)),  g(k) = eps(k) - mu + a|nu| + (v nu)(k)
//
// solved by damped fixed-point iteration with normal/condensed regime
// switching.  In the condensed regime the field is assembled in the
// differenced form g(k) = eps(k) + nu_c (v(k,0)-v(0,0)) + ((vnu_e)(k)-(vnu_e)(0)),
// which is exact under the k=0 constraint and avoids the catastrophic
// cancellation of O(mu) terms that the plain form suffers when g(k) ~ k^2.

#ifndef CYCLEGAS_MEANFIELD_HPP
#define CYCLEGAS_MEANFIELD_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cyclegas/ensemble.hpp"
#include "cyclegas/free_gas.hpp"
#include "cyclegas/kernels.hpp"
#include "cyclegas/measure.hpp"
#include "cyclegas/radial_grid.hpp"

namespace cyclegas {

struct ModelParams {
  double beta = 1.0;
  double mu = 0.0;
  double mean_field_a = 1.0;  // superstable mean-field coupling, > 0
  KernelSpec kernel;
  int dimension = 3;
  double dispersion_coefficient = 1.0;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("model: beta must be > 0");
    if (!(mean_field_a > 0.0))
      throw std::invalid_argument("model: mean_field_a must be > 0");
    if (dimension < 1) throw std::invalid_argument("model: dimension must be >= 1");
    if (!(dispersion_coefficient > 0.0))
      throw std::invalid_argument("model: dispersion coefficient must be > 0");
    kernel.validate();
  }

  double eps(double k) const { return dispersion_coefficient * k * k; }
};

enum class Regime { normal, condensed };

inline const char* regime_name(Regime r) {
  return r == Regime::condensed ? "condensed" : "normal";
}

struct SolverOptions {
  double tol = 1e-10;       // sup-node relative stationarity residual target
  int max_sweeps = 20000;
  double omega = 0.5;       // damping factor for the density update
  double occupation_cap = 1e15;  // clamp for infeasible transient fields
  int stall_window = 2500;  // sweeps without improvement before giving up
  bool throw_on_failure = true;
};

struct EquilibriumSolution {
  MomentumMeasure measure;
  double pressure = 0.0;
  std::vector<double> effective_field;  // g(k_i), all > 0 at a valid solution
  double g_zero = 0.0;                  // g(0); 0 in the condensed regime
  Regime regime = Regime::normal;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;     // sup-node |nu - pi_prime(-g)| / max(nu, 1)
  double nu_e_total = 0.0;
  double rho_total = 0.0;
  double omega_final = 0.0;
  double density_tail_bound = 0.0;  // neglected k > k_max occupation mass
};

// ---------------------------------------------------------------------------
// Functionals.

/// u(m) = <eps, m> + (a/2) |m|^2 + (1/2) <m, v m>; the condensate sits at
/// eps(0) = 0 and contributes no kinetic term.
inline double energy_density(const MomentumMeasure& m, const ModelParams& p,
                             const RadialGrid& grid, const KernelMatrix& km) {
  m.validate(grid);
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    vals[i] = p.eps(grid.nodes()[i]) * m.continuous[i];
  const double kinetic = integrate(vals, grid);
  const double mass = m.total_mass(grid);
  return kinetic + 0.5 * p.mean_field_a * mass * mass +
         0.5 * pair_energy(m, km, grid);
}

/// T s(m) = -int dk/(2pi)^d pi_star(m_e(k)); the condensate does not
/// contribute.  Zero densities contribute zero (pi_star(0) = 0).
inline double entropy_term(const MomentumMeasure& m,
                           const ModifiedEnsembleParams& ens,
                           const RadialGrid& grid) {
  m.validate(grid);
  ens.validate();
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    vals[i] = pi_star(m.continuous[i], ens);
  return -integrate(vals, grid);
}

/// Grand-potential functional E(m); E(0) = 0, and the equilibrium measure
/// minimizes it.
inline double grand_potential(const MomentumMeasure& m, const ModelParams& p,
                              const ModifiedEnsembleParams& ens,
                              const RadialGrid& grid, const KernelMatrix& km) {
  const double mass = m.total_mass(grid);
  return energy_density(m, p, grid, km) - p.mu * mass - entropy_term(m, ens, grid);
}

// ---------------------------------------------------------------------------
// Solver.

namespace detail {

// Ideal-gas density on the grid at effective chemical potential mu_eff < 0.
inline double scalar_density(double mu_eff, const ModelParams& p,
                             const ModifiedEnsembleParams& ens,
                             const RadialGrid& grid) {
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    acc += grid.weights()[i] *
           pi_prime(mu_eff - p.eps(grid.nodes()[i]), ens);
  return acc;
}

// Warm start from the pure mean-field gas (kernel dropped): solve the scalar
// fixed point n = F(mu - a n); if it saturates, seed the condensed branch.
inline MomentumMeasure scalar_warm_start(const ModelParams& p,
                                         const ModifiedEnsembleParams& ens,
                                         const RadialGrid& grid,
                                         Regime* regime_out) {
  const double a = p.mean_field_a;
  const double edge = -1e-9;  // mu_eff at the condensation edge
  const double n_sat = scalar_density(edge, p, ens, grid);
  MomentumMeasure m = MomentumMeasure::zero(grid);
  double mu_eff;
  if (p.mu - a * n_sat >= edge) {
    // Saturated: macroscopic mass balances the mean field, mu = a |nu|.
    *regime_out = Regime::condensed;
    mu_eff = edge;
    m.condensate = std::max(p.mu / a - n_sat, 0.0);
  } else {
    *regime_out = Regime::normal;
    // Keep mu - a n <= edge throughout the bracket so every evaluation stays
    // in the kernel's domain.
    double lo = std::max(0.0, (p.mu - edge) / a), hi = n_sat;
    for (int it = 0; it < 200; ++it) {
      const double n = 0.5 * (lo + hi);
      (scalar_density(p.mu - a * n, p, ens, grid) > n ? lo : hi) = n;
    }
    mu_eff = std::min(p.mu - a * 0.5 * (lo + hi), edge);
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    m.continuous[i] = pi_prime(mu_eff - p.eps(grid.nodes()[i]), ens);
  return m;
}

}  // namespace detail

/// Damped fixed-point solve of the stationarity conditions above.
inline EquilibriumSolution solve_equilibrium(const ModelParams& p,
                                             const ModifiedEnsembleParams& ens,
                                             const RadialGrid& grid,
                                             const KernelMatrix& km,
                                             const SolverOptions& opts = {}) {
  p.validate();
  ens.validate();
  if (km.size() != grid.size())
    throw std::length_error("solve_equilibrium: kernel matrix/grid mismatch");
  if (p.beta != ens.beta)
    throw std::invalid_argument("solve_equilibrium: model and ensemble beta differ");

  const int n = static_cast<int>(grid.size());
  const double a = p.mean_field_a;
  const double g_floor = 1.0 / (p.beta * opts.occupation_cap);

  Regime regime = Regime::normal;
  MomentumMeasure m = detail::scalar_warm_start(p, ens, grid, &regime);

  Eigen::VectorXd nu(n), u(n), gvec(n), tvec(n);
  for (int i = 0; i < n; ++i) nu[i] = m.continuous[i];
  double nu_c = m.condensate;

  double omega = opts.omega;
  double prev_res = std::numeric_limits<double>::infinity();
  double best_res = prev_res;
  int best_sweep = 0;
  int flips = 0, normal_violation = 0, condensed_violation = 0;
  double g0 = 0.0, n_e = 0.0;
  int sweep = 0;

  for (sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    for (int i = 0; i < n; ++i) u[i] = grid.weights()[i] * nu[i];
    n_e = u.sum();
    const double w0u = km.w0.dot(u);
    const Eigen::VectorXd dfield = km.D * u;

    if (regime == Regime::condensed) {
      nu_c = (p.mu - a * n_e - w0u) / (a + km.v00);
      if (nu_c < 0.0) {
        nu_c = 0.0;
        if (++condensed_violation >= 25 && flips < 8) {
          regime = Regime::normal;
          ++flips;
          condensed_violation = 0;
        }
      } else {
        condensed_violation = 0;
      }
    }
    if (regime == Regime::condensed) {
      g0 = 0.0;
    } else {
      nu_c = 0.0;
      g0 = -p.mu + a * n_e + w0u;
      if (g0 <= 0.0) {
        if (++normal_violation >= 3 && flips < 8) {
          regime = Regime::condensed;
          ++flips;
          normal_violation = 0;
          continue;  // recompute the sweep under the condensed constraint
        }
      } else {
        normal_violation = 0;
      }
    }

    double res = std::abs(nu_c - m.condensate) / std::max(m.condensate, 1.0);
    for (int i = 0; i < n; ++i) {
      const double g = p.eps(grid.nodes()[i]) + g0 +
                       nu_c * km.w0_minus_v00[i] + dfield[i];
      gvec[i] = g;
      const double t = (g > g_floor)
                           ? std::min(pi_prime(-g, ens), opts.occupation_cap)
                           : opts.occupation_cap;
      tvec[i] = t;
      res = std::max(res, std::abs(t - nu[i]) / std::max(nu[i], 1.0));
    }
    m.condensate = nu_c;

    if (res <= opts.tol) {
      nu = tvec;  // final undamped substitution; residual is already at target
      break;
    }
    nu += omega * (tvec - nu);
    nu = nu.cwiseMax(0.0);

    if (res > prev_res * 1.000001) omega = std::max(0.5 * omega, 1.0 / 64.0);
    else omega = std::min(omega * 1.02, opts.omega);
    prev_res = res;
    if (res < 0.9 * best_res) {
      best_res = res;
      best_sweep = sweep;
    } else if (sweep - best_sweep > opts.stall_window) {
      break;  // stalled
    }
  }

  EquilibriumSolution sol;
  sol.measure.condensate = m.condensate;
  sol.measure.continuous.assign(nu.data(), nu.data() + n);
  sol.regime = regime;
  sol.iterations = std::min(sweep, opts.max_sweeps);
  sol.omega_final = omega;

  // Stationarity residual and field of the returned iterate.
  for (int i = 0; i < n; ++i) u[i] = grid.weights()[i] * nu[i];
  n_e = u.sum();
  const double w0u = km.w0.dot(u);
  const Eigen::VectorXd dfield = km.D * u;
  if (regime == Regime::condensed)
    sol.measure.condensate = std::max((p.mu - a * n_e - w0u) / (a + km.v00), 0.0);
  g0 = (regime == Regime::condensed)
           ? 0.0
           : -p.mu + a * n_e + w0u;
  double res = 0.0;
  sol.effective_field.resize(n);
  bool feasible = true;
  for (int i = 0; i < n; ++i) {
    const double g = p.eps(grid.nodes()[i]) + g0 +
                     sol.measure.condensate * km.w0_minus_v00[i] + dfield[i];
    sol.effective_field[i] = g;
    if (!(g > 0.0)) feasible = false;
    else
      res = std::max(res, std::abs(pi_prime(-g, ens) - nu[i]) /
                              std::max(nu[i], 1.0));
  }
  sol.g_zero = g0;
  sol.residual = res;
  sol.converged = feasible && res <= opts.tol;
  sol.nu_e_total = n_e;
  sol.rho_total = sol.measure.condensate + n_e;

  if (!feasible && opts.throw_on_failure)
    throw std::runtime_error(
        "solve_equilibrium: non-positive effective field at a node; the grid "
        "or damping is misconfigured for this scenario");
  if (!sol.converged && opts.throw_on_failure)
    throw std::runtime_error(
        "solve_equilibrium: no convergence after " +
        std::to_string(sol.iterations) + " sweeps (residual " +
        std::to_string(sol.residual) + ")");

  // Occupation mass beyond k_max: bounded by the Boltzmann tail of the field
  // at the cut times the enhancement 1/(1 - e^{-beta g}).
  const double g_edge = sol.effective_field[n - 1];
  const double shift = p.eps(grid.k_max()) - g_edge;
  sol.density_tail_bound =
      std::exp(std::min(p.beta * shift, 300.0)) *
      gaussian_tail_bound(grid.dimension(), p.beta * p.dispersion_coefficient,
                          grid.k_max()) /
      std::max(-std::expm1(-p.beta * g_edge), 1e-300);

  sol.pressure = -grand_potential(sol.measure, p, ens, grid, km);
  return sol;
}

/// Equilibrium pressure P = -inf E.
inline double pressure(const ModelParams& p, const ModifiedEnsembleParams& ens,
                       const RadialGrid& grid, const KernelMatrix& km,
                       const SolverOptions& opts = {}) {
  return solve_equilibrium(p, ens, grid, km, opts).pressure;
}

// ---------------------------------------------------------------------------
// Short-cycle densities.

/// Density of particles in cycles of length <= Q at the lambda = 0
/// equilibrium: int dk/(2pi)^d sum_{q<=Q} (t/(1+t))^q with t = nu_e(k).
inline double rho_short_analytic(const EquilibriumSolution& sol, int Q,
                                 double beta, const RadialGrid& grid) {
  (void)beta;  // the sum depends on t alone once y0(t) is substituted
  if (Q < 1) throw std::invalid_argument("rho_short_analytic: Q must be >= 1");
  if (sol.measure.continuous.size() != grid.size())
    throw std::length_error("rho_short_analytic: solution/grid mismatch");
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = sol.measure.continuous[i];
    vals[i] = (t > 0.0)
                  ? detail::geometric_partial_sum(-std::log1p(1.0 / t), Q)
                  : 0.0;
  }
  return integrate(vals, grid);
}

/// The same lambda-derivative of the pressure by central differences,
/// P(lambda = +h) and P(-h) each from a full solve.
inline double rho_short_finite_difference(const ModelParams& p, int Q, double h,
                                          const RadialGrid& grid,
                                          const KernelMatrix& km,
                                          const SolverOptions& opts = {}) {
  if (!(h > 0.0)) throw std::invalid_argument("rho_short_finite_difference: h > 0");
  ModifiedEnsembleParams plus{Q, h, p.beta};
  ModifiedEnsembleParams minus{Q, -h, p.beta};
  const double pp = pressure(p, plus, grid, km, opts);
  const double pm = pressure(p, minus, grid, km, opts);
  return (pp - pm) / (2.0 * h);
}

struct TheoremACheck {
  int q_cutoff = 0;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double rel_gap = 0.0;
};

inline TheoremACheck theorem_a_check(const ModelParams& p, int Q, double h,
                                     const EquilibriumSolution& sol0,
                                     const RadialGrid& grid,
                                     const KernelMatrix& km,
                                     const SolverOptions& opts = {}) {
  TheoremACheck c;
  c.q_cutoff = Q;
  c.analytic = rho_short_analytic(sol0, Q, p.beta, grid);
  c.finite_difference = rho_short_finite_difference(p, Q, h, grid, km, opts);
  c.rel_gap = std::abs(c.analytic - c.finite_difference) /
              std::max(std::abs(c.analytic), 1e-300);
  return c;
}

// ---------------------------------------------------------------------------
// Q-sweep and the condensate report.

struct GeometricFit {
  bool valid = false;
  double rate = 0.0;       // fitted r in gap(Q) = coeff * r^Q
  double coeff = 0.0;
  double gap_at_max = 0.0; // extrapolated residual gap at the largest Q
};

namespace detail {

// Fit gap(Q) = c r^Q through the last three sweep points and return the
// extrapolated limit of s(Q); falls back to the last value when the
// differences do not look like a decaying tail.
inline double extrapolate_geometric(const std::vector<std::pair<int, double>>& s,
                                    GeometricFit* fit) {
  const std::size_t n = s.size();
  if (n < 3) return s.back().second;
  const auto [q1, s1] = s[n - 3];
  const auto [q2, s2] = s[n - 2];
  const auto [q3, s3] = s[n - 1];
  const double d1 = s2 - s1, d2 = s3 - s2;
  if (!(d1 > 0.0) || !(d2 > 0.0) || d2 >= 0.995 * d1) return s3;
  const int e1 = q2 - q1, e2 = q3 - q2;
  const double target = d2 / d1;
  const auto psi = [&](double r) {
    return std::pow(r, e1) * (1.0 - std::pow(r, e2)) /
               (1.0 - std::pow(r, e1)) - target;
  };
  double lo = 1e-12, hi = 1.0 - 1e-12;
  if (psi(lo) > 0.0 || psi(hi) < 0.0) return s3;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (psi(mid) < 0.0 ? lo : hi) = mid;
  }
  const double r = 0.5 * (lo + hi);
  const double re2 = std::pow(r, e2);
  const double gap3 = d2 * re2 / (1.0 - re2);
  if (fit) {
    fit->valid = true;
    fit->rate = r;
    fit->coeff = gap3 / std::pow(r, q3);
    fit->gap_at_max = gap3;
  }
  return s3 + gap3;
}

}  // namespace detail

struct CondensateReport {
  double rho_total = 0.0;
  std::vector<std::pair<int, double>> rho_short_by_q;
  double rho_short_limit = 0.0;  // extrapolated Q -> inf value
  double rho_short_at_max_q = 0.0;
  double rho_long = 0.0;
  double nu_c = 0.0;
  double nu_e = 0.0;
  std::vector<std::array<double, 3>> pressures;  // (Q, lambda, value)
  GeometricFit fit;
  double density_tail_bound = 0.0;
  double headline_gap = 0.0;  // |rho_long - nu_c| / max(nu_c, 1e-12)
  EquilibriumSolution solution;
};

inline CondensateReport q_sweep(const ModelParams& p, const std::vector<int>& qs,
                                const RadialGrid& grid, const KernelMatrix& km,
                                const SolverOptions& opts = {}) {
  if (qs.empty()) throw std::invalid_argument("q_sweep: empty Q list");
  for (std::size_t i = 0; i + 1 < qs.size(); ++i)
    if (qs[i] >= qs[i + 1])
      throw std::invalid_argument("q_sweep: Q list must be strictly increasing");

  ModifiedEnsembleParams ens{qs.back(), 0.0, p.beta};
  CondensateReport rep;
  rep.solution = solve_equilibrium(p, ens, grid, km, opts);
  rep.nu_c = rep.solution.measure.condensate;
  rep.nu_e = rep.solution.nu_e_total;
  rep.rho_total = rep.solution.rho_total;
  rep.density_tail_bound = rep.solution.density_tail_bound;
  rep.pressures.push_back({static_cast<double>(qs.back()), 0.0, rep.solution.pressure});

  for (int Q : qs)
    rep.rho_short_by_q.emplace_back(Q, rho_short_analytic(rep.solution, Q, p.beta, grid));

  const double slack = 1e-8 * std::max(rep.rho_total, 1.0);
  for (std::size_t i = 0; i + 1 < rep.rho_short_by_q.size(); ++i)
    if (rep.rho_short_by_q[i].second > rep.rho_short_by_q[i + 1].second + slack)
      throw std::runtime_error("q_sweep: rho_short(Q) not nondecreasing");
  for (const auto& [q, v] : rep.rho_short_by_q)
    if (v > rep.nu_e + slack)
      throw std::runtime_error("q_sweep: rho_short(Q) exceeds nu_e");

  rep.rho_short_at_max_q = rep.rho_short_by_q.back().second;
  rep.rho_short_limit = detail::extrapolate_geometric(rep.rho_short_by_q, &rep.fit);
  rep.rho_long = rep.rho_total - rep.rho_short_limit;
  if (rep.rho_long < -slack)
    throw std::runtime_error("q_sweep: negative long-cycle density");
  rep.headline_gap = std::abs(rep.rho_long - rep.nu_c) / std::max(rep.nu_c, 1e-12);
  return rep;
}

// ---------------------------------------------------------------------------
// Large-deviation rate function of the free reference gas.

/// I0(m) = -int (alpha - eps) m(dk) + int dk/(2pi)^d pi_star(m_e) + P0.
/// Nonnegative, and zero exactly at the free equilibrium measure.
inline double rate_function(const MomentumMeasure& m, double alpha,
                            const ModifiedEnsembleParams& ens,
                            const RadialGrid& grid,
                            double dispersion_coefficient = 1.0) {
  if (!(alpha < 0.0)) throw std::domain_error("rate_function: alpha must be < 0");
  m.validate(grid);
  FreeGasParams fp;
  fp.alpha = alpha;
  fp.beta = ens.beta;
  fp.dimension = grid.dimension();
  fp.dispersion_coefficient = dispersion_coefficient;
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double k = grid.nodes()[i];
    vals[i] = -(alpha - fp.eps(k)) * m.continuous[i] +
              pi_star(m.continuous[i], ens);
  }
  return -alpha * m.condensate + integrate(vals, grid) +
         free_modified_pressure(fp, ens, grid);
}

// ---------------------------------------------------------------------------
// Transition location.

struct TransitionResult {
  double mu0 = 0.0;
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  int solves = 0;
};

/// Bisect the chemical potential for the normal/condensed regime flip.
inline TransitionResult locate_transition(ModelParams p, double mu_lo,
                                          double mu_hi,
                                          const ModifiedEnsembleParams& ens,
                                          const RadialGrid& grid,
                                          const KernelMatrix& km,
                                          SolverOptions opts = {},
                                          double mu_tol = 1e-6) {
  opts.throw_on_failure = false;  // classification only needs the regime
  const auto condensed_at = [&](double mu) {
    p.mu = mu;
    return solve_equilibrium(p, ens, grid, km, opts).measure.condensate > 0.0;
  };
  TransitionResult r;
  r.mu_lo = mu_lo;
  r.mu_hi = mu_hi;
  if (condensed_at(mu_lo) || !condensed_at(mu_hi))
    throw std::runtime_error("locate_transition: bracket does not straddle the flip");
  r.solves = 2;
  while (mu_hi - mu_lo > mu_tol) {
    const double mid = 0.5 * (mu_lo + mu_hi);
    (condensed_at(mid) ? mu_hi : mu_lo) = mid;
    ++r.solves;
  }
  r.mu0 = 0.5 * (mu_lo + mu_hi);
  return r;
}

}  // namespace cyclegas

#endif  // CYCLEGAS_MEANFIELD_HPP
