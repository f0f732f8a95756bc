// Scalar kernels of the length-weighted cycle ensemble.
//
// pi(y) is the single-mode pressure kernel of an ideal Bose mode at shifted
// chemical potential y < 0, with cycles of length q <= Q reweighted by
// exp(beta*lambda*q):
//
//   pi(y) = sum_{q<=Q} e^{beta(y+lambda)q}/(beta q) + sum_{q>Q} e^{beta y q}/(beta q)
//
// Together with its y-derivatives, its lambda-derivative and its Legendre
// transform pi_star(t) = sup_{y<0} (t y - pi(y)) these are the scalar
// building blocks for every thermodynamic quantity in this library.
// All functions are pure and thread-safe.

#ifndef CYCLEGAS_ENSEMBLE_HPP
#define CYCLEGAS_ENSEMBLE_HPP

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cyclegas {

struct ModifiedEnsembleParams {
  int q_cutoff = 1;      // cycle-length cutoff Q >= 1
  double lambda = 0.0;   // weight of the short-cycle field, |lambda| <= 1
  double beta = 1.0;     // inverse temperature > 0

  void validate() const {
    if (q_cutoff < 1) throw std::invalid_argument("q_cutoff must be >= 1");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
    // lambda >= 0 is the physical range; small negative values are an
    // analytic continuation of a finite sum, used for central differences.
    if (!(std::abs(lambda) <= 1.0))
      throw std::invalid_argument("|lambda| must be <= 1");
  }
};

namespace detail {

inline void require_y_negative(double y) {
  if (!(y < 0.0)) {
    std::ostringstream os;
    os << "ensemble kernel requires y < 0, got y = " << y;
    throw std::domain_error(os.str());
  }
}

inline void require_t_positive(double t) {
  if (!(t > 0.0)) {
    std::ostringstream os;
    os << "ensemble kernel requires t > 0, got t = " << t;
    throw std::domain_error(os.str());
  }
}

// sum_{q=1}^{Q} e^{u q}/q.  For u > 0 the largest term is at q = Q; the sum
// is rescaled by exp(u Q) so intermediate terms never overflow before the
// result itself does.
inline double harmonic_partial_sum(double u, int Q) {
  if (u <= 0.0) {
    double acc = 0.0;
    for (int q = Q; q >= 1; --q) acc += std::exp(u * q) / q;
    return acc;
  }
  const double m = u * Q;
  double acc = 0.0;
  for (int q = 1; q <= Q; ++q) acc += std::exp(u * q - m) / q;
  return std::exp(m) * acc;
}

// sum_{q=1}^{Q} e^{u q} = e^u (1 - e^{uQ}) / (1 - e^u), geometric partial sum
// in log form; the expm1 ratio is stable for u -> 0.
inline double geometric_partial_sum(double u, int Q) {
  if (std::abs(u) < 1e-13) return static_cast<double>(Q);
  return std::exp(u) * std::expm1(Q * u) / std::expm1(u);
}

// sum_{q=1}^{Q} q e^{u q}.  Closed form for decisively negative u; a scaled
// loop otherwise (the closed form cancels near u = 0 and overflows for
// u > 0 before the sum itself does).
inline double weighted_geometric_partial_sum(double u, int Q) {
  if (u <= -1e-3) {
    const double z = std::exp(u);
    const double zq = std::exp(u * Q);
    const double om = -std::expm1(u);  // 1 - z, positive
    return z * (1.0 - (Q + 1) * zq + Q * zq * z) / (om * om);
  }
  const double m = std::max(u, 0.0) * Q;
  double acc = 0.0;
  for (int q = 1; q <= Q; ++q) acc += q * std::exp(u * q - m);
  return std::exp(m) * acc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Closed forms at lambda = 0, where the split sum collapses to the ordinary
// ideal-gas expressions.

/// pi at lambda = 0: -ln(1 - e^{beta y})/beta.
inline double pi0(double y, double beta) {
  detail::require_y_negative(y);
  return -std::log(-std::expm1(beta * y)) / beta;
}

/// Occupation of a mode at chemical potential y < 0: 1/(e^{-beta y} - 1).
inline double pi0_prime(double y, double beta) {
  detail::require_y_negative(y);
  return 1.0 / std::expm1(-beta * y);
}

/// Inverse of pi0_prime: the unique y < 0 with occupation t.
inline double y0_of_t(double t, double beta) {
  detail::require_t_positive(t);
  return -std::log1p(1.0 / t) / beta;
}

/// Legendre transform of pi0; continuously extended by pi0_star(0) = 0.
inline double pi0_star(double t, double beta) {
  if (t == 0.0) return 0.0;
  detail::require_t_positive(t);
  // t ln t - (t+1) ln(t+1), rewritten to stay accurate for large t.
  return (-t * std::log1p(1.0 / t) - std::log1p(t)) / beta;
}

// ---------------------------------------------------------------------------
// General (Q, lambda) kernels.

inline double pi(double y, const ModifiedEnsembleParams& p) {
  detail::require_y_negative(y);
  const double b = p.beta;
  if (p.lambda == 0.0) return pi0(y, b);
  const double w = std::exp(b * y);
  const double partial = detail::harmonic_partial_sum(b * (y + p.lambda), p.q_cutoff);
  // Tail sum_{q>Q} w^q/q: direct summation while the terms decay fast,
  // otherwise as the difference of the full logarithm and the head.
  double tail;
  if (w < 0.75) {
    tail = 0.0;
    double wq = std::pow(w, p.q_cutoff);
    for (int q = p.q_cutoff + 1; q <= p.q_cutoff + 4000; ++q) {
      wq *= w;
      const double term = wq / q;
      tail += term;
      if (term < 1e-18 * (tail + 1e-300)) break;
    }
  } else {
    tail = -std::log(-std::expm1(b * y)) -
           detail::harmonic_partial_sum(b * y, p.q_cutoff);
  }
  return (partial + tail) / b;
}

/// d pi / dy: the mode occupation. Strictly increasing in y, range (0, inf).
inline double pi_prime(double y, const ModifiedEnsembleParams& p) {
  detail::require_y_negative(y);
  const double b = p.beta;
  const double partial = detail::geometric_partial_sum(b * (y + p.lambda), p.q_cutoff);
  // Tail sum_{q>Q} e^{beta y q} = w^{Q+1}/(1-w).
  const double tail =
      std::exp(b * y * (p.q_cutoff + 1)) / (-std::expm1(b * y));
  return partial + tail;
}

/// d^2 pi / dy^2 = beta [ sum_{q<=Q} q z^q + sum_{q>Q} q w^q ], positive.
inline double pi_double_prime(double y, const ModifiedEnsembleParams& p) {
  detail::require_y_negative(y);
  const double b = p.beta;
  const int Q = p.q_cutoff;
  const double partial = detail::weighted_geometric_partial_sum(b * (y + p.lambda), Q);
  const double delta = -std::expm1(b * y);  // 1 - w
  const double tail =
      std::exp(b * y * (Q + 1)) * (1.0 + Q * delta) / (delta * delta);
  return b * (partial + tail);
}

/// d pi / d lambda = sum_{q<=Q} e^{beta(y+lambda)q}; lies in (0, pi_prime].
inline double dpi_dlambda(double y, const ModifiedEnsembleParams& p) {
  detail::require_y_negative(y);
  return detail::geometric_partial_sum(p.beta * (y + p.lambda), p.q_cutoff);
}

/// Unique y < 0 solving pi_prime(y) = t.  Bracketing bisection down to a
/// short interval, then Newton polished to |pi_prime(y)-t| <= 1e-12 t with
/// bisection fallback whenever a Newton step leaves the bracket.
inline double y_of_t(double t, const ModifiedEnsembleParams& p) {
  detail::require_t_positive(t);
  double hi = -1e-3;
  int guard = 0;
  while (pi_prime(hi, p) <= t) {
    hi *= 0.5;
    if (++guard > 2000) throw std::runtime_error("y_of_t: upper bracket search failed");
  }
  double lo = std::min(-1.0, 8.0 * hi);
  guard = 0;
  while (pi_prime(lo, p) >= t) {
    lo *= 2.0;
    if (++guard > 2000) throw std::runtime_error("y_of_t: lower bracket search failed");
  }
  // Bisect to a width from which Newton converges in a few steps.
  for (int i = 0; i < 200 && (hi - lo) > 1e-3 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (pi_prime(mid, p) < t ? lo : hi) = mid;
  }
  double y = 0.5 * (lo + hi);
  const double tol = 1e-12 * t;
  for (int i = 0; i < 200; ++i) {
    const double f = pi_prime(y, p) - t;
    if (std::abs(f) <= tol) return y;
    (f < 0.0 ? lo : hi) = y;
    const double step = f / pi_double_prime(y, p);
    double ynew = y - step;
    if (!(ynew > lo && ynew < hi)) ynew = 0.5 * (lo + hi);
    y = ynew;
  }
  std::ostringstream os;
  os << "y_of_t: no convergence for t=" << t << " (bracket [" << lo << ", "
     << hi << "], residual " << pi_prime(y, p) - t << ")";
  throw std::runtime_error(os.str());
}

/// Legendre transform pi_star(t) = t y(t) - pi(y(t)), extended by 0 at t = 0.
inline double pi_star(double t, const ModifiedEnsembleParams& p) {
  if (t == 0.0) return 0.0;
  const double y = y_of_t(t, p);
  return t * y - pi(y, p);
}

}  // namespace cyclegas

#endif  // CYCLEGAS_ENSEMBLE_HPP
