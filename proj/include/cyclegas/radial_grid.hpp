// Radial momentum-space quadrature in d dimensions.
//
// Isotropic integrals over R^d with the measure dk/(2pi)^d reduce to
//   int_0^inf f(k) S_{d-1} k^{d-1} dk / (2pi)^d,   S_{d-1} = 2 pi^{d/2}/Gamma(d/2).
// The grid is a composite Gauss-Legendre rule on [k_min, k_max] whose first
// panel may be subdivided geometrically toward k = 0 to resolve occupation
// profiles that peak there.  Grids are immutable after construction.

#ifndef CYCLEGAS_RADIAL_GRID_HPP
#define CYCLEGAS_RADIAL_GRID_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyclegas {

namespace detail {

struct GaussRule {
  std::vector<double> x;  // nodes on (-1, 1)
  std::vector<double> w;
};

// Gauss-Legendre nodes by Newton iteration on P_n, seeded with the Chebyshev
// approximation; standard and accurate to machine precision for n <= ~500.
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) * x * p1 - j * p2) / (j + 1);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  return r;
}

}  // namespace detail

/// Surface area of the unit sphere in d dimensions.
inline double sphere_surface(int d) {
  if (d < 1) throw std::invalid_argument("sphere_surface: d must be >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

struct GridSpec {
  int dimension = 3;
  double k_max = 6.0;
  int panels = 16;        // uniform panels on [k_min, k_max]
  int order = 16;         // Gauss-Legendre points per panel
  int refine_levels = 0;  // geometric subdivisions of the first panel
  double k_min = 0.0;     // inner cutoff; > 0 only for diagnostic grids
};

class RadialGrid {
 public:
  explicit RadialGrid(const GridSpec& spec) : spec_(spec) {
    if (spec.dimension < 1) throw std::invalid_argument("grid: dimension must be >= 1");
    if (!(spec.k_max > spec.k_min) || !(spec.k_min >= 0.0))
      throw std::invalid_argument("grid: need 0 <= k_min < k_max");
    if (spec.panels < 1 || spec.order < 2)
      throw std::invalid_argument("grid: need panels >= 1 and order >= 2");
    if (spec.refine_levels < 0 || spec.refine_levels > 48)
      throw std::invalid_argument("grid: refine_levels out of range");

    const auto rule = detail::gauss_legendre(spec.order);
    std::vector<double> edges;
    const double width = (spec.k_max - spec.k_min) / spec.panels;
    edges.push_back(spec.k_min);
    if (spec.refine_levels > 0 && spec.k_min == 0.0) {
      // Halve the first panel refine_levels times: 0, w/2^L, ..., w/2, w.
      for (int j = spec.refine_levels; j >= 1; --j)
        edges.push_back(width * std::ldexp(1.0, -j));
    }
    for (int i = 1; i <= spec.panels; ++i) edges.push_back(spec.k_min + width * i);

    const double measure = sphere_surface(spec.dimension) /
                           std::pow(2.0 * std::numbers::pi, spec.dimension);
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
      const double a = edges[e], b = edges[e + 1];
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (int j = 0; j < spec.order; ++j) {
        const double k = mid + half * rule.x[j];
        nodes_.push_back(k);
        weights_.push_back(half * rule.w[j] * measure *
                           std::pow(k, spec.dimension - 1));
      }
    }

    // Self-test: a Gaussian whose scale is well inside [0, k_max] must
    // integrate to the closed form before the grid is trusted.
    const double bt = (spec.k_min == 0.0) ? 34.0 / (spec.k_max * spec.k_max) : 0.0;
    if (bt > 0.0) {
      double acc = 0.0;
      for (std::size_t i = 0; i < nodes_.size(); ++i)
        acc += weights_[i] * std::exp(-bt * nodes_[i] * nodes_[i]);
      const double exact =
          std::pow(4.0 * std::numbers::pi * bt, -0.5 * spec.dimension);
      self_test_error_ = std::abs(acc - exact) / exact;
      if (!(self_test_error_ <= 1e-10))
        throw std::domain_error(
            "grid self-test failed: Gaussian integral off by relative " +
            std::to_string(self_test_error_) +
            " (increase panels/order or reduce k_max)");
    }
  }

  const GridSpec& spec() const { return spec_; }
  int dimension() const { return spec_.dimension; }
  double k_max() const { return spec_.k_max; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  double self_test_error() const { return self_test_error_; }

 private:
  GridSpec spec_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  double self_test_error_ = 0.0;
};

inline RadialGrid build_grid(int dimension, double k_max, int panels, int order,
                             int refine_levels = 0) {
  GridSpec s;
  s.dimension = dimension;
  s.k_max = k_max;
  s.panels = panels;
  s.order = order;
  s.refine_levels = refine_levels;
  return RadialGrid(s);
}

/// Weighted sum of per-node values; linear in the values.
inline double integrate(const std::vector<double>& values, const RadialGrid& grid) {
  if (values.size() != grid.size())
    throw std::length_error("integrate: values/nodes length mismatch");
  // Neumaier-compensated summation in fixed node order.
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double term = grid.weights()[i] * values[i];
    const double t = sum + term;
    comp += (std::abs(sum) >= std::abs(term)) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// k_max such that beta*(k_max^2 - mu_shift) >= margin for dispersion eps=k^2;
/// every occupation integrand is then below e^{-margin} at the cut.
inline double suggest_k_max(double beta, double mu_shift, double margin = 30.0) {
  if (!(beta > 0.0)) throw std::invalid_argument("suggest_k_max: beta must be > 0");
  return std::sqrt(margin / beta + std::max(mu_shift, 0.0));
}

/// Upper bound on int_{k_max}^inf e^{-c k^2} k^{d-1} dk / (2pi)^d * S_{d-1}
/// via Gamma(d/2, c k_max^2) <= x^{d/2-1} e^{-x} / (1 - max(0,d/2-1)/x).
inline double gaussian_tail_bound(int d, double c, double k_max) {
  const double x = c * k_max * k_max;
  const double s = 0.5 * d;
  if (x <= s) return std::numeric_limits<double>::infinity();
  const double gamma_upper =
      std::pow(x, s - 1.0) * std::exp(-x) / (1.0 - std::max(0.0, s - 1.0) / x);
  return sphere_surface(d) / std::pow(2.0 * std::numbers::pi, d) *
         gamma_upper / (2.0 * std::pow(c, s));
}

}  // namespace cyclegas

#endif  // CYCLEGAS_RADIAL_GRID_HPP
