// Mode-coupling kernels v(k,k') and their angular averages on a radial grid.
//
// For isotropic measures only the average of v over the relative angle
// enters:  W(k,k') = <v(k,k')>_angle,  w0(k) = v(k,0),  v00 = v(0,0).
// The matrix D(k,k') = W(k,k') - W(0,k') is assembled separately with a
// cancellation-free integrand; the solver uses it to evaluate field
// differences (v nu)(k) - (v nu)(0) to full relative precision in the
// condensed regime, where those differences are O(k^2) against O(1) terms.

#ifndef CYCLEGAS_KERNELS_HPP
#define CYCLEGAS_KERNELS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "cyclegas/measure.hpp"
#include "cyclegas/radial_grid.hpp"

namespace cyclegas {

enum class KernelKind { none, gaussian, exponential, tabulated };

struct TabulatedKernel {
  Eigen::MatrixXd W;
  Eigen::VectorXd w0;
  double v00 = 0.0;
};

struct KernelSpec {
  KernelKind kind = KernelKind::none;
  double v0 = 0.0;  // amplitude, > 0 for gaussian/exponential
  double c = 0.0;   // decay rate, > 0 for gaussian/exponential
  std::shared_ptr<TabulatedKernel> table;

  static KernelSpec none() { return {}; }
  static KernelSpec gaussian(double v0, double c) {
    return {KernelKind::gaussian, v0, c, nullptr};
  }
  static KernelSpec exponential(double v0, double c) {
    return {KernelKind::exponential, v0, c, nullptr};
  }

  void validate() const {
    if (kind == KernelKind::gaussian || kind == KernelKind::exponential) {
      if (!(v0 > 0.0) || !std::isfinite(v0))
        throw std::invalid_argument("kernel: v0 must be finite and > 0");
      if (!(c > 0.0) || !std::isfinite(c))
        throw std::invalid_argument("kernel: c must be finite and > 0");
    }
    if (kind == KernelKind::tabulated && !table)
      throw std::invalid_argument("kernel: tabulated kind without a table");
  }

  /// v as a function of the distance between momentum vectors.
  double eval_distance(double r) const {
    switch (kind) {
      case KernelKind::none: return 0.0;
      case KernelKind::gaussian: return v0 * std::exp(-c * r * r);
      case KernelKind::exponential: return v0 * std::exp(-c * r);
      case KernelKind::tabulated:
        throw std::domain_error("kernel: tabulated kind has no pointwise form");
    }
    return 0.0;
  }

  double value_at_origin() const {
    if (kind == KernelKind::tabulated) return table->v00;
    return (kind == KernelKind::none) ? 0.0 : v0;
  }
};

namespace detail {

// Quadrature in x = cos(theta) against the relative-angle weight
// (1-x^2)^{(d-3)/2}, normalized to average 1.  Gauss-Legendre matches the
// flat d=3 weight; d=2 and d=4 use the Gauss-Chebyshev rules whose weight
// functions are exactly the angular ones.
struct AngularRule {
  std::vector<double> x;
  std::vector<double> w;  // normalized: sum w = 1
};

inline AngularRule angular_rule(int d, int n) {
  AngularRule r;
  r.x.resize(n);
  r.w.resize(n);
  if (d == 2) {
    for (int j = 0; j < n; ++j) {
      r.x[j] = std::cos((2.0 * j + 1.0) * std::numbers::pi / (2.0 * n));
      r.w[j] = 1.0 / n;
    }
  } else if (d == 3) {
    const auto gl = gauss_legendre(n);
    for (int j = 0; j < n; ++j) {
      r.x[j] = gl.x[j];
      r.w[j] = 0.5 * gl.w[j];
    }
  } else if (d == 4) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      const double t = (j + 1.0) * std::numbers::pi / (n + 1.0);
      r.x[j] = std::cos(t);
      r.w[j] = std::sin(t) * std::sin(t);
      total += r.w[j];
    }
    for (double& w : r.w) w /= total;
  } else {
    throw std::invalid_argument("angular_rule: supported dimensions are 2..4");
  }
  return r;
}

}  // namespace detail

struct KernelMatrix {
  Eigen::MatrixXd W;             // angular-averaged kernel over node pairs
  Eigen::MatrixXd D;             // W(k_i,k_j) - W(0,k_j), cancellation-free
  Eigen::VectorXd w0;            // v(k_i, 0)
  Eigen::VectorXd w0_minus_v00;  // v(k_i,0) - v(0,0), cancellation-free
  double v00 = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(w0.size()); }
};

/// Assemble W, D, w0 for `spec` on `grid`.  angular_order is the number of
/// quadrature points in cos(theta) (d = 1 uses the exact two-point average).
inline KernelMatrix angular_average_kernel(const KernelSpec& spec,
                                           const RadialGrid& grid,
                                           int angular_order = 64) {
  spec.validate();
  const int n = static_cast<int>(grid.size());
  KernelMatrix km;
  km.W = Eigen::MatrixXd::Zero(n, n);
  km.D = Eigen::MatrixXd::Zero(n, n);
  km.w0 = Eigen::VectorXd::Zero(n);
  km.w0_minus_v00 = Eigen::VectorXd::Zero(n);
  km.v00 = spec.value_at_origin();
  if (spec.kind == KernelKind::none) return km;

  if (spec.kind == KernelKind::tabulated) {
    const auto& t = *spec.table;
    if (t.W.rows() != n || t.W.cols() != n || t.w0.size() != n)
      throw std::length_error("tabulated kernel does not match grid size");
    km.W = 0.5 * (t.W + t.W.transpose());
    km.w0 = t.w0;
    km.w0_minus_v00 = t.w0.array() - t.v00;
    for (int i = 0; i < n; ++i) km.D.row(i) = km.W.row(i) - km.w0.transpose();
    return km;
  }

  const auto& k = grid.nodes();
  const bool is_gauss = (spec.kind == KernelKind::gaussian);
  for (int i = 0; i < n; ++i) {
    km.w0[i] = spec.eval_distance(k[i]);
    km.w0_minus_v00[i] =
        spec.v0 * std::expm1(-spec.c * (is_gauss ? k[i] * k[i] : k[i]));
  }

  const int d = grid.dimension();
  const double v0 = spec.v0, c = spec.c;
  const bool gauss = (spec.kind == KernelKind::gaussian);

  // diff(k, k', x) = v(k,k',x) - v(0,k'), exact to relative precision of the
  // difference itself.
  const auto diff = [&](double ki, double kj, double x) {
    const double s = ki * ki - 2.0 * ki * kj * x;  // r^2 - k'^2
    if (gauss) return v0 * std::exp(-c * kj * kj) * std::expm1(-c * s);
    const double r = std::sqrt(std::max(kj * kj + s, 0.0));
    return v0 * std::exp(-c * kj) * std::expm1(-c * (s / (r + kj)));
  };

  // D is not symmetric (it differences against w0(k_j)), so the stable
  // integrand runs over the full square; W is symmetrized afterwards.
  if (d == 1) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        km.D(i, j) = 0.5 * (diff(k[i], k[j], 1.0) + diff(k[i], k[j], -1.0));
  } else {
    const auto rule = detail::angular_rule(d, angular_order);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double dv = 0.0;
        for (std::size_t q = 0; q < rule.x.size(); ++q)
          dv += rule.w[q] * diff(k[i], k[j], rule.x[q]);
        km.D(i, j) = dv;
      }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) km.W(i, j) = km.w0[j] + km.D(i, j);
  km.W = 0.5 * (km.W + km.W.transpose()).eval();
  return km;
}

struct KernelField {
  std::vector<double> at_nodes;  // (v m)(k_i)
  double at_zero = 0.0;          // (v m)(0)
};

/// (v m)(k_i) = m_c w0(k_i) + sum_j wt_j W(k_i,k_j) m_j, plus the k = 0 value.
inline KernelField apply_kernel(const KernelMatrix& km, const MomentumMeasure& m,
                                const RadialGrid& grid) {
  const int n = static_cast<int>(grid.size());
  if (km.size() != grid.size() || m.continuous.size() != grid.size())
    throw std::length_error("apply_kernel: shape mismatch");
  Eigen::VectorXd u(n);
  for (int j = 0; j < n; ++j) u[j] = grid.weights()[j] * m.continuous[j];
  const Eigen::VectorXd wu = km.W * u;
  KernelField f;
  f.at_nodes.resize(n);
  for (int i = 0; i < n; ++i)
    f.at_nodes[i] = m.condensate * km.w0[i] + wu[i];
  f.at_zero = m.condensate * km.v00 + km.w0.dot(u);
  return f;
}

/// Pair-interaction energy <m, v m> (symmetric bilinear, >= 0 for
/// positive-definite kernels).
inline double pair_energy(const MomentumMeasure& m, const KernelMatrix& km,
                          const RadialGrid& grid) {
  const int n = static_cast<int>(grid.size());
  if (km.size() != grid.size() || m.continuous.size() != grid.size())
    throw std::length_error("pair_energy: shape mismatch");
  Eigen::VectorXd u(n);
  for (int j = 0; j < n; ++j) u[j] = grid.weights()[j] * m.continuous[j];
  const double cross = km.w0.dot(u);
  return m.condensate * m.condensate * km.v00 + 2.0 * m.condensate * cross +
         u.dot(km.W * u);
}

/// Smallest eigenvalue of the quadrature-weighted Gram matrix
/// G_ij = wt_i W_ij wt_j; a probe that the discretized pair energy is PSD.
inline double min_gram_eigenvalue(const KernelMatrix& km, const RadialGrid& grid) {
  const int n = static_cast<int>(grid.size());
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g(i, j) = grid.weights()[i] * km.W(i, j) * grid.weights()[j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace cyclegas

#endif  // CYCLEGAS_KERNELS_HPP
