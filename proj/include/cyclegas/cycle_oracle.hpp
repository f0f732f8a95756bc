// Finite-volume exact combinatorics for a handful of modes.
//
// The grand-canonical sum is evaluated two independent ways:
//   * over multisets of cycle parts (q, k), each part weighted by
//     e^{beta(mu + lambda theta_Q(q) - eps_k) q}/q with 1/m! per repeated
//     part and the diagonal interaction exp{-beta(a n^2/(2V) + sum q q' v/(2V))};
//   * over occupation-number vectors of the same diagonal Hamiltonian.
// The two agree sector by sector in the total particle number, which makes
// the cross check exact at matched truncation.  A Metropolis sampler over
// the same cycle weights provides a third, statistical route.

#ifndef CYCLEGAS_CYCLE_ORACLE_HPP
#define CYCLEGAS_CYCLE_ORACLE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cyclegas/ensemble.hpp"
#include "cyclegas/kernels.hpp"
#include "cyclegas/meanfield.hpp"

namespace cyclegas {

struct Mode {
  std::vector<double> k;  // momentum vector
  double eps = 0.0;       // single-particle energy
};

struct FiniteVolume {
  double volume = 1.0;
  std::vector<Mode> modes;

  void validate() const {
    if (!(volume > 0.0)) throw std::invalid_argument("finite volume: volume must be > 0");
    if (modes.empty()) throw std::invalid_argument("finite volume: no modes");
    for (const auto& m : modes)
      if (!std::isfinite(m.eps)) throw std::invalid_argument("finite volume: bad energy");
  }
};

/// Torus-style helper: modes from explicit momentum vectors, eps = coef |k|^2.
inline FiniteVolume make_finite_volume(double volume,
                                       const std::vector<std::vector<double>>& ks,
                                       double dispersion_coefficient = 1.0) {
  FiniteVolume v;
  v.volume = volume;
  for (const auto& k : ks) {
    double e = 0.0;
    for (double c : k) e += c * c;
    v.modes.push_back({k, dispersion_coefficient * e});
  }
  v.validate();
  return v;
}

namespace detail {

inline double mode_distance(const Mode& a, const Mode& b) {
  const std::size_t n = std::max(a.k.size(), b.k.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = i < a.k.size() ? a.k[i] : 0.0;
    const double db = i < b.k.size() ? b.k[i] : 0.0;
    s += (da - db) * (da - db);
  }
  return std::sqrt(s);
}

inline Eigen::MatrixXd mode_kernel_matrix(const FiniteVolume& vol,
                                          const KernelSpec& kernel) {
  const int m = static_cast<int>(vol.modes.size());
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(m, m);
  if (kernel.kind == KernelKind::none) return v;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      v(i, j) = kernel.eval_distance(mode_distance(vol.modes[i], vol.modes[j]));
  return v;
}

inline void validate_oracle_params(const FiniteVolume& vol, const ModelParams& p) {
  vol.validate();
  if (!(p.beta > 0.0)) throw std::invalid_argument("oracle: beta must be > 0");
  if (p.mean_field_a < 0.0) throw std::invalid_argument("oracle: need a >= 0");
  p.kernel.validate();
  if (p.kernel.kind == KernelKind::tabulated)
    throw std::invalid_argument("oracle: tabulated kernels have no pointwise form");
}

}  // namespace detail

struct EnumerationResult {
  double xi = 1.0;                 // truncated partition function (includes 1)
  std::vector<double> per_n;       // contribution of each total-n sector
  std::vector<double> q_weight;    // sum over configs of weight * (#parts of length q)
  double tail_bound = 0.0;         // bound on the omitted n > N_max weight
  std::int64_t configurations = 0; // nonempty multisets enumerated
};

namespace detail {

// Geometric tail bound: every config of total size n is dominated by the
// factorized free bound, whose n-sector coefficient is C(n+M-1, M-1) r^n
// with r = e^{beta(mu + max(lambda,0) - eps_min)}.  Requires r < 1 and a
// PSD mode kernel plus a >= 0 so interactions only shrink weights.
inline double enumeration_tail_bound(const FiniteVolume& vol, const ModelParams& p,
                                     double lambda, int n_max) {
  double eps_min = vol.modes.front().eps;
  for (const auto& m : vol.modes) eps_min = std::min(eps_min, m.eps);
  const double r =
      std::exp(p.beta * (p.mu + std::max(lambda, 0.0) - eps_min));
  if (!(r < 1.0))
    throw std::domain_error(
        "oracle: tail bound diverges; mu must satisfy e^{beta(mu+lambda-eps_min)} < 1");
  const int M = static_cast<int>(vol.modes.size());
  // term_n = C(n+M-1, M-1) r^n, summed from n_max+1 until negligible.
  double term = std::pow(r, n_max + 1);
  for (int j = 1; j <= M - 1; ++j)
    term *= static_cast<double>(n_max + 1 + M - j) / j;
  double acc = 0.0;
  int n = n_max + 1;
  for (int it = 0; it < 200000; ++it, ++n) {
    acc += term;
    const double ratio = r * (n + M) / static_cast<double>(n + 1);
    if (ratio < 1.0 && term * ratio / (1.0 - ratio) < 1e-18 * (acc + 1e-300)) {
      acc += term * ratio / (1.0 - ratio);
      break;
    }
    term *= ratio;
  }
  return acc;
}

}  // namespace detail

/// Enumerate the cycle representation of the partition function, exactly, for
/// all configurations with total particle number <= n_max.
inline EnumerationResult xi_cycle_sum(const FiniteVolume& vol, const ModelParams& p,
                                      const ModifiedEnsembleParams& ens, int n_max) {
  detail::validate_oracle_params(vol, p);
  ens.validate();
  if (n_max < 1) throw std::invalid_argument("oracle: n_max must be >= 1");
  if (n_max > 64) throw std::invalid_argument("oracle: n_max beyond enumeration budget");

  const int M = static_cast<int>(vol.modes.size());
  const Eigen::MatrixXd vm = detail::mode_kernel_matrix(vol, p.kernel);
  const double b = p.beta, V = vol.volume, a = p.mean_field_a;

  // Part types (q, mode), ordered by q so the budget check can break early.
  struct Type {
    int q, mode;
    double w;  // e^{beta(mu + lambda theta_Q(q) - eps)q}/q
  };
  std::vector<Type> types;
  for (int q = 1; q <= n_max; ++q) {
    const double lam = (q <= ens.q_cutoff) ? ens.lambda : 0.0;
    for (int m = 0; m < M; ++m)
      types.push_back(
          {q, m, std::exp(b * (p.mu + lam - vol.modes[m].eps) * q) / q});
  }

  EnumerationResult out;
  out.per_n.assign(n_max + 1, 0.0);
  out.q_weight.assign(n_max + 1, 0.0);
  out.per_n[0] = 1.0;
  out.tail_bound = detail::enumeration_tail_bound(vol, p, ens.lambda, n_max);

  std::vector<double> qk(M, 0.0);   // per-mode summed cycle weight
  std::vector<int> nq(n_max + 1, 0);  // parts per cycle length

  // Interaction factor from the running per-mode totals.
  const auto interaction = [&](int n) {
    double pair = 0.0;
    for (int i = 0; i < M; ++i) {
      if (qk[i] == 0.0) continue;
      for (int j = 0; j < M; ++j) pair += qk[i] * qk[j] * vm(i, j);
    }
    return std::exp(-b * (0.5 * a * n * n + 0.5 * pair) / V);
  };

  const auto rec = [&](auto&& self, int tmin, int last, int last_cnt, int n_used,
                       double wprod) -> void {
    for (int t = tmin; t < static_cast<int>(types.size()); ++t) {
      const auto& ty = types[t];
      if (n_used + ty.q > n_max) break;  // types sorted by q
      const int cnt = (t == last) ? last_cnt + 1 : 1;
      const double wnew = wprod * ty.w / cnt;
      qk[ty.mode] += ty.q;
      nq[ty.q] += 1;
      const int n = n_used + ty.q;
      const double contrib = wnew * interaction(n);
      out.per_n[n] += contrib;
      ++out.configurations;
      for (int q = 1; q <= n; ++q)
        if (nq[q]) out.q_weight[q] += contrib * nq[q];
      self(self, t, t, cnt, n, wnew);
      nq[ty.q] -= 1;
      qk[ty.mode] -= ty.q;
    }
  };
  rec(rec, 0, -1, 0, 0, 1.0);

  out.xi = 0.0;
  for (int n = n_max; n >= 0; --n) out.xi += out.per_n[n];
  return out;
}

/// The same partition function from the occupation-number representation;
/// independent of lambda by construction.
inline EnumerationResult xi_occupation_sum(const FiniteVolume& vol,
                                           const ModelParams& p, int n_max) {
  detail::validate_oracle_params(vol, p);
  if (n_max < 1) throw std::invalid_argument("oracle: n_max must be >= 1");

  const int M = static_cast<int>(vol.modes.size());
  const Eigen::MatrixXd vm = detail::mode_kernel_matrix(vol, p.kernel);
  const double b = p.beta, V = vol.volume, a = p.mean_field_a;

  EnumerationResult out;
  out.per_n.assign(n_max + 1, 0.0);
  out.tail_bound = detail::enumeration_tail_bound(vol, p, 0.0, n_max);

  std::vector<int> occ(M, 0);
  const auto rec = [&](auto&& self, int mode, int n_used) -> void {
    if (mode == M) {
      double en = 0.0, pair = 0.0;
      for (int i = 0; i < M; ++i) {
        en += vol.modes[i].eps * occ[i];
        for (int j = 0; j < M; ++j) pair += occ[i] * occ[j] * vm(i, j);
      }
      const double w = std::exp(b * p.mu * n_used -
                                b * (en + (0.5 * a * n_used * n_used + 0.5 * pair) / V));
      out.per_n[n_used] += w;
      if (n_used > 0) ++out.configurations;
      return;
    }
    for (int n = 0; n + n_used <= n_max; ++n) {
      occ[mode] = n;
      self(self, mode + 1, n_used + n);
    }
    occ[mode] = 0;
  };
  rec(rec, 0, 0);

  out.xi = 0.0;
  for (int n = n_max; n >= 0; --n) out.xi += out.per_n[n];
  return out;
}

struct CycleDistribution {
  std::vector<double> rho_q;     // rho(q), index 0 unused
  std::vector<double> p_q;       // probability of a particle sitting in a q-cycle
  std::vector<double> p_q_err;   // standard errors (Monte Carlo only)
  double rho = 0.0;              // total density sum_q q rho(q)
  double xi = 0.0;
  double tail_bound = 0.0;
};

/// Exact finite-volume cycle densities rho(q) and particle-in-cycle
/// probabilities p(q) at lambda = 0.
inline CycleDistribution cycle_density(const FiniteVolume& vol, const ModelParams& p,
                                       int n_max) {
  ModifiedEnsembleParams ens{1, 0.0, p.beta};
  const auto e = xi_cycle_sum(vol, p, ens, n_max);
  CycleDistribution d;
  d.xi = e.xi;
  d.tail_bound = e.tail_bound;
  d.rho_q.assign(n_max + 1, 0.0);
  d.p_q.assign(n_max + 1, 0.0);
  for (int q = 1; q <= n_max; ++q)
    d.rho_q[q] = e.q_weight[q] / (e.xi * vol.volume);
  for (int q = 1; q <= n_max; ++q) d.rho += q * d.rho_q[q];
  if (d.rho > 0.0)
    for (int q = 1; q <= n_max; ++q) d.p_q[q] = q * d.rho_q[q] / d.rho;
  return d;
}

struct LambdaDerivativeCheck {
  double finite_difference = 0.0;  // d/dlambda ln(Xi)/(beta V) at lambda = 0
  double direct_sum = 0.0;         // sum_{q<=Q} q rho(q)
  double abs_gap = 0.0;
};

/// Both sides of the short-cycle counting identity on the finite instance.
inline LambdaDerivativeCheck finite_volume_lambda_derivative(
    const FiniteVolume& vol, const ModelParams& p, const ModifiedEnsembleParams& ens,
    int n_max, double h = 1e-4) {
  if (!(h > 0.0)) throw std::invalid_argument("oracle: h must be > 0");
  ModifiedEnsembleParams plus = ens, minus = ens;
  plus.lambda = h;
  minus.lambda = -h;
  const double xp = xi_cycle_sum(vol, p, plus, n_max).xi;
  const double xm = xi_cycle_sum(vol, p, minus, n_max).xi;
  LambdaDerivativeCheck c;
  c.finite_difference =
      (std::log(xp) - std::log(xm)) / (2.0 * h * p.beta * vol.volume);
  const auto d = cycle_density(vol, p, n_max);
  for (int q = 1; q <= std::min(ens.q_cutoff, n_max); ++q)
    c.direct_sum += q * d.rho_q[q];
  c.abs_gap = std::abs(c.finite_difference - c.direct_sum);
  return c;
}

// ---------------------------------------------------------------------------
// Metropolis sampling of the cycle ensemble.

struct McOptions {
  std::int64_t steps = 400000;  // proposed moves after burn-in
  std::int64_t burn_in = 40000;
  std::uint64_t seed = 1;
  int q_propose_max = 4;  // insert proposals draw q from 1..q_propose_max
  int batches = 32;
  int q_track_max = 16;  // histogram length
};

struct McResult {
  CycleDistribution dist;
  double acceptance_rate = 0.0;
  std::int64_t samples = 0;
};

/// Metropolis sampler over cycle configurations with insert/delete/resize/
/// reassign moves; deterministic for a fixed seed.
inline McResult mc_sample_cycles(const FiniteVolume& vol, const ModelParams& p,
                                 const ModifiedEnsembleParams& ens,
                                 const McOptions& opts = {}) {
  detail::validate_oracle_params(vol, p);
  ens.validate();
  const int M = static_cast<int>(vol.modes.size());
  const Eigen::MatrixXd vm = detail::mode_kernel_matrix(vol, p.kernel);
  const double b = p.beta, V = vol.volume, a = p.mean_field_a;

  // Part weight with the energy folded in.
  const auto logw = [&](int q, int mode) {
    const double lam = (q <= ens.q_cutoff) ? ens.lambda : 0.0;
    return b * (p.mu + lam - vol.modes[mode].eps) * q - std::log(double(q));
  };

  struct Part {
    int q, mode;
  };
  std::vector<Part> parts;
  std::vector<double> qk(M, 0.0);
  long n_total = 0;

  // Interaction increment of adding (q, mode) on top of the current state.
  const auto dinter_add = [&](int q, int mode) {
    double s = 0.0;
    for (int j = 0; j < M; ++j) s += qk[j] * vm(mode, j);
    return (0.5 * a * (2.0 * n_total * q + double(q) * q) +
            (q * s + 0.5 * double(q) * q * vm(mode, mode))) /
           V;
  };
  const auto count_type = [&](int q, int mode) {
    int c = 0;
    for (const auto& pt : parts)
      if (pt.q == q && pt.mode == mode) ++c;
    return c;
  };
  const auto apply_add = [&](int q, int mode) {
    parts.push_back({q, mode});
    qk[mode] += q;
    n_total += q;
  };
  const auto apply_remove = [&](std::size_t idx) {
    const auto pt = parts[idx];
    qk[pt.mode] -= pt.q;
    n_total -= pt.q;
    parts[idx] = parts.back();
    parts.pop_back();
  };

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double p_ins = 0.3, p_del = 0.3, p_resize = 0.25;

  std::int64_t accepted = 0, total_moves = 0;
  const auto step = [&]() {
    ++total_moves;
    const double u = unif(rng);
    if (u < p_ins) {
      const int q = 1 + int(unif(rng) * opts.q_propose_max);
      const int mode = int(unif(rng) * M);
      const double dE = dinter_add(q, mode);
      const double logA = logw(q, mode) - b * dE +
                          std::log(p_del * opts.q_propose_max * M /
                                   (p_ins * (parts.size() + 1.0)));
      if (std::log(unif(rng) + 1e-300) < logA) {
        apply_add(q, mode);
        ++accepted;
      }
    } else if (u < p_ins + p_del) {
      if (parts.empty()) return;
      const std::size_t idx = std::size_t(unif(rng) * parts.size());
      const auto pt = parts[idx];
      if (pt.q > opts.q_propose_max) return;  // irreversible under insert
      qk[pt.mode] -= pt.q;
      n_total -= pt.q;
      const double dE = dinter_add(pt.q, pt.mode);  // energy it contributed
      qk[pt.mode] += pt.q;
      n_total += pt.q;
      const double logA = -logw(pt.q, pt.mode) + b * dE +
                          std::log(p_ins * parts.size() /
                                   (p_del * opts.q_propose_max * M));
      if (std::log(unif(rng) + 1e-300) < logA) {
        apply_remove(idx);
        ++accepted;
      }
    } else if (u < p_ins + p_del + p_resize) {
      if (parts.empty()) return;
      const std::size_t idx = std::size_t(unif(rng) * parts.size());
      const auto pt = parts[idx];
      const int qnew = pt.q + (unif(rng) < 0.5 ? 1 : -1);
      if (qnew < 1) return;
      // Remove, then evaluate the swap against the remaining state.
      apply_remove(idx);
      const double dE = dinter_add(qnew, pt.mode) - dinter_add(pt.q, pt.mode);
      const double logA = logw(qnew, pt.mode) - logw(pt.q, pt.mode) - b * dE;
      if (std::log(unif(rng) + 1e-300) < logA) {
        apply_add(qnew, pt.mode);
        ++accepted;
      } else {
        apply_add(pt.q, pt.mode);
      }
    } else {
      if (parts.empty()) return;
      const std::size_t idx = std::size_t(unif(rng) * parts.size());
      const auto pt = parts[idx];
      const int mnew = int(unif(rng) * M);
      if (mnew == pt.mode) return;
      apply_remove(idx);
      const double dE = dinter_add(pt.q, mnew) - dinter_add(pt.q, pt.mode);
      const double logA = logw(pt.q, mnew) - logw(pt.q, pt.mode) - b * dE;
      if (std::log(unif(rng) + 1e-300) < logA) {
        apply_add(pt.q, mnew);
        ++accepted;
      } else {
        apply_add(pt.q, pt.mode);
      }
    }
  };

  for (std::int64_t i = 0; i < opts.burn_in; ++i) step();
  accepted = 0;
  total_moves = 0;

  const int QT = opts.q_track_max;
  const std::int64_t per_batch = std::max<std::int64_t>(opts.steps / opts.batches, 1);
  std::vector<std::vector<double>> batch_count(opts.batches,
                                               std::vector<double>(QT + 1, 0.0));
  std::vector<double> batch_n(opts.batches, 0.0);
  std::vector<std::int64_t> batch_samples(opts.batches, 0);

  std::int64_t done = 0;
  for (int bidx = 0; bidx < opts.batches; ++bidx) {
    for (std::int64_t i = 0; i < per_batch; ++i) {
      step();
      ++done;
      for (const auto& pt : parts)
        if (pt.q <= QT) batch_count[bidx][pt.q] += 1.0;
      batch_n[bidx] += double(n_total);
      ++batch_samples[bidx];
    }
  }

  McResult res;
  res.samples = done;
  res.acceptance_rate = double(accepted) / double(total_moves);
  res.dist.rho_q.assign(QT + 1, 0.0);
  res.dist.p_q.assign(QT + 1, 0.0);
  res.dist.p_q_err.assign(QT + 1, 0.0);
  res.dist.tail_bound = 0.0;

  for (int q = 1; q <= QT; ++q) {
    std::vector<double> vals(opts.batches);
    for (int bidx = 0; bidx < opts.batches; ++bidx) {
      const double cnt = batch_count[bidx][q] / batch_samples[bidx];
      const double nn = batch_n[bidx] / batch_samples[bidx];
      vals[bidx] = (nn > 0.0) ? q * cnt / nn : 0.0;
      res.dist.rho_q[q] += cnt / (V * opts.batches);
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= opts.batches;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= (opts.batches - 1.0);
    res.dist.p_q[q] = mean;
    res.dist.p_q_err[q] = std::sqrt(var / opts.batches);
  }
  for (int q = 1; q <= QT; ++q) res.dist.rho += q * res.dist.rho_q[q];
  return res;
}

}  // namespace cyclegas

#endif  // CYCLEGAS_CYCLE_ORACLE_HPP
