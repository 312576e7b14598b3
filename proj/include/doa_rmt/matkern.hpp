#ifndef DOA_RMT_MATKERN_HPP
#define DOA_RMT_MATKERN_HPP

// Dense complex matrix kernel: Hermitian eigendecomposition (full and
// leading-subspace), small general eigenproblems, principal-minor sums and
// cycle-product distances between two small matrices.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "doa_rmt/cmatrix.hpp"
#include "doa_rmt/errors.hpp"

namespace doa {

/// Leading eigenpairs of a Hermitian matrix, eigenvalues in descending order.
/// `vectors` column k is paired with `values[k]`. A full decomposition holds
/// all N pairs; a partial one holds the top r.
struct SampleSpectrum {
  std::vector<double> values;
  CMatrix vectors;

  [[nodiscard]] std::size_t count() const noexcept { return values.size(); }
  [[nodiscard]] std::size_t dimension() const noexcept { return vectors.rows(); }

  /// First k eigenvectors as an N x k matrix.
  [[nodiscard]] CMatrix leading_vectors(std::size_t k) const {
    if (k > count()) throw InvalidArgument("SampleSpectrum: fewer eigenpairs than requested");
    return vectors.cols_range(0, k);
  }
};

/// Unordered multiset of eigenvalues of a general square matrix.
struct ComplexSpectrum {
  std::vector<cplx> values;
};

namespace matkern {

inline constexpr std::size_t kSmallCap = 8;
inline constexpr double kDeflationTol = 1e-13;

namespace detail {

/// Largest-magnitude component made real positive.
inline void normalize_phase(CMatrix& v, std::size_t col) {
  std::size_t best = 0;
  double mag = -1.0;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    const double a = std::abs(v(i, col));
    if (a > mag) {
      mag = a;
      best = i;
    }
  }
  if (mag <= 0.0) return;
  const cplx rot = std::conj(v(best, col)) / mag;
  for (std::size_t i = 0; i < v.rows(); ++i) v(i, col) *= rot;
  v(best, col) = cplx(std::abs(v(best, col)), 0.0);
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix. `d` holds the
/// diagonal, `e[i]` couples i and i+1. Rotations are accumulated into the
/// n x n column-major block `z` (z[col * n + row]).
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z,
                           std::size_t n) {
  if (n <= 1) return;
  e.resize(n, 0.0);
  e[n - 1] = 0.0;
  const std::size_t cap = 64 * n;
  std::size_t total = 0;
  double f = 0.0;
  double tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1) {
      if (std::abs(e[m]) <= kDeflationTol * tst1) break;
      ++m;
    }
    if (m > l) {
      do {
        if (++total > cap) {
          throw NumericalError("hermitian_eig: QL iteration cap exceeded (ill-conditioned input)");
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          double* zi = z.data() + ii * n;
          double* zi1 = z.data() + (ii + 1) * n;
          for (std::size_t k = 0; k < n; ++k) {
            h = zi1[k];
            zi1[k] = s * zi[k] + c * h;
            zi[k] = c * zi[k] - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kDeflationTol * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

/// Full eigendecomposition of a Hermitian matrix: Householder reduction to
/// tridiagonal form followed by implicit-shift QL. Eigenvalues descending;
/// each eigenvector's largest component is real positive.
inline SampleSpectrum hermitian_eig(const CMatrix& m) {
  if (!m.square()) throw InvalidArgument("hermitian_eig: matrix not square");
  if (!m.all_finite()) throw InvalidArgument("hermitian_eig: non-finite entries");
  const std::size_t n = m.rows();
  if (hermitian_defect(m) > 1e-12 * std::max(1.0, m.max_abs())) {
    throw InvalidArgument("hermitian_eig: matrix is not Hermitian");
  }
  SampleSpectrum out;
  if (n == 0) return out;

  CMatrix a = hermitian_part(m);
  CMatrix q = CMatrix::identity(n);
  std::vector<double> diag(n);
  std::vector<cplx> sub(n, 0.0);  // sub[k] = T(k+1, k)

  std::vector<cplx> v(n), p(n), w(n), qv(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    double xnorm2 = 0.0;
    for (std::size_t i = 0; i < len; ++i) xnorm2 += std::norm(a(k + 1 + i, k));
    const double xnorm = std::sqrt(xnorm2);
    const cplx x0 = a(k + 1, k);
    if (xnorm == 0.0) {
      sub[k] = 0.0;
      continue;
    }
    const cplx phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cplx(1.0);
    const cplx alpha = -phase * xnorm;
    for (std::size_t i = 0; i < len; ++i) v[i] = a(k + 1 + i, k);
    v[0] -= alpha;
    const double vnorm = vector_norm(std::span<const cplx>(v.data(), len));
    if (vnorm == 0.0) {
      sub[k] = x0;
      continue;
    }
    for (std::size_t i = 0; i < len; ++i) v[i] /= vnorm;

    // Trailing block update A22 <- H A22 H, H = I - 2 v v^H.
    for (std::size_t i = 0; i < len; ++i) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < len; ++j) s += a(k + 1 + i, k + 1 + j) * v[j];
      p[i] = s;
    }
    cplx vp = 0.0;
    for (std::size_t i = 0; i < len; ++i) vp += std::conj(v[i]) * p[i];
    for (std::size_t i = 0; i < len; ++i) w[i] = p[i] - vp.real() * v[i];
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        a(k + 1 + i, k + 1 + j) -= 2.0 * (v[i] * std::conj(w[j]) + w[i] * std::conj(v[j]));
      }
    }
    sub[k] = alpha;
    for (std::size_t i = 1; i < len; ++i) {
      a(k + 1 + i, k) = 0.0;
      a(k, k + 1 + i) = 0.0;
    }
    a(k + 1, k) = alpha;
    a(k, k + 1) = std::conj(alpha);

    // Q <- Q H on columns k+1..n-1.
    for (std::size_t r = 0; r < n; ++r) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < len; ++j) s += q(r, k + 1 + j) * v[j];
      qv[r] = s;
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < len; ++j) q(r, k + 1 + j) -= 2.0 * qv[r] * std::conj(v[j]);
    }
  }
  for (std::size_t k = 0; k < n; ++k) diag[k] = a(k, k).real();
  if (n >= 2) sub[n - 2] = a(n - 1, n - 2);

  // Diagonal unitary making the subdiagonal real non-negative.
  std::vector<cplx> phi(n, 1.0);
  std::vector<double> off(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double mag = std::abs(sub[k]);
    off[k] = mag;
    phi[k + 1] = mag > 0.0 ? phi[k] * sub[k] / mag : phi[k];
  }

  std::vector<double> z(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
  detail::tridiagonal_ql(diag, off, z, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

  // vectors = Q * diag(phi) * Z
  CMatrix qd = q;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) qd(r, c) *= phi[c];
  out.values.resize(n);
  out.vectors = CMatrix(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    out.values[col] = diag[src];
    const double* zc = z.data() + src * n;
    for (std::size_t r = 0; r < n; ++r) {
      cplx s = 0.0;
      const auto qrow = qd.row(r);
      for (std::size_t j = 0; j < n; ++j) s += qrow[j] * zc[j];
      out.vectors(r, col) = s;
    }
    detail::normalize_phase(out.vectors, col);
  }
  return out;
}

/// Spectral norm (largest singular value).
inline double spectral_norm(const CMatrix& m) {
  if (m.empty()) return 0.0;
  const CMatrix g = m.rows() >= m.cols() ? adjoint_times(m, m) : adjoint_times(m.adjoint(), m.adjoint());
  const auto s = hermitian_eig(hermitian_part(g));
  return std::sqrt(std::max(0.0, s.values.front()));
}

/// f(M) = V diag(f(lambda)) V^H for Hermitian M.
template <class F>
CMatrix hermitian_function(const CMatrix& m, F&& f) {
  const auto s = hermitian_eig(hermitian_part(m));
  const std::size_t n = m.rows();
  CMatrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = f(s.values[k]);
    for (std::size_t i = 0; i < n; ++i) {
      const cplx vik = s.vectors(i, k) * fk;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * std::conj(s.vectors(j, k));
    }
  }
  return out;
}

/// Principal square root of a Hermitian PSD matrix; tiny negative
/// eigenvalues from rounding are clamped to zero.
inline CMatrix hermitian_sqrt(const CMatrix& m) {
  return hermitian_function(m, [](double x) { return std::sqrt(std::max(0.0, x)); });
}

namespace detail {

inline double abs1(cplx z) { return std::abs(z.real()) + std::abs(z.imag()); }

/// Diagonal similarity scaling by powers of two.
inline void balance(CMatrix& h) {
  const std::size_t n = h.rows();
  constexpr double radix = 2.0;
  bool done = false;
  int sweeps = 0;
  while (!done && sweeps++ < 64) {
    done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        c += abs1(h(j, i));
        r += abs1(h(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        for (std::size_t j = 0; j < n; ++j) h(i, j) /= f;
        for (std::size_t j = 0; j < n; ++j) h(j, i) *= f;
      }
    }
  }
}

inline void hessenberg(CMatrix& h) {
  const std::size_t n = h.rows();
  std::vector<cplx> v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    double xnorm2 = 0.0;
    for (std::size_t i = 0; i < len; ++i) xnorm2 += std::norm(h(k + 1 + i, k));
    if (xnorm2 == 0.0) continue;
    const double xnorm = std::sqrt(xnorm2);
    const cplx x0 = h(k + 1, k);
    const cplx phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cplx(1.0);
    for (std::size_t i = 0; i < len; ++i) v[i] = h(k + 1 + i, k);
    v[0] += phase * xnorm;
    const double vn = vector_norm(std::span<const cplx>(v.data(), len));
    for (std::size_t i = 0; i < len; ++i) v[i] /= vn;
    for (std::size_t j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t i = 0; i < len; ++i) s += std::conj(v[i]) * h(k + 1 + i, j);
      for (std::size_t i = 0; i < len; ++i) h(k + 1 + i, j) -= 2.0 * v[i] * s;
    }
    for (std::size_t r = 0; r < n; ++r) {
      cplx s = 0.0;
      for (std::size_t i = 0; i < len; ++i) s += h(r, k + 1 + i) * v[i];
      for (std::size_t i = 0; i < len; ++i) h(r, k + 1 + i) -= 2.0 * s * std::conj(v[i]);
    }
    for (std::size_t i = 2; i < len + 1; ++i) h(k + i, k) = 0.0;
  }
}

}  // namespace detail

/// Eigenvalues of a small general complex matrix (K <= 8): balancing,
/// Hessenberg reduction and single-shift complex QR with Wilkinson shifts.
inline ComplexSpectrum general_eig_small(const CMatrix& m) {
  if (!m.square()) throw InvalidArgument("general_eig_small: matrix not square");
  if (m.rows() > kSmallCap) throw InvalidArgument("general_eig_small: size exceeds 8");
  if (!m.all_finite()) throw InvalidArgument("general_eig_small: non-finite entries");
  const std::size_t n = m.rows();
  ComplexSpectrum out;
  out.values.resize(n);
  if (n == 0) return out;
  CMatrix h = m;
  detail::balance(h);
  detail::hessenberg(h);

  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double hnorm = std::max(h.frobenius(), std::numeric_limits<double>::min());
  std::size_t hi = n - 1;
  std::size_t its = 0;
  std::size_t total = 0;
  std::vector<cplx> cs(n), sn(n);
  while (true) {
    if (hi == 0) {
      out.values[0] = h(0, 0);
      break;
    }
    std::size_t l = hi;
    while (l > 0) {
      double s = detail::abs1(h(l - 1, l - 1)) + detail::abs1(h(l, l));
      if (s == 0.0) s = hnorm;
      if (detail::abs1(h(l, l - 1)) <= eps * s) {
        h(l, l - 1) = 0.0;
        break;
      }
      --l;
    }
    if (l == hi) {
      out.values[hi] = h(hi, hi);
      --hi;
      its = 0;
      continue;
    }
    if (++total > 100 * n) throw NumericalError("general_eig_small: QR failed to converge");
    ++its;

    cplx mu;
    if (its % 10 == 0) {
      mu = h(hi, hi) + cplx(0.75 * std::abs(h(hi, hi - 1).real()), 0.0) +
           cplx(0.0, 0.75 * std::abs(h(hi, hi - 1).imag()));
    } else {
      const cplx a = h(hi - 1, hi - 1), b = h(hi - 1, hi), c = h(hi, hi - 1), d = h(hi, hi);
      const cplx half = 0.5 * (a - d);
      const cplx disc = std::sqrt(half * half + b * c);
      const cplx m1 = 0.5 * (a + d) + disc;
      const cplx m2 = 0.5 * (a + d) - disc;
      mu = std::abs(m1 - d) < std::abs(m2 - d) ? m1 : m2;
    }

    for (std::size_t k = l; k <= hi; ++k) h(k, k) -= mu;
    for (std::size_t k = l; k < hi; ++k) {
      const cplx x = h(k, k), y = h(k + 1, k);
      const double r = std::hypot(std::abs(x), std::abs(y));
      cplx c = 1.0, s = 0.0;
      if (r > 0.0) {
        c = x / r;
        s = y / r;
      }
      cs[k] = c;
      sn[k] = s;
      for (std::size_t j = k; j <= hi; ++j) {
        const cplx u = h(k, j), w = h(k + 1, j);
        h(k, j) = std::conj(c) * u + std::conj(s) * w;
        h(k + 1, j) = -s * u + c * w;
      }
    }
    for (std::size_t k = l; k < hi; ++k) {
      const cplx c = cs[k], s = sn[k];
      const std::size_t last = std::min(k + 1, hi);
      for (std::size_t r = l; r <= last; ++r) {
        const cplx u = h(r, k), w = h(r, k + 1);
        h(r, k) = u * c + w * s;
        h(r, k + 1) = -u * std::conj(s) + w * std::conj(c);
      }
    }
    for (std::size_t k = l; k <= hi; ++k) h(k, k) += mu;
  }
  return out;
}

/// S_k = sum of all k x k principal minors, k = 1..K. The characteristic
/// polynomial is lambda^K - S_1 lambda^{K-1} + ... + (-1)^K S_K.
inline std::vector<cplx> principal_minor_sums(const CMatrix& m) {
  if (!m.square()) throw InvalidArgument("principal_minor_sums: matrix not square");
  if (m.rows() > kSmallCap) throw InvalidArgument("principal_minor_sums: size exceeds 8");
  const std::size_t n = m.rows();
  std::vector<cplx> sums(n, 0.0);
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    const auto k = static_cast<std::size_t>(std::popcount(mask));
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    if (k == 1) {
      sums[0] += m(idx[0], idx[0]);
      continue;
    }
    CMatrix sub(k, k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) sub(i, j) = m(idx[i], idx[j]);
    sums[k - 1] += determinant(sub);
  }
  return sums;
}

/// Calls f(cycle) for every directed simple cycle on {0..n-1}, each cycle
/// listed once starting from its smallest index. Length-1 cycles are the
/// diagonal entries.
template <class F>
void for_each_cycle(std::size_t n, F&& f) {
  std::vector<std::size_t> cyc;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    cyc.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) cyc.push_back(i);
    // cyc[0] is fixed; enumerate orders of the rest.
    do {
      f(std::span<const std::size_t>(cyc));
    } while (cyc.size() > 2 && std::next_permutation(cyc.begin() + 1, cyc.end()));
  }
}

inline cplx cycle_product(const CMatrix& m, std::span<const std::size_t> cyc) {
  cplx p = 1.0;
  for (std::size_t i = 0; i < cyc.size(); ++i) p *= m(cyc[i], cyc[(i + 1) % cyc.size()]);
  return p;
}

/// max over every index cycle of |A_{i1 i2} ... A_{im i1} - B_{i1 i2} ... B_{im i1}|.
inline double cycle_product_gap(const CMatrix& a, const CMatrix& b) {
  if (!a.square() || a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument("cycle_product_gap: shape mismatch");
  if (a.rows() > kSmallCap) throw InvalidArgument("cycle_product_gap: size exceeds 8");
  double gap = 0.0;
  for_each_cycle(a.rows(), [&](std::span<const std::size_t> cyc) {
    gap = std::max(gap, std::abs(cycle_product(a, cyc) - cycle_product(b, cyc)));
  });
  return gap;
}

/// Exhaustive minimum-cost assignment (K <= 8). Returns perm with row i
/// matched to column perm[i].
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n > kSmallCap) throw InvalidArgument("min_cost_assignment: size exceeds 8");
  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += cost[i][perm[i]];
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct EigDiffProbe {
  double epsilon = 0.0;   // cycle-product gap
  double max_gap = 0.0;   // max_k |lambda_k(a) - lambda_k(b)| after optimal matching
};

inline EigDiffProbe eigdiff_bound_probe(const CMatrix& a, const CMatrix& b) {
  EigDiffProbe out;
  out.epsilon = cycle_product_gap(a, b);
  const auto la = general_eig_small(a).values;
  const auto lb = general_eig_small(b).values;
  std::vector<std::vector<double>> cost(la.size(), std::vector<double>(lb.size()));
  for (std::size_t i = 0; i < la.size(); ++i)
    for (std::size_t j = 0; j < lb.size(); ++j) cost[i][j] = std::abs(la[i] - lb[j]);
  const auto perm = min_cost_assignment(cost);
  for (std::size_t i = 0; i < la.size(); ++i) out.max_gap = std::max(out.max_gap, cost[i][perm[i]]);
  return out;
}

struct TopEigOptions {
  std::size_t block = 0;      // 0: chosen from k
  double tol = 1e-11;         // residual tolerance relative to the top Ritz value
  std::size_t max_dim = 0;    // 0: up to n
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

/// Leading k eigenpairs of an implicitly given n x n Hermitian PSD operator
/// by Rayleigh-Ritz on a block Krylov subspace with full reorthogonalization.
/// `apply(V)` must return M V for an n x b matrix V.
template <class Apply>
SampleSpectrum hermitian_eig_top(Apply&& apply, std::size_t n, std::size_t k,
                                 const TopEigOptions& opt = {}) {
  if (k == 0 || k > n) throw InvalidArgument("hermitian_eig_top: need 0 < k <= n");
  const std::size_t b = std::min(n, opt.block ? opt.block : std::max<std::size_t>(k + 2, 2 * k));
  const std::size_t max_dim = std::min(n, opt.max_dim ? opt.max_dim : n);

  std::vector<std::vector<cplx>> q, w;  // basis columns and their images
  std::mt19937_64 rng(opt.seed ^ (n * 0x2545F4914F6CDD1DULL));
  std::normal_distribution<double> gauss;

  auto orthogonalize = [&](std::vector<cplx>& v) {
    const double before = vector_norm(v);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& qi : q) {
        const cplx c = dot_conj(qi, v);
        for (std::size_t r = 0; r < n; ++r) v[r] -= c * qi[r];
      }
    }
    return std::pair{before, vector_norm(v)};
  };
  auto random_vector = [&] {
    std::vector<cplx> v(n);
    for (auto& z : v) z = cplx(gauss(rng), gauss(rng));
    return v;
  };
  auto push_block = [&](std::vector<std::vector<cplx>> cand) {
    std::vector<std::vector<cplx>> accepted;
    for (auto& v : cand) {
      if (q.size() >= max_dim) break;
      for (int attempt = 0; attempt < 4; ++attempt) {
        auto [before, after] = orthogonalize(v);
        if (after > 1e-10 * std::max(before, 1e-300)) {
          for (auto& z : v) z /= after;
          q.push_back(v);
          accepted.push_back(std::move(v));
          break;
        }
        v = random_vector();
      }
    }
    return accepted;
  };

  std::vector<std::vector<cplx>> block;
  for (std::size_t j = 0; j < b; ++j) block.push_back(random_vector());
  block = push_block(std::move(block));

  CMatrix h;  // projected matrix, grown as columns arrive
  std::size_t blocks = 0;
  while (true) {
    ++blocks;
    CMatrix v(n, block.size());
    for (std::size_t j = 0; j < block.size(); ++j) v.set_col(j, block[j]);
    const CMatrix mv = apply(v);
    const std::size_t m_old = w.size();
    for (std::size_t j = 0; j < block.size(); ++j) w.push_back(mv.col(j));
    const std::size_t m = q.size();

    CMatrix hn(m, m);
    for (std::size_t i = 0; i < m_old; ++i)
      for (std::size_t j = 0; j < m_old; ++j) hn(i, j) = h(i, j);
    for (std::size_t j = m_old; j < m; ++j) {
      for (std::size_t i = 0; i <= j; ++i) {
        const cplx x = dot_conj(q[i], w[j]);
        hn(i, j) = x;
        hn(j, i) = std::conj(x);
      }
      hn(j, j) = hn(j, j).real();
    }
    h = std::move(hn);

    const bool check = blocks % 2 == 0 || m + b > max_dim;
    if (m >= k && check) {
      const auto rr = hermitian_eig(h);
      SampleSpectrum out;
      out.values.assign(rr.values.begin(), rr.values.begin() + static_cast<std::ptrdiff_t>(k));
      out.vectors = CMatrix(n, k);
      double worst = 0.0;
      const double scale = std::max(std::abs(rr.values.front()), 1e-300);
      for (std::size_t c = 0; c < k; ++c) {
        std::vector<cplx> x(n, 0.0), y(n, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
          const cplx coef = rr.vectors(j, c);
          for (std::size_t r = 0; r < n; ++r) {
            x[r] += coef * q[j][r];
            y[r] += coef * w[j][r];
          }
        }
        for (std::size_t r = 0; r < n; ++r) y[r] -= rr.values[c] * x[r];
        worst = std::max(worst, vector_norm(y));
        out.vectors.set_col(c, x);
      }
      if (worst <= opt.tol * scale || m >= max_dim) {
        if (worst > opt.tol * scale && m < n) {
          throw NumericalError("hermitian_eig_top: no convergence within subspace cap");
        }
        for (std::size_t c = 0; c < k; ++c) detail::normalize_phase(out.vectors, c);
        return out;
      }
    }

    std::vector<std::vector<cplx>> next(w.begin() + static_cast<std::ptrdiff_t>(m_old), w.end());
    block = push_block(std::move(next));
    if (block.empty()) throw NumericalError("hermitian_eig_top: Krylov space exhausted");
  }
}

}  // namespace matkern
}  // namespace doa

#endif  // DOA_RMT_MATKERN_HPP
