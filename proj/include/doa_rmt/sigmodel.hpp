#ifndef DOA_RMT_SIGMODEL_HPP
#define DOA_RMT_SIGMODEL_HPP

// Uniform linear array signal model: scenarios, steering vectors, snapshot
// generation, covariances and subarray selection.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "doa_rmt/cmatrix.hpp"
#include "doa_rmt/errors.hpp"
#include "doa_rmt/matkern.hpp"
#include "doa_rmt/rng.hpp"

namespace doa {

/// Two row windows of length `length`: rows [start, start+length) and
/// [start+shift, start+shift+length), 1-based start.
struct SelectionWindow {
  std::size_t start = 1;
  std::size_t length = 0;
  std::size_t shift = 1;

  void validate(std::size_t rows) const {
    if (start < 1) throw InvalidArgument("SelectionWindow: start must be >= 1");
    if (length == 0) throw InvalidArgument("SelectionWindow: empty window");
    if (start + length + shift - 1 > rows)
      throw InvalidArgument("SelectionWindow: window exceeds " + std::to_string(rows) + " rows");
  }
};

struct Subarray {
  std::size_t n = 0;
  std::size_t delta = 1;
  std::size_t start = 1;
};

enum class PowerMode { exact, iid };

struct UlaScenario {
  std::size_t N = 0;
  std::size_t T = 0;
  std::size_t K = 0;
  std::vector<double> thetas;
  CMatrix P;
  Subarray subarray;
  double snr_scale = 1.0;
  PowerMode power_mode = PowerMode::exact;

  [[nodiscard]] double c() const { return static_cast<double>(N) / static_cast<double>(T); }
  [[nodiscard]] double tau() const {
    return static_cast<double>(subarray.n) / static_cast<double>(N);
  }
  [[nodiscard]] SelectionWindow window() const {
    return {subarray.start, subarray.n, subarray.delta};
  }
  /// snr_scale * P
  [[nodiscard]] CMatrix scaled_power() const { return P * cplx(snr_scale); }

  void validate() const {
    if (N == 0) throw InvalidArgument("UlaScenario: N must be positive");
    if (T < K || T == 0) throw InvalidArgument("UlaScenario: need T >= K and T >= 1");
    if (thetas.size() != K) throw InvalidArgument("UlaScenario: thetas must have K entries");
    if (P.rows() != K || P.cols() != K) throw InvalidArgument("UlaScenario: P must be K x K");
    for (double t : thetas) {
      if (!std::isfinite(t) || t < -std::numbers::pi || t >= std::numbers::pi)
        throw InvalidArgument("UlaScenario: angles must lie in [-pi, pi)");
    }
    if (!std::isfinite(snr_scale) || snr_scale < 0.0)
      throw InvalidArgument("UlaScenario: snr_scale must be finite and non-negative");
    if (K > 0) {
      if (!P.all_finite() || hermitian_defect(P) > 1e-12 * std::max(1.0, P.max_abs()))
        throw InvalidArgument("UlaScenario: P must be Hermitian");
      const auto s = matkern::hermitian_eig(hermitian_part(P));
      if (s.values.back() < -1e-12 * std::max(1.0, s.values.front()))
        throw InvalidArgument("UlaScenario: P must be positive semidefinite");
    }
    if (subarray.n < K || subarray.n == 0) throw InvalidArgument("UlaScenario: need K <= n");
    if (subarray.delta < 1) throw InvalidArgument("UlaScenario: delta must be >= 1");
    window().validate(N);
  }
};

/// a(theta)_k = exp(i (k-1) theta) / sqrt(N)
inline std::vector<cplx> steering_vector(double theta, std::size_t n) {
  if (n == 0) throw InvalidArgument("steering_vector: N must be positive");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double th = std::remainder(theta, 2.0 * std::numbers::pi);
  std::vector<cplx> a(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double ph = std::remainder(static_cast<double>(k) * th, 2.0 * std::numbers::pi);
    a[k] = cplx(scale * std::cos(ph), scale * std::sin(ph));
  }
  return a;
}

/// N x K matrix of steering vectors.
inline CMatrix steering_matrix(std::span<const double> thetas, std::size_t n) {
  CMatrix a(n, thetas.size());
  for (std::size_t k = 0; k < thetas.size(); ++k) a.set_col(k, steering_vector(thetas[k], n));
  return a;
}

/// d a(theta) / d theta, entry k is i (k-1) exp(i (k-1) theta) / sqrt(N).
inline std::vector<cplx> steering_derivative(double theta, std::size_t n) {
  auto a = steering_vector(theta, n);
  for (std::size_t k = 0; k < n; ++k) a[k] *= cplx(0.0, static_cast<double>(k));
  return a;
}

/// C = A (snr_scale P) A^H + I
inline CMatrix population_covariance(const UlaScenario& s) {
  s.validate();
  const CMatrix a = steering_matrix(s.thetas, s.N);
  CMatrix c = a * s.scaled_power() * a.adjoint();
  c = hermitian_part(c);
  for (std::size_t i = 0; i < s.N; ++i) c(i, i) += 1.0;
  return c;
}

/// Array output. Storage is snapshot-major: entry (i, t) at data[t * N + i].
struct SnapshotMatrix {
  std::size_t N = 0;
  std::size_t T = 0;
  std::vector<cplx> data;
  CMatrix signals;  // K x T source waveforms S
  std::uint64_t seed = 0;

  [[nodiscard]] cplx operator()(std::size_t i, std::size_t t) const { return data[t * N + i]; }
  [[nodiscard]] std::span<const cplx> snapshot(std::size_t t) const { return {data.data() + t * N, N}; }

  [[nodiscard]] CMatrix to_matrix() const {
    CMatrix x(N, T);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < N; ++i) x(i, t) = data[t * N + i];
    return x;
  }
};

/// Source waveforms S (K x T). In exact mode S S^H / T equals snr_scale P.
inline CMatrix draw_source_signals(const UlaScenario& s, Rng& rng) {
  const std::size_t k = s.K, t = s.T;
  CMatrix w(k, t);
  if (k == 0) return w;
  const CMatrix root = matkern::hermitian_sqrt(s.scaled_power());
  constexpr int kMaxRetries = 8;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    for (auto& z : w.data()) z = rng.cnormal();
    if (s.power_mode == PowerMode::iid) return root * w;
    CMatrix g = w * w.adjoint();
    g *= cplx(1.0 / static_cast<double>(t));
    const auto eig = matkern::hermitian_eig(hermitian_part(g));
    if (eig.values.back() <= 1e-12 * eig.values.front()) continue;
    const CMatrix inv_root =
        matkern::hermitian_function(g, [](double x) { return 1.0 / std::sqrt(x); });
    return root * inv_root * w;
  }
  throw NumericalError("draw_source_signals: rank-deficient Gaussian draw");
}

/// X = A S + noise with i.i.d. CN(0, 1) noise.
inline SnapshotMatrix generate_snapshots(const UlaScenario& s, std::uint64_t seed) {
  s.validate();
  Rng rng(seed);
  SnapshotMatrix x;
  x.N = s.N;
  x.T = s.T;
  x.seed = seed;
  x.signals = draw_source_signals(s, rng);
  x.data.resize(s.N * s.T);
  for (auto& z : x.data) z = rng.cnormal();
  if (s.K == 0) return x;
  const CMatrix a = steering_matrix(s.thetas, s.N);
  std::vector<double> are(s.N * s.K), aim(s.N * s.K);
  for (std::size_t i = 0; i < s.N; ++i)
    for (std::size_t k = 0; k < s.K; ++k) {
      are[k * s.N + i] = a(i, k).real();
      aim[k * s.N + i] = a(i, k).imag();
    }
  for (std::size_t t = 0; t < s.T; ++t) {
    auto* col = reinterpret_cast<double*>(x.data.data() + t * s.N);
    for (std::size_t k = 0; k < s.K; ++k) {
      const double sr = x.signals(k, t).real(), si = x.signals(k, t).imag();
      const double* ar = are.data() + k * s.N;
      const double* ai = aim.data() + k * s.N;
      for (std::size_t i = 0; i < s.N; ++i) {
        col[2 * i] += ar[i] * sr - ai[i] * si;
        col[2 * i + 1] += ar[i] * si + ai[i] * sr;
      }
    }
  }
  return x;
}

/// C_hat = X X^H / T, symmetrized.
inline CMatrix sample_covariance(const SnapshotMatrix& x) {
  if (x.T == 0) throw InvalidArgument("sample_covariance: no snapshots");
  const std::size_t n = x.N;
  CMatrix c(n, n);
  for (std::size_t t = 0; t < x.T; ++t) {
    const auto v = x.snapshot(t);
    for (std::size_t i = 0; i < n; ++i) {
      const cplx vi = v[i];
      auto row = c.row(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += vi * std::conj(v[j]);
    }
  }
  c *= cplx(1.0 / static_cast<double>(x.T));
  return hermitian_part(c);
}

/// Matrix-free product with C_hat: V (N x b) -> X (X^H V) / T.
class ScmOperator {
 public:
  explicit ScmOperator(const SnapshotMatrix& x) : x_(x) {}

  [[nodiscard]] CMatrix operator()(const CMatrix& v) const {
    const std::size_t n = x_.N, b = v.cols();
    if (v.rows() != n) throw InvalidArgument("ScmOperator: shape mismatch");
    // Split V and the accumulator into real/imag planes, row-major n x b.
    std::vector<double> vr(n * b), vi(n * b), zr(n * b, 0.0), zi(n * b, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < b; ++j) {
        vr[i * b + j] = v(i, j).real();
        vi[i * b + j] = v(i, j).imag();
      }
    std::vector<double> yr(b), yi(b);
    for (std::size_t t = 0; t < x_.T; ++t) {
      const auto* xt = reinterpret_cast<const double*>(x_.data.data() + t * n);
      std::fill(yr.begin(), yr.end(), 0.0);
      std::fill(yi.begin(), yi.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double xr = xt[2 * i], xi = xt[2 * i + 1];
        const double* pr = vr.data() + i * b;
        const double* pi = vi.data() + i * b;
        for (std::size_t j = 0; j < b; ++j) {
          yr[j] += xr * pr[j] + xi * pi[j];
          yi[j] += xr * pi[j] - xi * pr[j];
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double xr = xt[2 * i], xi = xt[2 * i + 1];
        double* qr = zr.data() + i * b;
        double* qi = zi.data() + i * b;
        for (std::size_t j = 0; j < b; ++j) {
          qr[j] += xr * yr[j] - xi * yi[j];
          qi[j] += xr * yi[j] + xi * yr[j];
        }
      }
    }
    const double inv_t = 1.0 / static_cast<double>(x_.T);
    CMatrix z(n, b);
    for (std::size_t i = 0; i < n * b; ++i) z.data()[i] = cplx(zr[i] * inv_t, zi[i] * inv_t);
    return z;
  }

 private:
  const SnapshotMatrix& x_;
};

/// Leading k eigenpairs of the sample covariance without forming it.
inline SampleSpectrum scm_top_spectrum(const SnapshotMatrix& x, std::size_t k) {
  const ScmOperator op(x);
  matkern::TopEigOptions opt;
  opt.seed = 0x5eedULL;
  opt.tol = 1e-10;
  return matkern::hermitian_eig_top(op, x.N, k, opt);
}

enum class WindowSide { first, second };

/// J_1 m (first) or J_2 m (second) as a row slice.
inline CMatrix subarray_rows(const CMatrix& m, const SelectionWindow& w, WindowSide which) {
  w.validate(m.rows());
  const std::size_t first = w.start - 1 + (which == WindowSide::second ? w.shift : 0);
  return m.rows_range(first, w.length);
}

}  // namespace doa

#endif  // DOA_RMT_SIGMODEL_HPP
