#ifndef DOA_RMT_ESTIMATORS_HPP
#define DOA_RMT_ESTIMATORS_HPP

// Subspace DoA estimators (ESPRIT, G-ESPRIT, MUSIC, G-MUSIC) and the
// Cramer-Rao bound for a uniform linear array.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "doa_rmt/angles.hpp"
#include "doa_rmt/cmatrix.hpp"
#include "doa_rmt/errors.hpp"
#include "doa_rmt/matkern.hpp"
#include "doa_rmt/rmttheory.hpp"
#include "doa_rmt/sigmodel.hpp"
#include "doa_rmt/subspace.hpp"

namespace doa {

struct DoaEstimate {
  std::string method;
  std::vector<double> angles;  // ascending; fewer than K when a spectral search misses sources
  std::vector<double> ell_hat;
  std::vector<double> g_hat;
  std::vector<bool> below_threshold;

  [[nodiscard]] bool complete(std::size_t k) const { return angles.size() == k; }
  [[nodiscard]] bool any_below_threshold() const {
    return std::find(below_threshold.begin(), below_threshold.end(), true) != below_threshold.end();
  }
};

/// Spike and bias-factor estimates from the top K sample eigenvalues.
struct BiasEstimate {
  std::vector<double> ell;
  std::vector<double> g;
  std::vector<bool> below_threshold;
};

inline BiasEstimate estimate_bias(const SampleSpectrum& spectrum, std::size_t k, double c) {
  if (spectrum.count() < k) throw InvalidArgument("estimate_bias: fewer than K eigenvalues");
  BiasEstimate b;
  for (std::size_t i = 0; i < k; ++i) {
    const auto sp = rmt::spike_inverse(spectrum.values[i], c);
    b.ell.push_back(sp.ell);
    b.below_threshold.push_back(sp.below_threshold);
    b.g.push_back(sp.below_threshold ? kGFloor : std::max(kGFloor, rmt::bias_factor(sp.ell, c)));
  }
  return b;
}

/// Classical ESPRIT on the top-K sample eigenvectors.
inline DoaEstimate esprit(const SampleSpectrum& spectrum, std::size_t k, const SelectionWindow& w,
                          double delta) {
  const auto pair = build_subspace_pair(spectrum.leading_vectors(k), w);
  DoaEstimate e;
  e.method = "esprit";
  e.angles = rotation_angles(pair.phi1, pair.phi2, delta);
  for (std::size_t i = 0; i < k; ++i) {
    e.ell_hat.push_back(spectrum.values[i] - 1.0);
    e.g_hat.push_back(1.0);
    e.below_threshold.push_back(false);
  }
  return e;
}

/// phi1_G = D (phi1 - tau I) D + tau I, phi2_G = D phi2 D with D = diag(g^{-1/2}),
/// written entrywise so that g = 1 returns the inputs bit for bit.
inline std::pair<CMatrix, CMatrix> debias_pair(const SubspacePair& p, const std::vector<double>& g,
                                               double tau) {
  const std::size_t k = g.size();
  CMatrix b1(k, k), b2(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double w = 1.0 / (std::sqrt(g[i]) * std::sqrt(g[j]));
      b1(i, j) = p.phi1(i, j) * w;
      b2(i, j) = p.phi2(i, j) * w;
    }
  for (std::size_t i = 0; i < k; ++i) b1(i, i) += tau * (1.0 - 1.0 / g[i]);
  return {b1, b2};
}

/// G-ESPRIT with externally supplied bias factors.
inline DoaEstimate gesprit_with_g(const SampleSpectrum& spectrum, std::size_t k, const SelectionWindow& w,
                                  double delta, const std::vector<double>& g) {
  if (g.size() != k) throw InvalidArgument("gesprit: need K bias factors");
  const auto pair = build_subspace_pair(spectrum.leading_vectors(k), w);
  const double tau = static_cast<double>(w.length) / static_cast<double>(spectrum.dimension());
  const auto [b1, b2] = debias_pair(pair, g, tau);
  DoaEstimate e;
  e.method = "gesprit";
  e.angles = rotation_angles(b1, b2, delta);
  e.g_hat = g;
  e.below_threshold.assign(k, false);
  return e;
}

/// G-ESPRIT: bias factors estimated from the sample spikes with c = N/T.
inline DoaEstimate gesprit(const SampleSpectrum& spectrum, std::size_t k, const SelectionWindow& w,
                           double delta, double c) {
  const auto b = estimate_bias(spectrum, k, c);
  auto e = gesprit_with_g(spectrum, k, w, delta, b.g);
  e.ell_hat = b.ell;
  e.below_threshold = b.below_threshold;
  return e;
}

struct PseudoSpectrum {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> peaks;  // refined minimizers of eta, ascending
  std::size_t missing = 0;    // sources without a local minimum
};

namespace detail {

/// eta(theta) = 1 - sum_k w_k |a(theta)^H u_k|^2
class SubspaceProjection {
 public:
  SubspaceProjection(const CMatrix& u, std::vector<double> weights) : u_(u), w_(std::move(weights)) {}

  double operator()(double theta) const {
    const std::size_t n = u_.rows();
    const cplx z = std::polar(1.0, -theta);
    double acc = 0.0;
    for (std::size_t k = 0; k < u_.cols(); ++k) {
      // Horner in z = e^{-i theta}: sum_m u_m z^m
      cplx s = 0.0;
      for (std::size_t m = n; m-- > 0;) s = s * z + u_(m, k);
      acc += w_[k] * std::norm(s) / static_cast<double>(n);
    }
    return 1.0 - acc;
  }

 private:
  const CMatrix& u_;
  std::vector<double> w_;
};

inline PseudoSpectrum search_minima(const CMatrix& u, const std::vector<double>& weights, std::size_t k,
                                    std::size_t grid_size) {
  const std::size_t n = u.rows();
  const std::size_t m = grid_size ? grid_size : std::max<std::size_t>(8192, 16 * n);
  if (m < 3) throw InvalidArgument("music: grid too small");
  const SubspaceProjection eta(u, weights);
  PseudoSpectrum ps;
  ps.grid.resize(m);
  ps.values.resize(m);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    ps.grid[j] = -std::numbers::pi + step * static_cast<double>(j);
    ps.values[j] = eta(ps.grid[j]);
  }
  std::vector<std::size_t> minima;
  for (std::size_t j = 0; j < m; ++j) {
    const double prev = ps.values[(j + m - 1) % m], next = ps.values[(j + 1) % m];
    if (ps.values[j] <= prev && ps.values[j] < next) minima.push_back(j);
  }
  std::sort(minima.begin(), minima.end(),
            [&](std::size_t a, std::size_t b) { return ps.values[a] < ps.values[b]; });
  if (minima.size() > k) minima.resize(k);
  ps.missing = k - minima.size();
  for (const std::size_t j : minima) {
    const double lo = ps.grid[j] - step, hi = ps.grid[j] + step;
    const auto r = boost::math::tools::brent_find_minima(eta, lo, hi, std::numeric_limits<double>::digits / 2);
    ps.peaks.push_back(wrap_angle(r.first));
  }
  std::sort(ps.peaks.begin(), ps.peaks.end());
  return ps;
}

}  // namespace detail

/// MUSIC signal-subspace pseudospectrum and its K deepest minima.
inline PseudoSpectrum music_spectrum(const SampleSpectrum& spectrum, std::size_t k, std::size_t grid_size = 0) {
  return detail::search_minima(spectrum.leading_vectors(k), std::vector<double>(k, 1.0), k, grid_size);
}

/// G-MUSIC: MUSIC with projections weighted by 1 / g_hat.
inline PseudoSpectrum gmusic_spectrum(const SampleSpectrum& spectrum, std::size_t k, std::size_t grid_size,
                                      double c, BiasEstimate* bias_out = nullptr) {
  const auto b = estimate_bias(spectrum, k, c);
  std::vector<double> w;
  for (const double g : b.g) w.push_back(1.0 / g);
  if (bias_out) *bias_out = b;
  return detail::search_minima(spectrum.leading_vectors(k), w, k, grid_size);
}

inline DoaEstimate music(const SampleSpectrum& spectrum, std::size_t k, std::size_t grid_size = 0) {
  DoaEstimate e;
  e.method = "music";
  e.angles = music_spectrum(spectrum, k, grid_size).peaks;
  e.g_hat.assign(k, 1.0);
  e.below_threshold.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) e.ell_hat.push_back(spectrum.values[i] - 1.0);
  return e;
}

inline DoaEstimate gmusic(const SampleSpectrum& spectrum, std::size_t k, std::size_t grid_size, double c) {
  DoaEstimate e;
  e.method = "gmusic";
  BiasEstimate b;
  e.angles = gmusic_spectrum(spectrum, k, grid_size, c, &b).peaks;
  e.ell_hat = b.ell;
  e.g_hat = b.g;
  e.below_threshold = b.below_threshold;
  return e;
}

/// Diagonal of sigma^2/(2N) {Re[(D^H (I - A (A^H A)^{-1} A^H) D) .* P^T]}^{-1}, sigma^2 = 1.
inline std::vector<double> crb(const UlaScenario& s) {
  s.validate();
  const std::size_t n = s.N, k = s.K;
  const CMatrix a = steering_matrix(s.thetas, n);
  CMatrix d(n, k);
  for (std::size_t j = 0; j < k; ++j) d.set_col(j, steering_derivative(s.thetas[j], n));
  const LuDecomposition gram(adjoint_times(a, a));
  if (gram.singular() || condition_number(adjoint_times(a, a)) > kMaxCondition)
    throw NumericalError("crb: steering matrix is rank deficient");
  const CMatrix ad = adjoint_times(a, d);
  const CMatrix proj = adjoint_times(d, d) - ad.adjoint() * gram.solve(ad);
  const CMatrix p = s.scaled_power();
  CMatrix m(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) m(i, j) = (proj(i, j) * p(j, i)).real();
  const LuDecomposition lu(m);
  if (lu.singular()) throw NumericalError("crb: Fisher information is singular");
  const CMatrix inv = lu.solve(CMatrix::identity(k));
  std::vector<double> out(k);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < k; ++i) out[i] = scale * inv(i, i).real();
  return out;
}

}  // namespace doa

#endif  // DOA_RMT_ESTIMATORS_HPP
