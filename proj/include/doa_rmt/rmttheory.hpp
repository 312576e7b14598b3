#ifndef DOA_RMT_RMTTHEORY_HPP
#define DOA_RMT_RMTTHEORY_HPP

// Deterministic large-array limits: Marchenko-Pastur support and Stieltjes
// transform, spike maps, eigenvector bias factors, the asymptotic ESPRIT
// matrices, detection thresholds and closed-form steering overlaps.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include "doa_rmt/angles.hpp"
#include "doa_rmt/cmatrix.hpp"
#include "doa_rmt/errors.hpp"
#include "doa_rmt/matkern.hpp"
#include "doa_rmt/sigmodel.hpp"
#include "doa_rmt/subspace.hpp"

namespace doa {

/// Floor applied to bias factors of undetectable spikes.
inline constexpr double kGFloor = 1e-6;

struct SpikeModel {
  double c = 0.0;
  std::vector<double> ells;

  void validate() const {
    if (!(c > 0.0)) throw InvalidArgument("SpikeModel: c must be positive");
    for (std::size_t k = 0; k < ells.size(); ++k) {
      if (!(ells[k] > 0.0)) throw InvalidArgument("SpikeModel: spikes must be positive");
      if (k > 0 && !(ells[k] < ells[k - 1])) throw InvalidArgument("SpikeModel: spikes must be strictly descending");
    }
  }
  [[nodiscard]] bool separated(std::size_t k) const { return ells.at(k) > std::sqrt(c); }
};

namespace rmt {

struct Support {
  double lower = 0.0;
  double upper = 0.0;
};

/// (E-, E+) = ((1 - sqrt c)^2, (1 + sqrt c)^2)
inline Support mp_support(double c) {
  if (!(c > 0.0)) throw InvalidArgument("mp_support: c must be positive");
  const double r = std::sqrt(c);
  return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

namespace detail {

/// Both roots of z c m^2 - (1 - c - z) m + 1 = 0.
inline std::pair<cplx, cplx> stieltjes_roots(cplx z, double c) {
  const cplx a = z * c;
  const cplx b = -(1.0 - c - z);
  if (a == cplx(0.0)) {
    const cplx r = -1.0 / b;
    return {r, r};
  }
  const cplx disc = std::sqrt(b * b - 4.0 * a);
  const cplx q = std::real(std::conj(b) * disc) >= 0.0 ? -0.5 * (b + disc) : -0.5 * (b - disc);
  return {q / a, 1.0 / q};
}

inline cplx pick_complex_branch(cplx z, double c) {
  const auto [r1, r2] = stieltjes_roots(z, c);
  const double s1 = r1.imag() * z.imag(), s2 = r2.imag() * z.imag();
  return s1 >= s2 ? r1 : r2;
}

}  // namespace detail

/// Stieltjes transform of the Marchenko-Pastur law at z off the support.
inline cplx mp_stieltjes(cplx z, double c) {
  if (!(c >= 0.0)) throw InvalidArgument("mp_stieltjes: c must be non-negative");
  if (z == cplx(0.0)) throw InvalidArgument("mp_stieltjes: z = 0");
  if (c == 0.0) {
    if (z == cplx(1.0)) throw InvalidArgument("mp_stieltjes: z on the support");
    return 1.0 / (1.0 - z);
  }
  if (z.imag() != 0.0) return detail::pick_complex_branch(z, c);
  const auto sup = mp_support(c);
  const double x = z.real();
  if (x >= sup.lower && x <= sup.upper) throw InvalidArgument("mp_stieltjes: z inside the support");
  // Real z: the root continuous with the limit from the upper half plane.
  const cplx near = detail::pick_complex_branch(cplx(x, 1e-9 * std::max(1.0, std::abs(x))), c);
  const auto [r1, r2] = detail::stieltjes_roots(z, c);
  const cplx m = std::abs(r1 - near) <= std::abs(r2 - near) ? r1 : r2;
  return {m.real(), 0.0};
}

/// lambda_bar = 1 + ell + c (1 + ell) / ell
inline double spike_forward(double ell, double c) {
  if (!(ell > 0.0)) throw InvalidArgument("spike_forward: ell must be positive");
  if (!(c >= 0.0)) throw InvalidArgument("spike_forward: c must be non-negative");
  return 1.0 + ell + c * (1.0 + ell) / ell;
}

struct SpikeEstimate {
  double ell = 0.0;
  bool below_threshold = false;
};

/// Inverse of spike_forward on (E+, inf); below that edge the spike is
/// flagged and ell is set to the detection boundary sqrt(c).
inline SpikeEstimate spike_inverse(double lambda_hat, double c) {
  if (!(c >= 0.0)) throw InvalidArgument("spike_inverse: c must be non-negative");
  if (c == 0.0) {
    const double ell = lambda_hat - 1.0;
    return ell > 0.0 ? SpikeEstimate{ell, false} : SpikeEstimate{0.0, true};
  }
  const double edge = (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c));
  if (!(lambda_hat > edge)) return {std::sqrt(c), true};
  const double b = lambda_hat - 1.0 - c;
  const double disc = b * b - 4.0 * c;
  if (!(disc > 0.0)) return {std::sqrt(c), true};
  const double ell = 0.5 * (b + std::sqrt(disc));
  if (!(ell > std::sqrt(c))) return {std::sqrt(c), true};
  return {ell, false};
}

/// g = (1 - c / ell^2) / (1 + c / ell); zero at and below ell = sqrt(c).
inline double bias_factor(double ell, double c) {
  if (!(ell > 0.0)) throw InvalidArgument("bias_factor: ell must be positive");
  if (c == 0.0) return 1.0;
  if (!(ell > std::sqrt(c))) return 0.0;
  return (1.0 - c / (ell * ell)) / (1.0 + c / ell);
}

struct PopulationPhi {
  SubspacePair pair;
  CMatrix u;                 // N x K population signal subspace
  std::vector<double> ells;  // finite-N spikes, descending
};

/// Eigenpairs of (sP)^{1/2} A^H A (sP)^{1/2}, descending.
inline SampleSpectrum spike_spectrum(const UlaScenario& s, const CMatrix& power) {
  const CMatrix a = steering_matrix(s.thetas, s.N);
  const CMatrix root = matkern::hermitian_sqrt(power);
  return matkern::hermitian_eig(hermitian_part(root * adjoint_times(a, a) * root));
}

/// Population subspace of A (sP) A^H + I through the K x K reduction
/// u_k = A (sP)^{1/2} v_k / sqrt(ell_k), and the resulting (phi1, phi2).
inline PopulationPhi population_phi(const UlaScenario& s) {
  s.validate();
  const CMatrix a = steering_matrix(s.thetas, s.N);
  const CMatrix root = matkern::hermitian_sqrt(s.scaled_power());
  const auto red = matkern::hermitian_eig(hermitian_part(root * adjoint_times(a, a) * root));
  PopulationPhi out;
  out.ells = red.values;
  if (s.K > 0 && !(red.values.back() > 1e-12 * std::max(1.0, red.values.front())))
    throw InvalidArgument("population_phi: signal subspace is rank deficient");
  const CMatrix ar = a * root;
  out.u = CMatrix(s.N, s.K);
  for (std::size_t k = 0; k < s.K; ++k) {
    const double scale = 1.0 / std::sqrt(red.values[k]);
    for (std::size_t i = 0; i < s.N; ++i) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < s.K; ++j) acc += ar(i, j) * red.vectors(j, k);
      out.u(i, k) = acc * scale;
    }
    matkern::detail::normalize_phase(out.u, k);
  }
  out.pair = build_subspace_pair(out.u, s.window());
  return out;
}

/// phi1_bar = D phi1 D + tau (I - diag g), phi2_bar = D phi2 D with D = diag(sqrt g).
inline std::pair<CMatrix, CMatrix> predicted_phi_bar(const CMatrix& phi1, const CMatrix& phi2,
                                                     const std::vector<double>& g, double tau) {
  const std::size_t k = g.size();
  if (phi1.rows() != k || phi1.cols() != k || phi2.rows() != k || phi2.cols() != k)
    throw InvalidArgument("predicted_phi_bar: shape mismatch");
  CMatrix b1(k, k), b2(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double w = std::sqrt(g[i]) * std::sqrt(g[j]);
      b1(i, j) = w * phi1(i, j);
      b2(i, j) = w * phi2(i, j);
    }
  for (std::size_t i = 0; i < k; ++i) b1(i, i) += tau * (1.0 - g[i]);
  return {b1, b2};
}

struct TheoryPrediction {
  CMatrix phi_bar_1;
  CMatrix phi_bar_2;
  std::vector<double> theta_true;
  std::vector<double> theta_bar;       // theta_bar[k] matched to theta_true[k]
  std::vector<double> ells;            // finite-N spikes, descending
  std::vector<double> g;               // per spike, clamped to kGFloor when undetectable
  std::vector<double> lambda_bar;      // per spike
  std::vector<bool> below_threshold;   // per spike
  double c = 0.0;
  double tau = 0.0;
};

/// Asymptotic ESPRIT angles. `c_override` replaces N/T (0 forces g = 1).
inline TheoryPrediction predicted_angles(const UlaScenario& s, std::optional<double> c_override = {}) {
  const auto pop = population_phi(s);
  TheoryPrediction out;
  out.c = c_override.value_or(s.c());
  if (!(out.c >= 0.0)) throw InvalidArgument("predicted_angles: c must be non-negative");
  out.tau = s.tau();
  out.theta_true = s.thetas;
  out.ells = pop.ells;
  for (const double ell : pop.ells) {
    const bool below = out.c > 0.0 && !(ell > std::sqrt(out.c));
    out.below_threshold.push_back(below);
    out.g.push_back(below ? kGFloor : std::max(kGFloor, bias_factor(ell, out.c)));
    out.lambda_bar.push_back(spike_forward(ell, out.c));
  }
  std::tie(out.phi_bar_1, out.phi_bar_2) = predicted_phi_bar(pop.pair.phi1, pop.pair.phi2, out.g, out.tau);
  const double delta = static_cast<double>(s.subarray.delta);
  const auto angles = rotation_angles(out.phi_bar_1, out.phi_bar_2, delta);
  const auto match = match_and_wrap(angles, s.thetas, delta);
  out.theta_bar.resize(s.K);
  for (std::size_t k = 0; k < s.K; ++k) out.theta_bar[k] = angles[match.estimate_of[k]];
  return out;
}

struct Threshold {
  double snr_scale = 0.0;
  double db = 0.0;
};

/// SNR multiplier at which spike k reaches sqrt(c): sqrt(c) / mu_k with mu_k
/// the kth eigenvalue of P^{1/2} A^H A P^{1/2}.
inline Threshold phase_transition_threshold(const UlaScenario& s, std::size_t k) {
  s.validate();
  if (k >= s.K) throw InvalidArgument("phase_transition_threshold: source index out of range");
  const auto mu = spike_spectrum(s, s.P).values;
  if (!(mu[k] > 1e-14 * std::max(1.0, mu.front())))
    throw InvalidArgument("phase_transition_threshold: rank-deficient source");
  Threshold t;
  t.snr_scale = std::sqrt(s.c()) / mu[k];
  t.db = 10.0 * std::log10(t.snr_scale);
  return t;
}

inline std::vector<Threshold> phase_transition_thresholds(const UlaScenario& s) {
  std::vector<Threshold> out;
  for (std::size_t k = 0; k < s.K; ++k) out.push_back(phase_transition_threshold(s, k));
  return out;
}

inline double sinc(double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; }

enum class Spacing { widely, closely };

struct OverlapParams {
  Spacing kind = Spacing::widely;
  std::vector<double> thetas;  // widely: all angles
  double theta1 = 0.0;         // closely
  double alpha = 0.0;          // closely: theta2 = theta1 + alpha / N
  std::size_t N = 0;           // closely
  double tau = 0.0;
  double delta = 1.0;
};

/// Limits of A^H A, A^H J1^H J1 A and A^H J1^H J2 A.
struct SteeringOverlap {
  CMatrix gram;
  CMatrix j11;
  CMatrix j12;
  std::vector<double> gram_values;  // closely: 1 + sinc(alpha/2), 1 - sinc(alpha/2)
  CMatrix gram_vectors;             // closely: columns [e^{i alpha/2}, +-1] / sqrt 2
};

inline SteeringOverlap steering_overlap_theory(const OverlapParams& p) {
  SteeringOverlap out;
  const double tau = p.tau;
  if (p.kind == Spacing::widely) {
    const std::size_t k = p.thetas.size();
    out.gram = CMatrix::identity(k);
    out.j11 = CMatrix::identity(k) * cplx(tau);
    out.j12 = CMatrix(k, k);
    for (std::size_t i = 0; i < k; ++i) out.j12(i, i) = tau * std::polar(1.0, p.delta * p.thetas[i]);
    out.gram_values.assign(k, 1.0);
    out.gram_vectors = CMatrix::identity(k);
    return out;
  }
  if (!(p.alpha > 0.0) || p.N == 0) throw InvalidArgument("steering_overlap_theory: closely form needs alpha > 0 and N");
  const double a = p.alpha;
  const cplx i(0.0, 1.0);
  const double s = sinc(a / 2.0);
  const cplx half = std::polar(1.0, a / 2.0);
  const cplx b12 = (1.0 - std::exp(i * a * tau)) / (-i * a);
  const cplx b21 = (1.0 - std::exp(-i * a * tau)) / (i * a);
  const double theta2 = p.theta1 + a / static_cast<double>(p.N);
  const cplx e1 = std::polar(1.0, p.delta * p.theta1), e2 = std::polar(1.0, p.delta * theta2);
  out.gram = CMatrix{{1.0, half * s}, {std::conj(half) * s, 1.0}};
  out.j11 = CMatrix{{tau, b12}, {b21, tau}};
  out.j12 = CMatrix{{tau * e1, b12 * e2}, {b21 * e1, tau * e2}};
  out.gram_values = {1.0 + s, 1.0 - s};
  const double r = 1.0 / std::sqrt(2.0);
  out.gram_vectors = CMatrix{{half * r, half * r}, {r, -r}};
  return out;
}

/// kappa(alpha, tau, c) on the domain |sinc(alpha/2)| < 1 - sqrt(c).
inline double kappa_nonconsistency(double alpha, double tau, double c) {
  if (!(alpha > 0.0)) throw InvalidArgument("kappa_nonconsistency: alpha must be positive");
  if (!(tau >= 0.0 && tau < 1.0)) throw InvalidArgument("kappa_nonconsistency: tau outside [0, 1)");
  if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("kappa_nonconsistency: c outside (0, 1)");
  const double s = sinc(alpha / 2.0);
  if (!(std::abs(s) < 1.0 - std::sqrt(c))) throw InvalidArgument("kappa_nonconsistency: spikes not separated");
  const double as = std::abs(s);
  return tau * (4.0 - c * s * s) +
         (s - 2.0 / alpha * std::sin(alpha / 2.0 - alpha * tau)) * ((c + 3.0) * as - as * as * as);
}

}  // namespace rmt
}  // namespace doa

#endif  // DOA_RMT_RMTTHEORY_HPP
