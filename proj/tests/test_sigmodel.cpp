#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "doa_rmt/matkern.hpp"
#include "doa_rmt/rmttheory.hpp"
#include "doa_rmt/rng.hpp"
#include "doa_rmt/sigmodel.hpp"
#include "scenarios.hpp"

using doa::CMatrix;
using doa::cplx;

namespace {

constexpr double kPi = std::numbers::pi;

doa::UlaScenario single_source(std::size_t n, double theta, double power) {
  doa::UlaScenario s;
  s.N = n;
  s.T = 2 * n;
  s.K = 1;
  s.thetas = {theta};
  s.P = CMatrix{{power}};
  s.subarray = {n - 1, 1, 1};
  return s;
}

}  // namespace

TEST(Steering, ZeroAngle) {
  const auto a = doa::steering_vector(0.0, 4);
  for (const cplx z : a) {
    EXPECT_DOUBLE_EQ(z.real(), 0.5);
    EXPECT_DOUBLE_EQ(z.imag(), 0.0);
  }
}

TEST(Steering, UnitNorm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (std::size_t n : {1u, 7u, 64u, 1000u}) {
    for (int rep = 0; rep < 20; ++rep) EXPECT_NEAR(doa::vector_norm(doa::steering_vector(u(rng), n)), 1.0, 1e-12);
  }
}

TEST(Steering, EntriesMatchDefinition) {
  const std::size_t n = 33;
  const double theta = 0.37;
  const auto a = doa::steering_vector(theta, n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx ref = std::exp(cplx(0.0, static_cast<double>(k) * theta)) / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(std::abs(a[k] - ref), 0.0, 1e-13);
  }
}

TEST(Steering, RotationalIdentity) {
  const std::size_t n_sensors = 16, n = 10, delta = 3;
  const double theta = 0.7;
  const auto a = doa::steering_vector(theta, n_sensors);
  const cplx rot = std::polar(1.0, static_cast<double>(delta) * theta);
  for (std::size_t i = 0; i < n; ++i) EXPECT_LE(std::abs(a[i] * rot - a[i + delta]), 1e-12);
}

TEST(Steering, PeriodicInAngle) {
  for (double theta : {0.0, 0.5, -1.25, 3.0}) {
    const auto a = doa::steering_vector(theta, 50);
    const auto b = doa::steering_vector(theta + 2.0 * kPi, 50);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LE(std::abs(a[k] - b[k]), 1e-13);
  }
}

TEST(Steering, DerivativeMatchesFiniteDifference) {
  const std::size_t n = 40;
  const double theta = 0.9, h = 1e-6;
  const auto d = doa::steering_derivative(theta, n);
  const auto ap = doa::steering_vector(theta + h, n), am = doa::steering_vector(theta - h, n);
  for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(std::abs(d[k] - (ap[k] - am[k]) / (2.0 * h)), 0.0, 1e-7);
}

TEST(Steering, RejectsEmptyArray) { EXPECT_THROW(doa::steering_vector(0.1, 0), doa::InvalidArgument); }

TEST(Scenario, ValidationRules) {
  auto s = scenarios::correlated_widely(20);
  EXPECT_NO_THROW(s.validate());
  auto bad = s;
  bad.subarray.n = 20;
  EXPECT_THROW(bad.validate(), doa::InvalidArgument);
  bad = s;
  bad.thetas[1] = kPi;
  EXPECT_THROW(bad.validate(), doa::InvalidArgument);
  bad = s;
  bad.P = CMatrix{{1.0, 2.0}, {2.0, 1.0}};
  EXPECT_THROW(bad.validate(), doa::InvalidArgument);
  bad = s;
  bad.P = CMatrix{{2.0, cplx(0.0, 1.0)}, {cplx(0.0, 1.0), 2.0}};
  EXPECT_THROW(bad.validate(), doa::InvalidArgument);
  bad = s;
  bad.T = 1;
  EXPECT_THROW(bad.validate(), doa::InvalidArgument);
  bad = s;
  bad.subarray.delta = 0;
  EXPECT_THROW(bad.validate(), doa::InvalidArgument);
}

TEST(PopulationCovariance, NoSourcesIsIdentity) {
  doa::UlaScenario s;
  s.N = 5;
  s.T = 10;
  s.K = 0;
  s.subarray = {4, 1, 1};
  EXPECT_EQ(doa::max_abs_diff(doa::population_covariance(s), CMatrix::identity(5)), 0.0);
}

TEST(PopulationCovariance, SingleSourceTopEigenvalue) {
  const auto s = single_source(32, 0.4, 3.0);
  const auto e = doa::matkern::hermitian_eig(doa::population_covariance(s));
  EXPECT_NEAR(e.values[0], 4.0, 1e-10);
  for (std::size_t i = 1; i < e.values.size(); ++i) EXPECT_NEAR(e.values[i], 1.0, 1e-10);
}

TEST(PopulationCovariance, SpikesMatchReducedProblem) {
  const auto s = scenarios::correlated_widely(80);
  const auto e = doa::matkern::hermitian_eig(doa::population_covariance(s));
  const auto red = doa::rmt::spike_spectrum(s, s.scaled_power());
  EXPECT_NEAR(e.values[0] - 1.0, red.values[0], 1e-10);
  EXPECT_NEAR(e.values[1] - 1.0, red.values[1], 1e-10);
  std::size_t unit = 0;
  for (double v : e.values) unit += std::abs(v - 1.0) <= 1e-10;
  EXPECT_EQ(unit, s.N - s.K);
  EXPECT_LE(doa::hermitian_defect(doa::population_covariance(s)), 1e-15);
}

TEST(Snapshots, ExactEmpiricalPower) {
  auto s = scenarios::correlated_widely(30);
  s.snr_scale = 1.7;
  for (std::uint64_t seed : {1ull, 2ull, 99ull, 123456789ull}) {
    const auto x = doa::generate_snapshots(s, seed);
    CMatrix g = x.signals * x.signals.adjoint();
    g *= cplx(1.0 / static_cast<double>(s.T));
    EXPECT_LE(doa::max_abs_diff(g, s.scaled_power()), 1e-10);
  }
}

TEST(Snapshots, IidModeIsNotExact) {
  auto s = scenarios::correlated_widely(30);
  s.power_mode = doa::PowerMode::iid;
  const auto x = doa::generate_snapshots(s, 5);
  CMatrix g = x.signals * x.signals.adjoint();
  g *= cplx(1.0 / static_cast<double>(s.T));
  EXPECT_GT(doa::max_abs_diff(g, s.P), 1e-6);
  EXPECT_LT(doa::max_abs_diff(g, s.P), 1.0);
}

TEST(Snapshots, Deterministic) {
  const auto s = scenarios::closely(40);
  const auto a = doa::generate_snapshots(s, 77);
  const auto b = doa::generate_snapshots(s, 77);
  ASSERT_EQ(a.data.size(), b.data.size());
  EXPECT_TRUE(std::equal(a.data.begin(), a.data.end(), b.data.begin()));
  const auto c = doa::generate_snapshots(s, 78);
  EXPECT_FALSE(std::equal(a.data.begin(), a.data.end(), c.data.begin()));
}

TEST(Snapshots, NoiseOnlyUnitVariance) {
  auto s = scenarios::uncorrelated_widely(100);
  s.snr_scale = 0.0;
  const auto x = doa::generate_snapshots(s, 11);
  double acc = 0.0, acc2 = 0.0;
  for (const cplx z : x.data) {
    acc += std::norm(z);
    acc2 += std::norm(z) * std::norm(z);
  }
  const double m = static_cast<double>(x.data.size());
  const double mean = acc / m;
  const double sd = std::sqrt(acc2 / m - mean * mean);
  EXPECT_LE(std::abs(mean - 1.0), 5.0 * sd / std::sqrt(m));
}

TEST(Snapshots, SpikesDoNotDependOnSeed) {
  const auto s = scenarios::correlated_widely(24);
  std::vector<double> first;
  for (std::uint64_t seed : {3ull, 4ull, 5ull}) {
    const auto x = doa::generate_snapshots(s, seed);
    const CMatrix a = doa::steering_matrix(s.thetas, s.N);
    CMatrix as = a * x.signals;
    CMatrix m = as * as.adjoint();
    m *= cplx(1.0 / static_cast<double>(s.T));
    const auto e = doa::matkern::hermitian_eig(doa::hermitian_part(m));
    if (first.empty()) {
      first = {e.values[0], e.values[1]};
    } else {
      EXPECT_NEAR(e.values[0], first[0], 1e-10);
      EXPECT_NEAR(e.values[1], first[1], 1e-10);
    }
  }
}

TEST(Rng, SubstreamsDiffer) {
  EXPECT_NE(doa::substream_seed(1, 0), doa::substream_seed(1, 1));
  EXPECT_NE(doa::substream_seed(1, 0), doa::substream_seed(2, 0));
  EXPECT_EQ(doa::substream_seed(9, 4), doa::substream_seed(9, 4));
}

TEST(Rng, CircularNormalMoments) {
  doa::Rng rng(42);
  const int n = 200000;
  double re2 = 0.0, im2 = 0.0, reim = 0.0;
  for (int i = 0; i < n; ++i) {
    const cplx z = rng.cnormal();
    re2 += z.real() * z.real();
    im2 += z.imag() * z.imag();
    reim += z.real() * z.imag();
  }
  EXPECT_NEAR(re2 / n, 0.5, 0.01);
  EXPECT_NEAR(im2 / n, 0.5, 0.01);
  EXPECT_NEAR(reim / n, 0.0, 0.01);
}

TEST(SampleCovariance, SingleSnapshotOuterProduct) {
  doa::SnapshotMatrix x;
  x.N = 3;
  x.T = 1;
  x.data = {cplx(1, 2), cplx(-0.5, 0.25), cplx(0, -1)};
  const CMatrix c = doa::sample_covariance(x);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(std::abs(c(i, j) - x.data[i] * std::conj(x.data[j])), 0.0, 1e-15);
}

TEST(SampleCovariance, TraceAndHermitian) {
  const auto s = scenarios::correlated_widely(20);
  const auto x = doa::generate_snapshots(s, 8);
  const CMatrix c = doa::sample_covariance(x);
  double energy = 0.0;
  for (const cplx z : x.data) energy += std::norm(z);
  EXPECT_NEAR(c.trace().real(), energy / static_cast<double>(s.T), 1e-12 * energy);
  EXPECT_EQ(doa::hermitian_defect(c), 0.0);
  const auto e = doa::matkern::hermitian_eig(c);
  EXPECT_GE(e.values.back(), -1e-10);
}

TEST(SampleCovariance, NoiseOnlyNearIdentity) {
  doa::UlaScenario s;
  s.N = 64;
  s.T = 6400;
  s.K = 0;
  s.subarray = {63, 1, 1};
  const auto x = doa::generate_snapshots(s, 21);
  const CMatrix d = doa::sample_covariance(x) - CMatrix::identity(64);
  EXPECT_LE(doa::matkern::spectral_norm(doa::hermitian_part(d)), 4.0 * std::sqrt(64.0 / 6400.0));
}

TEST(SampleCovariance, MatrixFreeOperatorAgrees) {
  const auto s = scenarios::closely(50);
  const auto x = doa::generate_snapshots(s, 4);
  const CMatrix c = doa::sample_covariance(x);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  CMatrix v(50, 3);
  for (auto& z : v.data()) z = cplx(g(rng), g(rng));
  EXPECT_LE(doa::max_abs_diff(doa::ScmOperator(x)(v), c * v), 1e-12);
}

TEST(SampleCovariance, TopSpectrumMatchesDense) {
  const auto s = scenarios::correlated_widely(120);
  const auto x = doa::generate_snapshots(s, 6);
  const auto full = doa::matkern::hermitian_eig(doa::sample_covariance(x));
  const auto top = doa::scm_top_spectrum(x, 2);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(top.values[k], full.values[k], 1e-9 * full.values[0]);
    const cplx overlap = doa::dot_conj(top.vectors.col(k), full.vectors.col(k));
    EXPECT_NEAR(std::abs(overlap), 1.0, 1e-8);
  }
}

TEST(Subarray, DegenerateWindowIsWholeMatrix) {
  const CMatrix m = doa::steering_matrix(std::vector<double>{0.1, 0.2}, 6);
  const doa::SelectionWindow w{1, 6, 0};
  EXPECT_EQ(doa::subarray_rows(m, w, doa::WindowSide::first), m);
}

TEST(Subarray, IdentityRows) {
  const CMatrix id = CMatrix::identity(6);
  const doa::SelectionWindow w{2, 3, 1};
  const CMatrix a = doa::subarray_rows(id, w, doa::WindowSide::first);
  const CMatrix b = doa::subarray_rows(id, w, doa::WindowSide::second);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_EQ(a(r, c), cplx(c == r + 1 ? 1.0 : 0.0));
      EXPECT_EQ(b(r, c), cplx(c == r + 2 ? 1.0 : 0.0));
    }
}

TEST(Subarray, SlicesMatchSelectionMatrices) {
  const std::size_t n_sensors = 12;
  const doa::SelectionWindow w{2, 7, 3};
  const CMatrix a = doa::steering_matrix(std::vector<double>{0.3, -1.1}, n_sensors);
  CMatrix j1(7, n_sensors), j2(7, n_sensors);
  for (std::size_t r = 0; r < 7; ++r) {
    j1(r, r + 1) = 1.0;
    j2(r, r + 4) = 1.0;
  }
  const CMatrix w1 = doa::subarray_rows(a, w, doa::WindowSide::first);
  const CMatrix w2 = doa::subarray_rows(a, w, doa::WindowSide::second);
  EXPECT_LE(doa::max_abs_diff(doa::adjoint_times(w1, w1), a.adjoint() * j1.adjoint() * j1 * a), 1e-14);
  EXPECT_LE(doa::max_abs_diff(doa::adjoint_times(w1, w2), a.adjoint() * j1.adjoint() * j2 * a), 1e-14);
}

TEST(Subarray, RejectsOutOfRange) {
  const CMatrix m(5, 2);
  EXPECT_THROW(doa::subarray_rows(m, {1, 5, 1}, doa::WindowSide::first), doa::InvalidArgument);
  EXPECT_THROW(doa::subarray_rows(m, {0, 2, 1}, doa::WindowSide::first), doa::InvalidArgument);
}
