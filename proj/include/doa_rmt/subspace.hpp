#ifndef DOA_RMT_SUBSPACE_HPP
#define DOA_RMT_SUBSPACE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doa_rmt/angles.hpp"
#include "doa_rmt/cmatrix.hpp"
#include "doa_rmt/matkern.hpp"
#include "doa_rmt/sigmodel.hpp"

namespace doa {

inline constexpr double kMaxCondition = 1e12;

/// phi1 = U^H J1^H J1 U, phi2 = U^H J1^H J2 U.
struct SubspacePair {
  CMatrix phi1;
  CMatrix phi2;
  double cond1 = 0.0;
};

/// 2-norm condition number; infinity for a singular matrix.
inline double condition_number(const CMatrix& m) {
  if (m.empty()) return 1.0;
  const auto s = matkern::hermitian_eig(hermitian_part(adjoint_times(m, m)));
  const double hi = s.values.front(), lo = s.values.back();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(hi / lo);
}

inline SubspacePair build_subspace_pair(const CMatrix& u, const SelectionWindow& w) {
  const std::size_t k = u.cols();
  if (max_abs_diff(adjoint_times(u, u), CMatrix::identity(k)) > 1e-8)
    throw InvalidArgument("build_subspace_pair: columns are not orthonormal");
  const CMatrix w1 = subarray_rows(u, w, WindowSide::first);
  const CMatrix w2 = subarray_rows(u, w, WindowSide::second);
  SubspacePair p;
  p.phi1 = hermitian_part(adjoint_times(w1, w1));
  p.phi2 = adjoint_times(w1, w2);
  p.cond1 = condition_number(p.phi1);
  return p;
}

/// arg(eig(phi1^{-1} phi2)) / delta in the principal interval, ascending.
/// Throws NumericalError when cond(phi1) exceeds 1e12.
inline std::vector<double> rotation_angles(const CMatrix& phi1, const CMatrix& phi2, double delta) {
  const double cond = condition_number(phi1);
  if (!(cond <= kMaxCondition)) throw NumericalError("rotation_angles: phi1 is numerically singular");
  const CMatrix phi = LuDecomposition(phi1).solve(phi2);
  const auto eig = matkern::general_eig_small(phi);
  std::vector<double> angles;
  angles.reserve(eig.values.size());
  for (const cplx z : eig.values) angles.push_back(wrap_angle(std::arg(z) / delta, delta));
  std::sort(angles.begin(), angles.end());
  return angles;
}

}  // namespace doa

#endif  // DOA_RMT_SUBSPACE_HPP
