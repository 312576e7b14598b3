#ifndef DOA_RMT_ANGLES_HPP
#define DOA_RMT_ANGLES_HPP

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "doa_rmt/errors.hpp"
#include "doa_rmt/matkern.hpp"

namespace doa {

/// Reduces x to the principal interval (-pi/delta, pi/delta].
inline double wrap_angle(double x, double delta = 1.0) {
  const double half = std::numbers::pi / delta;
  const double period = 2.0 * half;
  double r = x - period * std::ceil((x - half) / period);
  if (r <= -half) r += period;
  if (r > half) r -= period;
  return r;
}

/// |((x - y + pi/delta) mod 2 pi/delta) - pi/delta|
inline double wrapped_distance(double x, double y, double delta = 1.0) {
  return std::abs(wrap_angle(x - y, delta));
}

struct AngleMatch {
  std::vector<double> errors;          // errors[k]: signed wrapped error against truth[k]
  std::vector<std::size_t> estimate_of;  // estimate index matched to truth[k]
};

/// Pairs estimates with true angles by exhaustive min-cost assignment on the
/// wrapped distance.
inline AngleMatch match_and_wrap(std::span<const double> est, std::span<const double> truth,
                                 double delta = 1.0) {
  if (est.size() != truth.size()) throw InvalidArgument("match_and_wrap: count mismatch");
  if (truth.size() > matkern::kSmallCap) throw InvalidArgument("match_and_wrap: more than 8 angles");
  const std::size_t k = truth.size();
  std::vector<std::vector<double>> cost(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      cost[i][j] = wrapped_distance(est[j], truth[i], delta);
    }
  AngleMatch out;
  out.estimate_of = matkern::min_cost_assignment(cost);
  out.errors.resize(k);
  for (std::size_t i = 0; i < k; ++i) out.errors[i] = wrap_angle(est[out.estimate_of[i]] - truth[i], delta);
  return out;
}

}  // namespace doa

#endif  // DOA_RMT_ANGLES_HPP
