#ifndef DOA_RMT_RNG_HPP
#define DOA_RMT_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace doa {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the independent substream for one trial.
inline constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Gaussian source for one substream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return gauss_(engine_); }

  /// Circular complex Gaussian CN(0, 1): real and imaginary parts N(0, 1/2).
  std::complex<double> cnormal() {
    const double re = gauss_(engine_);
    const double im = gauss_(engine_);
    return {re * kHalfSqrt, im * kHalfSqrt};
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  static constexpr double kHalfSqrt = 0.70710678118654752440;
  std::mt19937_64 engine_;
  std::normal_distribution<double> gauss_;
};

}  // namespace doa

#endif  // DOA_RMT_RNG_HPP
