#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace riscom {

// Named substream per stochastic entity. Monte Carlo and semi-analytic runs
// draw the channel from the same (stream, substream) pair, so they see
// identical realizations; substream = trial/draw index, which also makes the
// draw sequence independent of the thread count.
enum class Stream : std::uint64_t {
  st_phase = 0x51,
  tr_taps = 0x52,
  noise = 0x53,
  message = 0x54,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

class RngStream {
 public:
  RngStream(std::uint64_t seed, Stream stream, std::uint64_t substream = 0)
      : engine_(derive_seed(seed, static_cast<std::uint64_t>(stream), substream)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal (Box-Muller). Stateless: two uniforms per value.
  double normal() {
    const double u1 = positive_uniform();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Circularly symmetric complex normal with E|z|^2 = 1.
  std::complex<double> complex_normal_unit() {
    const double u1 = positive_uniform();
    const double u2 = uniform01();
    const double r = std::sqrt(-std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

 private:
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t substream) {
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ stream);
    h = detail::splitmix64(h ^ substream);
    return h;
  }

  double positive_uniform() {
    double u = uniform01();
    while (u == 0.0) u = uniform01();
    return u;
  }

  std::mt19937_64 engine_;
};

}  // namespace riscom
