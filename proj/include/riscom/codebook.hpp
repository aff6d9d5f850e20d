#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace riscom {

using BigInt = boost::multiprecision::cpp_int;

// Slow-time codebook: the L-1 non-DC columns of the L-point DFT basis.
// Unit-modulus, orthogonal to 1_L and to each other, ||u||^2 = L.
struct Codebook {
  int length_l = 0;
  Eigen::MatrixXcd codewords;  // L x (L-1); column j holds u_{j+1}

  Eigen::VectorXcd ones_direction() const { return Eigen::VectorXcd::Ones(length_l); }
  // 1-based codeword access, matching subset indices.
  Eigen::VectorXcd codeword(int index) const { return codewords.col(index - 1); }
};

// Unordered message: N distinct codeword indices in {1, ..., L-1}, ascending.
struct MessageSubset {
  std::vector<int> indices;
  bool operator==(const MessageSubset&) const = default;
};

// Phase-coded probing pulse: G unit-modulus chips at rate W, duration G/W.
struct ProbePulse {
  std::vector<std::complex<double>> chips;
  double chip_rate_w = 0.0;

  int gain() const { return static_cast<int>(chips.size()); }
  double duration() const { return static_cast<double>(chips.size()) / chip_rate_w; }

  // a(t) at t = u/W chip units; avoids the t*W round trip that can misplace
  // grid-aligned samples by one ulp.
  std::complex<double> chip_at(double u) const {
    if (u < 0.0 || u >= static_cast<double>(chips.size())) return {0.0, 0.0};
    return chips[static_cast<std::size_t>(u)];
  }

  // a(t): piecewise-constant chip waveform on [0, G/W), zero elsewhere.
  std::complex<double> sample(double t) const { return chip_at(t * chip_rate_w); }
};

inline Codebook build_codebook(int length_l) {
  if (length_l < 2) throw std::invalid_argument("build_codebook: L must be >= 2");
  Codebook cb;
  cb.length_l = length_l;
  cb.codewords.resize(length_l, length_l - 1);
  for (int ell = 1; ell < length_l; ++ell) {
    for (int k = 0; k < length_l; ++k) {
      // reduce (ell*k) mod L before the trig call: keeps phases in [0, 2pi)
      const long long r = (static_cast<long long>(ell) * k) % length_l;
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / length_l;
      cb.codewords(k, ell - 1) = std::polar(1.0, angle);
    }
  }
  return cb;
}

/// Exact binomial coefficient C(n, k).
inline BigInt binomial(long n, long k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt c = 1;
  for (long i = 1; i <= k; ++i) {
    c *= (n - k + i);
    c /= i;
  }
  return c;
}

namespace detail {

inline void check_subset(const MessageSubset& s, int length_l, int n_active) {
  if (static_cast<int>(s.indices.size()) != n_active)
    throw std::invalid_argument("subset: expected " + std::to_string(n_active) + " indices");
  int prev = 0;
  for (int v : s.indices) {
    if (v <= prev || v > length_l - 1)
      throw std::invalid_argument("subset: indices must be strictly increasing in [1, L-1]");
    prev = v;
  }
}

// floor(log2 c) plus the fractional part, accurate to double precision.
inline double log2_big(const BigInt& c) {
  if (c <= 0) throw std::invalid_argument("log2_big: argument must be positive");
  const unsigned long top = boost::multiprecision::msb(c);
  if (top <= 52) return std::log2(c.convert_to<double>());
  const unsigned long shift = top - 52;
  const double mantissa = BigInt(c >> shift).convert_to<double>();
  return std::log2(mantissa) + static_cast<double>(shift);
}

}  // namespace detail

// Lexicographic rank of a subset in the combinatorial number system over
// {1, ..., L-1} choose N. Inverse of subset_unrank.
inline BigInt subset_rank(const MessageSubset& subset, int length_l, int n_active) {
  detail::check_subset(subset, length_l, n_active);
  const int n = length_l - 1;
  BigInt rank = 0;
  int prev = 0;
  for (int i = 0; i < n_active; ++i) {
    for (int v = prev + 1; v < subset.indices[i]; ++v)
      rank += binomial(n - v, n_active - 1 - i);
    prev = subset.indices[i];
  }
  return rank;
}

inline MessageSubset subset_unrank(BigInt rank, int length_l, int n_active) {
  if (n_active < 1 || n_active > length_l - 1)
    throw std::invalid_argument("subset_unrank: need 1 <= N <= L-1");
  if (rank < 0 || rank >= binomial(length_l - 1, n_active))
    throw std::out_of_range("subset_unrank: rank outside [0, C(L-1,N))");
  const int n = length_l - 1;
  MessageSubset s;
  s.indices.reserve(n_active);
  int v = 1;
  for (int i = 0; i < n_active; ++i) {
    while (true) {
      const BigInt block = binomial(n - v, n_active - 1 - i);
      if (rank < block) break;
      rank -= block;
      ++v;
    }
    s.indices.push_back(v);
    ++v;
  }
  return s;
}

/// Transmission rate (1/L) log2 C(L-1, N) in bits per PRI.
inline double transmission_rate(int length_l, int n_active) {
  if (n_active < 1 || n_active > length_l - 1)
    throw std::invalid_argument("transmission_rate: need 1 <= N <= L-1");
  const BigInt c = binomial(length_l - 1, n_active);
  if (c == 1) return 0.0;
  return detail::log2_big(c) / static_cast<double>(length_l);
}

/// Usable payload: floor(log2 C(L-1, N)) bits per frame.
inline int bits_per_frame(int length_l, int n_active) {
  if (n_active < 1 || n_active > length_l - 1)
    throw std::invalid_argument("bits_per_frame: need 1 <= N <= L-1");
  const BigInt c = binomial(length_l - 1, n_active);
  return static_cast<int>(boost::multiprecision::msb(c));
}

// Precomputed rank/unrank tables for one (L, N); used by the Monte Carlo
// engine where per-trial binomial recomputation would dominate.
class SubsetCodec {
 public:
  SubsetCodec(int length_l, int n_active) : length_l_(length_l), n_active_(n_active) {
    if (n_active < 1 || n_active > length_l - 1)
      throw std::invalid_argument("SubsetCodec: need 1 <= N <= L-1");
    const int n = length_l - 1;
    choose_.assign(n + 1, std::vector<BigInt>(n_active + 1, 0));
    for (int i = 0; i <= n; ++i) {
      choose_[i][0] = 1;
      for (int j = 1; j <= std::min(i, n_active); ++j) choose_[i][j] = binomial(i, j);
    }
    n_bits_ = bits_per_frame(length_l, n_active);
  }

  int payload_bits() const { return n_bits_; }
  int length() const { return length_l_; }
  int active() const { return n_active_; }

  BigInt rank(const MessageSubset& s) const {
    detail::check_subset(s, length_l_, n_active_);
    const int n = length_l_ - 1;
    BigInt r = 0;
    int prev = 0;
    for (int i = 0; i < n_active_; ++i) {
      for (int v = prev + 1; v < s.indices[i]; ++v) r += choose_[n - v][n_active_ - 1 - i];
      prev = s.indices[i];
    }
    return r;
  }

  MessageSubset unrank(BigInt r) const {
    const int n = length_l_ - 1;
    if (r < 0 || r >= choose_[n][n_active_])
      throw std::out_of_range("SubsetCodec::unrank: rank outside [0, C(L-1,N))");
    MessageSubset s;
    s.indices.reserve(n_active_);
    int v = 1;
    for (int i = 0; i < n_active_; ++i) {
      while (true) {
        const BigInt block = choose_[n - v][n_active_ - 1 - i];
        if (r < block) break;
        r -= block;
        ++v;
      }
      s.indices.push_back(v);
      ++v;
    }
    return s;
  }

 private:
  int length_l_;
  int n_active_;
  int n_bits_;
  std::vector<std::vector<BigInt>> choose_;
};

/// Maximal-length LFSR bit sequence of period 2^r - 1. Taps are the exponents
/// of the feedback polynomial x^r + ... + 1 (r included, constant implied).
inline std::vector<int> msequence_bits(int register_length, const std::vector<int>& taps,
                                       std::uint32_t initial_state) {
  if (register_length < 2 || register_length > 24)
    throw std::invalid_argument("msequence: register length must lie in [2, 24]");
  const std::uint32_t mask = (1u << register_length) - 1u;
  if ((initial_state & mask) == 0)
    throw std::invalid_argument("msequence: initial state must be nonzero");
  // Polynomial x^r + sum x^t + 1 gives the recurrence s_n = XOR_d s_{n-d}
  // over delays d in {r} u {r - t : t in taps, t < r}.
  std::vector<bool> delay(register_length + 1, false);
  bool has_degree_term = false;
  for (int t : taps) {
    if (t < 1 || t > register_length)
      throw std::invalid_argument("msequence: tap exponents must lie in [1, r]");
    if (t == register_length) {
      has_degree_term = true;
      continue;
    }
    if (delay[register_length - t]) throw std::invalid_argument("msequence: duplicate tap");
    delay[register_length - t] = true;
  }
  if (!has_degree_term) throw std::invalid_argument("msequence: taps must include the degree term");
  delay[register_length] = true;

  const long period = (1L << register_length) - 1;
  // Fibonacci LFSR. State holds the next r outputs: bit (r-1) is emitted
  // first, so an all-ones seed emits r ones; s_{n-d} sits at state bit d-1.
  std::vector<int> out;
  out.reserve(period);
  std::uint32_t state = initial_state & mask;
  for (long step = 0; step < period; ++step) {
    out.push_back(static_cast<int>((state >> (register_length - 1)) & 1u));
    std::uint32_t fb = 0;
    for (int d = 1; d <= register_length; ++d)
      if (delay[d]) fb ^= (state >> (d - 1)) & 1u;
    state = ((state << 1) | fb) & mask;
    if (state == (initial_state & mask) && step + 1 < period)
      throw std::invalid_argument("msequence: taps are not primitive (period " +
                                  std::to_string(step + 1) + " < " + std::to_string(period) + ")");
  }
  if (state != (initial_state & mask))
    throw std::invalid_argument("msequence: taps are not primitive (no return to seed)");
  return out;
}

/// BPSK probing pulse from an m-sequence: G = 2^r - 1 chips of +/-1.
inline ProbePulse msequence_pulse(int register_length, const std::vector<int>& taps,
                                  std::uint32_t initial_state, double chip_rate_w) {
  if (!(chip_rate_w > 0.0)) throw std::invalid_argument("msequence_pulse: chip rate must be > 0");
  const std::vector<int> bits = msequence_bits(register_length, taps, initial_state);
  ProbePulse p;
  p.chip_rate_w = chip_rate_w;
  p.chips.reserve(bits.size());
  for (int b : bits) p.chips.emplace_back(b ? -1.0 : 1.0, 0.0);
  return p;
}

}  // namespace riscom
