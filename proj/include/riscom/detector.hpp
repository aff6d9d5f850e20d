#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "riscom/channel.hpp"
#include "riscom/codebook.hpp"

namespace riscom {

// Normalized matched-filter energies T_l = ||u_l^H Y||^2 / (L sigma^2),
// in codeword order (entry l-1 belongs to u_l).
struct EnergyStatistics {
  Eigen::VectorXd t_values;
  double normalization = 1.0;
};

struct OpCount {
  long long complex_macs = 0;
};

// Fixed-width message payload: value < 2^n_bits.
struct Message {
  int n_bits = 0;
  BigInt value = 0;
};

namespace detail {

// Round a1 + a2 - b1 - b2 to double via error-free distillation (VecSum
// passes). Because each (hi, lo) pair is a TwoSum split, the result depends
// only on the exact value of the sum, which removes any common row vector
// from the frame exactly, whatever its magnitude.
inline double distilled_diff(double a1, double a2, double b1, double b2) {
  double v0 = a1, v1 = a2, v2 = -b1, v3 = -b2;
  for (int pass = 0; pass < 4; ++pass) {
    double s, e;
    two_sum(v0, v1, s, e);
    v0 = e;
    two_sum(s, v2, s, e);
    v1 = e;
    two_sum(s, v3, s, e);
    v2 = e;
    v3 = s;
  }
  return ((v0 + v1) + v2) + v3;
}

}  // namespace detail

// Matched-filter bank over the codebook. The source interference enters
// every PRI row identically and every codeword is orthogonal to 1_L, so the
// bank first removes the common row (difference against row 0 of the
// received samples, carried at full precision by the frame's compensation
// matrix); algebraically a no-op, numerically it makes the cancellation
// exact. When sigma^2 = 0 the raw energies are returned.
inline EnergyStatistics matched_filter_energies(const ReceivedFrame& frame, const Codebook& cb,
                                                OpCount* ops = nullptr) {
  const int length_l = cb.length_l;
  const int k_r = static_cast<int>(frame.y.cols());
  if (frame.y.rows() != length_l)
    throw std::invalid_argument("matched_filter_energies: frame/codebook length mismatch");

  Eigen::MatrixXcd d(length_l, k_r);
  if (frame.y_comp.size() == 0) {
    d = frame.y.rowwise() - frame.y.row(0);
  } else {
    for (int r = 0; r < length_l; ++r) {
      for (int c = 0; c < k_r; ++c) {
        d(r, c) = {detail::distilled_diff(frame.y(r, c).real(), frame.y_comp(r, c).real(),
                                          frame.y(0, c).real(), frame.y_comp(0, c).real()),
                   detail::distilled_diff(frame.y(r, c).imag(), frame.y_comp(r, c).imag(),
                                          frame.y(0, c).imag(), frame.y_comp(0, c).imag())};
      }
    }
  }

  EnergyStatistics stats;
  stats.normalization =
      frame.noise_variance > 0.0 ? static_cast<double>(length_l) * frame.noise_variance : 1.0;
  const Eigen::MatrixXcd v = cb.codewords.adjoint() * d;  // (L-1) x K_R
  stats.t_values = v.rowwise().squaredNorm() / stats.normalization;
  if (ops) ops->complex_macs += static_cast<long long>(length_l - 1) * length_l * k_r;
  return stats;
}

// Loop reference for the Eigen product above; exposes the exact complex
// multiply-accumulate count, which is (L-1) * L * K_R.
inline EnergyStatistics matched_filter_energies_counted(const ReceivedFrame& frame,
                                                        const Codebook& cb, OpCount& ops) {
  const int length_l = cb.length_l;
  const int k_r = static_cast<int>(frame.y.cols());
  if (frame.y.rows() != length_l)
    throw std::invalid_argument("matched_filter_energies: frame/codebook length mismatch");
  Eigen::MatrixXcd d = frame.y.rowwise() - frame.y.row(0);
  if (frame.y_comp.size() != 0) {
    for (int r = 0; r < length_l; ++r)
      for (int c = 0; c < k_r; ++c)
        d(r, c) = {detail::distilled_diff(frame.y(r, c).real(), frame.y_comp(r, c).real(),
                                          frame.y(0, c).real(), frame.y_comp(0, c).real()),
                   detail::distilled_diff(frame.y(r, c).imag(), frame.y_comp(r, c).imag(),
                                          frame.y(0, c).imag(), frame.y_comp(0, c).imag())};
  }
  EnergyStatistics stats;
  stats.normalization =
      frame.noise_variance > 0.0 ? static_cast<double>(length_l) * frame.noise_variance : 1.0;
  stats.t_values.resize(length_l - 1);
  for (int j = 0; j < length_l - 1; ++j) {
    double energy = 0.0;
    for (int c = 0; c < k_r; ++c) {
      std::complex<double> acc(0.0, 0.0);
      for (int r = 0; r < length_l; ++r) {
        acc += std::conj(cb.codewords(r, j)) * d(r, c);
        ++ops.complex_macs;
      }
      energy += std::norm(acc);
    }
    stats.t_values(j) = energy / stats.normalization;
  }
  return stats;
}

// Indices of the N largest energies; ties broken toward the smaller
// codeword index. Output ascending (an unordered subset).
inline MessageSubset detect_subset(const EnergyStatistics& stats, int n_active) {
  const int n_codewords = static_cast<int>(stats.t_values.size());
  if (n_active < 1 || n_active > n_codewords)
    throw std::invalid_argument("detect_subset: N out of range");
  std::vector<int> order(n_codewords);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (stats.t_values(a) != stats.t_values(b)) return stats.t_values(a) > stats.t_values(b);
    return a < b;
  });
  MessageSubset s;
  s.indices.reserve(n_active);
  for (int i = 0; i < n_active; ++i) s.indices.push_back(order[i] + 1);
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

/// Map a fixed-width payload to a subset via unranking.
inline MessageSubset encode_message(const Message& msg, const SubsetCodec& codec) {
  if (msg.n_bits != codec.payload_bits())
    throw std::invalid_argument("encode_message: payload width mismatch");
  if (msg.value < 0 || (msg.value >> msg.n_bits) != 0)
    throw std::invalid_argument("encode_message: value outside the payload range");
  return codec.unrank(msg.value);
}

// Inverse bit map. Subsets whose rank falls beyond the 2^bits payload region
// decode to an erasure (nullopt), never to a wrapped-around message.
inline std::optional<Message> decode_message(const MessageSubset& subset, const SubsetCodec& codec) {
  const BigInt rank = codec.rank(subset);
  if ((rank >> codec.payload_bits()) != 0) return std::nullopt;
  return Message{codec.payload_bits(), rank};
}

inline std::optional<Message> decode_message(const MessageSubset& subset, int length_l,
                                             int n_active) {
  return decode_message(subset, SubsetCodec(length_l, n_active));
}

}  // namespace riscom
