#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "riscom/codebook.hpp"

namespace riscom {

struct RisGeometry {
  int rows = 15;
  int cols = 15;
  double element_spacing = 0.5;  // in wavelengths

  int size() const { return rows * cols; }
};

struct Direction {
  double az_deg = 0.0;
  double el_deg = 0.0;
};

// Disjoint cover of {0, ..., M_RIS-1} by N equal-size index sets; element
// indices are row-major over the grid, subarrays tiled row-major.
struct SubarrayPartition {
  std::vector<std::vector<int>> membership;

  int n_subarrays() const { return static_cast<int>(membership.size()); }
  int subarray_size() const { return membership.empty() ? 0 : static_cast<int>(membership[0].size()); }
};

struct BeamformerSet {
  std::vector<Eigen::VectorXcd> vectors;  // one length-M vector per subarray
};

// RIS response over one frame: L x M_RIS unit-modulus matrix, built as
// X = sum_n c_n (P_n b_n)^H with c_n the codeword assigned to subarray n.
struct SpaceTimeCode {
  Eigen::MatrixXcd matrix;      // L x M_RIS
  std::vector<int> assignment;  // codeword index (1-based) per subarray
};

namespace detail {

inline void check_direction(const Direction& d) {
  if (!(d.az_deg >= -90.0 && d.az_deg <= 90.0) || !(d.el_deg >= -90.0 && d.el_deg <= 90.0))
    throw std::invalid_argument("direction: azimuth/elevation must lie in [-90, 90] degrees");
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace detail

// Uniform-planar-array steering vector. Element at grid row r, column c
// (row-major index m = r*cols + c) has phase
//   2*pi*spacing * (c*sin(az)*cos(el) + r*sin(el)),
// columns along the azimuth axis, rows along elevation. Broadside maps to
// the all-ones vector.
inline Eigen::VectorXcd steering_vector(const RisGeometry& g, const Direction& d) {
  detail::check_direction(d);
  if (g.rows < 1 || g.cols < 1 || !(g.element_spacing > 0.0))
    throw std::invalid_argument("steering_vector: bad geometry");
  const double az = detail::deg2rad(d.az_deg);
  const double el = detail::deg2rad(d.el_deg);
  const double kd = 2.0 * std::numbers::pi * g.element_spacing;
  const double ax = kd * std::sin(az) * std::cos(el);
  const double ay = kd * std::sin(el);
  Eigen::VectorXcd v(g.size());
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      v(r * g.cols + c) = std::polar(1.0, c * ax + r * ay);
  return v;
}

/// Partition the grid into tiles_per_side^2 contiguous square subarrays.
inline SubarrayPartition square_partition(const RisGeometry& g, int tiles_per_side) {
  if (tiles_per_side < 1) throw std::invalid_argument("square_partition: tiles_per_side must be >= 1");
  if (g.rows % tiles_per_side != 0 || g.cols % tiles_per_side != 0)
    throw std::invalid_argument("square_partition: grid not divisible into " +
                                std::to_string(tiles_per_side) + " tiles per side");
  const int br = g.rows / tiles_per_side;
  const int bc = g.cols / tiles_per_side;
  SubarrayPartition part;
  part.membership.reserve(static_cast<std::size_t>(tiles_per_side) * tiles_per_side);
  for (int tr = 0; tr < tiles_per_side; ++tr) {
    for (int tc = 0; tc < tiles_per_side; ++tc) {
      std::vector<int> ids;
      ids.reserve(static_cast<std::size_t>(br) * bc);
      for (int i = 0; i < br; ++i)
        for (int j = 0; j < bc; ++j)
          ids.push_back((tr * br + i) * g.cols + (tc * bc + j));
      part.membership.push_back(std::move(ids));
    }
  }
  return part;
}

// Matched design: b_n is the restriction of psi(theta_st) .* psi(theta_bar)
// to subarray n. Unconjugated, so that B(theta_bar) attains L*N*M^2 under a
// unit-amplitude source channel aligned with theta_st.
inline BeamformerSet matched_beamformers(const SubarrayPartition& part, const RisGeometry& g,
                                         const Direction& theta_st, const Direction& theta_bar) {
  const Eigen::VectorXcd v =
      steering_vector(g, theta_st).cwiseProduct(steering_vector(g, theta_bar));
  BeamformerSet bf;
  bf.vectors.reserve(part.membership.size());
  for (const auto& ids : part.membership) {
    Eigen::VectorXcd b(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) b(static_cast<int>(j)) = v(ids[j]);
    bf.vectors.push_back(std::move(b));
  }
  return bf;
}

// Assemble X = sum_n c_n (P_n b_n)^H. assignment_order is a permutation of
// {0,...,N-1}: subarray n carries codeword subset.indices[assignment_order[n]].
inline SpaceTimeCode space_time_code(const Codebook& cb, const MessageSubset& subset,
                                     const std::vector<int>& assignment_order,
                                     const SubarrayPartition& part, const BeamformerSet& bf) {
  const int n_sub = part.n_subarrays();
  if (static_cast<int>(subset.indices.size()) != n_sub)
    throw std::invalid_argument("space_time_code: subset size must equal the subarray count");
  if (static_cast<int>(assignment_order.size()) != n_sub ||
      static_cast<int>(bf.vectors.size()) != n_sub)
    throw std::invalid_argument("space_time_code: size mismatch");
  std::vector<bool> used(n_sub, false);
  for (int p : assignment_order) {
    if (p < 0 || p >= n_sub || used[p])
      throw std::invalid_argument("space_time_code: assignment must be a permutation of the subset");
    used[p] = true;
  }

  const int length_l = cb.length_l;
  int m_ris = 0;
  for (const auto& ids : part.membership) m_ris += static_cast<int>(ids.size());

  SpaceTimeCode code;
  code.assignment.resize(n_sub);
  code.matrix.resize(length_l, m_ris);
  for (int n = 0; n < n_sub; ++n) {
    const int cw = subset.indices[assignment_order[n]];
    if (cw < 1 || cw > length_l - 1)
      throw std::invalid_argument("space_time_code: codeword index out of range");
    code.assignment[n] = cw;
    const auto& ids = part.membership[n];
    if (static_cast<int>(ids.size()) != bf.vectors[n].size())
      throw std::invalid_argument("space_time_code: beamformer/subarray size mismatch");
    for (std::size_t j = 0; j < ids.size(); ++j)
      code.matrix.col(ids[j]) = cb.codewords.col(cw - 1) * std::conj(bf.vectors[n](static_cast<int>(j)));
  }
  return code;
}

inline std::vector<int> identity_assignment(int n_sub) {
  std::vector<int> a(n_sub);
  for (int i = 0; i < n_sub; ++i) a[i] = i;
  return a;
}

// Frame energy toward theta, codeword-free form:
//   B(theta) = L * sum_n |(gamma_st .* psi(theta))^H P_n b_n|^2.
inline double beampattern_closed(const BeamformerSet& bf, const SubarrayPartition& part,
                                 const RisGeometry& g, const Eigen::VectorXcd& gamma_st,
                                 const Direction& theta, int frame_length_l) {
  if (gamma_st.size() != g.size())
    throw std::invalid_argument("beampattern: gamma_st length must equal the element count");
  if (part.n_subarrays() != static_cast<int>(bf.vectors.size()))
    throw std::invalid_argument("beampattern: partition/beamformer mismatch");
  const Eigen::VectorXcd w = gamma_st.cwiseProduct(steering_vector(g, theta));
  double b = 0.0;
  for (int n = 0; n < part.n_subarrays(); ++n) {
    const auto& ids = part.membership[n];
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t j = 0; j < ids.size(); ++j)
      acc += std::conj(w(ids[j])) * bf.vectors[n](static_cast<int>(j));
    b += std::norm(acc);
  }
  return static_cast<double>(frame_length_l) * b;
}

/// Validation route: B(theta) = ||X (gamma_st .* psi(theta))||^2 from an explicit code matrix.
inline double beampattern_explicit(const SpaceTimeCode& code, const RisGeometry& g,
                                   const Eigen::VectorXcd& gamma_st, const Direction& theta) {
  if (gamma_st.size() != code.matrix.cols())
    throw std::invalid_argument("beampattern: gamma_st length must equal the element count");
  const Eigen::VectorXcd w = gamma_st.cwiseProduct(steering_vector(g, theta));
  return (code.matrix * w).squaredNorm();
}

inline std::vector<double> beampattern_grid(const BeamformerSet& bf, const SubarrayPartition& part,
                                            const RisGeometry& g, const Eigen::VectorXcd& gamma_st,
                                            const std::vector<Direction>& directions,
                                            int frame_length_l) {
  std::vector<double> out;
  out.reserve(directions.size());
  for (const auto& d : directions)
    out.push_back(beampattern_closed(bf, part, g, gamma_st, d, frame_length_l));
  return out;
}

}  // namespace riscom
