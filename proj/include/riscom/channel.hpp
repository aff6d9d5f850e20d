#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "riscom/codebook.hpp"
#include "riscom/csvfmt.hpp"
#include "riscom/ris.hpp"
#include "riscom/rng.hpp"

namespace riscom {

// Source-tag channel: gamma_st = sigma * e^{j phi} * psi(theta).
struct StChannel {
  double amplitude_sigma = 1.0;
  double phase_rad = 0.0;
  Direction direction;
  Eigen::VectorXcd gamma;  // length M_RIS
};

struct TrTap {
  std::complex<double> amplitude;
  Direction departure;
  double delay_s = 0.0;  // offset within [0, delta_max - delta_min]
};

struct TrChannel {
  std::vector<TrTap> taps;
  double rician_kappa = 0.0;   // linear specular/diffuse power ratio
  double avg_power = 1.0;      // sigma_TR^2
};

struct TrChannelParams {
  int n_taps = 3;
  double kappa = 10.0;  // linear
  double sigma = 1.0;   // sqrt(average tap power)
  double az_min_deg = 33.0, az_max_deg = 57.0;
  double el_min_deg = -12.0, el_max_deg = 12.0;
  double delay_spread_s = 0.0;  // delta_max - delta_min
};

// Sampled composite signatures at the reader. Column m of a_str holds the
// filtered pulse through RIS element m; beta_n = A_STR P_n b_n.
struct CompositeSignature {
  Eigen::MatrixXcd a_str;               // K_R x M_RIS
  std::vector<Eigen::VectorXcd> betas;  // N vectors of length K_R
  Eigen::VectorXcd i_sr;                // direct source-reader path, length K_R
};

// One reader frame. y is the L x K_R model matrix in doubles; y_comp carries
// the TwoSum residual of the interference addition so that downstream
// common-row cancellation is exact (empty when the residual is zero).
struct ReceivedFrame {
  Eigen::MatrixXcd y;
  Eigen::MatrixXcd y_comp;
  double noise_variance = 0.0;
};

inline StChannel draw_st_channel(double sigma_st, const Direction& theta_st, const RisGeometry& g,
                                 RngStream& rng) {
  if (!(sigma_st >= 0.0)) throw std::invalid_argument("draw_st_channel: sigma must be >= 0");
  StChannel st;
  st.amplitude_sigma = sigma_st;
  st.phase_rad = rng.uniform(0.0, 2.0 * std::numbers::pi);
  st.direction = theta_st;
  st.gamma = steering_vector(g, theta_st) * std::polar(sigma_st, st.phase_rad);
  return st;
}

// Independent taps; amplitude is the Rician specular+diffuse mixture
// sigma * (sqrt(k/(1+k)) e^{j phi} + sqrt(1/(1+k)) g), phi uniform, g CN(0,1).
inline TrChannel draw_tr_channel(const TrChannelParams& p, RngStream& rng) {
  if (p.n_taps < 1) throw std::invalid_argument("draw_tr_channel: need at least one tap");
  if (!(p.kappa >= 0.0)) throw std::invalid_argument("draw_tr_channel: kappa must be >= 0");
  TrChannel tr;
  tr.rician_kappa = p.kappa;
  tr.avg_power = p.sigma * p.sigma;
  const double spec = std::sqrt(p.kappa / (1.0 + p.kappa));
  const double diff = std::sqrt(1.0 / (1.0 + p.kappa));
  tr.taps.reserve(p.n_taps);
  for (int q = 0; q < p.n_taps; ++q) {
    TrTap tap;
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const std::complex<double> g = rng.complex_normal_unit();
    tap.amplitude = p.sigma * (spec * std::polar(1.0, phi) + diff * g);
    tap.departure.az_deg = rng.uniform(p.az_min_deg, p.az_max_deg);
    tap.departure.el_deg = rng.uniform(p.el_min_deg, p.el_max_deg);
    tap.delay_s = rng.uniform(0.0, p.delay_spread_s);
    tr.taps.push_back(tap);
  }
  return tr;
}

/// Sampled direct path: amplitude * a(k/W - delay) on the reader grid.
inline Eigen::VectorXcd direct_path(const ProbePulse& pulse, std::complex<double> amplitude,
                                    double delay_s, int k_r) {
  if (k_r < 1) throw std::invalid_argument("direct_path: K_R must be >= 1");
  const double delay_chips = delay_s * pulse.chip_rate_w;
  if (!(delay_s >= 0.0) || delay_chips > static_cast<double>(k_r))
    throw std::invalid_argument("direct_path: delay outside the observation window");
  Eigen::VectorXcd v(k_r);
  for (int k = 0; k < k_r; ++k)
    v(k) = amplitude * pulse.chip_at(static_cast<double>(k) - delay_chips);
  return v;
}

// Assemble A_STR and the per-subarray signatures. Column m:
//   gamma_st[m] * sum_q gamma_q psi_m(theta_q) a(k/W - tau_q),
// with a(.) the analytic chip waveform (exact fractional delays).
inline CompositeSignature assemble_composite(const ProbePulse& pulse, const StChannel& st,
                                             const TrChannel& tr, const RisGeometry& g,
                                             const SubarrayPartition& part,
                                             const BeamformerSet& bf, int k_r,
                                             const Eigen::VectorXcd& i_sr) {
  if (k_r < pulse.gain())
    throw std::invalid_argument("assemble_composite: K_R must cover the pulse duration");
  if (st.gamma.size() != g.size())
    throw std::invalid_argument("assemble_composite: ST channel/geometry mismatch");
  if (i_sr.size() != 0 && i_sr.size() != k_r)
    throw std::invalid_argument("assemble_composite: direct-path length mismatch");

  CompositeSignature sig;
  sig.a_str = Eigen::MatrixXcd::Zero(k_r, g.size());
  Eigen::VectorXcd pulse_samples(k_r);
  for (const TrTap& tap : tr.taps) {
    const double delay_chips = tap.delay_s * pulse.chip_rate_w;
    for (int k = 0; k < k_r; ++k)
      pulse_samples(k) = pulse.chip_at(static_cast<double>(k) - delay_chips);
    const Eigen::VectorXcd w =
        (st.gamma.cwiseProduct(steering_vector(g, tap.departure))) * tap.amplitude;
    sig.a_str.noalias() += pulse_samples * w.transpose();
  }

  sig.betas.reserve(part.membership.size());
  for (int n = 0; n < part.n_subarrays(); ++n) {
    const auto& ids = part.membership[n];
    if (static_cast<int>(ids.size()) != bf.vectors[n].size())
      throw std::invalid_argument("assemble_composite: beamformer/subarray size mismatch");
    Eigen::VectorXcd beta = Eigen::VectorXcd::Zero(k_r);
    for (std::size_t j = 0; j < ids.size(); ++j)
      beta += sig.a_str.col(ids[j]) * bf.vectors[n](static_cast<int>(j));
    sig.betas.push_back(std::move(beta));
  }

  sig.i_sr = (i_sr.size() == k_r) ? i_sr : Eigen::VectorXcd::Zero(k_r);
  return sig;
}

inline CompositeSignature assemble_composite(const ProbePulse& pulse, const StChannel& st,
                                             const TrChannel& tr, const RisGeometry& g,
                                             const SubarrayPartition& part,
                                             const BeamformerSet& bf, int k_r) {
  return assemble_composite(pulse, st, tr, g, part, bf, k_r, Eigen::VectorXcd());
}

/// sigma^2 = P * G * B(theta_bar) * sigma_TR^2 / (L * N * snr).
inline double noise_variance_from_snr(double snr_linear, double pulse_power, int gain_g,
                                      double beampattern_at_target, double sigma_tr_sq,
                                      int length_l, int n_subarrays) {
  if (!(snr_linear > 0.0)) throw std::invalid_argument("noise_variance_from_snr: snr must be > 0");
  return pulse_power * gain_g * beampattern_at_target * sigma_tr_sq /
         (static_cast<double>(length_l) * n_subarrays * snr_linear);
}

namespace detail {

// Knuth TwoSum: s + err == a + b exactly.
inline void two_sum(double a, double b, double& s, double& err) {
  s = a + b;
  const double bb = s - a;
  err = (a - (s - bb)) + (b - bb);
}

inline void add_noise(Eigen::MatrixXcd& m, double sigma2, RngStream& rng) {
  const double scale = std::sqrt(sigma2);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) += scale * rng.complex_normal_unit();
}

// Append the interference row with per-entry TwoSum; comp keeps the rounding
// residual so the matched filter can cancel the common row exactly.
inline void add_interference_compensated(Eigen::MatrixXcd& y, Eigen::MatrixXcd& comp,
                                         const Eigen::VectorXcd& i_sr) {
  if (i_sr.size() == 0 || i_sr.isZero(0.0)) {
    comp.resize(0, 0);
    return;
  }
  comp.resize(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      double sre, ere, sim, eim;
      two_sum(y(r, c).real(), i_sr(c).real(), sre, ere);
      two_sum(y(r, c).imag(), i_sr(c).imag(), sim, eim);
      y(r, c) = {sre, sim};
      comp(r, c) = {ere, eim};
    }
  }
}

}  // namespace detail

// Y = X A_STR^H + 1_L i_SR^H + Omega, noise entries iid CN(0, sigma^2).
// Noise is drawn row-major before the interference row is added.
inline ReceivedFrame synthesize_frame(const SpaceTimeCode& code, const CompositeSignature& sig,
                                      double sigma2, RngStream& rng) {
  if (code.matrix.cols() != sig.a_str.cols())
    throw std::invalid_argument("synthesize_frame: code/signature element-count mismatch");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("synthesize_frame: sigma^2 must be >= 0");
  ReceivedFrame frame;
  frame.noise_variance = sigma2;
  frame.y.noalias() = code.matrix * sig.a_str.adjoint();
  if (sigma2 > 0.0) detail::add_noise(frame.y, sigma2, rng);
  detail::add_interference_compensated(frame.y, frame.y_comp, sig.i_sr);
  return frame;
}

// Same model evaluated through the encoding's rank-N factorization
// X A_STR^H = sum_n c_n beta_n^H; agrees with synthesize_frame to rounding.
// This is the Monte Carlo engine's path (O(L K N) instead of O(L K M_RIS)).
inline ReceivedFrame synthesize_frame_fast(const Codebook& cb, const SpaceTimeCode& code,
                                           const CompositeSignature& sig, double sigma2,
                                           RngStream& rng) {
  if (static_cast<int>(code.assignment.size()) != static_cast<int>(sig.betas.size()))
    throw std::invalid_argument("synthesize_frame_fast: assignment/beta count mismatch");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("synthesize_frame_fast: sigma^2 must be >= 0");
  const int k_r = sig.betas.empty() ? static_cast<int>(sig.i_sr.size())
                                    : static_cast<int>(sig.betas[0].size());
  ReceivedFrame frame;
  frame.noise_variance = sigma2;
  frame.y = Eigen::MatrixXcd::Zero(cb.length_l, k_r);
  for (std::size_t n = 0; n < sig.betas.size(); ++n)
    frame.y.noalias() += cb.codewords.col(code.assignment[n] - 1) * sig.betas[n].adjoint();
  if (sigma2 > 0.0) detail::add_noise(frame.y, sigma2, rng);
  detail::add_interference_compensated(frame.y, frame.y_comp, sig.i_sr);
  return frame;
}

/// Columnar dump of a TR channel draw for cross-implementation regression.
inline void write_tr_channel_csv(const TrChannel& tr, std::ostream& os) {
  os << "tap,amp_re,amp_im,az_deg,el_deg,delay_s\n";
  for (std::size_t q = 0; q < tr.taps.size(); ++q) {
    const TrTap& t = tr.taps[q];
    os << q << ',' << format_double(t.amplitude.real()) << ',' << format_double(t.amplitude.imag())
       << ',' << format_double(t.departure.az_deg) << ',' << format_double(t.departure.el_deg)
       << ',' << format_double(t.delay_s) << '\n';
  }
}

}  // namespace riscom
