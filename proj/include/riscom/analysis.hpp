#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "riscom/channel.hpp"
#include "riscom/codebook.hpp"
#include "riscom/config.hpp"
#include "riscom/detector.hpp"
#include "riscom/ris.hpp"
#include "riscom/rng.hpp"
#include "riscom/specfun.hpp"

namespace riscom {

enum class PeMethod { semi_analytic, monte_carlo };

inline const char* to_string(PeMethod m) {
  return m == PeMethod::semi_analytic ? "semi-analytic" : "monte-carlo";
}

struct PeEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long long n = 0;  // trials or channel draws
  PeMethod method = PeMethod::monte_carlo;
};

// Probability that every active-codeword statistic beats the best inactive
// one, conditioned on the signature energies:
//   integral over x of prod_n Q_{K_R}(sqrt(2 L |beta_n|^2 / sigma^2), sqrt(2x))
//     * (L-N-1) f(x) F(x)^{L-N-2} dx,
// f, F the unit-scale Erlang(K_R) density/CDF. L = N+1 has no competitors
// and returns 1 outright.
inline double conditional_correct_prob(std::span<const double> beta_norms_sq, double sigma2,
                                       int length_l, int n_active, int k_r, double rel_tol) {
  if (n_active < 1 || static_cast<int>(beta_norms_sq.size()) != n_active)
    throw std::invalid_argument("conditional_correct_prob: need N beta energies");
  if (length_l < n_active + 1)
    throw std::invalid_argument("conditional_correct_prob: need L >= N+1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("conditional_correct_prob: sigma^2 must be > 0");
  if (k_r < 1) throw std::invalid_argument("conditional_correct_prob: K_R must be >= 1");
  if (length_l == n_active + 1) return 1.0;

  std::vector<double> a(n_active);
  for (int n = 0; n < n_active; ++n) {
    if (!(beta_norms_sq[n] >= 0.0))
      throw std::invalid_argument("conditional_correct_prob: beta energies must be >= 0");
    a[n] = std::sqrt(2.0 * length_l * beta_norms_sq[n] / sigma2);
  }
  const int n_inactive = length_l - 1 - n_active;  // competitors
  const double factor = static_cast<double>(n_inactive);

  auto integrand = [&](double x) -> double {
    const double b = std::sqrt(2.0 * x);
    double prod = 1.0;
    for (int n = 0; n < n_active; ++n) {
      prod *= marcum_q(k_r, a[n], b);
      if (prod == 0.0) return 0.0;
    }
    double dens = factor * erlang_pdf(k_r, x);
    if (n_inactive >= 2) {
      const double cdf = erlang_cdf(k_r, x);
      // integer power, exponent L-N-2
      double p = 1.0;
      int e = n_inactive - 1;
      double base = cdf;
      while (e > 0) {
        if (e & 1) p *= base;
        base *= base;
        e >>= 1;
      }
      dens *= p;
    }
    return prod * dens;
  };

  const QuadratureResult res =
      integrate_to_erlang_tail(integrand, k_r, n_inactive, rel_tol);
  return std::clamp(res.value, 0.0, 1.0);
}

// Deterministic ingredients of one operating point, shared by both
// estimators and the CLI.
struct Scene {
  SystemConfig cfg;
  Codebook codebook;
  ProbePulse pulse;
  RisGeometry geometry;
  SubarrayPartition partition;
  BeamformerSet beamformers;
  Eigen::VectorXcd i_sr;       // deterministic direct source-reader path
  double b_at_target = 0.0;    // closed-form beampattern toward theta_bar
  SubsetCodec codec;
  TrChannelParams tr_params;

  Scene(const SystemConfig& c)
      : cfg(c),
        codebook(build_codebook(c.codeword_length)),
        pulse(make_pulse(c)),
        geometry(c.geometry()),
        partition(square_partition(geometry, c.tiles_per_side())),
        beamformers(matched_beamformers(partition, geometry, c.theta_st(), c.theta_bar())),
        codec(c.codeword_length, c.n_subarrays) {
    i_sr = direct_path(pulse, std::complex<double>(c.interference_amplitude, 0.0),
                       c.interference_delay_s, c.k_r());
    // The beampattern is invariant to the ST phase, so the nominal channel
    // (phase 0) fixes the SNR calibration.
    const Eigen::VectorXcd gamma_nominal = steering_vector(geometry, c.theta_st()) * c.sigma_st;
    b_at_target = beampattern_closed(beamformers, partition, geometry, gamma_nominal,
                                     c.theta_bar(), c.codeword_length);
    tr_params.n_taps = c.q_tr;
    tr_params.kappa = c.kappa_tr_linear();
    tr_params.sigma = c.sigma_tr;
    tr_params.az_min_deg = c.tr_az_min_deg;
    tr_params.az_max_deg = c.tr_az_max_deg;
    tr_params.el_min_deg = c.tr_el_min_deg;
    tr_params.el_max_deg = c.tr_el_max_deg;
    tr_params.delay_spread_s = c.delay_spread_s();
  }

  double noise_variance(double snr_linear) const {
    return noise_variance_from_snr(snr_linear, cfg.pulse_power, cfg.processing_gain, b_at_target,
                                   cfg.sigma_tr * cfg.sigma_tr, cfg.codeword_length,
                                   cfg.n_subarrays);
  }

  // Channel draw for trial/draw index t; identical in both estimators.
  CompositeSignature draw_signature(std::uint64_t t) const {
    RngStream st_rng(cfg.seed, Stream::st_phase, t);
    RngStream tr_rng(cfg.seed, Stream::tr_taps, t);
    const StChannel st = draw_st_channel(cfg.sigma_st, cfg.theta_st(), geometry, st_rng);
    const TrChannel tr = draw_tr_channel(tr_params, tr_rng);
    return assemble_composite(pulse, st, tr, geometry, partition, beamformers, cfg.k_r(), i_sr);
  }

  Message draw_message(std::uint64_t t) const {
    RngStream rng(cfg.seed, Stream::message, t);
    Message m;
    m.n_bits = codec.payload_bits();
    m.value = 0;
    for (int taken = 0; taken < m.n_bits; taken += 64) {
      const int chunk = std::min(64, m.n_bits - taken);
      std::uint64_t bits = rng.next_u64();
      if (chunk < 64) bits >>= (64 - chunk);
      m.value <<= chunk;
      m.value |= BigInt(bits);
    }
    return m;
  }
};

namespace detail {

inline int resolve_threads(int n_threads) {
  if (n_threads > 0) return n_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static contiguous split of [0, n) across workers; results land in
// per-index slots, so the reduction is independent of the thread count.
inline void parallel_for_chunks(long long n, int n_threads,
                                const std::function<void(long long, long long)>& body) {
  const int workers = std::min<long long>(std::max(1, n_threads), std::max<long long>(n, 1));
  if (workers == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const long long chunk = (n + workers - 1) / workers;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    const long long lo = w * chunk;
    const long long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi]() {
      try {
        body(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Neumaier-compensated sequential sum; order fixed by index.
inline double compensated_sum(std::span<const double> v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    comp += (std::abs(sum) >= std::abs(x)) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace detail

// 1 - E[conditional correct probability] over channel draws; the inner
// integral is exact to rel_tol, the expectation carries the reported
// standard error. Draws whose quadrature fails are skipped and counted;
// more than 1% skips aborts the estimate.
inline PeEstimate semianalytic_pe(const Scene& scene, double snr_linear, long long n_draws,
                                  int n_threads = 0) {
  if (n_draws < 1) throw std::invalid_argument("semianalytic_pe: need at least one draw");
  const double sigma2 = scene.noise_variance(snr_linear);
  const int length_l = scene.cfg.codeword_length;
  const int n_active = scene.cfg.n_subarrays;
  const int k_r = scene.cfg.k_r();
  const double rel_tol = scene.cfg.quadrature_rel_tol;

  std::vector<double> pc(n_draws, std::numeric_limits<double>::quiet_NaN());
  detail::parallel_for_chunks(n_draws, detail::resolve_threads(n_threads),
                              [&](long long lo, long long hi) {
                                std::vector<double> beta_sq(n_active);
                                for (long long d = lo; d < hi; ++d) {
                                  const CompositeSignature sig =
                                      scene.draw_signature(static_cast<std::uint64_t>(d));
                                  for (int n = 0; n < n_active; ++n)
                                    beta_sq[n] = sig.betas[n].squaredNorm();
                                  try {
                                    pc[d] = conditional_correct_prob(beta_sq, sigma2, length_l,
                                                                     n_active, k_r, rel_tol);
                                  } catch (const QuadratureError&) {
                                    // leave NaN: skipped draw
                                  }
                                }
                              });

  std::vector<double> valid;
  valid.reserve(n_draws);
  for (double v : pc)
    if (!std::isnan(v)) valid.push_back(v);
  const long long skips = n_draws - static_cast<long long>(valid.size());
  if (skips * 100 > n_draws)
    throw std::runtime_error("semianalytic_pe: quadrature failed on more than 1% of draws (" +
                             std::to_string(skips) + "/" + std::to_string(n_draws) + ")");
  if (valid.empty()) throw std::runtime_error("semianalytic_pe: no valid draws");

  const double mean = detail::compensated_sum(valid) / static_cast<double>(valid.size());
  double var = 0.0;
  for (double v : valid) var += (v - mean) * (v - mean);
  var = valid.size() > 1 ? var / static_cast<double>(valid.size() - 1) : 0.0;

  PeEstimate est;
  est.value = std::clamp(1.0 - mean, 0.0, 1.0);
  est.std_error = std::sqrt(var / static_cast<double>(valid.size()));
  est.n = static_cast<long long>(valid.size());
  est.method = PeMethod::semi_analytic;
  return est;
}

// Fraction of trials where the detected subset differs from the transmitted
// one. Uniform random message, fresh channel and noise per trial; binomial
// standard error.
inline PeEstimate monte_carlo_pe(const Scene& scene, double snr_linear, long long n_trials,
                                 int n_threads = 0) {
  if (n_trials < 1) throw std::invalid_argument("monte_carlo_pe: need at least one trial");
  const double sigma2 = scene.noise_variance(snr_linear);
  const std::vector<int> order = identity_assignment(scene.cfg.n_subarrays);

  std::vector<std::uint8_t> err(n_trials, 0);
  detail::parallel_for_chunks(
      n_trials, detail::resolve_threads(n_threads), [&](long long lo, long long hi) {
        for (long long t = lo; t < hi; ++t) {
          const Message msg = scene.draw_message(static_cast<std::uint64_t>(t));
          const MessageSubset sent = encode_message(msg, scene.codec);
          const SpaceTimeCode code =
              space_time_code(scene.codebook, sent, order, scene.partition, scene.beamformers);
          const CompositeSignature sig = scene.draw_signature(static_cast<std::uint64_t>(t));
          RngStream noise_rng(scene.cfg.seed, Stream::noise, static_cast<std::uint64_t>(t));
          const ReceivedFrame frame =
              synthesize_frame_fast(scene.codebook, code, sig, sigma2, noise_rng);
          const EnergyStatistics stats = matched_filter_energies(frame, scene.codebook);
          const MessageSubset detected = detect_subset(stats, scene.cfg.n_subarrays);
          err[t] = detected == sent ? 0 : 1;
        }
      });

  long long n_err = 0;
  for (std::uint8_t e : err) n_err += e;
  const double p = static_cast<double>(n_err) / static_cast<double>(n_trials);

  PeEstimate est;
  est.value = p;
  est.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(n_trials));
  est.n = n_trials;
  est.method = PeMethod::monte_carlo;
  return est;
}

struct RatePoint {
  int length_l = 0;
  double rate = 0.0;
};

/// Transmission rate over a range of codeword lengths, plus the argmax.
inline std::vector<RatePoint> rate_curve(int n_active, int l_min, int l_max) {
  if (l_min < n_active + 1)
    throw std::invalid_argument("rate_curve: range must start at L >= N+1");
  std::vector<RatePoint> out;
  out.reserve(std::max(0, l_max - l_min + 1));
  for (int l = l_min; l <= l_max; ++l) out.push_back({l, transmission_rate(l, n_active)});
  return out;
}

inline int rate_argmax(const std::vector<RatePoint>& curve) {
  if (curve.empty()) throw std::invalid_argument("rate_argmax: empty curve");
  int best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].rate > curve[best].rate) best = static_cast<int>(i);
  return curve[best].length_l;
}

struct SweepRow {
  double sweep_var = 0.0;
  double snr_db = 0.0;
  double pe = 0.0;
  double std_err = 0.0;
  long long trials = 0;
  PeMethod method = PeMethod::monte_carlo;
  std::uint64_t seed = 0;
};

// Error probability versus codeword length (one scene per L). The
// semi-analytic overlay shares the Monte Carlo channel substreams.
inline std::vector<SweepRow> sweep_pe_vs_l(const SystemConfig& base,
                                           const std::vector<double>& snr_db_list,
                                           const std::vector<int>& l_list, long long trials,
                                           bool with_semianalytic = false, int n_threads = 0) {
  std::vector<SweepRow> rows;
  for (int l : l_list) {
    SystemConfig cfg = base;
    cfg.codeword_length = l;
    validate_config(cfg);
    Scene scene(cfg);
    for (double snr_db : snr_db_list) {
      const double snr = std::pow(10.0, snr_db / 10.0);
      const PeEstimate mc = monte_carlo_pe(scene, snr, trials, n_threads);
      rows.push_back({static_cast<double>(l), snr_db, mc.value, mc.std_error, mc.n, mc.method,
                      cfg.seed});
      if (with_semianalytic) {
        const PeEstimate sa = semianalytic_pe(scene, snr, cfg.sa_channel_draws, n_threads);
        rows.push_back({static_cast<double>(l), snr_db, sa.value, sa.std_error, sa.n, sa.method,
                        cfg.seed});
      }
    }
  }
  return rows;
}

// Error probability versus normalized delay spread; each spread value sets
// K_R = G + spread.
inline std::vector<SweepRow> sweep_pe_vs_delay_spread(const SystemConfig& base,
                                                      const std::vector<double>& snr_db_list,
                                                      const std::vector<int>& spread_list,
                                                      long long trials,
                                                      bool with_semianalytic = false,
                                                      int n_threads = 0) {
  std::vector<SweepRow> rows;
  for (int spread : spread_list) {
    SystemConfig cfg = base;
    cfg.delay_spread_samples = spread;
    validate_config(cfg);
    Scene scene(cfg);
    for (double snr_db : snr_db_list) {
      const double snr = std::pow(10.0, snr_db / 10.0);
      const PeEstimate mc = monte_carlo_pe(scene, snr, trials, n_threads);
      rows.push_back({static_cast<double>(spread), snr_db, mc.value, mc.std_error, mc.n, mc.method,
                      cfg.seed});
      if (with_semianalytic) {
        const PeEstimate sa = semianalytic_pe(scene, snr, cfg.sa_channel_draws, n_threads);
        rows.push_back({static_cast<double>(spread), snr_db, sa.value, sa.std_error, sa.n,
                        sa.method, cfg.seed});
      }
    }
  }
  return rows;
}

}  // namespace riscom
