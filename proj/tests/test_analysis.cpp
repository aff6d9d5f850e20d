#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <thread>
#include <vector>

#include "riscom/analysis.hpp"
#include "riscom/rng.hpp"

using namespace riscom;

namespace {

SystemConfig desk_config() {
  SystemConfig cfg;
  cfg.ris_rows = 4;
  cfg.ris_cols = 4;
  cfg.n_subarrays = 4;
  cfg.codeword_length = 9;
  cfg.processing_gain = 7;
  cfg.delay_spread_samples = 5;
  validate_config(cfg);
  return cfg;
}

}  // namespace

TEST_CASE("conditional correct probability degenerate and zero-signal values", "[analysis]") {
  // L = N+1: no competitors
  const std::vector<double> betas1(2, 1.0);
  CHECK(conditional_correct_prob(betas1, 1.0, 3, 2, 4, 1e-8) == 1.0);

  // zero signal, L=5, N=2, K=4: exchangeability gives 1/C(4,2) = 1/6
  const std::vector<double> zeros(2, 0.0);
  CHECK_THAT(conditional_correct_prob(zeros, 1.0, 5, 2, 4, 1e-8),
             Catch::Matchers::WithinAbs(1.0 / 6.0, 1e-6));

  CHECK_THROWS_AS(conditional_correct_prob(zeros, 0.0, 5, 2, 4, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(conditional_correct_prob(zeros, 1.0, 2, 2, 4, 1e-8), std::invalid_argument);
}

TEST_CASE("conditional correct probability matches an order-statistics oracle", "[analysis]") {
  // L=4, N=1, K_R=2, noncentrality 2L|beta|^2/sigma^2 = 10
  const int k_r = 2;
  const int length_l = 4;
  const double lam = 10.0;
  const std::vector<double> betas = {lam / (2.0 * length_l)};  // sigma^2 = 1

  const double predicted = conditional_correct_prob(betas, 1.0, length_l, 1, k_r, 1e-9);

  const long n = 10000000;
  RngStream rng(314, Stream::noise, 0);
  const double a = std::sqrt(lam);
  long correct = 0;
  for (long i = 0; i < n; ++i) {
    const double g1 = rng.normal() + a;
    const double g2 = rng.normal();
    double active = g1 * g1 + g2 * g2;  // 2 T_active ~ ncchisq(2K, lam), K=2 needs 2 more dof
    double u = rng.uniform01();
    while (u == 0.0) u = rng.uniform01();
    active += -2.0 * std::log(u);
    double worst = 0.0;
    for (int j = 0; j < length_l - 2; ++j) {
      double u1 = rng.uniform01(), u2 = rng.uniform01();
      while (u1 == 0.0) u1 = rng.uniform01();
      while (u2 == 0.0) u2 = rng.uniform01();
      const double erl = -std::log(u1) - std::log(u2);  // Erlang(2)
      worst = std::max(worst, erl);
    }
    if (active / 2.0 > worst) ++correct;
  }
  const double emp = static_cast<double>(correct) / n;
  const double se = std::sqrt(emp * (1.0 - emp) / n);
  INFO("oracle " << emp << " +/- " << se << ", quadrature " << predicted);
  CHECK(std::abs(predicted - emp) <= 3.0 * se);
}

TEST_CASE("conditional correct probability is monotone in signal and in L", "[analysis]") {
  const int k_r = 6;
  double prev = -1.0;
  for (double b : {0.0, 0.5, 2.0, 8.0, 32.0}) {
    const std::vector<double> betas(3, b);
    const double p = conditional_correct_prob(betas, 1.0, 10, 3, k_r, 1e-9);
    CHECK(p + 1e-9 >= prev);
    prev = p;
  }
  // more competitors can only hurt
  const std::vector<double> betas(3, 2.0);
  prev = 2.0;
  for (int length_l : {5, 7, 10, 16, 30}) {
    const double p = conditional_correct_prob(betas, 1.0, length_l, 3, k_r, 1e-9);
    CHECK(p <= prev + 1e-9);
    prev = p;
  }
}

TEST_CASE("semi-analytic Pe vanishes at extreme SNR", "[analysis]") {
  const Scene scene(desk_config());
  const PeEstimate est = semianalytic_pe(scene, 1e12, 50);
  CHECK(est.method == PeMethod::semi_analytic);
  CHECK(est.value <= 1e-9);
}

TEST_CASE("both estimators hit the zero-signal symmetry value", "[analysis]") {
  SystemConfig cfg = desk_config();
  cfg.ris_rows = 2;
  cfg.ris_cols = 2;
  cfg.n_subarrays = 4;
  cfg.codeword_length = 7;
  cfg.sigma_tr = 0.0;  // no tag-reader signal at all
  validate_config(cfg);
  const Scene scene(cfg);
  // sigma_tr = 0 zeroes the SNR numerator; calibrate noise directly instead
  const double sigma2 = 1.0;

  const int n_active = cfg.n_subarrays;
  const int length_l = cfg.codeword_length;
  const double p_match =
      1.0 / binomial(length_l - 1, n_active).convert_to<double>();

  // semi-analytic: conditional value is exact under zero signal
  const std::vector<double> zeros(n_active, 0.0);
  const double pc = conditional_correct_prob(zeros, sigma2, length_l, n_active,
                                             cfg.k_r(), 1e-9);
  CHECK_THAT(pc, Catch::Matchers::WithinAbs(p_match, 1e-7));

  // Monte Carlo: detected subset is uniform over all C(L-1, N) subsets
  long long errors = 0;
  const long long trials = 20000;
  const std::vector<int> order = identity_assignment(n_active);
  for (long long t = 0; t < trials; ++t) {
    const Message msg = scene.draw_message(static_cast<std::uint64_t>(t));
    const MessageSubset sent = encode_message(msg, scene.codec);
    const SpaceTimeCode code =
        space_time_code(scene.codebook, sent, order, scene.partition, scene.beamformers);
    const CompositeSignature sig = scene.draw_signature(static_cast<std::uint64_t>(t));
    RngStream noise(cfg.seed, Stream::noise, static_cast<std::uint64_t>(t));
    const ReceivedFrame frame = synthesize_frame_fast(scene.codebook, code, sig, sigma2, noise);
    const MessageSubset detected =
        detect_subset(matched_filter_energies(frame, scene.codebook), n_active);
    if (!(detected == sent)) ++errors;
  }
  const double pe = static_cast<double>(errors) / trials;
  const double want = 1.0 - p_match;
  const double se = std::sqrt(want * (1.0 - want) / trials);
  CHECK(std::abs(pe - want) <= 3.0 * se);
}

TEST_CASE("monte carlo is exact in the noiseless limit", "[analysis]") {
  SystemConfig cfg = desk_config();
  const Scene scene(cfg);
  // snr extremely high -> sigma^2 ~ 0 but > 0; detection must stay perfect
  const PeEstimate est = monte_carlo_pe(scene, 1e15, 500);
  CHECK(est.value == 0.0);
  CHECK(est.std_error == 0.0);
  CHECK(est.n == 500);
}

TEST_CASE("estimates are deterministic and thread-count invariant", "[analysis]") {
  const Scene scene(desk_config());
  const PeEstimate a = monte_carlo_pe(scene, 1.0, 4000, 1);
  const PeEstimate b = monte_carlo_pe(scene, 1.0, 4000, 2);
  const PeEstimate c = monte_carlo_pe(scene, 1.0, 4000, 7);
  CHECK(a.value == b.value);
  CHECK(a.value == c.value);
  CHECK(a.std_error == b.std_error);

  const PeEstimate sa1 = semianalytic_pe(scene, 1.0, 300, 1);
  const PeEstimate sa2 = semianalytic_pe(scene, 1.0, 300, 2);
  CHECK(sa1.value == sa2.value);
  CHECK(sa1.std_error == sa2.std_error);
}

TEST_CASE("cross-method agreement at desk scale", "[analysis]") {
  const Scene scene(desk_config());
  for (double snr_db : {-5.0, 0.0}) {
    const double snr = std::pow(10.0, snr_db / 10.0);
    const PeEstimate mc = monte_carlo_pe(scene, snr, 20000);
    const PeEstimate sa = semianalytic_pe(scene, snr, 2000);
    const double combined =
        std::sqrt(mc.std_error * mc.std_error + sa.std_error * sa.std_error);
    INFO("snr_db " << snr_db << ": mc " << mc.value << " sa " << sa.value << " combined se "
                   << combined);
    CHECK(std::abs(mc.value - sa.value) <= 3.0 * combined + 1e-6);
  }
}

TEST_CASE("rate curve reports the L=21 optimum", "[analysis]") {
  const auto curve = rate_curve(9, 10, 60);
  REQUIRE(curve.size() == 51);
  CHECK(rate_argmax(curve) == 21);
  CHECK(curve.front().rate == 0.0);  // L = 10 = N+1 has a single subset

  // closed-form scan for N = 1
  const auto single = rate_curve(1, 2, 100);
  int best = 0;
  for (std::size_t i = 0; i < single.size(); ++i) {
    CHECK_THAT(single[i].rate,
               Catch::Matchers::WithinAbs(
                   std::log2(static_cast<double>(single[i].length_l - 1)) / single[i].length_l,
                   1e-12));
    if (single[i].rate > single[best].rate) best = static_cast<int>(i);
  }
  CHECK(rate_argmax(single) == single[best].length_l);
}

TEST_CASE("sweeps produce rows per grid point and tolerate empty grids", "[analysis]") {
  SystemConfig cfg = desk_config();
  cfg.sa_channel_draws = 100;

  const auto empty = sweep_pe_vs_l(cfg, {}, {}, 10);
  CHECK(empty.empty());

  const auto rows = sweep_pe_vs_l(cfg, {0.0}, {7, 9}, 400, true);
  REQUIRE(rows.size() == 4);  // (mc + sa) x 2 lengths
  CHECK(rows[0].sweep_var == 7.0);
  CHECK(rows[0].method == PeMethod::monte_carlo);
  CHECK(rows[1].method == PeMethod::semi_analytic);
  for (const auto& r : rows) {
    CHECK(r.pe >= 0.0);
    CHECK(r.pe <= 1.0);
    CHECK(r.std_err >= 0.0);
  }

  const auto spread_rows = sweep_pe_vs_delay_spread(cfg, {0.0}, {3, 5}, 400);
  REQUIRE(spread_rows.size() == 2);
  CHECK(spread_rows[0].sweep_var == 3.0);
  CHECK(spread_rows[1].sweep_var == 5.0);
}

TEST_CASE("standard errors contract with the trial count", "[analysis]") {
  const Scene scene(desk_config());
  const PeEstimate small = monte_carlo_pe(scene, 0.5, 2000);
  const PeEstimate large = monte_carlo_pe(scene, 0.5, 8000);
  // quadrupling the trials should halve the error bars up to noise
  CHECK(large.std_error <= small.std_error * 0.75);
  CHECK(small.value >= 0.0);
  CHECK(small.value <= 1.0);
}
