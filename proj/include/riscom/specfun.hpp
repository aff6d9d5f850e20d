#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace riscom {

struct QuadratureResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  long evaluations = 0;
};

// Signals that the adaptive integrator ran out of subdivisions; carries the
// best estimate obtained so far.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, QuadratureResult best)
      : std::runtime_error(what), best_(best) {}
  const QuadratureResult& best_estimate() const { return best_; }

 private:
  QuadratureResult best_;
};

namespace detail {

// log(k!); exact table for small k, lgamma beyond.
inline double log_factorial(long k) {
  static const double table[21] = {
      0.0,
      0.0,
      0.6931471805599453,
      1.791759469228055,
      3.1780538303479458,
      4.787491742782046,
      6.579251212010101,
      8.525161361065415,
      10.604602902745251,
      12.801827480081469,
      15.104412573075516,
      17.502307845873887,
      19.987214495661885,
      22.552163853123425,
      25.19122118273868,
      27.899271383840894,
      30.671860106080672,
      33.50507345013689,
      36.39544520803305,
      39.339884187199495,
      42.335616460753485,
  };
  if (k <= 20) return table[k];
  return std::lgamma(static_cast<double>(k) + 1.0);
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace detail

// Survival function of a Gamma(shape_k, scale 1) variable: the regularized
// upper incomplete gamma Q(K, x) = e^{-x} sum_{k<K} x^k / k! for integer K.
inline double erlang_sf(long shape_k, double x) {
  if (shape_k < 1) throw std::invalid_argument("erlang_sf: shape must be a positive integer");
  if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("erlang_sf: x must be finite and >= 0");
  if (x == 0.0) return 1.0;
  if (x < 700.0) {
    double term = std::exp(-x);
    double sum = term;
    for (long k = 1; k < shape_k; ++k) {
      term *= x / static_cast<double>(k);
      sum += term;
    }
    return std::min(sum, 1.0);
  }
  // Log domain: expand around the largest term to dodge exp underflow.
  const long kpk = std::min<long>(shape_k - 1, static_cast<long>(x));
  const double log_peak = -x + static_cast<double>(kpk) * std::log(x) - detail::log_factorial(kpk);
  double sum = 1.0;
  double r = 1.0;
  for (long k = kpk - 1; k >= 0; --k) {
    r *= static_cast<double>(k + 1) / x;
    sum += r;
    if (r < 1e-20) break;
  }
  r = 1.0;
  for (long k = kpk + 1; k <= shape_k - 1; ++k) {
    r *= x / static_cast<double>(k);
    sum += r;
    if (r < 1e-20) break;
  }
  const double v = std::exp(log_peak + std::log(sum));
  return std::min(v, 1.0);
}

/// CDF of a Gamma(shape_k, unit scale) variable at x.
inline double erlang_cdf(long shape_k, double x) {
  const double v = 1.0 - erlang_sf(shape_k, x);
  return std::clamp(v, 0.0, 1.0);
}

/// Density x^{K-1} e^{-x} / (K-1)! of a Gamma(shape_k, unit scale) variable.
inline double erlang_pdf(long shape_k, double x) {
  if (shape_k < 1) throw std::invalid_argument("erlang_pdf: shape must be a positive integer");
  if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("erlang_pdf: x must be finite and >= 0");
  if (x == 0.0) return shape_k == 1 ? 1.0 : 0.0;
  if (shape_k <= 20) {
    double p = std::exp(-x);
    for (long k = 1; k < shape_k; ++k) p *= x / static_cast<double>(k);
    // p = e^{-x} x^{K-1}/(K-1)!
    return p;
  }
  return std::exp(static_cast<double>(shape_k - 1) * std::log(x) - x -
                  detail::log_factorial(shape_k - 1));
}

// Generalized Marcum Q of integer order: survival probability of a
// noncentral chi-square with 2K dof and noncentrality a^2 above b^2.
// Evaluated as the Poisson(a^2/2) mixture of regularized upper incomplete
// gammas, truncated once the remaining Poisson mass is below 1e-15. For
// extreme noncentrality the series window grows as sqrt(a), so Chernoff-type
// tail bounds (Birge) short-circuit to 0/1 with error < 1e-16.
inline double marcum_q(int order_k, double a, double b) {
  if (order_k < 1) throw std::invalid_argument("marcum_q: order must be a positive integer");
  if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("marcum_q: arguments must be finite and >= 0");
  if (b == 0.0) return 1.0;
  const double x = 0.5 * b * b;
  if (a == 0.0) return erlang_sf(order_k, x);

  const double mu = 0.5 * a * a;  // Poisson mean
  if (mu > 5e4) {
    const double nu = 2.0 * order_k, lam = a * a, y = b * b;
    const double t = 40.0;  // e^-40 ~ 4e-18
    const double s = std::sqrt((nu + 2.0 * lam) * t);
    if (y <= nu + lam - 2.0 * s) return 1.0;
    if (y >= nu + lam + 2.0 * s + 2.0 * t) return 0.0;
  }

  // Poisson window around the mode covering all but < 1e-16 of the mass.
  const double halfwidth = 12.0 * std::sqrt(mu) + 12.0;
  long ilo = static_cast<long>(std::floor(mu - halfwidth));
  if (ilo < 0) ilo = 0;

  double p = std::exp(-mu + static_cast<double>(ilo) * std::log(mu) - detail::log_factorial(ilo));
  double q = erlang_sf(order_k + ilo, x);
  double g = std::exp(-x + static_cast<double>(order_k + ilo) * std::log(x) -
                      detail::log_factorial(order_k + ilo));

  double sum = 0.0, comp = 0.0;  // Neumaier-compensated series
  double mass = 0.0;
  for (long i = ilo;; ++i) {
    const double term = p * q;
    const double t1 = sum + term;
    comp += (std::abs(sum) >= std::abs(term)) ? (sum - t1) + term : (term - t1) + sum;
    sum = t1;
    mass += p;
    if (mass >= 1.0 - 1e-15 && static_cast<double>(i) > mu) break;
    if (p < 1e-308 && static_cast<double>(i) > mu) break;  // mass stalled below double range
    p *= mu / static_cast<double>(i + 1);
    q += g;                                     // Q(m+1,x) = Q(m,x) + e^{-x} x^m / m!
    if (q > 1.0) q = 1.0;
    g *= x / static_cast<double>(order_k + i + 1);
  }
  return std::clamp(sum + comp, 0.0, 1.0);
}

namespace detail {

// 7-15 Gauss-Kronrod pair (QUADPACK dqk15 constants).
inline constexpr double gk15_nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
};
inline constexpr double gk15_wk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};
inline constexpr double gk15_wg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct Panel {
  double a, b;
  double integral;
  double error;
};

template <typename F>
inline Panel gk15_apply(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fv[15];
  // abscissae: nodes[j] and -nodes[j] for j < 7, center last
  double resk = 0.0, resg = 0.0;
  for (int j = 0; j < 7; ++j) {
    const double x = h * gk15_nodes[j];
    const double f1 = f(c - x);
    const double f2 = f(c + x);
    fv[2 * j] = f1;
    fv[2 * j + 1] = f2;
    resk += gk15_wk[j] * (f1 + f2);
    if (j % 2 == 1) resg += gk15_wg[j / 2] * (f1 + f2);
  }
  const double fc = f(c);
  fv[14] = fc;
  resk += gk15_wk[7] * fc;
  resg += gk15_wg[3] * fc;
  Panel p;
  p.a = a;
  p.b = b;
  p.integral = resk * h;
  p.error = std::abs((resk - resg) * h);
  return p;
}

}  // namespace detail

// Adaptive quadrature of f over [lower, upper]: Gauss-Kronrod 15 per panel,
// bisect the worst panel until the summed error estimate meets rel_tol.
inline QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double lower,
                                           double upper, double rel_tol, int max_panels = 2000) {
  if (!(rel_tol > 0.0) || rel_tol >= 0.1)
    throw std::invalid_argument("integrate_adaptive: rel_tol must lie in (0, 0.1)");
  if (!(upper >= lower)) throw std::invalid_argument("integrate_adaptive: bad interval");

  std::vector<detail::Panel> panels;
  panels.push_back(detail::gk15_apply(f, lower, upper));
  long evals = 15;

  auto totals = [&panels]() {
    double v = 0.0, e = 0.0;
    for (const auto& p : panels) {
      v += p.integral;
      e += p.error;
    }
    return std::pair<double, double>(v, e);
  };

  while (true) {
    auto [value, err] = totals();
    if (err <= std::max(rel_tol * std::abs(value), 1e-300)) {
      return QuadratureResult{value, err, evals};
    }
    if (static_cast<int>(panels.size()) >= max_panels) {
      throw QuadratureError("integrate_adaptive: no convergence after " +
                                std::to_string(max_panels) + " panels",
                            QuadratureResult{value, err, evals});
    }
    std::size_t worst = 0;
    for (std::size_t i = 1; i < panels.size(); ++i)
      if (panels[i].error > panels[worst].error) worst = i;
    const detail::Panel old = panels[worst];
    const double mid = 0.5 * (old.a + old.b);
    panels[worst] = detail::gk15_apply(f, old.a, mid);
    panels.push_back(detail::gk15_apply(f, mid, old.b));
    evals += 30;
  }
}

// Smallest x with erlang_cdf(shape_k, x)^power >= 1 - tail_mass. Used as the
// integration cutoff: beyond it the maximum of `power` iid Erlang variables
// carries less than tail_mass probability.
inline double erlang_max_tail_cutoff(long shape_k, long power, double tail_mass) {
  if (power < 1) throw std::invalid_argument("erlang_max_tail_cutoff: power must be >= 1");
  if (!(tail_mass > 0.0) || tail_mass >= 1.0)
    throw std::invalid_argument("erlang_max_tail_cutoff: tail_mass must lie in (0, 1)");
  // cdf(x) >= (1 - tail_mass)^(1/power)  <=>  sf(x) <= -expm1(log1p(-tail_mass)/power)
  const double sf_target = -std::expm1(std::log1p(-tail_mass) / static_cast<double>(power));
  double hi = std::max<double>(2.0 * static_cast<double>(shape_k), 32.0);
  while (erlang_sf(shape_k, hi) > sf_target && hi < 1e9) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (erlang_sf(shape_k, mid) > sf_target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-9 * hi) break;
  }
  return hi;
}

// Integrate a nonnegative integrand over [0, inf) truncated by the
// Erlang-max tail rule: upper limit X with cdf(K, X)^power >= 1 - rel_tol/10.
inline QuadratureResult integrate_to_erlang_tail(const std::function<double(double)>& f,
                                                 long shape_k, long power, double rel_tol,
                                                 int max_panels = 2000) {
  const double upper = erlang_max_tail_cutoff(shape_k, power, rel_tol / 10.0);
  return integrate_adaptive(f, 0.0, upper, rel_tol, max_panels);
}

}  // namespace riscom
