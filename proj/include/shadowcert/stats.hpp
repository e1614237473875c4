#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

// Chi-squared / Gaussian / Beta numerics. Only the paths the library needs:
// regularized incomplete gamma (series for x < a+1, continued fraction
// otherwise), a bracketed chi-squared quantile, and the regularized
// incomplete beta for Clopper-Pearson bounds.

namespace shadowcert {

namespace detail {

inline constexpr int kItMax = 600;
inline constexpr double kEps = 1e-16;
inline constexpr double kFpMin = 1e-300;

/// Regularized lower incomplete gamma P(a, x) by series expansion.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kItMax; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Regularized upper incomplete gamma Q(a, x) by continued fraction.
inline double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kItMax; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  return (x < a + 1.0) ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  return (x < a + 1.0) ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

/// Standard normal quantile (Acklam's rational approximation); used only
/// to seed bracketed root finding, never as a final answer.
inline double normal_quantile_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > phigh) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

/// Regularized incomplete beta I_x(a, b) via Lentz continued fraction.
inline double beta_cf(double a, double b, double x) {
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kItMax; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double beta_reg(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
              a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln);
  return (x < (a + 1.0) / (a + b + 2.0)) ? front * beta_cf(a, b, x) / a
                                         : 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// Chi-squared CDF with k degrees of freedom: P(k/2, x/2).
inline double chi2_cdf(double x, int k) {
  if (k < 1) throw std::invalid_argument("chi2_cdf: dof must be >= 1");
  if (x < 0.0) throw std::invalid_argument("chi2_cdf: x must be >= 0");
  if (x == 0.0) return 0.0;
  return detail::gamma_p(0.5 * k, 0.5 * x);
}

/// Upper tail Q(k/2, x/2); accurate where 1 - cdf would cancel.
inline double chi2_sf(double x, int k) {
  if (k < 1) throw std::invalid_argument("chi2_sf: dof must be >= 1");
  if (x < 0.0) throw std::invalid_argument("chi2_sf: x must be >= 0");
  if (x == 0.0) return 1.0;
  return detail::gamma_q(0.5 * k, 0.5 * x);
}

/// Chi-squared quantile: the x with chi2_cdf(x, k) = p. Bracketed root
/// find (Newton steps safeguarded by bisection); for p > 1/2 the residual
/// is evaluated on the survival function so extreme upper-tail quantiles
/// (p within 1e-14 of 1) stay accurate.
inline double chi2_quantile(double p, int k) {
  if (k < 1) throw std::invalid_argument("chi2_quantile: dof must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi2_quantile: p must be in (0,1)");

  const bool upper = p > 0.5;
  const double target_sf = 1.0 - p;  // exact when upper (p stored exactly)
  auto residual = [&](double x) {
    // Positive when x is above the quantile.
    return upper ? (target_sf - chi2_sf(x, k)) : (chi2_cdf(x, k) - p);
  };

  // Wilson-Hilferty initial guess.
  double z = detail::normal_quantile_approx(p);
  double g = 2.0 / (9.0 * k);
  double x = k * std::pow(std::max(1e-12, 1.0 - g + z * std::sqrt(g)), 3.0);
  if (!(x > 0.0) || !std::isfinite(x)) x = static_cast<double>(k);

  // Establish a bracket [lo, hi] with residual(lo) < 0 < residual(hi).
  double lo = 0.0, hi = std::max(x * 2.0, 1.0);
  for (int i = 0; i < 400 && residual(hi) < 0.0; ++i) {
    lo = hi;
    hi *= 2.0;
  }
  if (residual(x) >= 0.0)
    hi = std::min(hi, x);
  else
    lo = std::max(lo, x);

  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double r = residual(mid);
    if (r >= 0.0)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    // Newton step from the pdf when it stays inside the bracket.
    double pdf = std::exp((0.5 * k - 1.0) * std::log(mid) - 0.5 * mid -
                          std::lgamma(0.5 * k) - 0.5 * k * std::log(2.0));
    double next = (pdf > 0.0 && std::isfinite(pdf)) ? mid - r / pdf : 0.5 * (lo + hi);
    mid = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
  }
  return 0.5 * (lo + hi);
}

/// Regularized incomplete beta I_x(a, b).
inline double beta_reg(double a, double b, double x) { return detail::beta_reg(a, b, x); }

/// One-sided Clopper-Pearson upper confidence bound for a binomial
/// proportion: the p with P(X <= successes | p) = 1 - conf.
inline double binom_upper_ci(long long successes, long long trials, double conf) {
  if (trials < 1 || successes < 0 || successes > trials)
    throw std::invalid_argument("binom_upper_ci: bad counts");
  if (!(conf > 0.0 && conf < 1.0))
    throw std::invalid_argument("binom_upper_ci: conf must be in (0,1)");
  if (successes == trials) return 1.0;
  // Solve I_p(s+1, n-s) = conf by bisection; beta_reg is monotone in p.
  double a = static_cast<double>(successes) + 1.0;
  double b = static_cast<double>(trials - successes);
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (beta_reg(a, b, mid) < conf ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Standard normal upper tail, for test oracles and reports.
inline double normal_sf(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

}  // namespace shadowcert
