#pragma once

// Sampling statistics and the distribution functions they lean on. The
// quantile routines invert in-house CDF implementations (regularized
// incomplete beta/gamma with continued fractions) through a safeguarded
// Newton iteration inside a maintained bracket, so accuracy is controlled by
// the CDF residual rather than an approximation formula.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ambiprice/core.hpp"
#include "ambiprice/errors.hpp"

namespace ambiprice {

namespace detail {

// ln Gamma(x) for x > 0, Lanczos series (double precision to ~1e-15 relative).
inline double gamma_ln(double x) {
  static const double cof[6] = {76.18009172947146,     -86.50532032941677,
                                24.01409824083091,     -1.231739572450155,
                                0.1208650973866179e-2, -0.5395239384953e-5};
  double y = x;
  double tmp = x + 5.5;
  tmp -= (x + 0.5) * std::log(tmp);
  double ser = 1.000000000190015;
  for (int j = 0; j < 6; ++j) ser += cof[j] / ++y;
  return -tmp + std::log(2.5066282746310005 * ser / x);
}

// Continued fraction for the incomplete beta function, modified Lentz.
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIt = 2000;
  const double eps = std::numeric_limits<double>::epsilon();
  const double fpmin = std::numeric_limits<double>::min() / eps;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIt; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 10.0 * eps) return h;
  }
  throw NumericalError("incomplete beta continued fraction did not converge (a = " +
                       std::to_string(a) + ", b = " + std::to_string(b) + ")");
}

// Regularized incomplete beta I_x(a,b).
inline double inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("inc_beta requires a > 0 and b > 0");
  if (x < 0.0 || x > 1.0) throw ValidationError("inc_beta requires x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double bt = std::exp(gamma_ln(a + b) - gamma_ln(a) - gamma_ln(b) +
                             a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

// Regularized lower incomplete gamma P(a,x), series branch (x < a + 1).
inline double gamma_p_series(double a, double x) {
  constexpr int kMaxIt = 20000;
  const double eps = std::numeric_limits<double>::epsilon();
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < kMaxIt; ++n) {
    ++ap;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * eps)
      return sum * std::exp(-x + a * std::log(x) - gamma_ln(a));
  }
  throw NumericalError("incomplete gamma series did not converge (a = " + std::to_string(a) +
                       ")");
}

// Regularized upper incomplete gamma Q(a,x), continued fraction (x >= a + 1).
inline double gamma_q_cf(double a, double x) {
  constexpr int kMaxIt = 20000;
  const double eps = std::numeric_limits<double>::epsilon();
  const double fpmin = std::numeric_limits<double>::min() / eps;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIt; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps)
      return h * std::exp(-x + a * std::log(x) - gamma_ln(a));
  }
  throw NumericalError("incomplete gamma continued fraction did not converge (a = " +
                       std::to_string(a) + ")");
}

inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("gamma_p requires a > 0");
  if (x < 0.0) throw ValidationError("gamma_p requires x >= 0");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("gamma_q requires a > 0");
  if (x < 0.0) throw ValidationError("gamma_q requires x >= 0");
  if (x == 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

// Safeguarded Newton on a strictly increasing CDF. The bracket [lo, hi] must
// straddle the target probability; every step stays inside it and any step
// Newton fumbles is replaced by bisection, so convergence is guaranteed.
template <class CdfFn, class PdfFn>
double invert_cdf(const CdfFn& cdf, const PdfFn& pdf, double prob, double lo, double hi,
                  double x0, const char* what) {
  double flo = cdf(lo) - prob;
  double fhi = cdf(hi) - prob;
  if (flo > 0.0 || fhi < 0.0)
    throw NumericalError(std::string(what) + ": quantile bracket does not straddle target");
  double x = std::min(std::max(x0, lo), hi);
  for (int it = 0; it < 200; ++it) {
    const double f = cdf(x) - prob;
    if (std::abs(f) <= 1e-14) return x;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double d = pdf(x);
    double xn = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) <= 1e-15 * std::max(1.0, std::abs(xn))) return xn;
    x = xn;
    if (hi - lo <= 1e-15 * std::max(1.0, std::max(std::abs(lo), std::abs(hi))))
      return 0.5 * (lo + hi);
  }
  throw NumericalError(std::string(what) + ": quantile iteration budget exhausted");
}

inline void check_prob_open(double prob, const char* what) {
  if (!(prob > 0.0 && prob < 1.0))
    throw ValidationError(std::string(what) + " requires prob in (0,1), got " +
                          std::to_string(prob));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Normal distribution

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * 0.39894228040143268;  // 1/sqrt(2 pi)
}

// Phi(x) = erfc(-x/sqrt 2)/2; the complementary form keeps the tails exact.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752);
}

namespace detail {

// Rational initial guess for the normal quantile (Acklam), accurate to about
// 1e-9 relative; the caller polishes it against normal_cdf.
inline double normal_quantile_guess(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

inline double normal_quantile(double prob) {
  detail::check_prob_open(prob, "normal_quantile");
  if (prob == 0.5) return 0.0;
  return detail::invert_cdf([](double x) { return normal_cdf(x); },
                            [](double x) { return normal_pdf(x); }, prob, -40.0, 40.0,
                            detail::normal_quantile_guess(prob), "normal_quantile");
}

// ---------------------------------------------------------------------------
// Student t distribution (df > 0, not necessarily integral)

inline double t_pdf(double x, double df) {
  return std::exp(detail::gamma_ln(0.5 * (df + 1.0)) - detail::gamma_ln(0.5 * df) -
                  0.5 * std::log(df * 3.14159265358979324) -
                  0.5 * (df + 1.0) * std::log1p(x * x / df));
}

inline double t_cdf(double x, double df) {
  if (!(df > 0.0)) throw ValidationError("t_cdf requires df > 0, got " + std::to_string(df));
  const double half = 0.5 * detail::inc_beta(0.5 * df, 0.5, df / (df + x * x));
  return x > 0.0 ? 1.0 - half : half;
}

// Inverse Student t CDF, absolute accuracy well inside 1e-10.
inline double t_quantile(double prob, double df) {
  detail::check_prob_open(prob, "t_quantile");
  if (!(df > 0.0))
    throw ValidationError("t_quantile requires df > 0, got " + std::to_string(df));
  if (prob == 0.5) return 0.0;
  // Start from the normal limit with a first heavy-tail correction, then
  // expand a bracket geometrically before polishing.
  const double z = normal_quantile(prob);
  const double x0 = z + (z * z * z + z) / (4.0 * df);
  double w = std::max(1.0, std::abs(x0));
  double lo = x0 - w, hi = x0 + w;
  for (int i = 0; i < 2000 && t_cdf(lo, df) > prob; ++i) lo -= (w *= 2.0);
  w = std::max(1.0, std::abs(x0));
  for (int i = 0; i < 2000 && t_cdf(hi, df) < prob; ++i) hi += (w *= 2.0);
  return detail::invert_cdf([df](double x) { return t_cdf(x, df); },
                            [df](double x) { return t_pdf(x, df); }, prob, lo, hi, x0,
                            "t_quantile");
}

// ---------------------------------------------------------------------------
// Chi-square distribution (df > 0)

inline double chi2_pdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  const double a = 0.5 * df;
  return std::exp((a - 1.0) * std::log(x) - 0.5 * x - detail::gamma_ln(a) -
                  a * 0.69314718055994531);
}

inline double chi2_cdf(double x, double df) {
  if (!(df > 0.0))
    throw ValidationError("chi2_cdf requires df > 0, got " + std::to_string(df));
  if (x <= 0.0) return 0.0;
  return detail::gamma_p(0.5 * df, 0.5 * x);
}

// Inverse chi-square CDF, relative accuracy well inside 1e-10.
inline double chi2_quantile(double prob, double df) {
  detail::check_prob_open(prob, "chi2_quantile");
  if (!(df > 0.0))
    throw ValidationError("chi2_quantile requires df > 0, got " + std::to_string(df));
  // Wilson-Hilferty starting point.
  const double z = normal_quantile(prob);
  const double h = 2.0 / (9.0 * df);
  double x0 = df * std::pow(std::max(1.0 - h + z * std::sqrt(h), 1e-8), 3.0);
  double hi = std::max(x0, df);
  for (int i = 0; i < 2000 && chi2_cdf(hi, df) < prob; ++i) hi *= 2.0;
  return detail::invert_cdf([df](double x) { return chi2_cdf(x, df); },
                            [df](double x) { return chi2_pdf(x, df); }, prob, 0.0, hi, x0,
                            "chi2_quantile");
}

// ---------------------------------------------------------------------------
// Sample summaries and confidence machinery

struct SampleSummary {
  double mean;
  double s2;  // unbiased sample variance
  long n;
};

inline SampleSummary summarize(const std::vector<double>& xs) {
  const long n = static_cast<long>(xs.size());
  if (n < 2)
    throw ValidationError("summarize requires at least 2 observations, got " +
                          std::to_string(n));
  double sum = 0.0;
  for (double v : xs) {
    detail::require_finite("sample value", v);
    sum += v;
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  return SampleSummary{mean, ss / static_cast<double>(n - 1), n};
}

struct Interval {
  double low;
  double high;
};

inline Interval interval_hull(const Interval& a, const Interval& b) {
  return Interval{std::min(a.low, b.low), std::max(a.high, b.high)};
}

struct IntervalPair {
  Interval mu_iv;
  Interval sd_iv;  // standard-deviation units
};

// Two-sided (1 - alpha) intervals: t interval for the mean, chi-square
// interval for the standard deviation.
inline IntervalPair confidence_intervals(const SampleSummary& s, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("confidence level alpha must lie in (0,1), got " +
                          std::to_string(alpha));
  if (s.n < 2)
    throw ValidationError("confidence_intervals requires n >= 2, got " + std::to_string(s.n));
  if (!(s.s2 > 0.0))
    throw ValidationError("confidence_intervals requires a non-degenerate sample (s2 > 0), got s2 = " +
                          std::to_string(s.s2));
  const double df = static_cast<double>(s.n - 1);
  const double half_width =
      t_quantile(1.0 - 0.5 * alpha, df) * std::sqrt(s.s2 / static_cast<double>(s.n));
  const double scaled = df * s.s2;
  const double sd_low = std::sqrt(scaled / chi2_quantile(1.0 - 0.5 * alpha, df));
  const double sd_high = std::sqrt(scaled / chi2_quantile(0.5 * alpha, df));
  return IntervalPair{Interval{s.mean - half_width, s.mean + half_width},
                      Interval{sd_low, sd_high}};
}

// Builds the nested pair of rectangular ambiguity sets from two dataset
// summaries: the wide set is the coordinatewise hull of both datasets'
// intervals, the narrow set uses the second dataset alone. Standard-deviation
// interval endpoints are squared into variance units, so nesting carries over
// (endpoints are positive and squaring is monotone there).
inline std::pair<BoxSet, BoxSet> ambiguity_from_datasets(const SampleSummary& x_summary,
                                                         const SampleSummary& y_summary,
                                                         double alpha_conf) {
  const IntervalPair cx = confidence_intervals(x_summary, alpha_conf);
  const IntervalPair cy = confidence_intervals(y_summary, alpha_conf);
  const Interval mu1 = interval_hull(cx.mu_iv, cy.mu_iv);
  const Interval sd1 = interval_hull(cx.sd_iv, cy.sd_iv);
  BoxSet wide(mu1.low, mu1.high, sd1.low * sd1.low, sd1.high * sd1.high);
  BoxSet narrow(cy.mu_iv.low, cy.mu_iv.high, cy.sd_iv.low * cy.sd_iv.low,
                cy.sd_iv.high * cy.sd_iv.high);
  return {wide, narrow};
}

}  // namespace ambiprice
