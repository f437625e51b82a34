#pragma once

// Value functions of the robust investment-consumption problem, split into
// the time factors the closed forms are built from:
//
//   power:  J(t,x) = x^p / p * exp(g1(t)),  g1' = -(p (k + f(g1)) - rho),
//           g1(T) = 0, with f the consumption envelope below
//   log:    J(t,x) = g21(t) ln x + g22(t),  g21' = rho g21 - lambda,
//           g21(T) = 1, and g22 an explicit discounted integral of g21
//
// Removable singularities (rho = 0, y = (rho - p k)/(1 - p) = 0) get exact
// branches at |.| < 1e-12 and series evaluation below 1e-6, so values stay
// continuous through the switchover to within the advertised tolerances.

#include <cmath>
#include <limits>
#include <string>

#include "ambiprice/core.hpp"
#include "ambiprice/errors.hpp"

namespace ambiprice {

namespace detail {

// e^u - 1 - u without cancellation for small u.
inline double expm1_minus_x(double u) {
  if (std::abs(u) < 1e-3) {
    const double u2 = u * u;
    return 0.5 * u2 * (1.0 + u / 3.0 + u2 / 12.0 + u2 * u / 60.0 + u2 * u2 / 360.0);
  }
  return std::expm1(u) - u;
}

// (e^u - 1)/y where u = y * dt; the caller passes both to keep the series
// branch exact in dt.
inline double expm1_over(double u, double y, double dt) {
  if (std::abs(u) < 1e-6) {
    const double u2 = u * u;
    return dt * (1.0 + 0.5 * u + u2 / 6.0 + u2 * u / 24.0 + u2 * u2 / 120.0);
  }
  return std::expm1(u) / y;
}

inline void check_time_window(double t, double T) {
  require_finite("t", t);
  require(t >= 0.0 && t <= T,
          "t must lie in [0, T], got t = " + std::to_string(t) + ", T = " + std::to_string(T));
}

// Adaptive Simpson with the standard 1/15 Richardson error estimate.
template <class F>
double simpson_recurse(const F& f, double a, double m, double b, double fa, double fm,
                       double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || (b - a) < 1e-14)
    return left + right + delta / 15.0;
  if (depth > 60)
    throw NumericalError("adaptive quadrature exceeded recursion budget");
  return simpson_recurse(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_recurse(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(f, a, m, b, fa, fm, fb, whole, tol, 0);
}

}  // namespace detail

// Weight on log wealth in the log-utility value function: solves
// w' = rho w - lambda backward from w(T) = 1. Always positive.
inline double g21(double t, double T, double lambda, double rho) {
  detail::check_time_window(t, T);
  const double dt = T - t;
  if (rho == 0.0) return 1.0 + lambda * dt;
  return std::exp(-rho * dt) + lambda * (-std::expm1(-rho * dt)) / rho;
}

// Discounted time mass of g21: the integral over [t, T] of
// e^{-rho (s - t)} g21(s) ds, in closed form.
inline double g23(double t, double T, double lambda, double rho) {
  detail::check_time_window(t, T);
  const double dt = T - t;
  if (rho == 0.0) return dt * (1.0 + 0.5 * lambda * dt);
  const double u = rho * dt;
  const double down = std::exp(-u);
  return lambda / (rho * rho) * down * detail::expm1_minus_x(u) + down * dt;
}

// Consumption envelope: the best rate inside the box for the current
// marginal-utility weight x_q,
//   power:  max over c of lambda e^{-x_q} c^p / p - c
//   log:    max over c of lambda e^{-x_q} ln c - c
// Both objectives are strictly concave, so the unconstrained maximizer
// clamped into the box is the solution. lambda = 0 leaves -c_low.
inline double f_consumption(const UtilityParams& u, double x_q, const ConsumptionBox& cons) {
  detail::require_finite("x_q", x_q);
  if (u.lambda == 0.0) return -cons.low;
  const double weight = u.lambda * std::exp(-x_q);
  const double cap = cons.high ? *cons.high : std::numeric_limits<double>::infinity();
  if (u.kind == UtilityKind::log) {
    if (cap == 0.0)
      throw ValidationError(
          "degenerate utility: lambda > 0 with consumption forced to 0 (log of 0)");
    const double c = std::min(std::max(weight, cons.low), cap);
    return weight * std::log(c) - c;
  }
  const double p = u.p;
  if (cap == 0.0) {
    if (p < 0.0)
      throw ValidationError(
          "degenerate utility: lambda > 0, p < 0 with consumption forced to 0");
    return 0.0;  // p in (0,1): c^p -> 0, so the pinned box contributes nothing
  }
  const double c = std::min(std::max(std::pow(weight, 1.0 / (1.0 - p)), cons.low), cap);
  if (c == 0.0 && p < 0.0)
    throw NumericalError("consumption envelope underflowed to 0 with p < 0");
  return weight / p * std::pow(c, p) - c;
}

// Auxiliary decay profile behind the power closed form, positive for t <= T:
//   lambda^{1/(p-1)} e^{y (t-T)} - (e^{y (t-T)} - 1)/y
// with the y = 0 limit lambda^{1/(p-1)} + (T - t). Strictly decreasing in y
// for t < T.
inline double g12(double t, double y, const UtilityParams& u, double T) {
  detail::check_time_window(t, T);
  detail::require_finite("y", y);
  detail::require(u.kind == UtilityKind::power && u.lambda > 0.0,
                  "g12 requires power utility with lambda > 0");
  const double base = std::pow(u.lambda, 1.0 / (u.p - 1.0));
  if (std::abs(y) < 1e-12) return base + (T - t);
  const double arg = y * (t - T);
  return base * std::exp(arg) - detail::expm1_over(arg, y, t - T);
}

// Log-wealth exponent of the power value function, closed form. Applies when
// lambda = 0 (any consumption box; the envelope is the constant -c_low) or
// when lambda > 0 with the unconstrained box [0, inf).
inline double g1_closed(double t, const UtilityParams& u, double k, const ConsumptionBox& cons,
                        double T) {
  detail::check_time_window(t, T);
  detail::require_finite("k", k);
  if (u.kind != UtilityKind::power)
    throw UnsupportedConfigError("g1_closed applies to power utility only");
  const double p = u.p;
  if (u.lambda == 0.0) return (p * k - p * cons.low - u.rho) * (T - t);
  if (!cons.is_nonnegative_halfline())
    throw UnsupportedConfigError(
        "no closed form for lambda > 0 with a constrained consumption box; use g1_ode");
  const double y = (u.rho - p * k) / (1.0 - p);
  return std::log(u.lambda) + (1.0 - p) * std::log(g12(t, y, u, T));
}

// Same exponent by classical fourth-order integration backward from the
// terminal condition g1(T) = 0. Runs the requested step and half of it; a
// disagreement above 1e-6 means the step is too coarse for this instance and
// is reported instead of smoothed over. Returns the half-step result.
inline double g1_ode(double t, const UtilityParams& u, double k, const ConsumptionBox& cons,
                     double T, double step) {
  detail::check_time_window(t, T);
  detail::require_finite("k", k);
  detail::require(step > 0.0, "g1_ode step must be > 0, got " + std::to_string(step));
  if (u.kind != UtilityKind::power)
    throw UnsupportedConfigError("g1_ode applies to power utility only");
  if (t == T) return 0.0;

  const double p = u.p;
  auto rhs = [&](double g) { return -(p * (k + f_consumption(u, g, cons)) - u.rho); };
  auto integrate = [&](long n) {
    const double h = -(T - t) / static_cast<double>(n);
    double g = 0.0;
    for (long i = 0; i < n; ++i) {
      const double k1 = rhs(g);
      const double k2 = rhs(g + 0.5 * h * k1);
      const double k3 = rhs(g + 0.5 * h * k2);
      const double k4 = rhs(g + h * k3);
      g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return g;
  };

  const long n = std::max(1L, static_cast<long>(std::ceil((T - t) / step)));
  const double coarse = integrate(n);
  const double fine = integrate(2 * n);
  if (std::abs(fine - coarse) > 1e-6)
    throw NumericalError("g1_ode: step " + std::to_string(step) +
                         " too coarse (halving changed the result by " +
                         std::to_string(std::abs(fine - coarse)) + ")");
  return fine;
}

// Constant term of the log value function: the integral over [t, T] of
// e^{-rho (s - t)} g21(s) [k + f(g21(s))] ds by adaptive quadrature.
inline double g22_quadrature(double t, const UtilityParams& u, double k,
                             const ConsumptionBox& cons, double T, double tol = 1e-10) {
  detail::check_time_window(t, T);
  detail::require_finite("k", k);
  detail::require(tol > 0.0, "quadrature tolerance must be > 0");
  if (u.kind != UtilityKind::log)
    throw UnsupportedConfigError("g22_quadrature applies to log utility only");
  auto integrand = [&](double s) {
    const double w = g21(s, T, u.lambda, u.rho);
    return std::exp(-u.rho * (s - t)) * w * (k + f_consumption(u, w, cons));
  };
  return detail::adaptive_simpson(integrand, t, T, tol);
}

// Everything a value evaluation needs besides (t, x).
struct ValueContext {
  UtilityParams utility;
  MarketParams market;
  double k;  // investment-opportunity index of the ambiguity set
  ConsumptionBox consumption;

  ValueContext(UtilityParams u, MarketParams m, double k_, ConsumptionBox c)
      : utility(std::move(u)), market(std::move(m)), k(k_), consumption(std::move(c)) {
    detail::require_finite("k", k);
  }
};

inline double g1_closed(double t, const ValueContext& ctx) {
  return g1_closed(t, ctx.utility, ctx.k, ctx.consumption, ctx.market.T);
}

inline double g1_ode(double t, const ValueContext& ctx, double step) {
  return g1_ode(t, ctx.utility, ctx.k, ctx.consumption, ctx.market.T, step);
}

inline double g22_quadrature(double t, const ValueContext& ctx, double tol = 1e-10) {
  return g22_quadrature(t, ctx.utility, ctx.k, ctx.consumption, ctx.market.T, tol);
}

enum class G1Path { automatic, closed_form, ode };

inline double value_function(double t, double x, const ValueContext& ctx,
                             G1Path path = G1Path::automatic, double ode_step = 0.0) {
  detail::check_time_window(t, ctx.market.T);
  detail::require_finite("x", x);
  detail::require(x > 0.0, "wealth x must be > 0, got " + std::to_string(x));
  const UtilityParams& u = ctx.utility;
  if (u.kind == UtilityKind::log)
    return g21(t, ctx.market.T, u.lambda, u.rho) * std::log(x) +
           g22_quadrature(t, u, ctx.k, ctx.consumption, ctx.market.T);

  const bool closed_applies =
      u.lambda == 0.0 || ctx.consumption.is_nonnegative_halfline();
  double g1;
  if (path == G1Path::closed_form || (path == G1Path::automatic && closed_applies)) {
    g1 = g1_closed(t, u, ctx.k, ctx.consumption, ctx.market.T);
  } else {
    const double step = ode_step > 0.0 ? ode_step : std::max(ctx.market.T - t, 1e-6) / 4096.0;
    g1 = g1_ode(t, u, ctx.k, ctx.consumption, ctx.market.T, step);
  }
  return std::pow(x, u.p) / u.p * std::exp(g1);
}

}  // namespace ambiprice
