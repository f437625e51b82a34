#pragma once

// Core parameter types shared by every other header: utility/market
// parameters, strategy constraint boxes, the ambiguity-set variants, and the
// result record produced by the index calculators. Every constructor
// validates its inputs and throws ValidationError with the offending field
// named; instances are treated as immutable after construction.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ambiprice/errors.hpp"

namespace ambiprice {

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

inline void require_finite(const char* name, double v) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << name << " must be finite, got " << v;
    throw ValidationError(os.str());
  }
}

inline std::string describe(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline std::string describe(const char* name, double v) {
  return std::string(name) + " = " + describe(v);
}

}  // namespace detail

enum class UtilityKind { power, log };

// Preferences of the investor: CRRA power (exponent p in (-inf,0) or (0,1))
// or log. lambda weighs running consumption against terminal wealth
// (lambda = 0 switches consumption off), rho discounts both.
struct UtilityParams {
  UtilityKind kind;
  double p;       // power exponent; stored as 0 for log
  double lambda;  // consumption weight, >= 0
  double rho;     // discount rate, >= 0

  UtilityParams(UtilityKind kind_, double p_, double lambda_, double rho_)
      : kind(kind_), p(kind_ == UtilityKind::log ? 0.0 : p_), lambda(lambda_), rho(rho_) {
    detail::require_finite("utility.lambda", lambda);
    detail::require_finite("utility.rho", rho);
    detail::require(lambda >= 0.0, "utility.lambda must be >= 0, got " + std::to_string(lambda));
    detail::require(rho >= 0.0, "utility.rho must be >= 0, got " + std::to_string(rho));
    if (kind == UtilityKind::power) {
      detail::require_finite("utility.p", p);
      detail::require(p != 0.0 && p < 1.0,
                      "utility.p must lie in (-inf,0) or (0,1) for power utility, got " +
                          std::to_string(p));
    }
  }

  static UtilityParams power(double p, double lambda, double rho) {
    return UtilityParams(UtilityKind::power, p, lambda, rho);
  }
  static UtilityParams log_type(double lambda, double rho) {
    return UtilityParams(UtilityKind::log, 0.0, lambda, rho);
  }

  // Exponent seen by the investment objective; log behaves like p = 0 there.
  double risk_exponent() const { return kind == UtilityKind::power ? p : 0.0; }
};

// r: lending rate, R: borrowing rate (R >= r), T: horizon.
struct MarketParams {
  double r;
  double R;
  double T;

  MarketParams(double r_, double R_, double T_) : r(r_), R(R_), T(T_) {
    detail::require_finite("market.r", r);
    detail::require_finite("market.R", R);
    detail::require_finite("market.T", T);
    detail::require(R >= r, "market.R (borrow) must be >= market.r (lend), got R = " +
                                std::to_string(R) + ", r = " + std::to_string(r));
    detail::require(T > 0.0, "market.T must be > 0, got " + std::to_string(T));
  }
};

// Admissible risky-asset weights [pi_low, pi_high]. An absent bound means
// unbounded on that side (explicit marker, no sentinel floats). The lower
// bound may not exceed 0 and the upper bound may not fall below 1, so the
// all-cash and fully-invested positions are always admissible.
struct PortfolioBox {
  std::optional<double> low;   // <= 0 when present
  std::optional<double> high;  // >= 1 when present

  PortfolioBox(std::optional<double> low_, std::optional<double> high_)
      : low(low_), high(high_) {
    if (low) {
      detail::require_finite("portfolio.low", *low);
      detail::require(*low <= 0.0,
                      "portfolio.low must be <= 0, got " + std::to_string(*low));
    }
    if (high) {
      detail::require_finite("portfolio.high", *high);
      detail::require(*high >= 1.0,
                      "portfolio.high must be >= 1, got " + std::to_string(*high));
    }
  }

  static PortfolioBox unbounded() { return PortfolioBox(std::nullopt, std::nullopt); }
  static PortfolioBox bounded(double lo, double hi) { return PortfolioBox(lo, hi); }

  bool is_unbounded() const { return !low && !high; }
};

// Admissible consumption rates [c_low, c_high]; c_high absent means +inf.
struct ConsumptionBox {
  double low;                  // >= 0
  std::optional<double> high;  // >= low when present

  ConsumptionBox(double low_, std::optional<double> high_) : low(low_), high(high_) {
    detail::require_finite("consumption.low", low);
    detail::require(low >= 0.0, "consumption.low must be >= 0, got " + std::to_string(low));
    if (high) {
      detail::require_finite("consumption.high", *high);
      detail::require(*high >= low, "consumption.high must be >= consumption.low, got high = " +
                                        std::to_string(*high) + ", low = " + std::to_string(low));
    }
  }

  // [0, +inf): the unconstrained case the closed forms assume.
  static ConsumptionBox nonnegative() { return ConsumptionBox(0.0, std::nullopt); }

  bool is_nonnegative_halfline() const { return low == 0.0 && !high; }
};

// Dense row-major square matrix, only as large as ellipsoid candidate lists
// need (a handful of assets).
struct SquareMatrix {
  int n = 0;
  std::vector<double> a;  // row-major, size n*n

  SquareMatrix() = default;
  SquareMatrix(int n_, std::vector<double> entries) : n(n_), a(std::move(entries)) {
    detail::require(n >= 1, "matrix dimension must be >= 1, got " + std::to_string(n));
    detail::require(a.size() == static_cast<size_t>(n) * static_cast<size_t>(n),
                    "matrix entry count does not match dimension " + std::to_string(n));
    for (double v : a) detail::require_finite("matrix entry", v);
  }

  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
};

namespace detail {

// Lower-triangular Cholesky factor of a symmetric positive definite matrix;
// nullopt when the matrix is not SPD (non-positive pivot).
inline std::optional<SquareMatrix> cholesky(const SquareMatrix& m) {
  const int n = m.n;
  SquareMatrix L(n, std::vector<double>(static_cast<size_t>(n) * n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (!(s > 0.0)) return std::nullopt;
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return L;
}

// Solves L y = b (forward substitution) for a lower-triangular L.
inline std::vector<double> forward_solve(const SquareMatrix& L, const std::vector<double>& b) {
  const int n = L.n;
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
  return y;
}

// Solves L^T x = y (back substitution).
inline std::vector<double> backward_solve_t(const SquareMatrix& L, const std::vector<double>& y) {
  const int n = L.n;
  std::vector<double> x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= L(k, i) * x[k];
    x[i] = s / L(i, i);
  }
  return x;
}

}  // namespace detail

// Rectangle of (drift, variance) pairs: [mu_low, mu_high] x [var_low, var_high].
struct BoxSet {
  double mu_low, mu_high;
  double var_low, var_high;

  BoxSet(double mu_low_, double mu_high_, double var_low_, double var_high_)
      : mu_low(mu_low_), mu_high(mu_high_), var_low(var_low_), var_high(var_high_) {
    detail::require_finite("box.mu_low", mu_low);
    detail::require_finite("box.mu_high", mu_high);
    detail::require_finite("box.var_low", var_low);
    detail::require_finite("box.var_high", var_high);
    detail::require(mu_low <= mu_high, "box.mu_low must be <= box.mu_high, got [" +
                                           std::to_string(mu_low) + ", " +
                                           std::to_string(mu_high) + "]");
    detail::require(var_low > 0.0,
                    "box.var_low must be > 0, got " + std::to_string(var_low));
    detail::require(var_low <= var_high, "box.var_low must be <= box.var_high, got [" +
                                             std::to_string(var_low) + ", " +
                                             std::to_string(var_high) + "]");
  }
};

// Interval containment in both coordinates.
inline bool box_contains(const BoxSet& outer, const BoxSet& inner) {
  return outer.mu_low <= inner.mu_low && inner.mu_high <= outer.mu_high &&
         outer.var_low <= inner.var_low && inner.var_high <= outer.var_high;
}

// One-parameter curve of (drift, variance) pairs where pushing the drift up
// by alpha in [0, alpha_max] also pushes the variance up by k * alpha^q:
// { (mu_low + a, var_low + k * a^q) : a in [0, alpha_max] }, 0 < q < 1.
struct CorrelatedSet {
  double mu_low;
  double var_low;
  double k;
  double q;
  double alpha_max;

  CorrelatedSet(double mu_low_, double var_low_, double k_, double q_, double alpha_max_)
      : mu_low(mu_low_), var_low(var_low_), k(k_), q(q_), alpha_max(alpha_max_) {
    detail::require_finite("correlated.mu_low", mu_low);
    detail::require_finite("correlated.var_low", var_low);
    detail::require_finite("correlated.k", k);
    detail::require_finite("correlated.q", q);
    detail::require_finite("correlated.alpha_max", alpha_max);
    detail::require(var_low > 0.0,
                    "correlated.var_low must be > 0, got " + std::to_string(var_low));
    detail::require(k > 0.0, "correlated.k must be > 0, got " + std::to_string(k));
    detail::require(q > 0.0 && q < 1.0,
                    "correlated.q must lie in (0,1), got " + std::to_string(q));
    detail::require(alpha_max >= 0.0,
                    "correlated.alpha_max must be >= 0, got " + std::to_string(alpha_max));
  }
};

// Drift ball of radius epsilon around mu_hat in the metric of Sigma^{-1},
// crossed with a finite list of SPD covariance candidates.
struct EllipsoidSet {
  std::vector<double> mu_hat;
  double epsilon;
  std::vector<SquareMatrix> sigma_candidates;

  EllipsoidSet(std::vector<double> mu_hat_, double epsilon_,
               std::vector<SquareMatrix> candidates)
      : mu_hat(std::move(mu_hat_)), epsilon(epsilon_), sigma_candidates(std::move(candidates)) {
    detail::require(!mu_hat.empty(), "ellipsoid.mu_hat must be non-empty");
    for (double v : mu_hat) detail::require_finite("ellipsoid.mu_hat entry", v);
    detail::require_finite("ellipsoid.epsilon", epsilon);
    detail::require(epsilon >= 0.0,
                    "ellipsoid.epsilon must be >= 0, got " + std::to_string(epsilon));
    detail::require(!sigma_candidates.empty(), "ellipsoid.sigma_candidates must be non-empty");
    const int n = static_cast<int>(mu_hat.size());
    for (size_t c = 0; c < sigma_candidates.size(); ++c) {
      const SquareMatrix& s = sigma_candidates[c];
      detail::require(s.n == n, "ellipsoid.sigma_candidates[" + std::to_string(c) +
                                    "] dimension " + std::to_string(s.n) +
                                    " does not match mu_hat dimension " + std::to_string(n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
          detail::require(std::abs(s(i, j) - s(j, i)) <= 1e-12 * (1.0 + std::abs(s(i, j))),
                          "ellipsoid.sigma_candidates[" + std::to_string(c) +
                              "] is not symmetric");
      detail::require(detail::cholesky(s).has_value(),
                      "ellipsoid.sigma_candidates[" + std::to_string(c) +
                          "] is not positive definite");
    }
  }

  int dim() const { return static_cast<int>(mu_hat.size()); }
};

// Sample-driven set: two-sided confidence intervals at level (1 - alpha)
// built from a sample mean mu_hat, sample variance s2 and sample size n.
struct SampleCiSet {
  double mu_hat;
  double s2;
  long n;
  double alpha;

  SampleCiSet(double mu_hat_, double s2_, long n_, double alpha_)
      : mu_hat(mu_hat_), s2(s2_), n(n_), alpha(alpha_) {
    detail::require_finite("sample_ci.mu_hat", mu_hat);
    detail::require_finite("sample_ci.s2", s2);
    detail::require_finite("sample_ci.alpha", alpha);
    detail::require(n >= 2, "sample_ci.n must be >= 2, got " + std::to_string(n));
    detail::require(s2 > 0.0, "sample_ci.s2 must be > 0, got " + std::to_string(s2));
    detail::require(alpha > 0.0 && alpha < 1.0,
                    "sample_ci.alpha must lie in (0,1), got " + std::to_string(alpha));
  }
};

using AmbiguitySet = std::variant<BoxSet, CorrelatedSet, EllipsoidSet, SampleCiSet>;

// Which branch of the worst-case analysis produced the index value. The box
// labels follow the investor's position, left to right from capped leverage
// down to capped shorting.
enum class KRegime {
  box_borrow_cap,      // levered to pi_high, financing at R
  box_borrow_interior, // levered interior position, financing at R
  box_full_wealth,     // pi = 1, neither lending nor borrowing
  box_lend_interior,   // partial position, remainder lent at r
  box_no_position,     // all cash, index equals r
  box_short_interior,  // short interior position
  box_short_cap,       // short to pi_low
  corr_premium_absorbed,  // adversary moves the drift exactly to r
  corr_interior_root,     // adversary stops at an interior stationary point
  corr_alpha_capped,      // adversary exhausts the drift budget
  ellipsoid_premium,      // excess-return norm exceeds the ball radius
  ellipsoid_clamped,      // ball covers the riskless rate, index equals r
  sample_premium,         // CI on the mean excludes r
  sample_clamped,         // CI on the mean covers r, index equals r
};

inline const char* to_string(KRegime r) {
  switch (r) {
    case KRegime::box_borrow_cap: return "box_borrow_cap";
    case KRegime::box_borrow_interior: return "box_borrow_interior";
    case KRegime::box_full_wealth: return "box_full_wealth";
    case KRegime::box_lend_interior: return "box_lend_interior";
    case KRegime::box_no_position: return "box_no_position";
    case KRegime::box_short_interior: return "box_short_interior";
    case KRegime::box_short_cap: return "box_short_cap";
    case KRegime::corr_premium_absorbed: return "corr_premium_absorbed";
    case KRegime::corr_interior_root: return "corr_interior_root";
    case KRegime::corr_alpha_capped: return "corr_alpha_capped";
    case KRegime::ellipsoid_premium: return "ellipsoid_premium";
    case KRegime::ellipsoid_clamped: return "ellipsoid_clamped";
    case KRegime::sample_premium: return "sample_premium";
    case KRegime::sample_clamped: return "sample_clamped";
  }
  return "unknown";
}

// Index value plus the saddle point that attains it. Scalar families store
// one-element vectors (var_star holds the full row-major matrix for the
// ellipsoid family). boundary_tie marks instances sitting exactly on a
// regime boundary, where the leftmost applicable branch was reported.
struct KResult {
  double k = 0.0;
  std::vector<double> pi_star;
  std::vector<double> mu_star;
  std::vector<double> var_star;
  KRegime regime = KRegime::box_no_position;
  bool boundary_tie = false;

  double pi() const { return scalar(pi_star, "pi_star"); }
  double mu() const { return scalar(mu_star, "mu_star"); }
  double var() const { return scalar(var_star, "var_star"); }

 private:
  static double scalar(const std::vector<double>& v, const char* name) {
    if (v.size() != 1)
      throw ValidationError(std::string(name) + " is not scalar in this result");
    return v[0];
  }
};

}  // namespace ambiprice
