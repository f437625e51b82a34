#pragma once

// Investment-opportunity index: the robust growth rate
//
//   k(B) = sup over admissible weights of the worst case over B of
//          (p-1)/2 * var * pi^2 + mu * pi + r (1-pi)^+ - R (1-pi)^-
//
// with closed forms per ambiguity family plus a grid minimax oracle used by
// the verification paths. The saddle point and the active regime are
// reported alongside the value.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "ambiprice/core.hpp"
#include "ambiprice/errors.hpp"
#include "ambiprice/stats.hpp"

namespace ambiprice {

namespace detail {

// Objective without argument validation, for hot loops.
inline double f1_raw(double x_pi, double x_mu, double x_var, double r, double R, double p) {
  const double cash = 1.0 - x_pi;
  return 0.5 * (p - 1.0) * x_var * x_pi * x_pi + x_mu * x_pi +
         (cash >= 0.0 ? r : R) * cash;
}

inline void check_exponent(double p) {
  require_finite("p", p);
  require(p < 1.0, "risk exponent p must be < 1, got " + std::to_string(p));
}

}  // namespace detail

// One-period objective at a fixed weight and market parameter pair. The cash
// leg earns r when lending (pi <= 1) and pays R when borrowing (pi > 1).
inline double evaluate_f1(double x_pi, double x_mu, double x_var, const MarketParams& m,
                          double p) {
  detail::check_exponent(p);
  detail::require_finite("x_pi", x_pi);
  detail::require_finite("x_mu", x_mu);
  detail::require_finite("x_var", x_var);
  detail::require(x_var > 0.0, "x_var must be > 0, got " + std::to_string(x_var));
  return detail::f1_raw(x_pi, x_mu, x_var, m.r, m.R, p);
}

// Vector form of the same objective, used by the ellipsoid family tests.
inline double evaluate_f1_vec(const std::vector<double>& x_pi, const std::vector<double>& x_mu,
                              const SquareMatrix& sigma, const MarketParams& m, double p) {
  detail::check_exponent(p);
  const int n = sigma.n;
  detail::require(static_cast<int>(x_pi.size()) == n && static_cast<int>(x_mu.size()) == n,
                  "evaluate_f1_vec: dimension mismatch");
  double quad = 0.0, lin = 0.0, total_weight = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) quad += x_pi[i] * sigma(i, j) * x_pi[j];
    lin += x_mu[i] * x_pi[i];
    total_weight += x_pi[i];
  }
  const double cash = 1.0 - total_weight;
  return 0.5 * (p - 1.0) * quad + lin + (cash >= 0.0 ? m.r : m.R) * cash;
}

// ---------------------------------------------------------------------------
// Rectangular ambiguity: seven-branch closed form.
//
// The worst-case variance is always var_high. With beta1, beta2, beta3 the
// unconstrained optimal weights at (mu_low, R), (mu_low, r), (mu_high, r),
// the index follows the branch picked by where those land relative to the
// weight box (beta1 <= beta2 <= beta3 since R >= r and mu_low <= mu_high):
//
//   beta1 >= pi_high        levered to the cap, worst drift mu_low
//   1 <= beta1 <= pi_high   interior levered weight beta1
//   beta1 <= 1 <= beta2     exactly fully invested
//   0 <= beta2 <= 1         interior lending weight beta2
//   beta2 <= 0 <= beta3     out of the market, index r, worst drift r
//   pi_low <= beta3 <= 0    interior short weight beta3, worst drift mu_high
//   beta3 <= pi_low         short to the cap
//
// On a boundary more than one branch applies; the leftmost is reported and
// boundary_tie is set.
inline KResult k_box(const BoxSet& b, const MarketParams& m, double p,
                     const PortfolioBox& box) {
  detail::check_exponent(p);
  const double vh = b.var_high;
  const double denom = (1.0 - p) * vh;
  const double beta1 = (b.mu_low - m.R) / denom;
  const double beta2 = (b.mu_low - m.r) / denom;
  const double beta3 = (b.mu_high - m.r) / denom;

  const bool applies[7] = {
      box.high.has_value() && beta1 >= *box.high,
      beta1 >= 1.0 && (!box.high || beta1 <= *box.high),
      beta1 <= 1.0 && beta2 >= 1.0,
      beta2 >= 0.0 && beta2 <= 1.0,
      beta2 <= 0.0 && beta3 >= 0.0,
      beta3 <= 0.0 && (!box.low || beta3 >= *box.low),
      box.low.has_value() && beta3 <= *box.low,
  };
  int col = 0;
  while (col < 7 && !applies[col]) ++col;
  if (col == 7)
    throw NumericalError("k_box: no branch applies (non-finite inputs slipped through?)");
  int hits = 0;
  for (bool a : applies) hits += a ? 1 : 0;

  KResult out;
  out.boundary_tie = hits > 1;
  out.var_star = {vh};
  switch (col) {
    case 0: {
      const double ph = *box.high;
      out.k = 0.5 * (p - 1.0) * ph * ph * vh + (b.mu_low - m.R) * ph + m.R;
      out.pi_star = {ph};
      out.mu_star = {b.mu_low};
      out.regime = KRegime::box_borrow_cap;
      break;
    }
    case 1:
      out.k = (b.mu_low - m.R) * (b.mu_low - m.R) / (2.0 * denom) + m.R;
      out.pi_star = {beta1};
      out.mu_star = {b.mu_low};
      out.regime = KRegime::box_borrow_interior;
      break;
    case 2:
      out.k = 0.5 * (p - 1.0) * vh + b.mu_low;
      out.pi_star = {1.0};
      out.mu_star = {b.mu_low};
      out.regime = KRegime::box_full_wealth;
      break;
    case 3:
      out.k = (b.mu_low - m.r) * (b.mu_low - m.r) / (2.0 * denom) + m.r;
      out.pi_star = {beta2};
      out.mu_star = {b.mu_low};
      out.regime = KRegime::box_lend_interior;
      break;
    case 4:
      out.k = m.r;
      out.pi_star = {0.0};
      out.mu_star = {m.r};
      out.regime = KRegime::box_no_position;
      break;
    case 5:
      out.k = (b.mu_high - m.r) * (b.mu_high - m.r) / (2.0 * denom) + m.r;
      out.pi_star = {beta3};
      out.mu_star = {b.mu_high};
      out.regime = KRegime::box_short_interior;
      break;
    case 6: {
      const double pl = *box.low;
      out.k = 0.5 * (p - 1.0) * pl * pl * vh + (b.mu_high - m.r) * pl + m.r;
      out.pi_star = {pl};
      out.mu_star = {b.mu_high};
      out.regime = KRegime::box_short_cap;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Correlated drift/variance curve. The adversary picks a in [0, alpha_max];
// the resulting worst pair is (mu_low + a, var_low + k a^q) and the index is
// the single-rate Merton value there. Three cases for the minimizer:
// absorb the premium entirely (drift lands on r), stop at the interior
// stationary point of the premium-to-variance ratio, or exhaust the budget.
inline KResult k_correlated(const CorrelatedSet& c, const MarketParams& m, double p) {
  detail::check_exponent(p);
  if (m.R != m.r)
    throw UnsupportedConfigError(
        "correlated family requires a single rate (market.R == market.r)");
  const double r = m.r;
  const double d = c.mu_low - r;

  double alpha_star;
  KRegime regime;
  bool tie = false;
  // Budget needed for an interior stationary point to exist.
  const double threshold =
      c.alpha_max > 0.0
          ? (2.0 * c.var_low * std::pow(c.alpha_max, 1.0 - c.q) +
             c.k * (2.0 - c.q) * c.alpha_max) /
                (c.k * c.q)
          : 0.0;
  if (d <= 0.0 && -d < c.alpha_max) {
    alpha_star = -d;
    regime = KRegime::corr_premium_absorbed;
    tie = (d == 0.0);
  } else if (d > 0.0 && d < threshold) {
    // Stationarity of (d + a)^2 / (var_low + k a^q):
    //   2 var_low + k (2 - q) a^q - k q d a^(q-1) = 0,
    // negative as a -> 0+, positive at alpha_max by the case condition.
    auto g = [&](double a) {
      return 2.0 * c.var_low + c.k * (2.0 - c.q) * std::pow(a, c.q) -
             c.k * c.q * d * std::pow(a, c.q - 1.0);
    };
    double lo = 1e-12 * c.alpha_max;
    double hi = c.alpha_max;
    for (int i = 0; i < 60 && g(lo) >= 0.0; ++i) lo *= 1e-3;  // tiny premiums push the root below the default bracket
    if (!(g(lo) < 0.0 && g(hi) > 0.0))
      throw NumericalError("k_correlated: stationarity bracket lost");
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (g(mid) < 0.0 ? lo : hi) = mid;
    }
    alpha_star = 0.5 * (lo + hi);
    if (std::abs(g(alpha_star)) >= 1e-12)
      throw NumericalError("k_correlated: stationarity residual " +
                           std::to_string(g(alpha_star)) + " exceeds 1e-12");
    regime = KRegime::corr_interior_root;
  } else {
    alpha_star = c.alpha_max;
    regime = KRegime::corr_alpha_capped;
    tie = (c.alpha_max > 0.0 && (d == threshold || -d == c.alpha_max));
  }

  const double mu_star = c.mu_low + alpha_star;
  const double var_star = c.var_low + c.k * std::pow(alpha_star, c.q);
  const double excess = mu_star - r;
  KResult out;
  out.k = excess * excess / (2.0 * (1.0 - p) * var_star) + r;
  out.pi_star = {excess / ((1.0 - p) * var_star)};
  out.mu_star = {mu_star};
  out.var_star = {var_star};
  out.regime = regime;
  out.boundary_tie = tie;
  return out;
}

// ---------------------------------------------------------------------------
// Ellipsoidal drift ambiguity with a finite covariance candidate list.
// H(Sigma) is the Mahalanobis length of the excess-return vector; the
// adversary first picks the candidate minimizing H, then shrinks the drift
// toward r along the ellipse, leaving premium max(H - eps, 0).
inline KResult k_ellipsoid(const EllipsoidSet& e, const MarketParams& m, double p) {
  detail::check_exponent(p);
  if (m.R != m.r)
    throw UnsupportedConfigError(
        "ellipsoid family requires a single rate (market.R == market.r)");
  const int n = e.dim();
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = e.mu_hat[i] - m.r;

  double h_min = std::numeric_limits<double>::infinity();
  int best = -1;
  for (size_t c = 0; c < e.sigma_candidates.size(); ++c) {
    const auto L = detail::cholesky(e.sigma_candidates[c]);
    if (!L) throw NumericalError("k_ellipsoid: candidate lost positive definiteness");
    const std::vector<double> y = detail::forward_solve(*L, v);
    double h2 = 0.0;
    for (double yi : y) h2 += yi * yi;
    const double h = std::sqrt(h2);
    if (h < h_min) {
      h_min = h;
      best = static_cast<int>(c);
    }
  }

  const SquareMatrix& sigma = e.sigma_candidates[best];
  const double premium = std::max(h_min - e.epsilon, 0.0);
  KResult out;
  out.k = premium * premium / (2.0 * (1.0 - p)) + m.r;
  out.var_star = sigma.a;
  out.regime = premium > 0.0 ? KRegime::ellipsoid_premium : KRegime::ellipsoid_clamped;
  out.boundary_tie = (h_min == e.epsilon);

  out.pi_star.assign(n, 0.0);
  out.mu_star.assign(n, m.r);
  if (premium > 0.0) {
    // pi* = z Sigma^{-1} v / H with z = (H - eps)/(1 - p); worst drift pulls
    // mu_hat toward r by the factor eps/H.
    const auto L = detail::cholesky(sigma);
    const std::vector<double> x = detail::backward_solve_t(*L, detail::forward_solve(*L, v));
    const double scale = premium / (1.0 - p) / h_min;
    for (int i = 0; i < n; ++i) {
      out.pi_star[i] = scale * x[i];
      out.mu_star[i] = e.mu_hat[i] - e.epsilon * v[i] / h_min;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample-driven set: two-sided CIs around the sample moments. The index is
// the single-rate Merton value at the worst admissible pair, which is the
// mean-CI endpoint nearest r (or r itself when the CI covers it) with the
// variance at its upper CI endpoint.

// The rectangle the confidence intervals induce.
inline BoxSet induced_box(const SampleCiSet& s) {
  const double df = static_cast<double>(s.n - 1);
  const double half =
      t_quantile(1.0 - 0.5 * s.alpha, df) * std::sqrt(s.s2 / static_cast<double>(s.n));
  const double scaled = df * s.s2;
  return BoxSet(s.mu_hat - half, s.mu_hat + half,
                scaled / chi2_quantile(1.0 - 0.5 * s.alpha, df),
                scaled / chi2_quantile(0.5 * s.alpha, df));
}

inline KResult k_sample_ci(const SampleCiSet& s, const MarketParams& m, double p) {
  detail::check_exponent(p);
  if (m.R != m.r)
    throw UnsupportedConfigError(
        "sample_ci family requires a single rate (market.R == market.r)");
  const double df = static_cast<double>(s.n - 1);
  const double half =
      t_quantile(1.0 - 0.5 * s.alpha, df) * std::sqrt(s.s2 / static_cast<double>(s.n));
  const double var_high = df * s.s2 / chi2_quantile(0.5 * s.alpha, df);
  const double gap = std::abs(s.mu_hat - m.r) - half;

  KResult out;
  out.var_star = {var_high};
  out.boundary_tie = (gap == 0.0);
  if (gap > 0.0) {
    const double mu_star = s.mu_hat > m.r ? s.mu_hat - half : s.mu_hat + half;
    out.k = gap * gap / (2.0 * (1.0 - p) * var_high) + m.r;
    out.mu_star = {mu_star};
    out.pi_star = {(mu_star - m.r) / ((1.0 - p) * var_high)};
    out.regime = KRegime::sample_premium;
  } else {
    out.k = m.r;
    out.mu_star = {m.r};
    out.pi_star = {0.0};
    out.regime = KRegime::sample_clamped;
  }
  return out;
}

// Family dispatch. Only the rectangular family supports a constrained weight
// box or a borrow/lend spread; the others require the unconstrained setup
// their closed forms assume.
inline KResult k_index(const AmbiguitySet& set, const MarketParams& m, double p,
                       const PortfolioBox& box) {
  return std::visit(
      [&](const auto& s) -> KResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxSet>) {
          return k_box(s, m, p, box);
        } else {
          if (!box.is_unbounded())
            throw UnsupportedConfigError(
                "this ambiguity family requires an unbounded portfolio box");
          if constexpr (std::is_same_v<T, CorrelatedSet>)
            return k_correlated(s, m, p);
          else if constexpr (std::is_same_v<T, EllipsoidSet>)
            return k_ellipsoid(s, m, p);
          else
            return k_sample_ci(s, m, p);
        }
      },
      set);
}

// ---------------------------------------------------------------------------
// Grid minimax oracle: evaluates sup-inf and inf-sup over explicit grids with
// no knowledge of the closed-form branch algebra. Exists to check the
// formulas above, so it favors transparency over speed.

struct GridSpec {
  int n_pi = 2001;
  int n_mu = 2001;
  int n_var = 2001;
  double pi_cap = 10.0;  // weight-grid truncation when the box is unbounded

  GridSpec() = default;
  GridSpec(int n_pi_, int n_mu_, int n_var_, double pi_cap_ = 10.0)
      : n_pi(n_pi_), n_mu(n_mu_), n_var(n_var_), pi_cap(pi_cap_) {
    detail::require(n_pi >= 2 && n_mu >= 2 && n_var >= 2,
                    "grid counts must be >= 2");
    detail::require_finite("grid.pi_cap", pi_cap);
    detail::require(pi_cap >= 1.0, "grid.pi_cap must be >= 1, got " + std::to_string(pi_cap));
  }
};

// Both evaluation orders; they must agree up to grid resolution when the
// closed forms are right (a genuine saddle point exists).
struct MinimaxEstimate {
  double sup_inf;
  double inf_sup;
  double gap() const { return inf_sup - sup_inf; }
};

namespace detail {

inline std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = hi;
  return g;
}

// Weight grid over the admissible interval. The always-admissible weights 0
// and 1 are inserted so the discrete sup never skips them.
inline std::vector<double> pi_grid(const PortfolioBox& box, const GridSpec& grid) {
  const double lo = box.low ? *box.low : -grid.pi_cap;
  const double hi = box.high ? *box.high : grid.pi_cap;
  std::vector<double> g = linear_grid(lo, hi, grid.n_pi);
  g.push_back(0.0);
  g.push_back(1.0);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

// Minimax over an explicit list of (mu, var) market points.
inline MinimaxEstimate minimax_over_points(const std::vector<double>& pis,
                                           const std::vector<double>& mus,
                                           const std::vector<double>& vars,
                                           const MarketParams& m, double p) {
  const double inf = std::numeric_limits<double>::infinity();
  double sup_inf = -inf;
  for (double pi : pis) {
    double worst = inf;
    for (size_t i = 0; i < mus.size(); ++i)
      worst = std::min(worst, f1_raw(pi, mus[i], vars[i], m.r, m.R, p));
    sup_inf = std::max(sup_inf, worst);
  }
  double inf_sup = inf;
  for (size_t i = 0; i < mus.size(); ++i) {
    double best = -inf;
    for (double pi : pis)
      best = std::max(best, f1_raw(pi, mus[i], vars[i], m.r, m.R, p));
    inf_sup = std::min(inf_sup, best);
  }
  return MinimaxEstimate{sup_inf, inf_sup};
}

}  // namespace detail

inline MinimaxEstimate k_minimax_oracle(const AmbiguitySet& set, const MarketParams& m,
                                        double p, const PortfolioBox& box,
                                        const GridSpec& grid) {
  detail::check_exponent(p);
  const std::vector<double> pis = detail::pi_grid(box, grid);

  if (const BoxSet* b = std::get_if<BoxSet>(&set)) {
    // The variance enters the objective with coefficient (p-1)/2 * pi^2 <= 0,
    // so for every fixed weight the objective is non-increasing in the
    // variance, and so is any pointwise sup of such slices. The grid min
    // over the variance axis therefore sits at its top point var_high,
    // exactly (floating-point multiply/add preserve this monotonicity); the
    // reduction below returns the same values as the full 3-D scan.
    const std::vector<double> mus = detail::linear_grid(b->mu_low, b->mu_high, grid.n_mu);
    const std::vector<double> vars(mus.size(), b->var_high);
    return detail::minimax_over_points(pis, mus, vars, m, p);
  }
  if (const CorrelatedSet* c = std::get_if<CorrelatedSet>(&set)) {
    const std::vector<double> alphas = detail::linear_grid(0.0, c->alpha_max, grid.n_mu);
    std::vector<double> mus(alphas.size()), vars(alphas.size());
    for (size_t i = 0; i < alphas.size(); ++i) {
      mus[i] = c->mu_low + alphas[i];
      vars[i] = c->var_low + c->k * std::pow(alphas[i], c->q);
    }
    return detail::minimax_over_points(pis, mus, vars, m, p);
  }
  if (const EllipsoidSet* e = std::get_if<EllipsoidSet>(&set)) {
    if (e->dim() != 1)
      throw UnsupportedConfigError("minimax oracle only covers 1-dimensional ellipsoid sets");
    std::vector<double> mus, vars;
    mus.reserve(e->sigma_candidates.size() * grid.n_mu);
    vars.reserve(mus.capacity());
    for (const SquareMatrix& s : e->sigma_candidates) {
      const double sd = std::sqrt(s(0, 0));
      const std::vector<double> slice = detail::linear_grid(
          e->mu_hat[0] - e->epsilon * sd, e->mu_hat[0] + e->epsilon * sd, grid.n_mu);
      for (double mu : slice) {
        mus.push_back(mu);
        vars.push_back(s(0, 0));
      }
    }
    return detail::minimax_over_points(pis, mus, vars, m, p);
  }
  const SampleCiSet& s = std::get<SampleCiSet>(set);
  return k_minimax_oracle(AmbiguitySet(induced_box(s)), m, p, box, grid);
}

}  // namespace ambiprice
