#include "ambiprice/pricing.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ambiprice/errors.hpp"
#include "ambiprice/rng.hpp"

using namespace ambiprice;

namespace {

const ConsumptionBox kFreeCons = ConsumptionBox::nonnegative();

// Market rates never enter the value side of the residual, only the horizon
// does, so a fixed equal-rate market serves every context here.
ValueContext make_ctx(const UtilityParams& u, double k, double T,
                      const ConsumptionBox& cons = ConsumptionBox::nonnegative()) {
  return ValueContext(u, MarketParams(0.04, 0.04, T), k, cons);
}

// Index of the largest element; prices on a time grid should be unimodal.
int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST(PriceNoConsumption, PinnedOneYearExample) {
  const PriceQuote q = price_no_consumption(0.0, 1.0, 0.04, 0.05, 1.0);
  EXPECT_NEAR(q.price, 1.0 - std::exp(-0.01), 1e-12);
  EXPECT_NEAR(q.price, 0.00995017, 5e-9);
  EXPECT_EQ(q.k1, 0.04);
  EXPECT_EQ(q.k2, 0.05);
  EXPECT_EQ(q.formula, PriceFormula::no_consumption);
  EXPECT_FALSE(q.turning_point.has_value());
}

TEST(PriceNoConsumption, WorthlessWithoutGainOrTime) {
  // identical indices
  EXPECT_EQ(price_no_consumption(0.2, 3.0, 0.05, 0.05, 2.0).price, 0.0);
  // no horizon left to exploit the better index
  EXPECT_EQ(price_no_consumption(2.0, 3.0, 0.03, 0.08, 2.0).price, 0.0);
}

TEST(PriceNoConsumption, StrictlyDecreasingInTime) {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 80; ++i) {
    const double t = 2.0 * i / 80.0;
    const double price = price_no_consumption(t, 1.0, 0.04, 0.07, 2.0).price;
    EXPECT_LT(price, prev) << "t = " << t;
    prev = price;
  }
}

TEST(PriceNoConsumption, ScalesLinearlyInWealth) {
  const PriceQuote unit = price_no_consumption(0.3, 1.0, 0.04, 0.06, 2.0);
  const PriceQuote tripled = price_no_consumption(0.3, 3.0, 0.04, 0.06, 2.0);
  EXPECT_EQ(tripled.price, 3.0 * unit.price);
}

TEST(PriceNoConsumption, RejectsBadArguments) {
  EXPECT_THROW(price_no_consumption(0.0, 1.0, 0.06, 0.05, 1.0), ValidationError);
  EXPECT_THROW(price_no_consumption(0.0, 0.0, 0.04, 0.05, 1.0), ValidationError);
  EXPECT_THROW(price_no_consumption(-0.1, 1.0, 0.04, 0.05, 1.0), ValidationError);
  EXPECT_THROW(price_no_consumption(1.5, 1.0, 0.04, 0.05, 1.0), ValidationError);
}

TEST(PriceLog, PinnedUndiscountedExample) {
  // rho = 0, lambda = 0.2 over a unit window: g21 = 1.2, g23 = 1.1, so the
  // index gap is weighted by 1.1/1.2.
  const UtilityParams u = UtilityParams::log_type(0.2, 0.0);
  const PriceQuote q = price_log(0.0, 1.0, 0.04, 0.06, u, 1.0);
  EXPECT_NEAR(q.price, 1.0 - std::exp(-0.02 * 1.1 / 1.2), 1e-14);
  EXPECT_EQ(q.formula, PriceFormula::log_utility);
  EXPECT_FALSE(q.turning_point.has_value());
}

TEST(PriceLog, WeightlessConsumptionMatchesTheLambdaZeroFormula) {
  for (double rho : {0.0, 0.15, 0.6}) {
    const UtilityParams u = UtilityParams::log_type(0.0, rho);
    for (double t : {0.0, 0.7, 1.9}) {
      const double a = price_log(t, 2.5, 0.04, 0.09, u, 2.0).price;
      const double b = price_no_consumption(t, 2.5, 0.04, 0.09, 2.0).price;
      EXPECT_NEAR(a, b, 1e-14 * 2.5) << "rho = " << rho << ", t = " << t;
    }
  }
}

TEST(PriceLog, WorthlessWhenIndicesMatch) {
  const UtilityParams u = UtilityParams::log_type(0.2, 0.4);
  EXPECT_EQ(price_log(0.3, 1.0, 0.05, 0.05, u, 2.0).price, 0.0);
}

TEST(PriceLog, TurningPointFilledOnlyInTheStrongDiscountRegime) {
  const UtilityParams weak = UtilityParams::log_type(0.2, 0.05);
  EXPECT_FALSE(price_log(0.0, 1.0, 0.04, 0.06, weak, 20.0).turning_point.has_value());

  const UtilityParams weightless = UtilityParams::log_type(0.0, 0.3);
  EXPECT_FALSE(price_log(0.0, 1.0, 0.04, 0.06, weightless, 20.0).turning_point.has_value());

  const UtilityParams strong = UtilityParams::log_type(0.1, 0.5);
  const PriceQuote q = price_log(0.0, 1.0, 0.04, 0.06, strong, 20.0);
  ASSERT_TRUE(q.turning_point.has_value());
  EXPECT_GT(*q.turning_point, 0.0);
  EXPECT_LT(*q.turning_point, 20.0);
}

TEST(PriceLog, ClosedFormSatisfiesTheIndifferenceEquation) {
  NormalStream gen = NormalStream::keyed(41, 0, 0);
  for (int i = 0; i < 25; ++i) {
    const double lambda = 2.0 * gen.next_uniform();
    const double rho = 0.6 * gen.next_uniform();
    const UtilityParams u = UtilityParams::log_type(lambda, rho);
    const double T = 0.5 + 2.5 * gen.next_uniform();
    const double t = 0.9 * T * gen.next_uniform();
    const double k1 = 0.02 + 0.05 * gen.next_uniform();
    const double k2 = k1 + 0.08 * gen.next_uniform();
    const double x = 0.5 + 3.0 * gen.next_uniform();
    const PriceQuote q = price_log(t, x, k1, k2, u, T);
    EXPECT_GE(q.price, 0.0);
    EXPECT_LT(q.price, x);
    // The formula holds for constrained consumption too: the consumption
    // envelope enters both sides identically and cancels.
    const ConsumptionBox cons =
        (i % 2 == 0) ? ConsumptionBox::nonnegative() : ConsumptionBox(0.1, 0.4);
    const ValueContext before = make_ctx(u, k1, T, cons);
    const ValueContext after = make_ctx(u, k2, T, cons);
    EXPECT_LT(indifference_residual(q, t, x, before, after), 1e-10) << "instance " << i;
  }
}

TEST(PriceLog, AgreesWithTheBisectionSolverUnderAConstrainedBox) {
  const UtilityParams u = UtilityParams::log_type(0.3, 0.2);
  const ConsumptionBox cons(0.05, 0.5);
  const MarketParams m(0.03, 0.03, 2.0);
  const PriceQuote closed = price_log(0.4, 2.0, 0.04, 0.07, u, 2.0);
  const PriceQuote solved = price_bisection(0.4, 2.0, 0.04, 0.07, u, m, cons);
  EXPECT_EQ(solved.formula, PriceFormula::log_utility);
  EXPECT_NEAR(solved.price, closed.price, 1e-11);
}

TEST(PricePower, WorthlessWithoutGainOrTime) {
  const UtilityParams u = UtilityParams::power(0.5, 0.2, 0.1);
  EXPECT_EQ(price_power(0.0, 1.0, 0.05, 0.05, u, 1.0).price, 0.0);
  EXPECT_EQ(price_power(1.0, 1.0, 0.04, 0.05, u, 1.0).price, 0.0);
}

TEST(PricePower, UnconstrainedInstanceSatisfiesTheIndifferenceEquation) {
  const UtilityParams u = UtilityParams::power(0.5, 0.2, 0.1);
  const PriceQuote q = price_power(0.0, 1.0, 0.04, 0.05, u, 1.0);
  EXPECT_GT(q.price, 0.0);
  EXPECT_LT(q.price, 1.0);
  EXPECT_EQ(q.formula, PriceFormula::power_utility);
  const ValueContext before = make_ctx(u, 0.04, 1.0);
  const ValueContext after = make_ctx(u, 0.05, 1.0);
  EXPECT_LT(indifference_residual(q, 0.0, 1.0, before, after), 1e-10);
  EXPECT_LT(indifference_residual(q, 0.0, 1.0, before, after, G1Path::closed_form), 1e-10);
}

TEST(PricePower, RandomInstancesStayInRangeAndSolveTheEquation) {
  NormalStream gen = NormalStream::keyed(43, 0, 0);
  for (int i = 0; i < 20; ++i) {
    double p = -3.0 + 3.85 * gen.next_uniform();
    if (std::abs(p) < 0.05) p = 0.05;
    const UtilityParams u =
        UtilityParams::power(p, 0.05 + 2.0 * gen.next_uniform(), 0.6 * gen.next_uniform());
    const double T = 0.4 + 2.5 * gen.next_uniform();
    const double t = 0.85 * T * gen.next_uniform();
    const double k1 = 0.01 + 0.05 * gen.next_uniform();
    const double k2 = k1 + 0.005 + 0.07 * gen.next_uniform();
    const double x = 0.4 + 3.0 * gen.next_uniform();
    const PriceQuote q = price_power(t, x, k1, k2, u, T);
    EXPECT_GT(q.price, 0.0);
    EXPECT_LT(q.price, x);
    const ValueContext before = make_ctx(u, k1, T);
    const ValueContext after = make_ctx(u, k2, T);
    EXPECT_LT(indifference_residual(q, t, x, before, after), 1e-10) << "instance " << i;
  }
}

TEST(PricePower, MatchesTheBisectionSolverOnTheHalfline) {
  const UtilityParams u = UtilityParams::power(0.5, 0.2, 0.1);
  const MarketParams m(0.04, 0.04, 1.3);
  const PriceQuote closed = price_power(0.3, 2.0, 0.04, 0.06, u, 1.3);
  const PriceQuote solved = price_bisection(0.3, 2.0, 0.04, 0.06, u, m, kFreeCons);
  EXPECT_EQ(solved.formula, PriceFormula::power_utility);
  EXPECT_NEAR(solved.price, closed.price, 1e-10 * 2.0);
}

TEST(PricePower, ScalesLinearlyInWealth) {
  const UtilityParams u = UtilityParams::power(-1.0, 0.4, 0.2);
  const PriceQuote unit = price_power(0.2, 1.0, 0.03, 0.07, u, 1.5);
  const PriceQuote tripled = price_power(0.2, 3.0, 0.03, 0.07, u, 1.5);
  EXPECT_EQ(tripled.price, 3.0 * unit.price);
}

TEST(PricePower, RejectsWrongUtilityOrZeroWeight) {
  EXPECT_THROW(price_power(0.0, 1.0, 0.04, 0.05, UtilityParams::log_type(0.2, 0.1), 1.0),
               ValidationError);
  EXPECT_THROW(price_power(0.0, 1.0, 0.04, 0.05, UtilityParams::power(0.5, 0.0, 0.1), 1.0),
               ValidationError);
}

TEST(PriceBisection, EqualIndicesShortCircuitToZero) {
  const MarketParams m(0.04, 0.04, 2.0);
  const PriceQuote log_q =
      price_bisection(0.5, 1.0, 0.05, 0.05, UtilityParams::log_type(0.2, 0.3), m, kFreeCons);
  EXPECT_EQ(log_q.price, 0.0);
  EXPECT_EQ(log_q.formula, PriceFormula::log_utility);
  const PriceQuote pow_q = price_bisection(0.5, 1.0, 0.05, 0.05,
                                           UtilityParams::power(0.5, 0.2, 0.1), m,
                                           ConsumptionBox(0.1, 0.3));
  EXPECT_EQ(pow_q.price, 0.0);
  EXPECT_EQ(pow_q.formula, PriceFormula::power_utility);
}

TEST(PriceBisection, ConstrainedPowerSolvesTheDefiningEquation) {
  const UtilityParams u = UtilityParams::power(0.5, 0.3, 0.2);
  const ConsumptionBox cons(0.1, 0.3);
  const MarketParams m(0.04, 0.04, 2.0);
  const PriceQuote q = price_bisection(0.5, 2.0, 0.04, 0.06, u, m, cons);
  EXPECT_GT(q.price, 0.0);
  EXPECT_LT(q.price, 2.0);
  const ValueContext before(u, m, 0.04, cons);
  const ValueContext after(u, m, 0.06, cons);
  // same step the solver used, so the g1 integrations line up
  const double step = 1.5 / 4096.0;
  EXPECT_LT(indifference_residual(q, 0.5, 2.0, before, after, G1Path::ode, step), 1e-9);
}

TEST(PriceBisection, NegativeExponentConstrainedCase) {
  const UtilityParams u = UtilityParams::power(-1.0, 0.5, 0.1);
  const ConsumptionBox cons(0.2, 0.6);
  const MarketParams m(0.04, 0.04, 1.5);
  const PriceQuote q = price_bisection(0.0, 1.0, 0.04, 0.07, u, m, cons);
  EXPECT_GT(q.price, 0.0);
  EXPECT_LT(q.price, 1.0);
  const ValueContext before(u, m, 0.04, cons);
  const ValueContext after(u, m, 0.07, cons);
  EXPECT_LT(indifference_residual(q, 0.0, 1.0, before, after, G1Path::ode), 1e-9);
}

TEST(IndifferenceResidual, EqualContextsAtZeroPriceGiveExactlyZero) {
  const UtilityParams u = UtilityParams::log_type(0.2, 0.1);
  const ValueContext ctx = make_ctx(u, 0.05, 1.0);
  const PriceQuote q{0.0, 0.05, 0.05, PriceFormula::log_utility, std::nullopt};
  EXPECT_EQ(indifference_residual(q, 0.3, 1.7, ctx, ctx), 0.0);
}

TEST(IndifferenceResidual, PerturbingThePriceRaisesTheDefect) {
  const UtilityParams u = UtilityParams::power(0.5, 0.2, 0.1);
  const PriceQuote q = price_power(0.0, 1.0, 0.04, 0.05, u, 1.0);
  const ValueContext before = make_ctx(u, 0.04, 1.0);
  const ValueContext after = make_ctx(u, 0.05, 1.0);
  const double at_root = indifference_residual(q, 0.0, 1.0, before, after);
  for (double bump : {1e-3, -1e-3}) {
    PriceQuote off = q;
    off.price += bump;
    ASSERT_GT(1.0 - off.price, 0.0);
    EXPECT_GT(indifference_residual(off, 0.0, 1.0, before, after), at_root);
  }
}

TEST(IndifferenceResidual, RequiresWealthAboveThePrice) {
  const UtilityParams u = UtilityParams::log_type(0.2, 0.1);
  const ValueContext ctx = make_ctx(u, 0.05, 1.0);
  const PriceQuote q{1.0, 0.04, 0.05, PriceFormula::log_utility, std::nullopt};
  EXPECT_THROW(indifference_residual(q, 0.0, 1.0, ctx, ctx), ValidationError);
}

TEST(TurningPoint, RejectsDegenerateArguments) {
  const UtilityParams u = UtilityParams::log_type(0.1, 0.5);
  EXPECT_THROW(scan_turning_point(0.05, 0.05, u, 1.0), ValidationError);
  EXPECT_THROW(scan_turning_point(0.06, 0.05, u, 1.0), ValidationError);
  EXPECT_THROW(scan_turning_point(0.04, 0.05, u, 0.0), ValidationError);
}

TEST(TurningPoint, LogWeakDiscountIsMonotoneDecreasing) {
  const UtilityParams u = UtilityParams::log_type(0.2, 0.05);
  const TurningPointScan scan = scan_turning_point(0.04, 0.06, u, 20.0);
  EXPECT_FALSE(scan.t_star.has_value());
  EXPECT_EQ(scan.sign_changes, 0);
  EXPECT_FALSE(scan_turning_point(0.04, 0.06, UtilityParams::log_type(0.0, 0.3), 20.0)
                   .t_star.has_value());

  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 1000; ++i) {
    const double t = 20.0 * i / 1000.0;
    const double price = price_log(t, 1.0, 0.04, 0.06, u, 20.0).price;
    EXPECT_LT(price, prev) << "t = " << t;
    prev = price;
  }
}

TEST(TurningPoint, LogStrongDiscountPeaksAtTheDiagnosedDate) {
  const UtilityParams u = UtilityParams::log_type(0.1, 0.5);
  const double T = 20.0;
  const TurningPointScan scan = scan_turning_point(0.04, 0.06, u, T);
  ASSERT_TRUE(scan.t_star.has_value());
  EXPECT_EQ(scan.sign_changes, 1);
  const double ts = *scan.t_star;
  EXPECT_GT(ts, 14.0);
  EXPECT_LT(ts, 15.5);
  // slope diagnostic flips from rising to falling across the root
  EXPECT_GT(detail::g_tilde2(ts - 1e-4, T, u.lambda, u.rho), 0.0);
  EXPECT_LT(detail::g_tilde2(ts + 1e-4, T, u.lambda, u.rho), 0.0);

  // The quote carries the same date, and sampled prices peak there.
  const PriceQuote q = price_log(0.0, 1.0, 0.04, 0.06, u, T);
  ASSERT_TRUE(q.turning_point.has_value());
  EXPECT_EQ(*q.turning_point, ts);

  const int n = 2001;
  std::vector<double> prices(n);
  for (int i = 0; i < n; ++i)
    prices[i] = price_log(T * i / (n - 1.0), 1.0, 0.04, 0.06, u, T).price;
  const int peak = argmax(prices);
  const double step = T / (n - 1.0);
  EXPECT_NEAR(peak * step, ts, step + 1e-9);
  for (int i = 0; i + 1 < n; ++i) {
    if (i + 1 < peak) {
      EXPECT_LT(prices[i], prices[i + 1]) << "i = " << i;
    } else if (i > peak) {
      EXPECT_GT(prices[i], prices[i + 1]) << "i = " << i;
    }
  }
}

TEST(TurningPoint, LogWholeWindowCanSitPastThePeak) {
  // Strong discounting but a short window: the diagnostic is already
  // negative at t = 0, so the peak date degenerates to the left endpoint.
  const UtilityParams u = UtilityParams::log_type(0.1, 0.5);
  const TurningPointScan scan = scan_turning_point(0.04, 0.06, u, 0.1);
  ASSERT_TRUE(scan.t_star.has_value());
  EXPECT_EQ(*scan.t_star, 0.0);
  EXPECT_EQ(scan.sign_changes, 0);

  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i / 100.0;
    const double price = price_log(t, 1.0, 0.04, 0.06, u, 0.1).price;
    EXPECT_LT(price, prev);
    prev = price;
  }
}

TEST(TurningPoint, PeakDateDependsOnlyOnTheDiscountProfile) {
  // The log diagnostic involves (lambda, rho, T) alone, so rescaling the
  // index gap must not move the root.
  const UtilityParams u = UtilityParams::log_type(0.2, 0.4);
  const TurningPointScan a = scan_turning_point(0.04, 0.06, u, 20.0);
  const TurningPointScan b = scan_turning_point(0.01, 0.02, u, 20.0);
  ASSERT_TRUE(a.t_star.has_value());
  ASSERT_TRUE(b.t_star.has_value());
  EXPECT_EQ(*a.t_star, *b.t_star);
  EXPECT_NEAR(*a.t_star, 12.38130377244488, 1e-9);
}

TEST(TurningPoint, PowerWeakDiscountIsMonotoneDecreasing) {
  // rho - max(p k) = 0.27 sits below (1-p) lambda^{1/(1-p)} = 0.5: the slope
  // diagnostic stays positive and the price falls over the whole window.
  const UtilityParams u = UtilityParams::power(0.5, 1.0, 0.3);
  const TurningPointScan scan = scan_turning_point(0.04, 0.06, u, 3.0);
  EXPECT_FALSE(scan.t_star.has_value());
  EXPECT_EQ(scan.sign_changes, 0);

  const PriceQuote q = price_power(0.0, 1.0, 0.04, 0.06, u, 3.0);
  EXPECT_FALSE(q.turning_point.has_value());
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 300; ++i) {
    const double t = 3.0 * i / 300.0;
    const double price = price_power(t, 1.0, 0.04, 0.06, u, 3.0).price;
    EXPECT_LT(price, prev) << "t = " << t;
    prev = price;
  }
}

TEST(TurningPoint, PowerStrongDiscountPeaksOnce) {
  const UtilityParams u = UtilityParams::power(0.5, 0.2, 0.5);
  const double T = 20.0;
  const TurningPointScan scan = scan_turning_point(0.04, 0.06, u, T);
  ASSERT_TRUE(scan.t_star.has_value());
  EXPECT_EQ(scan.sign_changes, 1);
  const double ts = *scan.t_star;
  EXPECT_GT(ts, 16.0);
  EXPECT_LT(ts, 19.0);
  EXPECT_LT(detail::delta_g1(ts - 1e-4, 0.04, 0.06, u, T), 0.0);
  EXPECT_GT(detail::delta_g1(ts + 1e-4, 0.04, 0.06, u, T), 0.0);

  const PriceQuote q = price_power(0.0, 1.0, 0.04, 0.06, u, T);
  ASSERT_TRUE(q.turning_point.has_value());
  EXPECT_EQ(*q.turning_point, ts);

  const int n = 2001;
  std::vector<double> prices(n);
  for (int i = 0; i < n; ++i)
    prices[i] = price_power(T * i / (n - 1.0), 1.0, 0.04, 0.06, u, T).price;
  const int peak = argmax(prices);
  const double step = T / (n - 1.0);
  EXPECT_NEAR(peak * step, ts, step + 1e-9);
  for (int i = 0; i + 1 < n; ++i) {
    if (i + 1 < peak) {
      EXPECT_LT(prices[i], prices[i + 1]) << "i = " << i;
    } else if (i > peak) {
      EXPECT_GT(prices[i], prices[i + 1]) << "i = " << i;
    }
  }
}

TEST(TurningPoint, PowerShortWindowSitsPastThePeak) {
  // Same discount regime as the long-window instance above, but the grid
  // finds no sign change inside one year, so the peak degenerates to t = 0
  // and the price falls throughout.
  const UtilityParams u = UtilityParams::power(0.5, 0.2, 0.1);
  const TurningPointScan scan = scan_turning_point(0.04, 0.05, u, 1.0);
  ASSERT_TRUE(scan.t_star.has_value());
  EXPECT_EQ(*scan.t_star, 0.0);
  EXPECT_EQ(scan.sign_changes, 0);

  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 200; ++i) {
    const double t = i / 200.0;
    const double price = price_power(t, 1.0, 0.04, 0.05, u, 1.0).price;
    EXPECT_LT(price, prev);
    prev = price;
  }
}

TEST(TurningPoint, FindWrapperMirrorsTheScan) {
  const UtilityParams u = UtilityParams::log_type(0.1, 0.5);
  const TurningPointScan scan = scan_turning_point(0.04, 0.06, u, 20.0);
  const std::optional<double> found = find_turning_point(0.04, 0.06, u, 20.0);
  ASSERT_TRUE(found.has_value());
  EXPECT_EQ(*found, *scan.t_star);
}

TEST(PriceGeneral, IdenticalSetsAreWorthless) {
  const BoxSet b(0.06, 0.08, 0.05, 0.09);
  const MarketParams m(0.04, 0.04, 1.0);
  const PriceQuote q =
      price_general(0.0, 1.0, AmbiguitySet(b), AmbiguitySet(b), PortfolioBox::bounded(-1.0, 2.0),
                    kFreeCons, UtilityParams::power(0.5, 0.0, 0.1), m);
  EXPECT_EQ(q.price, 0.0);
  EXPECT_EQ(q.k1, q.k2);
  EXPECT_EQ(q.formula, PriceFormula::no_consumption);
}

TEST(PriceGeneral, StraddlingDriftMakesTheDataWorthless) {
  // Even the narrowed box leaves the drift straddling the rate, so neither
  // set supports a position and the indices pin to r on both sides.
  const BoxSet b1(0.02, 0.08, 0.02, 0.05);
  const BoxSet b2(0.03, 0.05, 0.03, 0.04);
  const MarketParams m(0.04, 0.04, 1.0);
  const PriceQuote q =
      price_general(0.0, 1.0, AmbiguitySet(b1), AmbiguitySet(b2), PortfolioBox::unbounded(),
                    kFreeCons, UtilityParams::log_type(0.2, 0.1), m);
  EXPECT_EQ(q.k1, 0.04);
  EXPECT_EQ(q.k2, 0.04);
  EXPECT_EQ(q.price, 0.0);
}

TEST(PriceGeneral, NestedBoxesSolveTheEquationUnderEveryClosedForm) {
  const AmbiguitySet b1 = BoxSet(0.05, 0.10, 0.03, 0.08);
  const AmbiguitySet b2 = BoxSet(0.07, 0.09, 0.04, 0.05);
  const MarketParams m(0.04, 0.04, 2.0);
  const PortfolioBox box = PortfolioBox::unbounded();
  const std::vector<UtilityParams> utilities = {
      UtilityParams::power(0.5, 0.0, 0.2),  // weightless consumption
      UtilityParams::log_type(0.3, 0.15),
      UtilityParams::power(-1.5, 0.4, 0.2),  // unconstrained power
  };
  const std::vector<PriceFormula> expected = {
      PriceFormula::no_consumption, PriceFormula::log_utility, PriceFormula::power_utility};
  for (size_t j = 0; j < utilities.size(); ++j) {
    const PriceQuote q = price_general(0.5, 1.3, b1, b2, box, kFreeCons, utilities[j], m);
    EXPECT_EQ(q.formula, expected[j]);
    EXPECT_LT(q.k1, q.k2);
    EXPECT_GT(q.price, 0.0);
    EXPECT_LT(q.price, 1.3);
    const ValueContext before = make_ctx(utilities[j], q.k1, 2.0);
    const ValueContext after = make_ctx(utilities[j], q.k2, 2.0);
    EXPECT_LT(indifference_residual(q, 0.5, 1.3, before, after), 1e-10)
        << to_string(q.formula);
  }
}

TEST(PriceGeneral, ConstrainedConsumptionRoutesToTheBisectionSolver) {
  const AmbiguitySet b1 = BoxSet(0.05, 0.10, 0.03, 0.08);
  const AmbiguitySet b2 = BoxSet(0.07, 0.09, 0.04, 0.05);
  const MarketParams m(0.04, 0.04, 2.0);
  const UtilityParams u = UtilityParams::power(0.5, 0.3, 0.2);
  const ConsumptionBox cons(0.1, 0.3);
  const PriceQuote q =
      price_general(0.5, 2.0, b1, b2, PortfolioBox::unbounded(), cons, u, m);
  EXPECT_EQ(q.formula, PriceFormula::power_utility);
  EXPECT_GT(q.price, 0.0);
  EXPECT_LT(q.price, 2.0);
  const ValueContext before(u, m, q.k1, cons);
  const ValueContext after(u, m, q.k2, cons);
  EXPECT_LT(indifference_residual(q, 0.5, 2.0, before, after, G1Path::ode), 1e-9);
}

TEST(PriceGeneral, EveryFamilyPricesEndToEnd) {
  const double t = 0.25, x = 1.3;
  const MarketParams m(0.04, 0.04, 1.5);
  const PortfolioBox free_box = PortfolioBox::unbounded();

  {  // interval box, weightless consumption
    const AmbiguitySet b1 = BoxSet(0.05, 0.10, 0.03, 0.08);
    const AmbiguitySet b2 = BoxSet(0.07, 0.09, 0.04, 0.05);
    const UtilityParams u = UtilityParams::power(0.5, 0.0, 0.2);
    const PriceQuote q =
        price_general(t, x, b1, b2, PortfolioBox::bounded(-1.0, 2.0), kFreeCons, u, m);
    EXPECT_EQ(q.formula, PriceFormula::no_consumption);
    EXPECT_GT(q.price, 0.0);
    EXPECT_LT(q.price, x);
    EXPECT_LT(indifference_residual(q, t, x, make_ctx(u, q.k1, 1.5), make_ctx(u, q.k2, 1.5)),
              1e-10);
  }
  {  // drift-variance curve: capping the curve raises the index
    const AmbiguitySet b1 = CorrelatedSet(0.10, 0.04, 0.5, 0.5, 0.5);
    const AmbiguitySet b2 = CorrelatedSet(0.10, 0.04, 0.5, 0.5, 0.005);
    const UtilityParams u = UtilityParams::log_type(0.2, 0.1);
    const PriceQuote q = price_general(t, x, b1, b2, free_box, kFreeCons, u, m);
    EXPECT_EQ(q.formula, PriceFormula::log_utility);
    EXPECT_LT(q.k1, q.k2);
    EXPECT_GT(q.price, 0.0);
    EXPECT_LT(q.price, x);
    EXPECT_LT(indifference_residual(q, t, x, make_ctx(u, q.k1, 1.5), make_ctx(u, q.k2, 1.5)),
              1e-10);
  }
  {  // drift ball: dropping the loose candidate and tightening the radius
    const AmbiguitySet b1 =
        EllipsoidSet({0.1}, 0.1, {SquareMatrix(1, {0.04}), SquareMatrix(1, {0.09})});
    const AmbiguitySet b2 = EllipsoidSet({0.1}, 0.05, {SquareMatrix(1, {0.04})});
    const UtilityParams u = UtilityParams::power(0.5, 0.2, 0.1);
    const PriceQuote q = price_general(t, x, b1, b2, free_box, kFreeCons, u, m);
    EXPECT_EQ(q.formula, PriceFormula::power_utility);
    EXPECT_LT(q.k1, q.k2);
    EXPECT_GT(q.price, 0.0);
    EXPECT_LT(q.price, x);
    EXPECT_LT(indifference_residual(q, t, x, make_ctx(u, q.k1, 1.5), make_ctx(u, q.k2, 1.5)),
              1e-10);
  }
  {  // sample-driven intervals: a bigger sample tightens both
    const AmbiguitySet b1 = SampleCiSet(0.1, 0.04, 120, 0.05);
    const AmbiguitySet b2 = SampleCiSet(0.1, 0.04, 2000, 0.05);
    const UtilityParams u = UtilityParams::power(0.5, 0.0, 0.2);
    const PriceQuote q = price_general(t, x, b1, b2, free_box, kFreeCons, u, m);
    EXPECT_EQ(q.formula, PriceFormula::no_consumption);
    EXPECT_LT(q.k1, q.k2);
    EXPECT_GT(q.price, 0.0);
    EXPECT_LT(q.price, x);
    EXPECT_LT(indifference_residual(q, t, x, make_ctx(u, q.k1, 1.5), make_ctx(u, q.k2, 1.5)),
              1e-10);
  }
}

TEST(PriceGeneral, PriceGrowsWithTheResolvedAmbiguity) {
  const AmbiguitySet big = BoxSet(0.05, 0.11, 0.03, 0.09);
  const AmbiguitySet mid = BoxSet(0.06, 0.10, 0.04, 0.07);
  const AmbiguitySet small = BoxSet(0.07, 0.09, 0.05, 0.06);
  const UtilityParams u = UtilityParams::log_type(0.2, 0.3);
  const MarketParams m(0.04, 0.04, 2.0);
  auto price_at = [&](const AmbiguitySet& b1, const AmbiguitySet& b2, double x) {
    return price_general(0.5, x, b1, b2, PortfolioBox::unbounded(), kFreeCons, u, m).price;
  };

  // non-decreasing in wealth, exactly linear for the closed forms
  double prev = 0.0;
  for (double x : {0.5, 1.0, 2.0, 4.0}) {
    const double price = price_at(big, small, x);
    EXPECT_GT(price, prev);
    prev = price;
  }
  EXPECT_NEAR(price_at(big, small, 4.0), 8.0 * price_at(big, small, 0.5), 1e-13);

  // widening the pre-purchase set raises the price; widening the
  // post-purchase set (less information delivered) lowers it
  EXPECT_GT(price_at(big, small, 1.0), price_at(mid, small, 1.0));
  EXPECT_GT(price_at(big, small, 1.0), price_at(big, mid, 1.0));
}

TEST(PriceGeneral, RandomNestedBoxesStayInRange) {
  NormalStream gen = NormalStream::keyed(97, 0, 0);
  const MarketParams m(0.04, 0.045, 1.7);  // a borrow spread exercises more regimes
  const PortfolioBox box = PortfolioBox::bounded(-1.0, 2.0);
  const std::vector<UtilityParams> kinds = {
      UtilityParams::power(0.5, 0.0, 0.2),
      UtilityParams::log_type(0.4, 0.1),
      UtilityParams::power(-1.0, 0.3, 0.2),
  };
  for (int i = 0; i < 60; ++i) {
    const double mu_low = -0.01 + 0.1 * gen.next_uniform();
    const double mu_high = mu_low + 0.02 + 0.06 * gen.next_uniform();
    const double var_low = 0.02 + 0.03 * gen.next_uniform();
    const double var_high = var_low + 0.01 + 0.04 * gen.next_uniform();
    const BoxSet b1(mu_low, mu_high, var_low, var_high);
    const double mu_mid = 0.5 * (mu_low + mu_high);
    const double var_mid = 0.5 * (var_low + var_high);
    const double s = 0.2 + 0.6 * gen.next_uniform();
    const BoxSet b2(mu_mid + s * (mu_low - mu_mid), mu_mid + s * (mu_high - mu_mid),
                    var_mid + s * (var_low - var_mid), var_mid + s * (var_high - var_mid));
    const UtilityParams& u = kinds[i % kinds.size()];
    const double x = 0.5 + 2.0 * gen.next_uniform();
    const double t = 1.5 * gen.next_uniform();
    const PriceQuote q =
        price_general(t, x, AmbiguitySet(b1), AmbiguitySet(b2), box, kFreeCons, u, m);
    EXPECT_GE(q.price, 0.0);
    EXPECT_LT(q.price, x);
    EXPECT_LE(q.k1, q.k2);
  }
}

TEST(PriceGeneral, RejectsMixedFamilies) {
  const AmbiguitySet b1 = BoxSet(0.05, 0.10, 0.03, 0.08);
  const AmbiguitySet b2 = SampleCiSet(0.08, 0.05, 100, 0.05);
  EXPECT_THROW(price_general(0.0, 1.0, b1, b2, PortfolioBox::unbounded(), kFreeCons,
                             UtilityParams::log_type(0.2, 0.1), MarketParams(0.04, 0.04, 1.0)),
               ValidationError);
}

TEST(PriceGeneral, RejectsContainmentViolations) {
  const MarketParams m(0.04, 0.04, 1.0);
  const PortfolioBox box = PortfolioBox::unbounded();
  const UtilityParams u = UtilityParams::log_type(0.2, 0.1);

  // post-purchase box pokes out of the pre-purchase one
  EXPECT_THROW(price_general(0.0, 1.0, AmbiguitySet(BoxSet(0.05, 0.10, 0.03, 0.08)),
                             AmbiguitySet(BoxSet(0.04, 0.09, 0.04, 0.05)), box, kFreeCons, u, m),
               ValidationError);
  // ellipsoid centers differ
  EXPECT_THROW(price_general(0.0, 1.0,
                             AmbiguitySet(EllipsoidSet({0.1}, 0.1, {SquareMatrix(1, {0.04})})),
                             AmbiguitySet(EllipsoidSet({0.09}, 0.05, {SquareMatrix(1, {0.04})})),
                             box, kFreeCons, u, m),
               ValidationError);
  // post-purchase covariance candidate was never in the pre-purchase set
  EXPECT_THROW(price_general(0.0, 1.0,
                             AmbiguitySet(EllipsoidSet({0.1}, 0.1, {SquareMatrix(1, {0.04})})),
                             AmbiguitySet(EllipsoidSet({0.1}, 0.05, {SquareMatrix(1, {0.09})})),
                             box, kFreeCons, u, m),
               ValidationError);
  // sample sets disagree on the confidence level
  EXPECT_THROW(price_general(0.0, 1.0, AmbiguitySet(SampleCiSet(0.1, 0.04, 100, 0.05)),
                             AmbiguitySet(SampleCiSet(0.1, 0.04, 1000, 0.10)), box, kFreeCons,
                             u, m),
               ValidationError);
  // shrinking the sample widens the intervals
  EXPECT_THROW(price_general(0.0, 1.0, AmbiguitySet(SampleCiSet(0.1, 0.04, 1000, 0.05)),
                             AmbiguitySet(SampleCiSet(0.1, 0.04, 100, 0.05)), box, kFreeCons,
                             u, m),
               ValidationError);
}

TEST(PriceGeneral, ComparableCurveParametersCanStillFailToOrder) {
  // These curve sets satisfy the documented nesting inequalities, yet the
  // wide set pays a larger worst-case variance premium everywhere on its
  // curve and ends up with the higher index. The runtime ordering check has
  // to catch what the parameter test cannot.
  const AmbiguitySet wide = CorrelatedSet(0.1, 0.02, 1.0, 0.5, 0.00041);
  const AmbiguitySet narrow = CorrelatedSet(0.1, 0.04, 1.0, 0.5, 0.0);
  const MarketParams m(0.04, 0.04, 1.0);
  try {
    price_general(0.0, 1.0, wide, narrow, PortfolioBox::unbounded(), kFreeCons,
                  UtilityParams::power(0.5, 0.0, 0.1), m);
    FAIL() << "expected the index-ordering check to reject this pair";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("not comparable"), std::string::npos) << e.what();
  }
}

TEST(PriceFormulaNames, MatchTheOutputVocabulary) {
  EXPECT_EQ(to_string(PriceFormula::no_consumption), "no_consumption");
  EXPECT_EQ(to_string(PriceFormula::log_utility), "log_utility");
  EXPECT_EQ(to_string(PriceFormula::power_utility), "power_utility");
}
