#pragma once

// Monte Carlo harness around the dataset-to-price pipeline: draw two samples
// from a known normal truth, turn their confidence intervals into a nested
// pair of rectangular ambiguity sets, and price the shrink. Sweeps repeat
// this over a parameter grid with per-replication generator streams keyed by
// (seed, grid index, replication index), so results are identical no matter
// how the work is split across threads.

#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ambiprice/core.hpp"
#include "ambiprice/errors.hpp"
#include "ambiprice/k_index.hpp"
#include "ambiprice/pricing.hpp"
#include "ambiprice/rng.hpp"
#include "ambiprice/stats.hpp"

namespace ambiprice {

enum class SweepKind { sample_size, mu_sigma_grid, p_lambda_grid };

inline std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::sample_size: return "sample_size";
    case SweepKind::mu_sigma_grid: return "mu_sigma_grid";
    case SweepKind::p_lambda_grid: return "p_lambda_grid";
  }
  return "unknown";
}

struct PricingSetup {
  double x = 1.0;
  double t = 0.0;
  UtilityParams utility = UtilityParams::power(0.5, 0.2, 0.1);
  MarketParams market = MarketParams(0.04, 0.04, 1.0);
  double alpha_conf = 0.05;  // confidence level parameter of the interval pair
};

struct ExperimentConfig {
  double mu_true = 0.1;
  double sigma_true = 0.2;
  long n1 = 1000;                 // size of the dataset already owned
  std::vector<long> n2_values;    // candidate sizes of the purchasable dataset
  long m_reps = 1000;
  std::uint64_t seed = 0;
  PricingSetup pricing;
  SweepKind sweep = SweepKind::sample_size;

  // Two-parameter sweeps: rows run over the first parameter (mu or p),
  // columns over the second (sigma or lambda). Both grids use
  // n2_values.front() as the purchasable-dataset size.
  Interval mu_range{0.04, 0.3};
  Interval sigma_range{0.1, 0.5};
  Interval p_range{0.1, 0.9};
  Interval lambda_range{0.2, 2.0};
  int grid_rows = 3;
  int grid_cols = 3;

  void validate() const {
    detail::require_finite("mu_true", mu_true);
    detail::require_finite("sigma_true", sigma_true);
    detail::require(sigma_true > 0.0,
                    "sigma_true must be > 0, got " + detail::describe(sigma_true));
    detail::require(n1 >= 2, "n1 must be >= 2, got " + std::to_string(n1));
    detail::require(!n2_values.empty(), "n2_values must not be empty");
    for (long n2 : n2_values)
      detail::require(n2 > n1, "every n2 must exceed n1 = " + std::to_string(n1) + ", got " +
                                   std::to_string(n2));
    detail::require(m_reps >= 1, "m_reps must be >= 1, got " + std::to_string(m_reps));
    detail::require_finite("pricing.x", pricing.x);
    detail::require(pricing.x > 0.0,
                    "pricing.x must be > 0, got " + detail::describe(pricing.x));
    detail::require(pricing.t >= 0.0 && pricing.t <= pricing.market.T,
                    "pricing.t must lie in [0, T]");
    detail::require(pricing.utility.kind == UtilityKind::power && pricing.utility.lambda > 0.0,
                    "the experiment prices with power utility and lambda > 0");
    detail::require(pricing.alpha_conf > 0.0 && pricing.alpha_conf < 1.0,
                    "alpha_conf must lie in (0,1), got " + detail::describe(pricing.alpha_conf));
    if (sweep != SweepKind::sample_size) {
      detail::require(grid_rows >= 2 && grid_cols >= 2,
                      "grid sweeps need at least 2 points per axis");
      const Interval& a = sweep == SweepKind::mu_sigma_grid ? mu_range : p_range;
      const Interval& b = sweep == SweepKind::mu_sigma_grid ? sigma_range : lambda_range;
      detail::require(a.low < a.high && b.low < b.high, "sweep ranges must be non-degenerate");
      if (sweep == SweepKind::mu_sigma_grid) {
        detail::require(sigma_range.low > 0.0, "sigma_range must stay positive");
      } else {
        detail::require(p_range.high < 1.0 && (p_range.low > 0.0 || p_range.high < 0.0),
                        "p_range must avoid 0 and stay below 1");
        detail::require(lambda_range.low > 0.0, "lambda_range must stay positive");
      }
    }
  }
};

struct SweepPoint {
  std::vector<double> axis;  // grid coordinates, matching SweepResult::axis_names
  double mean_price = 0.0;
  double std_error = 0.0;
  long m_effective = 0;
};

struct SweepResult {
  SweepKind kind = SweepKind::sample_size;
  std::vector<std::string> axis_names;
  std::vector<SweepPoint> points;
};

inline std::vector<double> simulate_dataset(double mu, double sigma, long n,
                                            NormalStream& stream) {
  detail::require_finite("mu", mu);
  detail::require(sigma > 0.0, "sigma must be > 0, got " + detail::describe(sigma));
  detail::require(n >= 2, "dataset size must be >= 2, got " + std::to_string(n));
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& v : out) v = mu + sigma * stream.next_normal();
  return out;
}

// Prices one realized dataset pair: intervals -> nested boxes -> indices ->
// power-utility price. The hull construction makes the wide box contain the
// narrow one, so the index ordering the pricer checks holds by construction.
inline double price_from_datasets(const ExperimentConfig& cfg, const std::vector<double>& xs,
                                  const std::vector<double>& ys) {
  const auto [wide, narrow] =
      ambiguity_from_datasets(summarize(xs), summarize(ys), cfg.pricing.alpha_conf);
  const PortfolioBox box = PortfolioBox::unbounded();
  const double p = cfg.pricing.utility.p;
  const double k1 = k_box(wide, cfg.pricing.market, p, box).k;
  const double k2 = k_box(narrow, cfg.pricing.market, p, box).k;
  return price_power(cfg.pricing.t, cfg.pricing.x, k1, k2, cfg.pricing.utility,
                     cfg.pricing.market.T)
      .price;
}

inline double run_replication(const ExperimentConfig& cfg, long n2, std::uint64_t rep_index,
                              std::uint64_t grid_index = 0) {
  cfg.validate();
  NormalStream stream = NormalStream::keyed(cfg.seed, grid_index, rep_index);
  const auto xs = simulate_dataset(cfg.mu_true, cfg.sigma_true, cfg.n1, stream);
  const auto ys = simulate_dataset(cfg.mu_true, cfg.sigma_true, n2, stream);
  return price_from_datasets(cfg, xs, ys);
}

namespace detail {

struct SweepTask {
  std::vector<double> axis;
  ExperimentConfig cfg;  // per-point copy with the swept parameters applied
  long n2 = 0;
};

inline std::pair<std::vector<std::string>, std::vector<SweepTask>> build_sweep_tasks(
    const ExperimentConfig& cfg) {
  std::vector<std::string> names;
  std::vector<SweepTask> tasks;
  switch (cfg.sweep) {
    case SweepKind::sample_size: {
      names = {"n2"};
      for (long n2 : cfg.n2_values)
        tasks.push_back({{static_cast<double>(n2)}, cfg, n2});
      break;
    }
    case SweepKind::mu_sigma_grid: {
      names = {"mu", "sigma"};
      const auto mus = linear_grid(cfg.mu_range.low, cfg.mu_range.high, cfg.grid_rows);
      const auto sigmas = linear_grid(cfg.sigma_range.low, cfg.sigma_range.high, cfg.grid_cols);
      for (double mu : mus)
        for (double sigma : sigmas) {
          SweepTask task{{mu, sigma}, cfg, cfg.n2_values.front()};
          task.cfg.mu_true = mu;
          task.cfg.sigma_true = sigma;
          tasks.push_back(std::move(task));
        }
      break;
    }
    case SweepKind::p_lambda_grid: {
      names = {"p", "lambda"};
      const auto ps = linear_grid(cfg.p_range.low, cfg.p_range.high, cfg.grid_rows);
      const auto lambdas =
          linear_grid(cfg.lambda_range.low, cfg.lambda_range.high, cfg.grid_cols);
      for (double p : ps)
        for (double lambda : lambdas) {
          SweepTask task{{p, lambda}, cfg, cfg.n2_values.front()};
          task.cfg.pricing.utility =
              UtilityParams::power(p, lambda, cfg.pricing.utility.rho);
          tasks.push_back(std::move(task));
        }
      break;
    }
  }
  return {std::move(names), std::move(tasks)};
}

}  // namespace detail

// Runs every replication of every grid point and aggregates with a fixed
// summation order, so the result is a pure function of the config no matter
// how many worker threads participate.
inline SweepResult run_sweep(const ExperimentConfig& cfg, int threads = 1) {
  cfg.validate();
  detail::require(threads >= 1, "threads must be >= 1, got " + std::to_string(threads));
  auto [names, tasks] = detail::build_sweep_tasks(cfg);

  SweepResult result;
  result.kind = cfg.sweep;
  result.axis_names = std::move(names);
  const long m = cfg.m_reps;

  for (std::size_t gi = 0; gi < tasks.size(); ++gi) {
    const detail::SweepTask& task = tasks[gi];
    std::vector<double> prices(static_cast<std::size_t>(m));

    const int workers = static_cast<int>(std::min<long>(threads, m));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    auto run_chunk = [&](int w) {
      try {
        for (long rep = w; rep < m; rep += workers)
          prices[static_cast<std::size_t>(rep)] =
              run_replication(task.cfg, task.n2, static_cast<std::uint64_t>(rep),
                              static_cast<std::uint64_t>(gi));
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    };
    if (workers == 1) {
      run_chunk(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) pool.emplace_back(run_chunk, w);
      for (auto& th : pool) th.join();
    }
    for (const auto& err : errors)
      if (err) std::rethrow_exception(err);

    double sum = 0.0;
    for (double price : prices) sum += price;
    const double mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (double price : prices) ss += (price - mean) * (price - mean);
    const double std_error =
        m > 1 ? std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
    result.points.push_back(SweepPoint{task.axis, mean, std_error, m});
  }
  return result;
}

}  // namespace ambiprice
