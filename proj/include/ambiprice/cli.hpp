#pragma once

// Command-line front end: JSON configs in, CSV/JSON records out.
//
// Exit codes: 0 success, 1 verification failure, 2 validation error,
// 3 numerical error. Output is assembled in memory and written in one shot,
// so a validation failure never leaves partial output behind. The
// AMBIPRICE_SEED environment variable supplies the default seed; a "seed"
// config key overrides it and the --seed flag overrides both.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ambiprice/core.hpp"
#include "ambiprice/errors.hpp"
#include "ambiprice/io.hpp"
#include "ambiprice/k_index.hpp"
#include "ambiprice/pricing.hpp"
#include "ambiprice/rng.hpp"
#include "ambiprice/sim.hpp"
#include "ambiprice/stats.hpp"
#include "ambiprice/value.hpp"

namespace ambiprice::cli {

using nlohmann::json;

struct Options {
  std::string input;
  std::string output;  // empty: stdout
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  int verbosity = 0;
};

// ---------------------------------------------------------------------------
// Config readers

inline UtilityParams read_utility(const JsonCursor& c) {
  const std::string kind = c.child("kind").as_string();
  const double lambda = c.child("lambda").as_number();
  const double rho = c.child("rho").as_number();
  if (kind == "power") return UtilityParams::power(c.child("p").as_number(), lambda, rho);
  if (kind == "log") return UtilityParams::log_type(lambda, rho);
  throw ValidationError("config: " + c.path() + ".kind must be \"power\" or \"log\", got \"" +
                        kind + "\"");
}

inline MarketParams read_market(const JsonCursor& c) {
  const double r = c.child("r").as_number();
  const double borrow = c.has("R") ? c.child("R").as_number() : r;
  return MarketParams(r, borrow, c.child("T").as_number());
}

inline PortfolioBox read_portfolio_box(const JsonCursor& parent, const std::string& key) {
  if (!parent.has(key)) return PortfolioBox::unbounded();
  const JsonCursor c = parent.child(key);
  std::optional<double> low, high;
  if (c.has("low")) low = c.child("low").as_number();
  if (c.has("high")) high = c.child("high").as_number();
  return PortfolioBox(low, high);
}

inline ConsumptionBox read_consumption_box(const JsonCursor& parent, const std::string& key) {
  if (!parent.has(key)) return ConsumptionBox::nonnegative();
  const JsonCursor c = parent.child(key);
  const double low = c.has("low") ? c.child("low").as_number() : 0.0;
  std::optional<double> high;
  if (c.has("high")) high = c.child("high").as_number();
  return ConsumptionBox(low, high);
}

inline SquareMatrix read_matrix(const JsonCursor& c) {
  const auto rows = c.as_array();
  const int n = static_cast<int>(rows.size());
  std::vector<double> entries;
  entries.reserve(static_cast<std::size_t>(n) * n);
  for (const auto& row : rows) {
    const auto vals = row.as_number_array();
    if (static_cast<int>(vals.size()) != n)
      throw ValidationError("config: " + row.path() + " must hold " + std::to_string(n) +
                            " numbers (square matrix)");
    entries.insert(entries.end(), vals.begin(), vals.end());
  }
  return SquareMatrix(n, std::move(entries));
}

inline AmbiguitySet read_ambiguity_set(const JsonCursor& c) {
  const std::string family = c.child("family").as_string();
  if (family == "box")
    return BoxSet(c.child("mu_low").as_number(), c.child("mu_high").as_number(),
                  c.child("var_low").as_number(), c.child("var_high").as_number());
  if (family == "correlated")
    return CorrelatedSet(c.child("mu_low").as_number(), c.child("var_low").as_number(),
                         c.child("k").as_number(), c.child("q").as_number(),
                         c.child("alpha_max").as_number());
  if (family == "ellipsoid") {
    std::vector<SquareMatrix> candidates;
    for (const auto& mat : c.child("sigma_candidates").as_array())
      candidates.push_back(read_matrix(mat));
    return EllipsoidSet(c.child("mu_hat").as_number_array(), c.child("epsilon").as_number(),
                        std::move(candidates));
  }
  if (family == "sample_ci")
    return SampleCiSet(c.child("mu_hat").as_number(), c.child("s2").as_number(),
                       c.child("n").as_integer(), c.child("alpha").as_number());
  throw ValidationError("config: " + c.path() +
                        ".family must be one of box, correlated, ellipsoid, sample_ci");
}

inline Interval read_interval(const JsonCursor& c) {
  const auto vals = c.as_number_array();
  if (vals.size() != 2)
    throw ValidationError("config: " + c.path() + " must be a [low, high] pair");
  return Interval{vals[0], vals[1]};
}

inline std::uint64_t resolve_seed(const Options& opts, const JsonCursor* root) {
  if (opts.seed) return *opts.seed;
  if (root && root->has("seed")) return root->child("seed").as_uint64();
  if (const char* env = std::getenv("AMBIPRICE_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw ValidationError("AMBIPRICE_SEED must be a non-negative integer, got \"" +
                            std::string(env) + "\"");
    return static_cast<std::uint64_t>(v);
  }
  return 1;
}

inline ExperimentConfig read_experiment(const JsonCursor& root, const Options& opts) {
  ExperimentConfig cfg;
  cfg.mu_true = root.child("mu_true").as_number();
  cfg.sigma_true = root.child("sigma_true").as_number();
  cfg.n1 = root.child("n1").as_integer();
  for (const auto& item : root.child("n2_values").as_array())
    cfg.n2_values.push_back(item.as_integer());
  cfg.m_reps = root.child("m_reps").as_integer();
  cfg.seed = resolve_seed(opts, &root);

  const JsonCursor pricing = root.child("pricing");
  cfg.pricing.x = pricing.child("x").as_number();
  cfg.pricing.t = pricing.child("t").as_number();
  cfg.pricing.alpha_conf = pricing.child("alpha_conf").as_number();
  cfg.pricing.utility = read_utility(pricing.child("utility"));
  cfg.pricing.market = read_market(pricing.child("market"));

  const std::string sweep = root.has("sweep") ? root.child("sweep").as_string() : "sample_size";
  if (sweep == "sample_size")
    cfg.sweep = SweepKind::sample_size;
  else if (sweep == "mu_sigma_grid")
    cfg.sweep = SweepKind::mu_sigma_grid;
  else if (sweep == "p_lambda_grid")
    cfg.sweep = SweepKind::p_lambda_grid;
  else
    throw ValidationError(
        "config: .sweep must be one of sample_size, mu_sigma_grid, p_lambda_grid, got \"" +
        sweep + "\"");

  if (root.has("mu_range")) cfg.mu_range = read_interval(root.child("mu_range"));
  if (root.has("sigma_range")) cfg.sigma_range = read_interval(root.child("sigma_range"));
  if (root.has("p_range")) cfg.p_range = read_interval(root.child("p_range"));
  if (root.has("lambda_range")) cfg.lambda_range = read_interval(root.child("lambda_range"));
  if (root.has("grid_rows")) cfg.grid_rows = static_cast<int>(root.child("grid_rows").as_integer());
  if (root.has("grid_cols")) cfg.grid_cols = static_cast<int>(root.child("grid_cols").as_integer());
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Output helpers

inline void emit_output(const std::string& text, const Options& opts) {
  if (opts.output.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(opts.output, std::ios::binary);
  if (!f) throw ValidationError("cannot open output file: " + opts.output);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("failed writing output file: " + opts.output);
}

inline std::string join_components(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += fmt17(v[i]);
  }
  return out;
}

inline std::string render_quote(const PriceQuote& q, const std::string& format) {
  if (format == "json") {
    json j{{"price", q.price},
           {"k1", q.k1},
           {"k2", q.k2},
           {"formula", to_string(q.formula)},
           {"turning_point", q.turning_point ? json(*q.turning_point) : json()}};
    return j.dump(2) + "\n";
  }
  CsvTable t;
  t.header = {"price", "k1", "k2", "formula", "turning_point"};
  t.rows.push_back({fmt17(q.price), fmt17(q.k1), fmt17(q.k2), to_string(q.formula),
                    q.turning_point ? fmt17(*q.turning_point) : ""});
  return t.str();
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_price(const JsonCursor& root, const Options& opts) {
  const double t = root.child("t").as_number();
  const double x = root.child("x").as_number();
  const UtilityParams utility = read_utility(root.child("utility"));
  const MarketParams market = read_market(root.child("market"));
  const PortfolioBox box = read_portfolio_box(root, "portfolio_box");
  const ConsumptionBox cons = read_consumption_box(root, "consumption_box");
  const AmbiguitySet b1 = read_ambiguity_set(root.child("b1"));
  const AmbiguitySet b2 = read_ambiguity_set(root.child("b2"));
  const PriceQuote q = price_general(t, x, b1, b2, box, cons, utility, market);
  emit_output(render_quote(q, opts.format), opts);
  return 0;
}

inline int cmd_k_index(const JsonCursor& root, const Options& opts) {
  const AmbiguitySet set = read_ambiguity_set(root.child("set"));
  const MarketParams market = read_market(root.child("market"));
  const UtilityParams utility = read_utility(root.child("utility"));
  const PortfolioBox box = read_portfolio_box(root, "portfolio_box");
  const KResult res = k_index(set, market, utility.risk_exponent(), box);

  std::string text;
  if (opts.format == "json") {
    json j{{"k", res.k},
           {"regime", to_string(res.regime)},
           {"boundary_tie", res.boundary_tie},
           {"pi_star", res.pi_star},
           {"mu_star", res.mu_star},
           {"var_star", res.var_star}};
    text = j.dump(2) + "\n";
  } else {
    CsvTable t;
    t.header = {"k", "regime", "boundary_tie", "pi_star", "mu_star", "var_star"};
    t.rows.push_back({fmt17(res.k), to_string(res.regime), res.boundary_tie ? "true" : "false",
                      join_components(res.pi_star), join_components(res.mu_star),
                      join_components(res.var_star)});
    text = t.str();
  }
  emit_output(text, opts);
  return 0;
}

inline int cmd_turning_point(const JsonCursor& root, const Options& opts) {
  const double k1 = root.child("k1").as_number();
  const double k2 = root.child("k2").as_number();
  const UtilityParams utility = read_utility(root.child("utility"));
  const double T = root.child("T").as_number();
  const TurningPointScan scan = scan_turning_point(k1, k2, utility, T);

  std::string text;
  if (opts.format == "json") {
    json j{{"t_star", scan.t_star ? json(*scan.t_star) : json()},
           {"sign_changes", scan.sign_changes}};
    text = j.dump(2) + "\n";
  } else {
    CsvTable t;
    t.header = {"t_star", "sign_changes"};
    t.rows.push_back(
        {scan.t_star ? fmt17(*scan.t_star) : "", std::to_string(scan.sign_changes)});
    text = t.str();
  }
  emit_output(text, opts);
  return 0;
}

inline int cmd_simulate(const JsonCursor& root, const Options& opts) {
  const ExperimentConfig cfg = read_experiment(root, opts);
  const long n2 = root.has("n2") ? root.child("n2").as_integer() : cfg.n2_values.front();
  detail::require(n2 > cfg.n1,
                  "config: .n2 must exceed n1 = " + std::to_string(cfg.n1));

  std::vector<double> prices(static_cast<std::size_t>(cfg.m_reps));
  for (long rep = 0; rep < cfg.m_reps; ++rep)
    prices[static_cast<std::size_t>(rep)] =
        run_replication(cfg, n2, static_cast<std::uint64_t>(rep));

  std::string text;
  if (opts.format == "json") {
    json points = json::array();
    for (long rep = 0; rep < cfg.m_reps; ++rep)
      points.push_back({{"rep", rep}, {"price", prices[static_cast<std::size_t>(rep)]}});
    text = json{{"n2", n2}, {"points", points}}.dump(2) + "\n";
  } else {
    CsvTable t;
    t.header = {"rep", "price"};
    for (long rep = 0; rep < cfg.m_reps; ++rep)
      t.rows.push_back({std::to_string(rep), fmt17(prices[static_cast<std::size_t>(rep)])});
    text = t.str();
  }
  emit_output(text, opts);
  return 0;
}

inline int cmd_sweep(const JsonCursor& root, const Options& opts) {
  const ExperimentConfig cfg = read_experiment(root, opts);
  const SweepResult res = run_sweep(cfg, opts.threads);

  std::string text;
  if (opts.format == "json") {
    json points = json::array();
    for (const SweepPoint& pt : res.points)
      points.push_back({{"axis", pt.axis},
                        {"mean_price", pt.mean_price},
                        {"std_error", pt.std_error},
                        {"m_effective", pt.m_effective}});
    text = json{{"kind", to_string(res.kind)}, {"axis_names", res.axis_names},
                {"points", points}}
               .dump(2) +
           "\n";
  } else {
    CsvTable t;
    t.header = res.axis_names;
    t.header.insert(t.header.end(), {"mean_price", "std_error", "m_effective"});
    for (const SweepPoint& pt : res.points) {
      std::vector<std::string> row;
      for (double a : pt.axis) row.push_back(fmt17(a));
      row.push_back(fmt17(pt.mean_price));
      row.push_back(fmt17(pt.std_error));
      row.push_back(std::to_string(pt.m_effective));
      t.rows.push_back(std::move(row));
    }
    text = t.str();
  }
  emit_output(text, opts);
  return 0;
}

// ---------------------------------------------------------------------------
// Verification suites: the library checked against its own oracles on
// randomized instances. perturb_k is a documented self-test hook that biases
// the closed-form side by 1+1e-3, which every suite must catch.

struct VerifyOptions {
  std::uint64_t seed = 1;
  bool perturb_k = false;
  std::vector<std::string> suites;  // empty: all
  long n_minimax = 40;
  long n_ode = 50;
  long n_residual = 60;
  GridSpec grid;
};

struct SuiteOutcome {
  std::string name;
  long instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  json first_failure;  // null unless a failing instance was recorded
};

namespace detail_verify {

inline json box_to_json(const PortfolioBox& box) {
  json j = json::object();
  if (box.low) j["low"] = *box.low;
  if (box.high) j["high"] = *box.high;
  return j;
}

// Closed-form box index against the grid minimax oracle, both orders.
inline SuiteOutcome run_minimax(const VerifyOptions& vo) {
  SuiteOutcome out{"minimax", vo.n_minimax, 0.0, 1e-4, true, json()};
  for (long i = 0; i < vo.n_minimax; ++i) {
    NormalStream st = NormalStream::keyed(vo.seed, 101, static_cast<std::uint64_t>(i));
    auto u = [&st] { return st.next_uniform(); };
    const double r = 0.05 * u();
    const double lend_borrow_gap = u() < 0.5 ? 0.0 : 0.1 * u();
    const double mu_low = r + 0.1 * u() - 0.05;
    const double mu_high = mu_low + 0.04 * u();
    const double var_low = 0.02 + 0.04 * u();
    const double var_high = var_low * (1.0 + 2.0 * u());
    const double p = i % 2 == 0 ? 0.5 : -1.0;
    const PortfolioBox box = u() < 0.5
                                 ? PortfolioBox::unbounded()
                                 : PortfolioBox::bounded(-1.0 - 2.0 * u(), 1.0 + 3.0 * u());
    const BoxSet set(mu_low, mu_high, var_low, var_high);
    const MarketParams m(r, r + lend_borrow_gap, 1.0);

    double closed = k_box(set, m, p, box).k;
    if (vo.perturb_k) closed *= 1.0 + 1e-3;
    const MinimaxEstimate est = k_minimax_oracle(AmbiguitySet(set), m, p, box, vo.grid);
    const double err = std::max(std::abs(closed - est.sup_inf), std::abs(est.gap()));
    out.max_error = std::max(out.max_error, err);
    if (err > out.tolerance && out.first_failure.is_null())
      out.first_failure = {{"suite", "minimax"}, {"instance", i},
                           {"r", r},             {"R", r + lend_borrow_gap},
                           {"mu_low", mu_low},   {"mu_high", mu_high},
                           {"var_low", var_low}, {"var_high", var_high},
                           {"p", p},             {"portfolio_box", box_to_json(box)},
                           {"closed", closed},   {"sup_inf", est.sup_inf},
                           {"inf_sup", est.inf_sup}};
  }
  out.passed = out.max_error <= out.tolerance;
  return out;
}

// Closed-form power exponent against the backward integration path.
inline SuiteOutcome run_g1_ode(const VerifyOptions& vo) {
  SuiteOutcome out{"g1_ode", vo.n_ode, 0.0, 1e-8, true, json()};
  const ConsumptionBox cons = ConsumptionBox::nonnegative();
  for (long i = 0; i < vo.n_ode; ++i) {
    NormalStream st = NormalStream::keyed(vo.seed, 202, static_cast<std::uint64_t>(i));
    auto u = [&st] { return st.next_uniform(); };
    double p = -3.0 + 3.85 * u();
    if (std::abs(p) < 0.05) p += 0.1;
    const double lambda = 0.05 + 2.0 * u();
    const double rho = 0.3 * u();
    const double k = 0.02 + 0.1 * u();
    const double T = 0.5 + 2.0 * u();
    const double t = 0.6 * T * u();
    const UtilityParams utility = UtilityParams::power(p, lambda, rho);

    const double closed =
        g1_closed(t, utility, vo.perturb_k ? k * (1.0 + 1e-3) : k, cons, T);
    const double integrated = g1_ode(t, utility, k, cons, T, (T - t) / 4096.0);
    const double err = std::abs(closed - integrated);
    out.max_error = std::max(out.max_error, err);
    if (err > out.tolerance && out.first_failure.is_null())
      out.first_failure = {{"suite", "g1_ode"}, {"instance", i}, {"p", p},
                           {"lambda", lambda},  {"rho", rho},    {"k", k},
                           {"T", T},            {"t", t},        {"closed", closed},
                           {"integrated", integrated}};
  }
  out.passed = out.max_error <= out.tolerance;
  return out;
}

// Every closed-form quote is pushed back through the defining equation; the
// power closed form is additionally cross-checked against the bisection
// solver (scaled error shares the residual tolerance).
inline SuiteOutcome run_residual(const VerifyOptions& vo) {
  SuiteOutcome out{"residual", vo.n_residual, 0.0, 1e-10, true, json()};
  for (long i = 0; i < vo.n_residual; ++i) {
    NormalStream st = NormalStream::keyed(vo.seed, 303, static_cast<std::uint64_t>(i));
    auto u = [&st] { return st.next_uniform(); };
    const double T = 0.5 + 2.0 * u();
    const double t = 0.7 * T * u();
    const double x = 0.5 + 2.0 * u();
    const double r = 0.01 + 0.04 * u();
    const MarketParams m(r, r, T);
    const double k1 = r + 0.05 * u();
    const double k2 = i % 5 == 0 ? k1 : k1 + 0.04 * u();
    const double rho = 0.3 * u();
    const int branch = static_cast<int>(i % 3);

    UtilityParams utility = UtilityParams::power(0.5, 0.0, rho);
    ConsumptionBox cons = ConsumptionBox::nonnegative();
    PriceQuote quote;
    double cross_err = 0.0;
    if (branch == 0) {
      utility = i % 2 == 0 ? UtilityParams::power(0.5, 0.0, rho)
                           : UtilityParams::log_type(0.0, rho);
      cons = ConsumptionBox(0.3 * u(), std::nullopt);
      quote = price_no_consumption(t, x, k1, k2, T);
    } else if (branch == 1) {
      utility = UtilityParams::log_type(0.05 + 1.5 * u(), rho);
      const double c_low = 0.2 * u();
      cons = u() < 0.5 ? ConsumptionBox(c_low, std::nullopt)
                       : ConsumptionBox(c_low, c_low + 1.0 + u());
      quote = price_log(t, x, k1, k2, utility, T);
    } else {
      utility = UtilityParams::power(i % 2 == 0 ? 0.5 : -1.2, 0.05 + 1.5 * u(), rho);
      quote = price_power(t, x, k1, k2, utility, T);
      const PriceQuote bq = price_bisection(t, x, k1, k2, utility, m, cons);
      cross_err = std::abs(bq.price - quote.price) / x;
    }

    const double k2_ctx = vo.perturb_k ? k2 * (1.0 + 1e-3) : k2;
    const ValueContext c1(utility, m, k1, cons);
    const ValueContext c2(utility, m, k2_ctx, cons);
    const double residual = indifference_residual(quote, t, x, c1, c2);
    const double err = std::max(residual, cross_err);
    out.max_error = std::max(out.max_error, err);
    if (err > out.tolerance && out.first_failure.is_null())
      out.first_failure = {{"suite", "residual"},
                           {"instance", i},
                           {"branch", branch},
                           {"T", T},
                           {"t", t},
                           {"x", x},
                           {"r", r},
                           {"k1", k1},
                           {"k2", k2},
                           {"utility_kind", utility.kind == UtilityKind::log ? "log" : "power"},
                           {"p", utility.p},
                           {"lambda", utility.lambda},
                           {"rho", utility.rho},
                           {"price", quote.price},
                           {"residual", residual},
                           {"bisection_gap", cross_err}};
  }
  out.passed = out.max_error <= out.tolerance;
  return out;
}

}  // namespace detail_verify

inline std::vector<SuiteOutcome> run_verify_suites(const VerifyOptions& vo,
                                                   std::ostream* progress = nullptr) {
  auto wants = [&vo](const char* name) {
    if (vo.suites.empty()) return true;
    for (const auto& s : vo.suites)
      if (s == name) return true;
    return false;
  };
  std::vector<SuiteOutcome> outcomes;
  auto run = [&](const char* name, SuiteOutcome (*fn)(const VerifyOptions&)) {
    if (!wants(name)) return;
    const auto start = std::chrono::steady_clock::now();
    outcomes.push_back(fn(vo));
    if (progress) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
      *progress << "suite " << name << ": " << (outcomes.back().passed ? "pass" : "FAIL")
                << " (" << ms << " ms)\n";
    }
  };
  run("minimax", detail_verify::run_minimax);
  run("g1_ode", detail_verify::run_g1_ode);
  run("residual", detail_verify::run_residual);
  if (outcomes.empty()) throw ValidationError("config: no known suites selected");
  return outcomes;
}

inline int cmd_verify(const JsonCursor* root, const Options& opts) {
  VerifyOptions vo;
  vo.seed = resolve_seed(opts, root);
  if (root) {
    if (root->has("perturb_k")) vo.perturb_k = root->child("perturb_k").as_bool();
    if (root->has("suites"))
      for (const auto& s : root->child("suites").as_array()) {
        const std::string name = s.as_string();
        if (name != "minimax" && name != "g1_ode" && name != "residual")
          throw ValidationError("config: " + s.path() +
                                " must be one of minimax, g1_ode, residual");
        vo.suites.push_back(name);
      }
    if (root->has("instances")) {
      const JsonCursor inst = root->child("instances");
      if (inst.has("minimax")) vo.n_minimax = inst.child("minimax").as_integer();
      if (inst.has("g1_ode")) vo.n_ode = inst.child("g1_ode").as_integer();
      if (inst.has("residual")) vo.n_residual = inst.child("residual").as_integer();
      detail::require(vo.n_minimax >= 1 && vo.n_ode >= 1 && vo.n_residual >= 1,
                      "config: .instances entries must be >= 1");
    }
    if (root->has("grid")) {
      const JsonCursor g = root->child("grid");
      vo.grid = GridSpec(
          g.has("n_pi") ? static_cast<int>(g.child("n_pi").as_integer()) : vo.grid.n_pi,
          g.has("n_mu") ? static_cast<int>(g.child("n_mu").as_integer()) : vo.grid.n_mu,
          g.has("n_var") ? static_cast<int>(g.child("n_var").as_integer()) : vo.grid.n_var,
          g.has("pi_cap") ? g.child("pi_cap").as_number() : vo.grid.pi_cap);
    }
  }

  const auto outcomes =
      run_verify_suites(vo, opts.verbosity > 0 ? &std::cerr : nullptr);

  std::string text;
  if (opts.format == "json") {
    json rows = json::array();
    for (const auto& o : outcomes)
      rows.push_back({{"suite", o.name},
                      {"instances", o.instances},
                      {"max_error", o.max_error},
                      {"tolerance", o.tolerance},
                      {"status", o.passed ? "pass" : "fail"}});
    text = rows.dump(2) + "\n";
  } else {
    CsvTable t;
    t.header = {"suite", "instances", "max_error", "tolerance", "status"};
    for (const auto& o : outcomes)
      t.rows.push_back({o.name, std::to_string(o.instances), fmt17(o.max_error),
                        fmt17(o.tolerance), o.passed ? "pass" : "fail"});
    text = t.str();
  }
  emit_output(text, opts);

  for (const auto& o : outcomes)
    if (!o.passed) {
      std::cerr << "first failing instance: " << o.first_failure.dump() << "\n";
      return 1;
    }
  return 0;
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"indifference pricing of data assets that shrink market-parameter ambiguity"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&opts](CLI::App* sub, bool config_required) {
    auto* pos = sub->add_option("config", opts.input, "path to the JSON config document");
    if (config_required) pos->required();
    sub->add_option("-o,--output", opts.output, "write output to this file instead of stdout");
    sub->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", opts.seed, "seed override (beats config and AMBIPRICE_SEED)");
    sub->add_flag("-v,--verbose", opts.verbosity, "progress notes on stderr");
  };

  add_common(app.add_subcommand("price", "price a data asset from a nested set pair"), true);
  add_common(app.add_subcommand("k-index", "investment-opportunity index of one set"), true);
  add_common(app.add_subcommand("turning-point", "locate the price's time-profile peak"), true);
  add_common(app.add_subcommand("simulate", "per-replication prices for one dataset size"),
             true);
  auto* sweep_cmd =
      app.add_subcommand("sweep", "replicated price experiment over a parameter grid");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--threads", opts.threads, "worker threads for replications")
      ->check(CLI::PositiveNumber);
  add_common(app.add_subcommand("verify", "run the self-check suites"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    std::optional<json> doc;
    if (!opts.input.empty()) {
      doc = parse_config_text(read_file(opts.input), opts.input);
    } else if (sub != "verify") {
      throw ValidationError("a config document is required for " + sub);
    }
    std::optional<JsonCursor> root;
    if (doc) root.emplace(*doc, "");

    if (sub == "price") return cmd_price(*root, opts);
    if (sub == "k-index") return cmd_k_index(*root, opts);
    if (sub == "turning-point") return cmd_turning_point(*root, opts);
    if (sub == "simulate") return cmd_simulate(*root, opts);
    if (sub == "sweep") return cmd_sweep(*root, opts);
    return cmd_verify(root ? &*root : nullptr, opts);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ambiprice::cli
