#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "biharm/concentration.hpp"
#include "biharm/constants.hpp"
#include "biharm/discretization.hpp"
#include "biharm/io.hpp"
#include "biharm/limit_problem.hpp"
#include "biharm/model_config.hpp"
#include "biharm/spectral_decomposition.hpp"
#include "biharm/variational_solver.hpp"

namespace biharm::acceptance {

struct Metric {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "==", "<", ">", "in"
  bool passed = false;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string note;
  std::vector<Metric> metrics;
  double seconds = 0.0;
  double budget_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> artifacts;  // file name, CSV text

  Metric& check(std::string name, double value, const std::string& rel, double threshold) {
    bool ok = false;
    if (rel == "<=") ok = value <= threshold;
    else if (rel == ">=") ok = value >= threshold;
    else if (rel == "<") ok = value < threshold;
    else if (rel == ">") ok = value > threshold;
    else if (rel == "==") ok = value == threshold;
    metrics.push_back({std::move(name), value, threshold, rel, ok && std::isfinite(value)});
    return metrics.back();
  }
  void flag(std::string name, bool ok) { metrics.push_back({std::move(name), ok ? 1.0 : 0.0, 1.0, "==", ok}); }

  void finish() {
    passed = !metrics.empty();
    for (const auto& m : metrics) passed = passed && m.passed;
  }
};

struct Settings {
  std::uint64_t seed = 1;
  int threads = 1;
};

/// The 1-D steep well used throughout: D = (-1, 2), Omega = (0, 1), b_out = 1.
inline ProblemParams well_1d(double a0, double b0, double lambda, const NonlinearitySpec& spec, int m = 24) {
  ProblemParams p;
  p.N = 1;
  p.a0 = a0;
  p.b0 = b0;
  p.lambda = lambda;
  p.well.omega = Box::cube(1, 0.0, 1.0);
  p.well.domain = Box::cube(1, -1.0, 2.0);
  p.well.outside_value = 1.0;
  p.well.b_infty = 1.0;
  p.nonlinearity = spec;
  p.modes_per_dim = m;
  p.quadrature_panels = 32;
  return p;
}

inline CriterionResult eigenvalue_formula(const Settings&) {
  CriterionResult r;
  r.id = 1;
  r.title = "pencil eigenvalues match the closed form (D = Omega)";
  r.budget_seconds = 1.0;
  ProblemParams p = well_1d(-15.0, 0.0, 1.0, NonlinearitySpec::power(4.0));
  p.well.domain = p.well.omega;
  const auto basis = build_basis(p.well.domain, 24);
  const auto forms = assemble_forms(basis, p);
  const auto dec = solve_pencil(forms, 5);
  const auto setup = dirichlet_mu(p.well.omega, 5);
  double worst = 0.0;
  Csv csv({"k", "beta_k", "beta_k_0", "rel_err"});
  for (int k = 0; k < 5; ++k) {
    const double b0 = beta0(k + 1, p.a0, p.b0, setup);
    const double rel = std::abs(dec.pairs[k].beta - b0) / b0;
    worst = std::max(worst, rel);
    csv.row({std::to_string(k + 1), Csv::num(dec.pairs[k].beta), Csv::num(b0), Csv::num(rel)});
  }
  r.check("max rel err k<=5", worst, "<=", 1e-10);
  r.artifacts.push_back({"criterion1_eigen_formula.csv", csv.str()});
  return r;
}

inline CriterionResult eigenvalue_convergence(const Settings&) {
  CriterionResult r;
  r.id = 2;
  r.title = "beta_k(lambda) monotone, converges to beta_k^0, e_1 concentrates";
  r.budget_seconds = 30.0;
  const auto p = well_1d(-15.0, 0.0, 1e2, NonlinearitySpec::power(4.0));
  const std::vector<double> grid{1e2, 1e3, 1e4, 1e5, 1e6};
  const int count = 3;
  const auto table = eigen_convergence_sweep(p, grid, count);
  Csv csv({"lambda", "k", "beta_k", "beta_k_0", "rel_err", "outside_mass", "residual"});
  for (const auto& row : table.rows)
    csv.row({Csv::num(row.lambda), std::to_string(row.k), Csv::num(row.beta), Csv::num(row.beta0),
             Csv::num(row.rel_err), Csv::num(row.outside_mass), Csv::num(row.residual)});
  r.artifacts.push_back({"criterion2_spectrum.csv", csv.str()});

  auto at = [&](std::size_t li, int k) -> const ConvergenceRow& { return table.rows[li * count + k]; };
  double worst_drop = 0.0;  // largest relative decrease of beta_k between grid points
  double worst_rel = 0.0;
  bool mass_decreasing = true;
  for (std::size_t li = 0; li < grid.size(); ++li) {
    for (int k = 0; k < count; ++k) {
      if (li > 0) worst_drop = std::max(worst_drop, (at(li - 1, k).beta - at(li, k).beta) / at(li - 1, k).beta);
      if (li + 1 == grid.size()) worst_rel = std::max(worst_rel, at(li, k).rel_err);
    }
    if (li > 0) mass_decreasing = mass_decreasing && at(li, 0).outside_mass < at(li - 1, 0).outside_mass;
  }
  r.check("max relative decrease of beta_k along the grid", worst_drop, "<=", 1e-12);
  r.check("max rel err to beta_k^0 at lambda=1e6, k<=3", worst_rel, "<=", 5e-2);
  r.flag("outside mass of e_1 strictly decreasing", mass_decreasing);
  return r;
}

inline CriterionResult form_bounds(const Settings& s) {
  CriterionResult r;
  r.id = 3;
  r.title = "Rayleigh bounds of D on the negative block and its complement";
  r.budget_seconds = 10.0;
  const auto p = well_1d(-15.0, 0.0, 1e4, NonlinearitySpec::power(4.0));
  const auto basis = build_basis(p.well.domain, p.modes_per_dim);
  const auto forms = assemble_forms(basis, p);
  const auto dec = solve_pencil(forms, 8);
  const auto setup = dirichlet_mu(p.well.omega, 8);
  const int k0 = k0_star(p.a0, p.b0, setup).k;
  const auto rep = rayleigh_bounds(forms, dec, k0 - 1, 1000, s.seed);
  const bool straddles = (k0 == 1 || dec.pairs[k0 - 2].beta < 1.0) && dec.pairs[k0 - 1].beta > 1.0;
  if (!straddles)
    r.note = "discrete beta_1 = " + Csv::num(dec.pairs[0].beta) + " > 1: split taken at k0*-1 = " +
             std::to_string(k0 - 1) + " without the sign straddle";
  r.check("negative block margin", rep.negative_margin, ">=", -1e-8);
  r.check("complement margin", rep.complement_margin, ">=", -1e-8);
  r.check("max |D(e_k,e_k) - (beta_k - 1)|", rep.identity_error, "<=", 1e-8);
  Csv csv({"quantity", "value"});
  csv.row({"split", std::to_string(rep.split)})
      .row({"upper_bound", Csv::num(rep.upper_bound)})
      .row({"lower_bound", Csv::num(rep.lower_bound)})
      .row({"worst_negative", Csv::num(rep.worst_negative)})
      .row({"worst_complement", Csv::num(rep.worst_complement)})
      .row({"identity_error", Csv::num(rep.identity_error)});
  r.artifacts.push_back({"criterion3_form_bounds.csv", csv.str()});
  return r;
}

inline CriterionResult gradient_check(const Settings& s) {
  CriterionResult r;
  r.id = 4;
  r.title = "central differences of E converge at second order to <grad E, h>";
  r.budget_seconds = 5.0;
  const auto p = well_1d(-15.0, 0.0, 1e4, NonlinearitySpec::power(4.0));
  const auto basis = build_basis(p.well.domain, p.modes_per_dim);
  const auto forms = assemble_forms(basis, p);
  const EnergyFunctional E(forms, p.nonlinearity);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(forms.size());
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  Csv csv({"pair", "eps", "error", "ratio"});
  for (int pair = 0; pair < 50; ++pair) {
    Eigen::VectorXd h(n), u(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double decay = 1.0 / (1.0 + k);
      h(k) = 5.0 * normal(rng) * decay;
      u(k) = h(k) + 2.0 * normal(rng) * decay;
    }
    const auto st = E.evaluate(u);
    const double exact = forms.inner_lambda(st.grad, h);
    double prev = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double eps = 1e-2 * std::pow(0.5, j);
      const double fd = (E.energy(u + eps * h) - E.energy(u - eps * h)) / (2.0 * eps);
      const double err = std::abs(fd - exact);
      const double ratio = j > 0 ? err / prev : 0.0;
      if (j > 0) {
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
      csv.row({std::to_string(pair), Csv::num(eps), Csv::num(err), Csv::num(ratio)});
      prev = err;
    }
  }
  r.check("min error ratio per halving", lo, ">=", 0.15);
  r.check("max error ratio per halving", hi, "<=", 0.35);
  r.artifacts.push_back({"criterion4_gradient.csv", csv.str()});
  return r;
}

/// 1/2 int (f(u) u - 2 F(u)) and 1/4 int u^4 by the same quadrature.
inline std::pair<double, double> nehari_sides(const QuadraticForms& forms, const NonlinearitySpec& spec,
                                              const Eigen::VectorXd& u) {
  Tensor t = forms.sampler.synthesize(u);
  Tensor q = t;
  for (Eigen::Index i = 0; i < t.data.size(); ++i) {
    const double v = t.data(i);
    const auto fv = eval_f(spec, v);
    t.data(i) = 0.5 * (fv.f * v - 2.0 * fv.F);
    q.data(i) = 0.25 * v * v * v * v;
  }
  return {forms.sampler.integrate(t), forms.sampler.integrate(q)};
}

inline void solution_artifact(CriterionResult& r, const std::string& name, const CriticalPoint& c) {
  Csv csv({"mode_index", "coefficient"});
  for (Eigen::Index k = 0; k < c.coeffs.size(); ++k) csv.row({std::to_string(k), Csv::num(c.coeffs(k))});
  r.artifacts.push_back({name, csv.str()});
}

inline CriterionResult superlinear_regime(const Settings& s) {
  CriterionResult r;
  r.id = 5;
  r.title = "superlinear linking solution (p = 4, lambda = 1e4)";
  r.budget_seconds = 120.0;
  const auto p = well_1d(-15.0, 0.0, 1e4, NonlinearitySpec::power(4.0));
  const auto basis = build_basis(p.well.domain, p.modes_per_dim);
  const auto forms = assemble_forms(basis, p);
  const auto dec = solve_pencil(forms, 8);
  GeometryOptions g;
  g.seed = s.seed;
  const auto geo = find_linking_geometry(forms, p.nonlinearity, &dec, g);
  SolveOptions so;
  so.tol = 1e-6;
  try {
    const auto c = linking_solve(forms, p.nonlinearity, geo, so);
    const auto [lhs, rhs] = nehari_sides(forms, p.nonlinearity, c.coeffs);
    r.check("relative Euler-Lagrange residual", euler_lagrange_residual(forms, p.nonlinearity, c.coeffs), "<=", 1e-6);
    r.check("energy c_lambda", c.energy, ">", 0.0);
    r.check("|1/2 int(f u - 2F) - 1/4 |u|_4^4| / (1/4 |u|_4^4)", std::abs(lhs - rhs) / rhs, "<=", 1e-8);
    r.note = "method " + c.method + ", negative block dim " + std::to_string(geo.negative_dim());
    solution_artifact(r, "criterion5_solution.csv", c);
  } catch (const Error& e) {
    r.note = std::string("solver error: ") + e.what();
    r.flag("solver converged", false);
  }
  return r;
}

inline CriterionResult asymptotically_linear_regime(const Settings& s) {
  CriterionResult r;
  r.id = 6;
  r.title = "asymptotically linear solution inside the window; GeometryNotFound below it";
  r.budget_seconds = 120.0;
  auto p = well_1d(-15.0, 0.0, 1e4, NonlinearitySpec::saturating(1.0));
  const auto setup = dirichlet_mu(p.well.omega, 16);
  const auto spec_lim = limit_spectrum(p.a0, p.b0, setup, 2);
  const double l_mid = 0.5 * (spec_lim[0] + spec_lim[1]);
  p.nonlinearity = NonlinearitySpec::saturating(l_mid);
  const auto hyp = check_hypotheses(p.a0, p.b0, p.nonlinearity, p.well.omega);
  r.flag("midpoint slope inside the window", hyp.window_ok && hyp.off_limit_spectrum);

  const auto basis = build_basis(p.well.domain, p.modes_per_dim);
  const auto forms = assemble_forms(basis, p);
  const auto dec = solve_pencil(forms, 8);
  GeometryOptions g;
  g.seed = s.seed;
  SolveOptions so;
  so.tol = 1e-6;
  try {
    const auto geo = find_linking_geometry(forms, p.nonlinearity, &dec, g);
    const auto c = linking_solve(forms, p.nonlinearity, geo, so);
    r.check("relative Euler-Lagrange residual", euler_lagrange_residual(forms, p.nonlinearity, c.coeffs), "<=", 1e-6);
    r.check("energy c_lambda", c.energy, ">", 0.0);
    solution_artifact(r, "criterion6_solution.csv", c);
  } catch (const Error& e) {
    r.note = std::string("solver error: ") + e.what();
    r.flag("solver converged", false);
  }

  // Half the window's lower edge.
  const double l_low = 0.5 * hyp.window_lower * d_star(p.a0, p.b0, setup);
  auto low = NonlinearitySpec::saturating(l_low);
  bool not_found = false;
  try {
    (void)find_linking_geometry(forms, low, &dec, g);
  } catch (const Error& e) {
    not_found = e.code() == ErrorCode::GeometryNotFound;
  }
  r.flag("GeometryNotFound below the window", not_found);
  Csv csv({"quantity", "value"});
  csv.row({"l_infty_mid", Csv::num(l_mid)})
      .row({"l_infty_low", Csv::num(l_low)})
      .row({"window_lower", Csv::num(hyp.window_lower)})
      .row({"window_value", Csv::num(hyp.window_value)});
  r.artifacts.push_back({"criterion6_window.csv", csv.str()});
  return r;
}

inline Csv sweep_csv(const SweepReport& rep) {
  Csv csv({"lambda", "energy", "norm_lambda", "outside_mass", "well_penalty", "l2_distance", "h2_distance", "status"});
  for (const auto& row : rep.rows)
    csv.row({Csv::num(row.lambda), Csv::num(row.energy), Csv::num(row.norm_lambda), Csv::num(row.outside_mass),
             Csv::num(row.well_penalty), Csv::num(row.l2_distance), Csv::num(row.h2_distance), row.status});
  return csv;
}

inline CriterionResult concentration_regime(const Settings& s) {
  CriterionResult r;
  r.id = 7;
  r.title = "concentration: outside mass, distance to the limit solution, bounded levels";
  r.budget_seconds = 300.0;
  const std::vector<double> grid{1e2, 1e3, 1e4};
  struct Case {
    const char* name;
    double a0, b0;
  };
  for (const Case c : {Case{"definite", 1.0, 1.0}, Case{"indefinite", -15.0, 0.0}}) {
    const auto p = well_1d(c.a0, c.b0, grid.front(), NonlinearitySpec::power(4.0));
    SweepOptions opt;
    opt.geometry.seed = s.seed;
    opt.limit.geometry.seed = s.seed;
    const auto rep = sweep(p, grid, opt);
    r.artifacts.push_back({std::string("criterion7_sweep_") + c.name + ".csv", sweep_csv(rep).str()});
    const std::string tag = std::string(c.name) + ": ";
    bool all_ok = rep.limit.has_value();
    for (const auto& row : rep.rows) all_ok = all_ok && row.ok();
    r.flag(tag + "all sweep points and the limit solved", all_ok);
    if (!all_ok) continue;
    const auto& first = rep.rows.front();
    const auto& last = rep.rows.back();
    const auto& prev = rep.rows[rep.rows.size() - 2];
    r.check(tag + "outside mass ratio first/last", first.outside_mass / last.outside_mass, ">=", 10.0);
    r.check(tag + "h2 distance change over the last step", last.h2_distance - prev.h2_distance, "<", 0.0);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& row : rep.rows) {
      lo = std::min(lo, row.energy);
      hi = std::max(hi, row.energy);
    }
    r.check(tag + "C = min c_lambda", lo, ">", 0.0);
    r.check(tag + "C' = max c_lambda", hi, "<", std::numeric_limits<double>::infinity());
  }
  return r;
}

/// pi^{1 + 1/N} 2^{2/N} N (N - 2) / 4 / Gamma((N + 1)/2)^{2/N}: the same
/// sharp constant through the duplication formula.
inline double sobolev_constant_duplication(int N) {
  const double n = N;
  return 0.25 * n * (n - 2.0) * std::pow(2.0, 2.0 / n) * std::pow(std::numbers::pi, 1.0 + 1.0 / n) *
         std::exp(-2.0 / n * std::lgamma(0.5 * (n + 1.0)));
}

inline CriterionResult constants_certification(const Settings&) {
  CriterionResult r;
  r.id = 8;
  r.title = "N = 3 constants: S, C_lambda -> d0, k0*";
  r.budget_seconds = 1.0;
  ProblemParams p;
  p.N = 3;
  p.a0 = -40.0;
  p.b0 = 0.0;
  p.lambda = 1e6;
  p.well.omega = Box::cube(3, 0.0, 1.0);
  p.well.domain = Box::cube(3, -1.0, 2.0);
  p.nonlinearity = NonlinearitySpec::power(4.0);
  const auto ec = embedding_constants(p);
  const double S_ref = sobolev_constant_duplication(3);
  r.check("|S - S_ref| / S_ref", std::abs(ec.S - S_ref) / S_ref, "<=", 1e-4);
  r.check("|S - 5.4779| / 5.4779", std::abs(ec.S - 5.4779) / 5.4779, "<=", 1e-4);
  r.check("(C_lambda - d0) / d0 at lambda = 1e6", std::abs(ec.C_lambda - ec.d0) / ec.d0, "<=", 1e-5);
  const auto setup = dirichlet_mu(p.well.omega, 16);
  r.check("k0*", k0_star(p.a0, p.b0, setup).k, "==", 2.0);
  Csv csv({"name", "value"});
  csv.row({"S", Csv::num(ec.S)})
      .row({"S_ref", Csv::num(S_ref)})
      .row({"A_infty", Csv::num(ec.A_infty)})
      .row({"C_lambda", Csv::num(ec.C_lambda)})
      .row({"d0", Csv::num(ec.d0)});
  r.artifacts.push_back({"criterion8_constants.csv", csv.str()});
  return r;
}

using CriterionFn = std::function<CriterionResult(const Settings&)>;

inline std::vector<CriterionFn> criteria() {
  return {eigenvalue_formula, eigenvalue_convergence, form_bounds,          gradient_check,
          superlinear_regime, asymptotically_linear_regime, concentration_regime, constants_certification};
}

/// Runs one criterion, timing it; exceptions become failed metrics.
inline CriterionResult run(int id, const Settings& s) {
  const auto all = criteria();
  require(id >= 1 && id <= static_cast<int>(all.size()), ErrorCode::InvalidConfig, "no such criterion");
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = all[static_cast<std::size_t>(id - 1)](s);
  } catch (const Error& e) {
    r.id = id;
    r.note = std::string("error: ") + e.what();
    r.flag("completed without error", false);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.check("runtime seconds", r.seconds, "<", r.budget_seconds);
  r.finish();
  return r;
}

inline std::string summary_line(const CriterionResult& r) {
  std::string line = "criterion " + std::to_string(r.id) + ": " + (r.passed ? "PASS" : "FAIL") + "  " + r.title;
  for (const auto& m : r.metrics) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", m.value);
    char thr[64];
    std::snprintf(thr, sizeof thr, "%.6g", m.threshold);
    line += "\n    [" + std::string(m.passed ? "ok" : "xx") + "] " + m.name + " = " + buf + " (" + m.relation + " " +
            thr + ")";
  }
  if (!r.note.empty()) line += "\n    note: " + r.note;
  return line;
}

/// Table of verdicts without timings, so reruns are byte-identical.
inline Csv verdict_csv(const std::vector<CriterionResult>& results) {
  Csv csv({"criterion", "metric", "value", "relation", "threshold", "passed"});
  for (const auto& r : results)
    for (const auto& m : r.metrics) {
      if (m.name == "runtime seconds") continue;
      csv.row({std::to_string(r.id), m.name, Csv::num(m.value), m.relation, Csv::num(m.threshold),
               m.passed ? "1" : "0"});
    }
  return csv;
}

}  // namespace biharm::acceptance
