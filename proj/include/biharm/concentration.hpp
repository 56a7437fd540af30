#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "biharm/discretization.hpp"
#include "biharm/error.hpp"
#include "biharm/limit_problem.hpp"
#include "biharm/model_config.hpp"
#include "biharm/spectral_decomposition.hpp"
#include "biharm/variational_solver.hpp"

namespace biharm {

struct SweepRow {
  double lambda = 0.0;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double norm_lambda = std::numeric_limits<double>::quiet_NaN();
  double outside_mass = std::numeric_limits<double>::quiet_NaN();
  double well_penalty = std::numeric_limits<double>::quiet_NaN();
  double l2_distance = std::numeric_limits<double>::quiet_NaN();
  double h2_distance = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
  Eigen::VectorXd coeffs;

  bool ok() const { return status == "ok"; }
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::string limit_status = "ok";
  std::optional<LimitSolution> limit;
};

struct SweepOptions {
  bool warm_start = true;
  bool compare_limit = true;
  int threads = 1;  // cold-start sweeps only
  SolveOptions solve;
  GeometryOptions geometry;
  LimitOptions limit;
  int pencil_count = 8;
};

/// lambda int b u^2.
inline double well_penalty(const QuadraticForms& forms, const WellPotential& well, const Eigen::VectorXd& u) {
  if (!well.mollified()) return forms.lambda * well.outside_value * (u.squaredNorm() - u.dot(forms.omega_overlap * u));
  Tensor t = forms.sampler.synthesize(u);
  for (Eigen::Index q = 0; q < t.data.size(); ++q) {
    const auto x = forms.sampler.node(static_cast<std::size_t>(q));
    t.data(q) = eval_potential(well, x) * t.data(q) * t.data(q);
  }
  return forms.lambda * forms.sampler.integrate(t);
}

/// Distances from a D-field to Omega-fields extended by zero.
struct FieldDistance {
  double l2 = 0.0;
  double h2 = 0.0;  // sqrt(L^2 part + Laplacian part)
};

class LimitComparator {
 public:
  LimitComparator(const SpectralBasis& d_basis, const LimitSolution& limit)
      : d_nu_(d_basis.nu), targets_(limit_solution_set(limit)), omega_nu_(limit.forms.basis.nu) {
    std::vector<std::vector<int>> modes;
    for (std::size_t f = 0; f < limit.forms.basis.size; ++f) modes.push_back(limit.forms.basis.multi_index(f));
    C_ = cross_gram(d_basis, limit.omega, modes);
  }

  FieldDistance distance(const Eigen::VectorXd& u) const {
    FieldDistance best{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    const Eigen::VectorXd lu = d_nu_.cwiseProduct(u);
    for (const auto& c : targets_) {
      const Eigen::VectorXd lc = omega_nu_.cwiseProduct(c);
      const double l2sq = u.squaredNorm() - 2.0 * u.dot(C_ * c) + c.squaredNorm();
      const double lapsq = lu.squaredNorm() - 2.0 * lu.dot(C_ * lc) + lc.squaredNorm();
      const double l2 = std::sqrt(std::max(0.0, l2sq));
      const double h2 = std::sqrt(std::max(0.0, l2sq + lapsq));
      if (h2 < best.h2) best = {l2, h2};
    }
    return best;
  }

 private:
  Eigen::VectorXd d_nu_;
  std::vector<Eigen::VectorXd> targets_;
  Eigen::VectorXd omega_nu_;
  Eigen::MatrixXd C_;
};

namespace detail {

inline SweepRow sweep_point(const SpectralBasis& basis, ProblemParams params, double lambda,
                            const SweepOptions& opt, const std::optional<Eigen::VectorXd>& warm,
                            const LimitComparator* cmp) {
  SweepRow row;
  row.lambda = lambda;
  params.lambda = lambda;
  try {
    const auto forms = assemble_forms(basis, params);
    SolveOptions so = opt.solve;
    if (warm) so.warm_start = *warm;
    const auto out = solve_critical_point(forms, params.nonlinearity, so, opt.geometry, opt.pencil_count);
    const auto& u = out.point.coeffs;
    row.coeffs = u;
    row.energy = out.point.energy;
    row.norm_lambda = out.point.norm;
    row.outside_mass = outside_mass(forms, u);
    row.well_penalty = well_penalty(forms, params.well, u);
    if (cmp != nullptr) {
      const auto d = cmp->distance(u);
      row.l2_distance = d.l2;
      row.h2_distance = d.h2;
    }
  } catch (const Error& e) {
    row.status = to_string(e.code());
  }
  return row;
}

}  // namespace detail

/// Solves the problem at every lambda of an increasing grid and records the
/// concentration diagnostics.  Per-lambda failures mark the row and the sweep
/// continues.
inline SweepReport sweep(const ProblemParams& base, const std::vector<double>& grid, const SweepOptions& opt = {}) {
  require(!grid.empty(), ErrorCode::InvalidConfig, "empty lambda grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    require(grid[i] > grid[i - 1], ErrorCode::InvalidConfig, "lambda grid must be increasing");
  // D = Omega is allowed here (no well at all); the forms stay lambda-independent.
  require(base.well.domain.well_formed() && base.well.omega.well_formed(), ErrorCode::InvalidGeometry,
          "boxes must have positive side lengths");
  validate_nonlinearity(base.nonlinearity, base.N);
  const auto basis = build_basis(base.well.domain, base.modes_per_dim);

  SweepReport rep;
  std::optional<LimitComparator> cmp;
  if (opt.compare_limit) {
    try {
      rep.limit = solve_limit(base.well.omega, base.a0, base.b0, base.nonlinearity, opt.limit);
      cmp.emplace(basis, *rep.limit);
    } catch (const Error& e) {
      rep.limit_status = to_string(e.code());
    }
  }
  const LimitComparator* cp = cmp ? &*cmp : nullptr;

  rep.rows.resize(grid.size());
  if (opt.warm_start || opt.threads <= 1) {
    std::optional<Eigen::VectorXd> warm;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      rep.rows[i] = detail::sweep_point(basis, base, grid[i], opt, opt.warm_start ? warm : std::nullopt, cp);
      if (rep.rows[i].ok()) warm = rep.rows[i].coeffs;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min<int>(opt.threads, static_cast<int>(grid.size()));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < grid.size(); i = next++)
          rep.rows[i] = detail::sweep_point(basis, base, grid[i], opt, std::nullopt, cp);
      });
    for (auto& t : pool) t.join();
  }
  return rep;
}

}  // namespace biharm
