#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biharm/box.hpp"
#include "biharm/discretization.hpp"
#include "biharm/model_config.hpp"
#include "biharm/variational_solver.hpp"

namespace biharm {

/// Critical point of F(u) = 1/2 int_Omega (|Lap u|^2 + a0 |grad u|^2 + b0 u^2) - int_Omega F(u)
/// in the Navier sine basis of Omega.
struct LimitSolution {
  Box omega;
  Eigen::VectorXd coeffs;
  double energy = 0.0;
  double grad_norm = 0.0;
  CriticalPoint point;
  LinkingGeometry geometry;
  QuadraticForms forms;
};

struct LimitOptions {
  int modes_per_dim = 24;
  int quadrature_panels = 32;
  SolveOptions solve;
  GeometryOptions geometry;
  int pencil_count = 8;
};

inline LimitSolution solve_limit(const Box& omega, double a0, double b0, const NonlinearitySpec& spec,
                                 const LimitOptions& opt = {}) {
  require(omega.well_formed(), ErrorCode::InvalidGeometry, "Omega must be a non-degenerate box");
  LimitSolution s;
  s.omega = omega;
  s.forms = assemble_limit_forms(omega, opt.modes_per_dim, opt.quadrature_panels, a0, b0);
  auto out = solve_critical_point(s.forms, spec, opt.solve, opt.geometry, opt.pencil_count);
  s.point = std::move(out.point);
  s.geometry = std::move(out.geometry);
  s.coeffs = s.point.coeffs;
  s.energy = s.point.energy;
  s.grad_norm = s.point.grad_norm;
  return s;
}

/// Eigenvalues mu^2 + a0 mu + b0 of the quadratic part on Omega, ascending.
inline std::vector<double> limit_quadratic_spectrum(const QuadraticForms& forms, int count) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(forms.D(), Eigen::EigenvaluesOnly);
  const int n = std::min<int>(count, static_cast<int>(es.eigenvalues().size()));
  return {es.eigenvalues().data(), es.eigenvalues().data() + n};
}

/// Known limit solutions used as comparison targets: the computed one and its
/// mirror image (f odd).
inline std::vector<Eigen::VectorXd> limit_solution_set(const LimitSolution& s) {
  return {s.coeffs, -s.coeffs};
}

}  // namespace biharm
