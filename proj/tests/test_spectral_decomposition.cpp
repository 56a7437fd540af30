#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "biharm/constants.hpp"
#include "biharm/discretization.hpp"
#include "biharm/spectral_decomposition.hpp"

using namespace biharm;

namespace {

constexpr double pi2 = std::numbers::pi * std::numbers::pi;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidConfig;
}

ProblemParams well_1d(double a0, double b0, double lambda, int m = 24) {
  ProblemParams p;
  p.N = 1;
  p.a0 = a0;
  p.b0 = b0;
  p.lambda = lambda;
  p.well.omega = Box::cube(1, 0.0, 1.0);
  p.well.domain = Box::cube(1, -1.0, 2.0);
  p.well.outside_value = 1.0;
  p.well.b_infty = 1.0;
  p.nonlinearity = NonlinearitySpec::power(4.0);
  p.modes_per_dim = m;
  p.quadrature_panels = 8;
  return p;
}

QuadraticForms forms_of(const ProblemParams& p) { return assemble_forms(build_basis(p.well.domain, p.modes_per_dim), p); }

/// min u^T A u over u^T Gm u = 1 by projected gradient descent on the constraint surface.
double projected_descent_min(const QuadraticForms& f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const auto n = f.A.rows();
  Eigen::VectorXd u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = g(rng) / (1.0 + i);
  auto normalize = [&](Eigen::VectorXd v) { return Eigen::VectorXd(v / std::sqrt(v.dot(f.Gm * v))); };
  u = normalize(u);
  double val = u.dot(f.A * u);
  for (int it = 0; it < 20000; ++it) {
    // Gradient of the quotient u^T A u / u^T Gm u, preconditioned by A^{-1}.
    const Eigen::VectorXd r = f.A * u - val * (f.Gm * u);
    const Eigen::VectorXd d = f.A_llt.solve(r);
    if (std::sqrt(std::abs(d.dot(r))) <= 1e-13 * val) break;
    double step = 1.0;
    for (int b = 0; b < 60; ++b, step *= 0.5) {
      const Eigen::VectorXd trial = normalize(u - step * d);
      const double tv = trial.dot(f.A * trial);
      if (tv < val) {
        u = trial;
        val = tv;
        break;
      }
    }
  }
  return val;
}

}  // namespace

TEST(Pencil, NoExteriorMatchesClosedForm) {
  auto p = well_1d(-15.0, 0.0, 1.0);
  p.well.domain = p.well.omega;
  const auto dec = solve_pencil(forms_of(p), 5);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(dec.pairs[k].beta, (k + 1) * (k + 1) * pi2 / 15.0, 1e-12 * (k + 1) * (k + 1));
  EXPECT_NEAR(dec.pairs[0].beta, 0.658, 5e-4);
  EXPECT_NEAR(dec.pairs[1].beta, 2.632, 5e-4);
  EXPECT_EQ(dec.negative_dim(), 1u);
  EXPECT_NEAR(dec.gaps[0], 3.0 * pi2 / 15.0, 1e-12);
}

TEST(Pencil, Errors) {
  EXPECT_EQ(code_of([] { solve_pencil(forms_of(well_1d(1.0, 1.0, 10.0)), 3); }), ErrorCode::UndefinedForm);
  // b0 < 0 only: Gm is supported on Omega (rank m), so far fewer finite betas than modes is fine,
  // but asking for more than the discrete space holds is not.
  EXPECT_EQ(code_of([] { solve_pencil(forms_of(well_1d(0.0, -1.0, 10.0, 6)), 7); }), ErrorCode::InsufficientRange);
  EXPECT_EQ(code_of([] { solve_pencil(forms_of(well_1d(-15.0, 0.0, 10.0)), 0); }), ErrorCode::InvalidConfig);
}

TEST(Pencil, PairInvariants) {
  for (const auto& p : {well_1d(-15.0, 0.0, 1e4), well_1d(-2.0, -30.0, 1e3), well_1d(3.0, -100.0, 200.0)}) {
    const auto f = forms_of(p);
    const auto dec = solve_pencil(f, 6);
    for (std::size_t i = 0; i < dec.pairs.size(); ++i) {
      const auto& e = dec.pairs[i];
      EXPECT_LE(e.residual, 1e-8);
      EXPECT_NEAR(f.form_G(e.coeffs, e.coeffs), 1.0, 1e-10);
      EXPECT_NEAR(f.inner_lambda(e.coeffs, e.coeffs), e.beta, 1e-8 * e.beta);
      if (i > 0) EXPECT_GE(e.beta, dec.pairs[i - 1].beta);
      for (std::size_t j = 0; j < i; ++j) {
        const double s = f.inner_lambda(e.coeffs, dec.pairs[j].coeffs);
        EXPECT_NEAR(s, 0.0, 1e-8 * std::sqrt(e.beta * dec.pairs[j].beta));
      }
    }
  }
}

TEST(Pencil, WellExampleAgainstDenseGeneralizedSolver) {
  const auto f = forms_of(well_1d(-15.0, 0.0, 1e4));
  const auto dec = solve_pencil(f, 3);
  // Gm v = theta A v with A positive definite; beta = 1 / theta over the largest theta.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(f.Gm, f.A);
  const auto& theta = es.eigenvalues();
  for (int k = 0; k < 3; ++k) {
    const double ref = 1.0 / theta(theta.size() - 1 - k);
    EXPECT_NEAR(dec.pairs[k].beta, ref, 1e-10 * ref);
  }
  EXPECT_GT(dec.pairs[0].beta, 0.0);
}

TEST(Pencil, SignConventionIsDeterministic) {
  const auto f = forms_of(well_1d(-15.0, 0.0, 1e3));
  const auto a = solve_pencil(f, 4);
  const auto b = solve_pencil(f, 4);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(a.pairs[k].coeffs, b.pairs[k].coeffs);
    Eigen::Index arg;
    a.pairs[k].coeffs.cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(a.pairs[k].coeffs(arg), 0.0);
  }
}

TEST(Pencil, MinMaxAgainstProjectedDescent) {
  for (const auto& p : {well_1d(-15.0, 0.0, 1e2), well_1d(-15.0, 0.0, 1e4), well_1d(1.0, -40.0, 50.0)}) {
    const auto f = forms_of(p);
    const double beta1 = solve_pencil(f, 1).pairs[0].beta;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t s = 1; s <= 5; ++s) {
      const double v = projected_descent_min(f, s);
      EXPECT_GE(v, beta1 * (1.0 - 1e-10));
      best = std::min(best, v);
    }
    EXPECT_NEAR(best, beta1, 1e-6 * beta1);
  }
}

TEST(Pencil, MonotoneInLambda) {
  const std::vector<double> grid{1e2, 2e2, 4e2, 1e3, 1e4, 1e5, 1e6};
  std::vector<double> prev(5, 0.0);
  for (double lam : grid) {
    const auto dec = solve_pencil(forms_of(well_1d(-15.0, 0.0, lam)), 5);
    for (int k = 0; k < 5; ++k) {
      EXPECT_GE(dec.pairs[k].beta, prev[k] * (1.0 - 1e-12)) << lam << " k=" << k;
      prev[k] = dec.pairs[k].beta;
    }
  }
}

TEST(Pencil, InjectedFirstModeBound) {
  // beta_1(lambda) <= phi_1^T A phi_1 / phi_1^T Gm phi_1 for the first Dirichlet mode of Omega
  // injected into the D basis (extended by zero).
  for (double lam : {1e2, 1e3, 1e4, 1e6}) {
    const auto p = well_1d(-15.0, 0.0, lam, 48);
    const auto f = forms_of(p);
    const Eigen::MatrixXd C = cross_gram(f.basis, p.well.omega, {{1}});
    const Eigen::VectorXd phi = C.col(0);
    const double bound = phi.dot(f.A * phi) / phi.dot(f.Gm * phi);
    EXPECT_LE(solve_pencil(f, 1).pairs[0].beta, bound * (1.0 + 1e-12)) << lam;
  }
}

TEST(ConvergenceSweep, MonotoneAndConcentrating) {
  const std::vector<double> grid{1e2, 2e2, 4e2, 8e2, 1.6e3, 3.2e3};
  const auto t = eigen_convergence_sweep(well_1d(-15.0, 0.0, 1e2), grid, 3);
  ASSERT_EQ(t.rows.size(), grid.size() * 3);
  for (std::size_t i = 1; i < grid.size(); ++i)
    for (int k = 0; k < 3; ++k) EXPECT_GE(t.rows[3 * i + k].beta, t.rows[3 * (i - 1) + k].beta);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_LT(t.rows[3 * i].outside_mass, t.rows[3 * (i - 1)].outside_mass);
  for (const auto& r : t.rows) {
    EXPECT_LE(r.residual, 1e-8);
    EXPECT_GE(r.outside_mass, 0.0);
    EXPECT_LE(r.outside_mass, 1.0);
    EXPECT_NEAR(r.rel_err, std::abs(r.beta - r.beta0) / r.beta0, 1e-15);
  }
  EXPECT_NEAR(t.rows[0].beta0, pi2 / 15.0, 1e-14);
  EXPECT_NEAR(t.rows[1].beta0, 4.0 * pi2 / 15.0, 1e-14);
}

TEST(ConvergenceSweep, ConstantWithoutExterior) {
  auto p = well_1d(-15.0, 0.0, 1.0, 12);
  p.well.domain = p.well.omega;
  const auto t = eigen_convergence_sweep(p, {1.0, 10.0, 1e3}, 3);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(t.rows[k].beta, t.rows[3 + k].beta, 1e-10 * t.rows[k].beta);
    EXPECT_NEAR(t.rows[k].beta, t.rows[6 + k].beta, 1e-10 * t.rows[k].beta);
    EXPECT_LE(t.rows[k].rel_err, 1e-10);
    EXPECT_LE(t.rows[k].angle, 1e-6);
    EXPECT_LE(t.rows[k].outside_mass, 1e-12);
  }
}

TEST(ConvergenceSweep, GridErrors) {
  const auto p = well_1d(0.0, -2.0, 10.0, 8);
  EXPECT_EQ(code_of([&] { eigen_convergence_sweep(p, {1.0, 10.0}, 1); }), ErrorCode::InvalidLambda);
  EXPECT_EQ(code_of([&] { eigen_convergence_sweep(p, {10.0, 5.0}, 1); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { eigen_convergence_sweep(p, {}, 1); }), ErrorCode::InvalidConfig);
}

TEST(Simplicity, OneDimensionalLevelsAreSimple) {
  const auto p = well_1d(-15.0, 0.0, 1e4);
  const auto dec = solve_pencil(forms_of(p), 4);
  const auto r = simplicity_check(dec, dirichlet_mu(p.well.omega, 4));
  ASSERT_EQ(r.clusters.size(), 4u);
  for (const auto& c : r.clusters) EXPECT_EQ(c.dim, 1);
  EXPECT_TRUE(r.beta1_simple);
  EXPECT_TRUE(r.all_within_bound);
}

TEST(Simplicity, SquareHasDoubleSecondLevel) {
  ProblemParams p;
  p.N = 2;
  p.a0 = -120.0;  // beta^0 = mu/120: 0.16, 0.41, 0.66, ... so k0* > 2
  p.b0 = 0.0;
  p.lambda = 1.0;
  p.well.omega = Box::cube(2, 0.0, 1.0);
  p.well.domain = p.well.omega;
  p.well.outside_value = 1.0;
  p.well.b_infty = 1.0;
  p.modes_per_dim = 6;
  const auto setup = dirichlet_mu(p.well.omega, 10);
  EXPECT_GT(k0_star(p.a0, p.b0, setup).k, 2);
  const auto r = simplicity_check(solve_pencil(forms_of(p), 3), setup);
  ASSERT_GE(r.clusters.size(), 2u);
  EXPECT_EQ(r.clusters[0].dim, 1);
  EXPECT_EQ(r.clusters[1].dim, 2);
  EXPECT_EQ(r.clusters[1].analytic_dim, 2);
  EXPECT_TRUE(r.all_within_bound);
}

TEST(Simplicity, SinglePair) {
  const auto p = well_1d(-15.0, 0.0, 1e2, 8);
  const auto r = simplicity_check(solve_pencil(forms_of(p), 1), dirichlet_mu(p.well.omega, 1));
  ASSERT_EQ(r.clusters.size(), 1u);
  EXPECT_EQ(r.clusters[0].dim, 1);
  EXPECT_TRUE(r.beta1_simple);
}

TEST(FormBounds, EigenvectorIdentities) {
  const auto f = forms_of(well_1d(-15.0, 0.0, 1e2));
  const auto dec = solve_pencil(f, 4);
  for (const auto& e : dec.pairs) {
    const double ratio = f.form_D(e.coeffs, e.coeffs) / f.inner_lambda(e.coeffs, e.coeffs);
    EXPECT_NEAR(ratio, 1.0 - 1.0 / e.beta, 1e-10);
    EXPECT_NEAR(f.form_D(e.coeffs, e.coeffs), e.beta - 1.0, 1e-8);
  }
}

TEST(FormBounds, StraddlingSpectrumPasses) {
  const auto f = forms_of(well_1d(-15.0, 0.0, 1e2));
  const auto dec = solve_pencil(f, 6);
  ASSERT_LT(dec.pairs[0].beta, 1.0);
  ASSERT_GT(dec.pairs[1].beta, 1.0);
  const auto r = form_bounds_check(f, dec, 2, 1000, 42);
  EXPECT_TRUE(r.ok);
  EXPECT_GE(r.negative_margin, -1e-8);
  EXPECT_GE(r.complement_margin, -1e-8);
  EXPECT_LE(r.identity_error, 1e-8);
  EXPECT_EQ(r.samples, 1000);
  EXPECT_NEAR(r.upper_bound, 1.0 - 1.0 / dec.pairs[0].beta, 1e-15);
  EXPECT_NEAR(r.lower_bound, 1.0 - 1.0 / dec.pairs[1].beta, 1e-15);
}

TEST(FormBounds, PrerequisiteFailsWhenBetaOneExceedsOne) {
  // At lambda = 1e4 the discrete beta_1 is already above 1 for this well.
  const auto f = forms_of(well_1d(-15.0, 0.0, 1e4));
  const auto dec = solve_pencil(f, 4);
  ASSERT_GT(dec.pairs[0].beta, 1.0);
  EXPECT_EQ(code_of([&] { form_bounds_check(f, dec, 2); }), ErrorCode::PrerequisiteFailed);
  const auto r = rayleigh_bounds(f, dec, 1, 1000, 3);
  EXPECT_TRUE(r.ok);
  const auto r0 = rayleigh_bounds(f, dec, 0, 1000, 3);
  EXPECT_TRUE(r0.ok);
  EXPECT_GT(r0.worst_complement, 0.0);
}
