#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biharm/constants.hpp"
#include "biharm/discretization.hpp"
#include "biharm/error.hpp"
#include "biharm/model_config.hpp"

namespace biharm {

inline constexpr double kClusterTolerance = 1e-6;

/// (beta, e) with A e = beta Gm e and Gm(e, e) = 1.
struct EigenPair {
  double beta = 0.0;
  Eigen::VectorXd coeffs;
  double residual = 0.0;
};

struct SpectralDecomposition {
  std::vector<EigenPair> pairs;
  std::vector<int> negative_subspace;  // indices with beta < 1
  std::vector<double> gaps;

  std::size_t negative_dim() const { return negative_subspace.size(); }
};

namespace detail {

inline void fix_sign(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  const double mx = v.cwiseAbs().maxCoeff(&arg);
  // Lowest index among entries tied at the max magnitude.
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) >= mx * (1.0 - 1e-12)) {
      arg = i;
      break;
    }
  if (v(arg) < 0.0) v = -v;
}

}  // namespace detail

/// The `count` smallest finite generalized eigenvalues of A v = beta Gm v.
/// Uses A = L L^T and the symmetric matrix L^{-1} Gm L^{-T}, whose eigenvalues
/// are theta = 1/beta; the null space of Gm maps to theta = 0 and is dropped.
inline SpectralDecomposition solve_pencil(const QuadraticForms& forms, int count) {
  require(count >= 1, ErrorCode::InvalidConfig, "count must be >= 1");
  require(!forms.negative_part_vanishes(), ErrorCode::UndefinedForm, "G_lambda vanishes (min{a0, b0} >= 0)");
  require(forms.A_llt.info() == Eigen::Success, ErrorCode::FactorizationFailure, "A is not positive definite");

  const auto L = forms.A_llt.matrixL();
  Eigen::MatrixXd X = L.solve(forms.Gm);              // L^{-1} Gm
  Eigen::MatrixXd C = L.solve(X.transpose());         // L^{-1} Gm L^{-T}
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  require(es.info() == Eigen::Success, ErrorCode::FactorizationFailure, "symmetric eigensolve failed");

  const auto& theta = es.eigenvalues();
  const Eigen::Index n = theta.size();
  const double theta_max = theta(n - 1);
  const double cutoff = 1e-12 * std::max(theta_max, 0.0);
  int finite = 0;
  for (Eigen::Index i = n - 1; i >= 0 && theta(i) > cutoff; --i) ++finite;
  require(finite >= count, ErrorCode::InsufficientRange,
          "only " + std::to_string(finite) + " finite eigenvalues in the discrete space");

  SpectralDecomposition d;
  const auto LT = forms.A_llt.matrixU();
  for (int i = 0; i < count; ++i) {
    const Eigen::Index idx = n - 1 - i;
    EigenPair p;
    p.beta = 1.0 / theta(idx);
    p.coeffs = LT.solve(es.eigenvectors().col(idx));
    p.coeffs /= std::sqrt(forms.form_G(p.coeffs, p.coeffs));
    detail::fix_sign(p.coeffs);
    const Eigen::VectorXd Ae = forms.A * p.coeffs;
    p.residual = (Ae - p.beta * (forms.Gm * p.coeffs)).norm() / Ae.norm();
    if (p.beta < 1.0) d.negative_subspace.push_back(i);
    d.pairs.push_back(std::move(p));
  }
  for (int i = 0; i + 1 < count; ++i) d.gaps.push_back(d.pairs[i + 1].beta - d.pairs[i].beta);
  return d;
}

/// Gram matrix int_Omega phi^D_k psi^Omega_l between the D-basis and the
/// L^2(Omega)-orthonormal Dirichlet sines of Omega listed in `omega_modes`.
inline Eigen::MatrixXd cross_gram(const SpectralBasis& basis, const Box& omega,
                                  const std::vector<std::vector<int>>& omega_modes) {
  Eigen::MatrixXd C(static_cast<Eigen::Index>(basis.size), static_cast<Eigen::Index>(omega_modes.size()));
  for (std::size_t f = 0; f < basis.size; ++f) {
    const auto k = basis.multi_index(f);
    for (std::size_t j = 0; j < omega_modes.size(); ++j) {
      double v = 1.0;
      for (std::size_t i = 0; i < omega.dim(); ++i)
        v *= sine_cross_overlap(k[i], basis.domain.lo[i], basis.domain.length(i), omega_modes[j][i], omega.lo[i],
                                omega.length(i), omega.lo[i], omega.hi[i]);
      C(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return C;
}

/// Fraction of L^2(D) mass outside Omega.
inline double outside_mass(const QuadraticForms& forms, const Eigen::VectorXd& u) {
  const double total = u.squaredNorm();
  if (total == 0.0) return 0.0;
  return std::clamp(1.0 - u.dot(forms.omega_overlap * u) / total, 0.0, 1.0);
}

struct ConvergenceRow {
  double lambda = 0.0;
  int k = 0;  // 1-based
  double beta = 0.0;
  double beta0 = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  double outside_mass = 0.0;
  double residual = 0.0;
  double angle = 0.0;  // L^2(Omega) angle to the analytic level space
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::vector<double> lambdas;
  std::vector<bool> beta1_simple;
  std::optional<double> empirical_simple_from;  // smallest grid lambda from which beta_1 stays simple
};

/// Per lambda: beta_k(lambda) against beta_k^0 with concentration and
/// eigenspace-angle diagnostics.
inline ConvergenceTable eigen_convergence_sweep(const ProblemParams& params, const std::vector<double>& lambda_grid,
                                                int count) {
  require(!lambda_grid.empty(), ErrorCode::InvalidConfig, "empty lambda grid");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    require(lambda_grid[i] > lambda_floor(params.b0, params.well.b_infty), ErrorCode::InvalidLambda,
            "grid lambda below max{0, -b0/b_infty}");
    require(i == 0 || lambda_grid[i] > lambda_grid[i - 1], ErrorCode::InvalidConfig, "lambda grid must increase");
  }
  const auto setup = dirichlet_mu(params.well.omega, count);
  const auto basis = build_basis(params.well.domain, params.modes_per_dim);

  // Analytic level spaces of Omega for the angle diagnostic.
  std::vector<std::vector<int>> level_modes(setup.mu_bar.size());
  const auto C = cross_gram(basis, params.well.omega, setup.multi_index);
  for (std::size_t k = 0; k < setup.mu.size(); ++k) level_modes[setup.level_of[k]].push_back(static_cast<int>(k));

  ConvergenceTable table;
  table.lambdas = lambda_grid;
  for (double lam : lambda_grid) {
    ProblemParams p = params;
    p.lambda = lam;
    const auto forms = assemble_forms(basis, p);
    const auto dec = solve_pencil(forms, count);
    for (int k = 0; k < count; ++k) {
      const auto& pair = dec.pairs[k];
      const int level = setup.level_of[k];
      ConvergenceRow row;
      row.lambda = lam;
      row.k = k + 1;
      row.beta = pair.beta;
      row.beta0 = beta0(level + 1, p.a0, p.b0, setup);
      row.abs_err = std::abs(row.beta - row.beta0);
      row.rel_err = row.abs_err / std::abs(row.beta0);
      row.outside_mass = outside_mass(forms, pair.coeffs);
      row.residual = pair.residual;
      const double in_mass = pair.coeffs.dot(forms.omega_overlap * pair.coeffs);
      double proj = 0.0;
      for (int j : level_modes[level]) {
        const double c = pair.coeffs.dot(C.col(j));
        proj += c * c;
      }
      row.angle = in_mass > 0.0 ? std::acos(std::sqrt(std::clamp(proj / in_mass, 0.0, 1.0))) : 0.5 * std::numbers::pi;
      table.rows.push_back(row);
    }
    const bool simple = count < 2 || (dec.pairs[1].beta - dec.pairs[0].beta) > kClusterTolerance * dec.pairs[0].beta;
    table.beta1_simple.push_back(simple);
  }
  for (std::size_t i = table.lambdas.size(); i-- > 0;) {
    if (!table.beta1_simple[i]) break;
    table.empirical_simple_from = table.lambdas[i];
  }
  return table;
}

struct Cluster {
  int first = 0;  // index of first pair
  int dim = 0;
  double beta = 0.0;
  int analytic_dim = 0;  // dim N_j of the matching analytic level, 0 if unknown
  bool within_bound = true;
};

struct MultiplicityReport {
  std::vector<Cluster> clusters;
  bool beta1_simple = false;
  bool all_within_bound = true;
};

/// Groups consecutive betas with relative gap < 1e-6 and compares the
/// cluster sizes with dim N_j.
inline MultiplicityReport simplicity_check(const SpectralDecomposition& dec, const SpectralSetup& setup) {
  MultiplicityReport r;
  for (int i = 0; i < static_cast<int>(dec.pairs.size()); ++i) {
    const double b = dec.pairs[i].beta;
    if (!r.clusters.empty() && std::abs(b - r.clusters.back().beta) <= kClusterTolerance * std::abs(r.clusters.back().beta)) {
      ++r.clusters.back().dim;
    } else {
      r.clusters.push_back({i, 1, b, 0, true});
    }
  }
  for (std::size_t c = 0; c < r.clusters.size(); ++c) {
    auto& cl = r.clusters[c];
    if (c < setup.multiplicities.size()) {
      cl.analytic_dim = setup.multiplicities[c];
      cl.within_bound = cl.dim <= cl.analytic_dim;
    }
    r.all_within_bound = r.all_within_bound && cl.within_bound;
  }
  r.beta1_simple = !r.clusters.empty() && r.clusters.front().dim == 1;
  return r;
}

struct FormBoundReport {
  int split = 0;                // dimension of the negative block (k0* - 1)
  double upper_bound = 0.0;     // 1 - 1/beta_split
  double lower_bound = 0.0;     // 1 - 1/beta_{split+1}
  double worst_negative = -std::numeric_limits<double>::infinity();   // max D/A on the span
  double worst_complement = std::numeric_limits<double>::infinity();  // min D/A on the complement
  double negative_margin = std::numeric_limits<double>::infinity();   // upper_bound - worst_negative
  double complement_margin = 0.0;  // worst_complement - lower_bound
  double identity_error = 0.0;     // max_k |D(e_k,e_k) - (beta_k - 1)|
  int samples = 0;
  bool ok = false;
};

/// Rayleigh-quotient bounds of D relative to ||.||_lambda on span{e_1..e_split}
/// and on its A-orthogonal complement, from random samples.
inline FormBoundReport rayleigh_bounds(const QuadraticForms& forms, const SpectralDecomposition& dec, int split,
                                       int samples = 1000, std::uint64_t seed = 1, double tolerance = 1e-8) {
  require(split >= 0 && split < static_cast<int>(dec.pairs.size()), ErrorCode::InsufficientRange,
          "decomposition has too few pairs for the requested split");
  FormBoundReport r;
  r.split = split;
  r.samples = samples;
  r.lower_bound = 1.0 - 1.0 / dec.pairs[split].beta;
  r.upper_bound = split > 0 ? 1.0 - 1.0 / dec.pairs[split - 1].beta : 0.0;

  const auto n = static_cast<Eigen::Index>(forms.size());
  Eigen::MatrixXd V(n, split);
  for (int i = 0; i < split; ++i) V.col(i) = dec.pairs[i].coeffs / forms.norm_lambda(dec.pairs[i].coeffs);
  const Eigen::MatrixXd AV = forms.A * V;
  const Eigen::MatrixXd D = forms.D();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto ratio = [&](const Eigen::VectorXd& u) { return u.dot(D * u) / u.dot(forms.A * u); };

  if (split > 0) {
    for (int s = 0; s < samples; ++s) {
      Eigen::VectorXd y(split);
      for (int i = 0; i < split; ++i) y(i) = normal(rng);
      r.worst_negative = std::max(r.worst_negative, ratio(V * y));
    }
    r.negative_margin = r.upper_bound - r.worst_negative;
  }
  const int extra = static_cast<int>(dec.pairs.size()) - split;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd z(n);
    if (s % 2 == 0) {
      for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    } else {
      // Low-frequency mixtures of the computed coercive pairs.
      z.setZero();
      for (int i = split; i < split + extra; ++i) z += normal(rng) * dec.pairs[i].coeffs;
      for (Eigen::Index i = 0; i < n; ++i) z(i) += 1e-3 * normal(rng);
    }
    if (split > 0) z -= V * (AV.transpose() * z);
    r.worst_complement = std::min(r.worst_complement, ratio(z));
  }
  r.complement_margin = r.worst_complement - r.lower_bound;
  for (const auto& p : dec.pairs)
    r.identity_error = std::max(r.identity_error, std::abs(forms.form_D(p.coeffs, p.coeffs) - (p.beta - 1.0)));
  r.ok = r.negative_margin >= -tolerance && r.complement_margin >= -tolerance && r.identity_error <= tolerance;
  return r;
}

/// Both form bounds at the split k0* - 1, which must straddle beta = 1.
inline FormBoundReport form_bounds_check(const QuadraticForms& forms, const SpectralDecomposition& dec, int k0_star,
                                         int samples = 1000, std::uint64_t seed = 1) {
  const int split = k0_star - 1;
  require(split >= 0 && split < static_cast<int>(dec.pairs.size()), ErrorCode::PrerequisiteFailed,
          "decomposition does not reach index k0*");
  const bool below = split == 0 || dec.pairs[split - 1].beta < 1.0;
  const bool above = dec.pairs[split].beta > 1.0;
  require(below && above, ErrorCode::PrerequisiteFailed,
          "discrete spectrum does not straddle 1 at k0* (beta_{k0*-1} = " +
              (split > 0 ? std::to_string(dec.pairs[split - 1].beta) : std::string("n/a")) +
              ", beta_{k0*} = " + std::to_string(dec.pairs[split].beta) + ")");
  return rayleigh_bounds(forms, dec, split, samples, seed);
}

}  // namespace biharm
