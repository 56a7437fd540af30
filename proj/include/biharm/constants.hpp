#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "biharm/box.hpp"
#include "biharm/error.hpp"
#include "biharm/model_config.hpp"

namespace biharm {

/// Dirichlet Laplacian spectrum of a box, plus the closed-form quantities
/// derived from it.  Level indices (j) are 1-based in the public functions.
struct SpectralSetup {
  std::vector<double> mu;            // sorted, with multiplicity
  std::vector<double> mu_bar;        // distinct values, strictly increasing
  std::vector<int> multiplicities;   // dim N_j per distinct value
  std::vector<int> level_of;         // level index (0-based) of each mu[k]
  std::vector<std::vector<int>> multi_index;  // tensor index (1-based per axis) of each mu[k]
};

namespace detail {

inline double box_mode_value(const Box& box, const std::vector<int>& k) {
  double s = 0.0;
  for (std::size_t i = 0; i < box.dim(); ++i) {
    const double q = k[i] / box.length(i);
    s += q * q;
  }
  return std::numbers::pi * std::numbers::pi * s;
}

inline bool same_level(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

}  // namespace detail

/// First `count` eigenvalues pi^2 sum (k_i/L_i)^2 of -Laplace on the box,
/// sorted.  The last level is completed so multiplicities are exact.
inline SpectralSetup dirichlet_mu(const Box& omega, int count) {
  require(count >= 1, ErrorCode::InvalidConfig, "count must be >= 1");
  require(omega.well_formed(), ErrorCode::InvalidGeometry, "malformed box");
  const std::size_t N = omega.dim();

  struct Entry {
    double value;
    std::vector<int> index;
  };
  int K = 2;
  std::vector<Entry> entries;
  for (;;) {
    entries.clear();
    std::vector<int> k(N, 1);
    for (;;) {
      entries.push_back({detail::box_mode_value(omega, k), k});
      int axis = static_cast<int>(N) - 1;
      while (axis >= 0 && ++k[axis] > K) k[axis--] = 1;
      if (axis < 0) break;
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
    // Any index outside {1..K}^N has value >= pi^2 (K+1)^2 / L_max^2.
    double L_max = 0.0;
    for (std::size_t i = 0; i < N; ++i) L_max = std::max(L_max, omega.length(i));
    const double unseen = std::numbers::pi * std::numbers::pi * (K + 1.0) * (K + 1.0) / (L_max * L_max);
    if (static_cast<int>(entries.size()) > count && entries[count].value < unseen) break;
    K *= 2;
    require(std::pow(static_cast<double>(K), static_cast<double>(N)) < 5e7, ErrorCode::ResourceLimit,
            "eigenvalue enumeration too large");
  }

  std::size_t take = static_cast<std::size_t>(count);
  while (take < entries.size() && detail::same_level(entries[take].value, entries[take - 1].value)) ++take;

  SpectralSetup s;
  for (std::size_t k = 0; k < take; ++k) {
    const double v = entries[k].value;
    if (s.mu_bar.empty() || !detail::same_level(v, s.mu_bar.back())) {
      s.mu_bar.push_back(v);
      s.multiplicities.push_back(0);
    }
    ++s.multiplicities.back();
    s.mu.push_back(v);
    s.level_of.push_back(static_cast<int>(s.mu_bar.size()) - 1);
    s.multi_index.push_back(entries[k].index);
  }
  return s;
}

/// beta_j^0 for the distinct level j (1-based).
inline double beta0(int j, double a0, double b0, const SpectralSetup& setup) {
  require(indefinite(a0, b0), ErrorCode::UndefinedForm, "beta0 needs min{a0, b0} < 0");
  require(j >= 1 && j <= static_cast<int>(setup.mu_bar.size()), ErrorCode::InsufficientRange,
          "level " + std::to_string(j) + " not in computed spectrum");
  const double m = setup.mu_bar[j - 1];
  const double num = m * m + std::max(a0, 0.0) * m + std::max(b0, 0.0);
  const double den = std::max(-a0, 0.0) * m + std::max(-b0, 0.0);
  return num / den;
}

inline std::vector<double> beta0_all(double a0, double b0, const SpectralSetup& setup) {
  std::vector<double> out;
  for (int j = 1; j <= static_cast<int>(setup.mu_bar.size()); ++j) out.push_back(beta0(j, a0, b0, setup));
  return out;
}

struct K0Star {
  int k = 0;
  bool linking_admissible = false;
};

/// Smallest level with beta_k^0 > 1.
inline K0Star k0_star(double a0, double b0, const SpectralSetup& setup) {
  const auto b = beta0_all(a0, b0, setup);
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j] > 1.0) return {static_cast<int>(j) + 1, j == 0 || b[j - 1] < 1.0};
  }
  fail(ErrorCode::NotFound, "no beta_k^0 > 1 within the computed spectrum; enlarge count");
}

struct EmbeddingConstants {
  double S = 0.0;
  double B0 = 1.0;
  double sublevel_measure = 0.0;
  double A_infty = 0.0;
  double C_lambda = 0.0;
  double d0 = 0.0;
  std::string branch;
};

/// Sharp Sobolev constant pi N (N-2) (Gamma(N/2)/Gamma(N))^{2/N}.
inline double sobolev_constant(int N) {
  require(N >= 3, ErrorCode::DimensionTooLow, "Sobolev constant needs N >= 3");
  const double n = N;
  return std::numbers::pi * n * (n - 2.0) * std::exp((2.0 / n) * (std::lgamma(0.5 * n) - std::lgamma(n)));
}

/// Lebesgue measure of {b < b_infty}.
inline double sublevel_measure(const WellPotential& well) {
  if (!well.mollified()) return well.omega.volume();
  // {prod_i h_i(x_i) > 1 - b_infty/b_out}; midpoint rule on the ramp-grown box.
  const std::size_t N = well.dim();
  const int n = N == 1 ? 20000 : (N == 2 ? 600 : 80);
  const double c = 1.0 - well.b_infty / well.outside_value;
  std::vector<double> lo(N), h(N);
  for (std::size_t i = 0; i < N; ++i) {
    lo[i] = well.omega.lo[i] - well.mollifier_width;
    h[i] = (well.omega.length(i) + 2.0 * well.mollifier_width) / n;
  }
  std::vector<int> idx(N, 0);
  double count = 0.0;
  double total = 1.0;
  for (std::size_t i = 0; i < N; ++i) total *= n;
  for (double cell = 0; cell < total; ++cell) {
    double inside = 1.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double x = lo[i] + (idx[i] + 0.5) * h[i];
      const double dist = std::max({well.omega.lo[i] - x, x - well.omega.hi[i], 0.0});
      inside *= std::max(0.0, 1.0 - dist / well.mollifier_width);
    }
    if (inside > c) count += 1.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (++idx[i] < n) break;
      idx[i] = 0;
    }
  }
  double cellvol = 1.0;
  for (std::size_t i = 0; i < N; ++i) cellvol *= h[i];
  return count * cellvol;
}

inline EmbeddingConstants embedding_constants(const ProblemParams& params) {
  require(params.N >= 3, ErrorCode::DimensionTooLow, "embedding constants need N >= 3");
  const double b_inf = params.well.b_infty;
  require(params.lambda > lambda_floor(params.b0, b_inf), ErrorCode::InvalidLambda,
          "lambda must exceed max{0, -b0/b_infty}");
  EmbeddingConstants c;
  c.S = sobolev_constant(params.N);
  c.B0 = 1.0;
  c.sublevel_measure = sublevel_measure(params.well);
  c.A_infty = std::pow(c.sublevel_measure, 2.0 / params.N) / c.S;
  const double tail = 1.0 / (params.lambda * b_inf + params.b0);
  if (params.a0 > 0.0) {
    c.d0 = c.A_infty / params.a0;
    c.C_lambda = c.d0 + tail;
    c.branch = "a0>0";
  } else {
    c.d0 = 4.0 * c.A_infty * c.A_infty * std::pow(c.B0, 4);
    c.C_lambda = c.d0 + 2.0 * tail;
    c.branch = "a0<=0";
  }
  return c;
}

/// Lambda_k = ((max{-a0,0} beta_k^0)^2 B0^4 - b0) / b_infty, k 1-based.
inline double lambda_threshold(int k, double a0, double b0, double b_infty, const SpectralSetup& setup,
                               double B0 = 1.0) {
  const double b = beta0(k, a0, b0, setup);
  const double s = std::max(-a0, 0.0) * b;
  return (s * s * std::pow(B0, 4) - b0) / b_infty;
}

/// Optimal constant in ||u||_{Omega,0} <= d_* ||u||_{L^2} over the first
/// k0* levels.
inline double d_star(double a0, double b0, const SpectralSetup& setup) {
  const int k = k0_star(a0, b0, setup).k;
  double best = 0.0;
  for (int j = 0; j < k; ++j) {
    const double m = setup.mu_bar[j];
    best = std::max(best, std::sqrt(m * m + std::max(a0, 0.0) * m + std::max(b0, 0.0)));
  }
  return best;
}

/// Sorted mu_k^2 + a0 mu_k + b0 over the first `count` mu_k.
inline std::vector<double> limit_spectrum(double a0, double b0, const SpectralSetup& setup, int count) {
  require(count >= 1 && count <= static_cast<int>(setup.mu.size()), ErrorCode::InsufficientRange,
          "limit_spectrum count exceeds computed spectrum");
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    const double m = setup.mu[k];
    out.push_back(m * m + a0 * m + b0);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct ThresholdSet {
  std::vector<double> Lambda_k;
  double d_star = 0.0;
  int k0_star = 0;
  bool linking_admissible = false;
};

inline ThresholdSet thresholds(const ProblemParams& params, const SpectralSetup& setup) {
  ThresholdSet t;
  const auto k0 = k0_star(params.a0, params.b0, setup);
  t.k0_star = k0.k;
  t.linking_admissible = k0.linking_admissible;
  for (int j = 1; j <= static_cast<int>(setup.mu_bar.size()); ++j)
    t.Lambda_k.push_back(lambda_threshold(j, params.a0, params.b0, params.well.b_infty, setup));
  t.d_star = d_star(params.a0, params.b0, setup);
  return t;
}

/// Hypotheses of the existence results that can be checked from closed
/// forms alone.
struct HypothesisReport {
  bool definite = false;
  int k0_star = 0;
  bool linking_admissible = true;
  double window_lower = 0.0;     // 1 - 1/beta^0_{k0*}
  double window_value = 0.0;     // l_infty / d_*
  bool window_ok = true;         // only meaningful for p = 2
  double window_value_squared = 0.0;  // l_infty / d_*^2
  bool window_squared_ok = true;
  bool off_limit_spectrum = true;
};

inline HypothesisReport check_hypotheses(double a0, double b0, const NonlinearitySpec& spec, const Box& omega,
                                         int spectrum_count = 64) {
  HypothesisReport h;
  h.definite = !indefinite(a0, b0);
  const auto setup = dirichlet_mu(omega, spectrum_count);
  if (!h.definite) {
    const auto k0 = k0_star(a0, b0, setup);
    h.k0_star = k0.k;
    h.linking_admissible = k0.linking_admissible;
    if (spec.kind != NonlinearityKind::Power) {
      h.window_lower = 1.0 - 1.0 / beta0(k0.k, a0, b0, setup);
      h.window_value = spec.asymptotic_slope() / d_star(a0, b0, setup);
      h.window_ok = h.window_lower < h.window_value;
      const double d = d_star(a0, b0, setup);
      h.window_value_squared = spec.asymptotic_slope() / (d * d);
      h.window_squared_ok = h.window_lower < h.window_value_squared;
    }
  }
  if (spec.kind != NonlinearityKind::Power) {
    const double l = spec.asymptotic_slope();
    for (double s : limit_spectrum(a0, b0, setup, static_cast<int>(setup.mu.size())))
      if (std::abs(s - l) <= 1e-12 * std::max(1.0, std::abs(l))) h.off_limit_spectrum = false;
  }
  return h;
}

}  // namespace biharm
