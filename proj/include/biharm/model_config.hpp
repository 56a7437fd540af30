#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "biharm/box.hpp"
#include "biharm/error.hpp"

namespace biharm {

/// Box-shaped steep well: b = 0 on the closed bottom Omega, b = outside_value
/// on D \ Omega.  With mollifier_width w > 0 the step is replaced by a
/// tensor-product linear ramp of width w (continuous, still zero on Omega).
struct WellPotential {
  Box omega;
  Box domain;
  double outside_value = 1.0;
  double b_infty = 1.0;
  double mollifier_width = 0.0;

  std::size_t dim() const { return domain.dim(); }
  bool mollified() const { return mollifier_width > 0.0; }
};

enum class NonlinearityKind { Power, Saturating, Zero };

inline std::string to_string(NonlinearityKind k) {
  switch (k) {
    case NonlinearityKind::Power: return "power";
    case NonlinearityKind::Saturating: return "saturating";
    case NonlinearityKind::Zero: return "zero";
  }
  return "unknown";
}

/// Model nonlinearities.
///   power:      f(t) = scale * |t|^{p-2} t
///   saturating: f(t) = scale * l_infty * t^3 / (1 + t^2)      (p = 2)
///   zero:       f = 0
/// plus an optional small-amplitude linear part l0 * t / (1 + t^2).
struct NonlinearitySpec {
  NonlinearityKind kind = NonlinearityKind::Power;
  double p = 4.0;
  double l_infty = 1.0;
  double scale = 1.0;
  double l0 = 0.0;

  static NonlinearitySpec power(double exponent) {
    NonlinearitySpec s;
    s.kind = NonlinearityKind::Power;
    s.p = exponent;
    return s;
  }
  static NonlinearitySpec saturating(double slope) {
    NonlinearitySpec s;
    s.kind = NonlinearityKind::Saturating;
    s.p = 2.0;
    s.l_infty = slope;
    return s;
  }
  static NonlinearitySpec zero() {
    NonlinearitySpec s;
    s.kind = NonlinearityKind::Zero;
    s.p = 2.0;
    s.l_infty = 0.0;
    return s;
  }

  /// Asymptotic slope lim f(t) / |t|^{p-2} t.
  double asymptotic_slope() const {
    switch (kind) {
      case NonlinearityKind::Power: return scale;
      case NonlinearityKind::Saturating: return scale * l_infty;
      case NonlinearityKind::Zero: return 0.0;
    }
    return 0.0;
  }

  /// l_* with f(t)t - 2F(t) >= l_* |t|^p; only the power family has one.
  double l_star() const {
    return kind == NonlinearityKind::Power ? scale * (1.0 - 2.0 / p) : 0.0;
  }
};

struct FValue {
  double f;
  double F;
};

namespace detail {

// x - log(1 + x) without cancellation for small x >= 0.
inline double x_minus_log1p(double x) {
  if (x < 1e-2) {
    double term = x;
    double sum = 0.0;
    for (int k = 2; k < 12; ++k) {
      term *= -x;
      sum -= term / k;
    }
    return sum;
  }
  return x - std::log1p(x);
}

}  // namespace detail

/// f(t) and its primitive F(t) = int_0^t f.
inline FValue eval_f(const NonlinearitySpec& spec, double t) {
  FValue out{0.0, 0.0};
  const double t2 = t * t;
  switch (spec.kind) {
    case NonlinearityKind::Power: {
      const double a = std::abs(t);
      const double pow_m2 = std::pow(a, spec.p - 2.0);
      out.f = spec.scale * pow_m2 * t;
      out.F = spec.scale * pow_m2 * t2 / spec.p;
      break;
    }
    case NonlinearityKind::Saturating: {
      const double c = spec.scale * spec.l_infty;
      out.f = c * t * t2 / (1.0 + t2);
      out.F = 0.5 * c * detail::x_minus_log1p(t2);
      break;
    }
    case NonlinearityKind::Zero: break;
  }
  if (spec.l0 != 0.0) {
    out.f += spec.l0 * t / (1.0 + t2);
    out.F += 0.5 * spec.l0 * std::log1p(t2);
  }
  return out;
}

/// f'(t), used by Newton refinement and Hessian products.
inline double eval_df(const NonlinearitySpec& spec, double t) {
  const double t2 = t * t;
  double d = 0.0;
  switch (spec.kind) {
    case NonlinearityKind::Power:
      d = spec.scale * (spec.p - 1.0) * std::pow(std::abs(t), spec.p - 2.0);
      break;
    case NonlinearityKind::Saturating: {
      const double q = 1.0 + t2;
      d = spec.scale * spec.l_infty * (3.0 * t2 + t2 * t2) / (q * q);
      break;
    }
    case NonlinearityKind::Zero: break;
  }
  if (spec.l0 != 0.0) {
    const double q = 1.0 + t2;
    d += spec.l0 * (1.0 - t2) / (q * q);
  }
  return d;
}

struct ProblemParams {
  int N = 1;
  double a0 = 0.0;
  double b0 = 0.0;
  double lambda = 1.0;
  WellPotential well;
  NonlinearitySpec nonlinearity;
  int modes_per_dim = 16;
  int quadrature_panels = 32;
};

/// Smallest admissible lambda is strictly above this value.
inline double lambda_floor(double b0, double b_infty) { return std::max(0.0, -b0 / b_infty); }

/// Critical Sobolev exponent 2N/(N-2); infinite for N <= 2.
inline double critical_exponent(int N) {
  return N >= 3 ? 2.0 * N / (N - 2.0) : std::numeric_limits<double>::infinity();
}

inline bool indefinite(double a0, double b0) { return std::min(a0, b0) < 0.0; }

/// b(x) for x in D.  The closed well (boundary included) is the zero set.
inline double eval_potential(const WellPotential& well, std::span<const double> x) {
  require(well.domain.contains(x), ErrorCode::OutOfDomain, "point outside truncation box");
  if (!well.mollified()) return well.omega.contains(x) ? 0.0 : well.outside_value;
  double inside = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dist = std::max({well.omega.lo[i] - x[i], x[i] - well.omega.hi[i], 0.0});
    inside *= std::max(0.0, 1.0 - dist / well.mollifier_width);
  }
  return well.outside_value * (1.0 - inside);
}

enum class ConditionStatus { Pass, Fail, Relaxed, Formal, NotClaimed };

inline std::string to_string(ConditionStatus s) {
  switch (s) {
    case ConditionStatus::Pass: return "pass";
    case ConditionStatus::Fail: return "fail";
    case ConditionStatus::Relaxed: return "relaxed";
    case ConditionStatus::Formal: return "formal";
    case ConditionStatus::NotClaimed: return "not-claimed";
  }
  return "unknown";
}

struct ConditionCheck {
  std::string name;
  ConditionStatus status;
  std::string detail;
};

struct ValidationReport {
  std::vector<ConditionCheck> checks;

  const ConditionCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline void validate_well(const WellPotential& well) {
  require(well.domain.well_formed() && well.omega.well_formed(), ErrorCode::InvalidGeometry,
          "boxes must have positive side lengths");
  require(well.omega.dim() == well.domain.dim(), ErrorCode::InvalidGeometry, "well and domain dimensions differ");
  Box grown = well.omega;
  for (std::size_t i = 0; i < grown.dim(); ++i) {
    grown.lo[i] -= well.mollifier_width;
    grown.hi[i] += well.mollifier_width;
  }
  require(well.domain.strictly_contains(grown), ErrorCode::InvalidGeometry,
          "well bottom (plus ramp) must lie strictly inside the truncation box");
  require(well.outside_value > 0.0, ErrorCode::InvalidGeometry, "outside_value must be positive");
  require(well.b_infty > 0.0 && well.b_infty <= well.outside_value, ErrorCode::InvalidGeometry,
          "b_infty must lie in (0, outside_value]");
  require(well.mollifier_width >= 0.0, ErrorCode::InvalidGeometry, "mollifier width must be non-negative");
}

inline void validate_nonlinearity(const NonlinearitySpec& spec, int N) {
  switch (spec.kind) {
    case NonlinearityKind::Power:
      require(spec.p > 2.0, ErrorCode::InvalidExponent, "power nonlinearity needs p > 2");
      require(N <= 2 || spec.p < critical_exponent(N), ErrorCode::InvalidExponent,
              "p = " + std::to_string(spec.p) + " is not below 2* = " + std::to_string(critical_exponent(N)));
      require(spec.scale > 0.0, ErrorCode::InvalidConfig, "power scale must be positive");
      break;
    case NonlinearityKind::Saturating:
      require(spec.p == 2.0, ErrorCode::InvalidExponent, "saturating nonlinearity has p = 2");
      require(spec.l_infty > 0.0 && spec.scale > 0.0, ErrorCode::InvalidConfig, "l_infty must be positive");
      break;
    case NonlinearityKind::Zero: break;
  }
}

/// Structural check of the standing assumptions.  Hard violations throw;
/// everything else is reported.
inline ValidationReport validate(const ProblemParams& params) {
  require(params.N >= 1 && static_cast<std::size_t>(params.N) == params.well.dim(), ErrorCode::InvalidGeometry,
          "N must match the box dimension");
  validate_well(params.well);
  validate_nonlinearity(params.nonlinearity, params.N);
  const double floor = lambda_floor(params.b0, params.well.b_infty);
  require(params.lambda > floor, ErrorCode::InvalidLambda,
          "lambda must exceed max{0, -b0/b_infty} = " + std::to_string(floor));
  require(params.modes_per_dim >= 2, ErrorCode::InvalidConfig, "modes_per_dim must be >= 2");
  require(params.quadrature_panels >= 1, ErrorCode::InvalidConfig, "quadrature_panels must be >= 1");

  ValidationReport r;
  const auto& nl = params.nonlinearity;
  if (params.well.mollified())
    r.checks.push_back({"B1", ConditionStatus::Pass, "continuous ramp well, b >= 0"});
  else
    r.checks.push_back({"B1", ConditionStatus::Relaxed, "relaxed: piecewise constant, b >= 0"});
  r.checks.push_back({"B2", ConditionStatus::Pass,
                      params.well.mollified() ? "{b < b_infty} is bounded" : "{b < b_infty} = Omega, finite measure"});
  r.checks.push_back({"B3", ConditionStatus::Pass, "Omega = int b^{-1}(0) is a box (corners noted)"});

  switch (nl.kind) {
    case NonlinearityKind::Power:
      r.checks.push_back({"F1", ConditionStatus::Pass, "l0 = " + std::to_string(nl.l0)});
      r.checks.push_back({"F2", params.N >= 3 ? ConditionStatus::Pass : ConditionStatus::Formal,
                          params.N >= 3 ? "2 < p < 2*" : "formal: N <= 2, any p > 2"});
      r.checks.push_back({"F3", nl.l0 == 0.0 ? ConditionStatus::Pass : ConditionStatus::Relaxed, "f(t)/|t| = |t|^{p-2}"});
      r.checks.push_back({"F4", ConditionStatus::Pass, "l_* = 1 - 2/p"});
      break;
    case NonlinearityKind::Saturating:
      r.checks.push_back({"F1", ConditionStatus::Pass, "l0 = " + std::to_string(nl.l0)});
      r.checks.push_back({"F2", ConditionStatus::Pass, "p = 2, l_infty = " + std::to_string(nl.asymptotic_slope())});
      r.checks.push_back({"F3", nl.l0 == 0.0 ? ConditionStatus::Pass : ConditionStatus::Relaxed, "t^2/(1+t^2) nondecreasing in |t|"});
      r.checks.push_back({"F4", ConditionStatus::NotClaimed, "not needed in the asymptotically linear case"});
      break;
    case NonlinearityKind::Zero:
      r.checks.push_back({"F1", ConditionStatus::Pass, "f = 0"});
      r.checks.push_back({"F2", ConditionStatus::Fail, "f = 0 has no positive asymptotic slope"});
      r.checks.push_back({"F3", ConditionStatus::Pass, "f = 0"});
      r.checks.push_back({"F4", ConditionStatus::NotClaimed, "f = 0"});
      break;
  }
  r.checks.push_back({"lambda", ConditionStatus::Pass, "lambda > " + std::to_string(floor)});
  if (params.N <= 2) r.checks.push_back({"regime", ConditionStatus::Formal, "formal regime: N <= 2"});
  return r;
}

}  // namespace biharm
