#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biharm/constants.hpp"
#include "biharm/discretization.hpp"
#include "biharm/error.hpp"
#include "biharm/model_config.hpp"
#include "biharm/spectral_decomposition.hpp"

namespace biharm {

/// Energy E(u) = 1/2 D(u,u) - int F(u) with its Riesz gradient w.r.t. <.,.>_lambda.
struct EnergyState {
  Eigen::VectorXd coeffs;
  double energy = 0.0;
  Eigen::VectorXd residual;  // dual gradient (A - Gm) u - int f(u) phi
  Eigen::VectorXd grad;      // A^{-1} residual
  double grad_norm = 0.0;    // ||grad||_lambda
};

/// Functional view over assembled forms.  Holds a pointer to `forms`, which
/// must outlive it.
class EnergyFunctional {
 public:
  EnergyFunctional(const QuadraticForms& forms, const NonlinearitySpec& spec)
      : forms_(&forms), spec_(spec), D_(forms.D()) {}
  EnergyFunctional(QuadraticForms&&, const NonlinearitySpec&) = delete;

  const QuadraticForms& forms() const { return *forms_; }
  const NonlinearitySpec& spec() const { return spec_; }
  const Eigen::MatrixXd& D() const { return D_; }

  /// Samples of u at the quadrature nodes.
  Tensor sample(const Eigen::VectorXd& u) const {
    Tensor t = forms_->sampler.synthesize(u);
    for (Eigen::Index q = 0; q < t.data.size(); ++q) {
      const double v = t.data(q);
      if (!std::isfinite(v) || std::abs(v) > 1e100)
        fail(ErrorCode::QuadratureOverflow, "field synthesis left the floating-point range");
    }
    return t;
  }

  double nonlinear_integral(const Eigen::VectorXd& u) const {
    Tensor t = sample(u);
    for (Eigen::Index q = 0; q < t.data.size(); ++q) t.data(q) = eval_f(spec_, t.data(q)).F;
    return forms_->sampler.integrate(t);
  }

  /// int f(u) phi_k for every basis function.
  Eigen::VectorXd nonlinear_load(const Eigen::VectorXd& u) const {
    Tensor t = sample(u);
    for (Eigen::Index q = 0; q < t.data.size(); ++q) t.data(q) = eval_f(spec_, t.data(q)).f;
    return forms_->sampler.analyze(t);
  }

  double energy(const Eigen::VectorXd& u) const {
    Tensor t = sample(u);
    for (Eigen::Index q = 0; q < t.data.size(); ++q) t.data(q) = eval_f(spec_, t.data(q)).F;
    return 0.5 * u.dot(D_ * u) - forms_->sampler.integrate(t);
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& u) const { return D_ * u - nonlinear_load(u); }

  EnergyState evaluate(const Eigen::VectorXd& u) const {
    EnergyState s;
    s.coeffs = u;
    Tensor t = sample(u);
    Tensor fv = t;
    for (Eigen::Index q = 0; q < t.data.size(); ++q) {
      const auto v = eval_f(spec_, t.data(q));
      t.data(q) = v.F;
      fv.data(q) = v.f;
    }
    const Eigen::VectorXd Du = D_ * u;
    s.energy = 0.5 * u.dot(Du) - forms_->sampler.integrate(t);
    s.residual = Du - forms_->sampler.analyze(fv);
    s.grad = forms_->riesz(s.residual);
    s.grad_norm = std::sqrt(std::max(0.0, s.grad.dot(s.residual)));
    return s;
  }

  /// Second variation D - int f'(u) phi_k phi_l as a dense matrix.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& u) const {
    Tensor t = sample(u);
    for (Eigen::Index q = 0; q < t.data.size(); ++q) t.data(q) = eval_df(spec_, t.data(q));
    return D_ - forms_->sampler.weighted_gram(t);
  }

  /// Second variation applied to the columns of B.
  Eigen::MatrixXd hessian_times(const Eigen::VectorXd& u, const Eigen::MatrixXd& B) const {
    Tensor t = sample(u);
    for (Eigen::Index q = 0; q < t.data.size(); ++q) t.data(q) = eval_df(spec_, t.data(q));
    Eigen::MatrixXd out = D_ * B;
    for (Eigen::Index c = 0; c < B.cols(); ++c) {
      Tensor b = forms_->sampler.synthesize(B.col(c));
      b.data.array() *= t.data.array();
      out.col(c) -= forms_->sampler.analyze(b);
    }
    return out;
  }

 private:
  const QuadraticForms* forms_;
  NonlinearitySpec spec_;
  Eigen::MatrixXd D_;
};

inline EnergyState energy_and_gradient(const QuadraticForms& forms, const NonlinearitySpec& spec,
                                       const Eigen::VectorXd& u) {
  return EnergyFunctional(forms, spec).evaluate(u);
}

/// max_k |<u,phi_k>_lambda - G(u,phi_k) - int f(u) phi_k| / ||phi_k||_lambda,
/// divided by ||u||_lambda.
inline double euler_lagrange_residual(const QuadraticForms& forms, const NonlinearitySpec& spec,
                                      const Eigen::VectorXd& u) {
  const Eigen::VectorXd r = EnergyFunctional(forms, spec).residual(u);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < r.size(); ++k) worst = std::max(worst, std::abs(r(k)) / std::sqrt(forms.A(k, k)));
  const double norm = forms.norm_lambda(u);
  return norm > 0.0 ? worst / norm : worst;
}

struct LinkingGeometry {
  double rho = 0.0;
  double kappa = 0.0;
  double R = 0.0;
  double boundary_sup = 0.0;
  Eigen::VectorXd endpoint;         // ||.||_lambda-unit direction e_{k0*}(lambda) (or ground mode)
  Eigen::MatrixXd negative_basis;   // ||.||_lambda-orthonormal columns spanning the negative block
  int sphere_samples = 0;
  int boundary_samples = 0;
  bool mountain_pass = true;        // negative block empty

  int negative_dim() const { return static_cast<int>(negative_basis.cols()); }
};

struct GeometryOptions {
  int sphere_samples = 200;
  int boundary_samples = 1000;
  std::uint64_t seed = 1;
  int max_doublings = 60;
};

namespace detail {

inline Eigen::VectorXd project_complement(const QuadraticForms& forms, const Eigen::MatrixXd& V, Eigen::VectorXd z) {
  if (V.cols() > 0) z -= V * (V.transpose() * (forms.A * z));
  return z;
}

inline Eigen::VectorXd unit_lambda(const QuadraticForms& forms, const Eigen::VectorXd& z) {
  return z / forms.norm_lambda(z);
}

}  // namespace detail

/// Locates rho, kappa and R of the linking (or mountain-pass) geometry by
/// sampling.  `dec` may be null when the form is definite.
inline LinkingGeometry find_linking_geometry(const QuadraticForms& forms, const NonlinearitySpec& spec,
                                             const SpectralDecomposition* dec, const GeometryOptions& opt = {}) {
  const EnergyFunctional E(forms, spec);
  const auto n = static_cast<Eigen::Index>(forms.size());
  LinkingGeometry g;
  std::vector<Eigen::VectorXd> low_modes;

  if (dec != nullptr) {
    const int j = static_cast<int>(dec->negative_dim());
    require(j < static_cast<int>(dec->pairs.size()), ErrorCode::InsufficientRange,
            "decomposition must contain the first coercive pair");
    g.negative_basis.resize(n, j);
    for (int i = 0; i < j; ++i) g.negative_basis.col(i) = detail::unit_lambda(forms, dec->pairs[i].coeffs);
    g.endpoint = detail::unit_lambda(forms, dec->pairs[j].coeffs);
    for (std::size_t i = j; i < dec->pairs.size(); ++i) low_modes.push_back(dec->pairs[i].coeffs);
  } else {
    // Ground mode of A w.r.t. the L^2 mass (M = I).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(forms.A);
    g.negative_basis.resize(n, 0);
    Eigen::VectorXd e = es.eigenvectors().col(0);
    detail::fix_sign(e);
    g.endpoint = detail::unit_lambda(forms, e);
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(n, 8); ++i) low_modes.push_back(es.eigenvectors().col(i));
  }
  g.mountain_pass = g.negative_dim() == 0;
  const Eigen::MatrixXd& V = g.negative_basis;

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // Directions on the unit sphere of the complement.
  std::vector<Eigen::VectorXd> dirs;
  dirs.push_back(g.endpoint);
  for (std::size_t i = 1; i < std::min<std::size_t>(low_modes.size(), 6); ++i)
    dirs.push_back(detail::unit_lambda(forms, detail::project_complement(forms, V, low_modes[i])));
  while (static_cast<int>(dirs.size()) < opt.sphere_samples) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    if (dirs.size() % 2 == 0) {
      for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    } else {
      for (const auto& m : low_modes) z += normal(rng) * m / forms.norm_lambda(m);
    }
    z = detail::project_complement(forms, V, z);
    if (forms.norm_lambda(z) > 0.0) dirs.push_back(detail::unit_lambda(forms, z));
  }
  g.sphere_samples = static_cast<int>(dirs.size());

  auto sphere_inf = [&](double rho) {
    double inf = std::numeric_limits<double>::infinity();
    for (const auto& d : dirs) inf = std::min(inf, E.energy(rho * d));
    return inf;
  };

  // rho on a geometric grid; stop once the sampled infimum turns negative.
  double best_rho = 0.0, best_kappa = -std::numeric_limits<double>::infinity();
  for (int i = -60; i <= 100; ++i) {
    const double rho = std::pow(2.0, 0.5 * i);
    const double k = sphere_inf(rho);
    if (k > best_kappa) {
      best_kappa = k;
      best_rho = rho;
    }
    if (best_kappa > 0.0 && k <= 0.0) break;
  }
  require(best_kappa > 0.0, ErrorCode::GeometryNotFound, "no radius with positive sampled sphere infimum");
  g.rho = best_rho;
  g.kappa = best_kappa;

  // Boundary of Q_R: {v + t e : ||.|| = R, t >= 0} together with the ball of the negative block.
  struct BoundaryDir {
    Eigen::VectorXd dir;
    double radius_fraction;
  };
  std::vector<BoundaryDir> boundary;
  boundary.push_back({g.endpoint, 1.0});
  const int j = g.negative_dim();
  if (j > 0) {
    while (static_cast<int>(boundary.size()) < opt.boundary_samples) {
      Eigen::VectorXd y(j);
      for (int i = 0; i < j; ++i) y(i) = normal(rng);
      if (boundary.size() % 2 == 0) {
        const double t = std::abs(normal(rng));
        Eigen::VectorXd u = V * y + t * g.endpoint;
        boundary.push_back({u / std::sqrt(y.squaredNorm() + t * t), 1.0});
      } else {
        boundary.push_back({V * y / y.norm(), uniform(rng)});
      }
    }
  }
  g.boundary_samples = static_cast<int>(boundary.size()) + 1;  // plus the origin

  double R = 2.0 * g.rho;
  for (int it = 0; it <= opt.max_doublings; ++it, R *= 2.0) {
    double sup = 0.0;  // E(0) = 0
    for (const auto& b : boundary) sup = std::max(sup, E.energy(R * b.radius_fraction * b.dir));
    if (sup <= 0.0) {
      g.R = R;
      g.boundary_sup = sup;
      return g;
    }
  }
  fail(ErrorCode::GeometryNotFound, "sampled sup of E on the boundary of Q_R stays positive up to R = " +
                                        std::to_string(R / 2.0));
}

struct TraceEntry {
  int iteration = 0;
  double energy = 0.0;
  double norm = 0.0;       // ||u||_lambda
  double grad_norm = 0.0;  // ||E'(u)||
  double cerami = 0.0;     // (1 + ||u||) ||E'(u)||
};

struct CriticalPoint {
  Eigen::VectorXd coeffs;
  double energy = 0.0;
  double grad_norm = 0.0;
  double norm = 0.0;
  int iterations = 0;
  int newton_iterations = 0;
  std::string method;
  std::vector<TraceEntry> cerami_trace;

  double trace_norm_bound() const {
    double c = 0.0;
    for (const auto& t : cerami_trace) c = std::max(c, t.norm);
    return c;
  }
};

/// Solver failure that still carries the iterate for diagnosis.
class SolverError : public Error {
 public:
  SolverError(ErrorCode code, const std::string& what, CriticalPoint partial)
      : Error(code, what), partial_(std::move(partial)) {}
  const CriticalPoint& partial() const { return partial_; }

 private:
  CriticalPoint partial_;
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 50000;
  int path_nodes = 41;
  double armijo = 1e-4;
  bool newton_polish = true;
  double polish_threshold = 1e-3;  // relative to max(1, ||u||_lambda)
  std::optional<Eigen::VectorXd> warm_start;
};

namespace detail {

inline TraceEntry trace_entry(int it, const EnergyState& s, const QuadraticForms& forms) {
  TraceEntry t;
  t.iteration = it;
  t.energy = s.energy;
  t.norm = forms.norm_lambda(s.coeffs);
  t.grad_norm = s.grad_norm;
  t.cerami = (1.0 + t.norm) * s.grad_norm;
  return t;
}

/// Damped Newton on E'(u) = 0 with ||E'|| as merit.  Appends to `trace`.
inline std::optional<EnergyState> newton_refine(const EnergyFunctional& E, const Eigen::VectorXd& u0, double tol,
                                                std::vector<TraceEntry>& trace, int& iterations, int start_iter,
                                                int max_iter = 60) {
  EnergyState s = E.evaluate(u0);
  for (int it = 0; it < max_iter; ++it) {
    if (s.grad_norm <= tol) return s;
    const Eigen::MatrixXd H = E.hessian(s.coeffs);
    const Eigen::VectorXd step = -H.partialPivLu().solve(s.residual);
    if (!step.allFinite()) return std::nullopt;
    double alpha = 1.0;
    bool accepted = false;
    while (alpha > 1e-6) {
      EnergyState trial = E.evaluate(s.coeffs + alpha * step);
      if (trial.grad_norm < s.grad_norm) {
        s = std::move(trial);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++iterations;
    trace.push_back(trace_entry(start_iter + it + 1, s, E.forms()));
    if (!accepted) return s.grad_norm <= tol ? std::optional<EnergyState>(s) : std::nullopt;
  }
  return s.grad_norm <= tol ? std::optional<EnergyState>(s) : std::nullopt;
}

inline CriticalPoint make_point(const EnergyState& s, const QuadraticForms& forms, int iterations,
                                std::vector<TraceEntry> trace, std::string method) {
  CriticalPoint c;
  c.coeffs = s.coeffs;
  c.energy = s.energy;
  c.grad_norm = s.grad_norm;
  c.norm = forms.norm_lambda(s.coeffs);
  c.iterations = iterations;
  c.cerami_trace = std::move(trace);
  c.method = std::move(method);
  return c;
}

/// Tries Newton from `s` when its gradient is small enough; returns the
/// polished point if it converged near the same energy level.
inline std::optional<EnergyState> try_polish(const EnergyFunctional& E, const EnergyState& s, const SolveOptions& opt,
                                             double& threshold, std::vector<TraceEntry>& trace, int& newton_its,
                                             int iter) {
  if (!opt.newton_polish) return std::nullopt;
  const double scale = std::max(1.0, E.forms().norm_lambda(s.coeffs));
  if (s.grad_norm > threshold * scale) return std::nullopt;
  std::vector<TraceEntry> local;
  int its = 0;
  auto refined = newton_refine(E, s.coeffs, opt.tol, local, its, iter);
  if (refined) {
    const double drift = std::abs(refined->energy - s.energy);
    if (drift <= 1e-2 * std::max(1.0, std::abs(s.energy))) {
      trace.insert(trace.end(), local.begin(), local.end());
      newton_its += its;
      return refined;
    }
  }
  threshold *= 0.1;
  return std::nullopt;
}

inline void degenerate_check(const CriticalPoint& c, const LinkingGeometry& g) {
  if (c.energy < 0.5 * g.kappa)
    throw SolverError(ErrorCode::DegenerateToZero,
                      "critical level " + std::to_string(c.energy) + " below kappa/2 = " + std::to_string(0.5 * g.kappa), c);
  if (c.norm < 0.5 * g.rho)
    throw SolverError(ErrorCode::DegenerateToZero,
                      "critical point norm " + std::to_string(c.norm) + " below rho/2 = " + std::to_string(0.5 * g.rho), c);
}

inline bool vanishes(const NonlinearitySpec& spec) {
  return (spec.kind == NonlinearityKind::Zero || spec.scale == 0.0) && spec.l0 == 0.0;
}

}  // namespace detail

/// Path-based minimax descent: a polygonal path from 0 to an endpoint with
/// E <= 0; the path maximizer is refined along its segments and moved by an
/// Armijo steepest-descent step (Riesz gradient) until the gradient vanishes.
inline CriticalPoint mountain_pass_solve(const QuadraticForms& forms, const NonlinearitySpec& spec,
                                         const LinkingGeometry& geometry, const SolveOptions& opt = {}) {
  const EnergyFunctional E(forms, spec);
  require(opt.path_nodes >= 3, ErrorCode::InvalidConfig, "path needs at least 3 nodes");

  Eigen::VectorXd end = geometry.R * geometry.endpoint;
  if (opt.warm_start && forms.norm_lambda(*opt.warm_start) > 0.0) {
    const Eigen::VectorXd dir = detail::unit_lambda(forms, *opt.warm_start);
    double r = forms.norm_lambda(*opt.warm_start);
    for (int i = 0; i < 40; ++i, r *= 2.0)
      if (E.energy(r * dir) <= 0.0) {
        end = r * dir;
        break;
      }
  }
  require(E.energy(end) <= 0.0, ErrorCode::GeometryNotFound, "path endpoint has positive energy");

  const int n = opt.path_nodes;
  std::vector<Eigen::VectorXd> path(n);
  std::vector<double> energy(n);
  for (int i = 0; i < n; ++i) {
    path[i] = (static_cast<double>(i) / (n - 1)) * end;
    energy[i] = E.energy(path[i]);
  }
  auto argmax = [&]() {
    int best = 1;
    for (int i = 2; i < n - 1; ++i)
      if (energy[i] > energy[best]) best = i;
    return best;
  };

  std::vector<TraceEntry> trace;
  int newton_its = 0;
  double threshold = opt.polish_threshold;
  if (!std::isfinite(opt.tol)) {
    const int i = argmax();
    auto s = E.evaluate(path[i]);
    trace.push_back(detail::trace_entry(0, s, forms));
    auto c = detail::make_point(s, forms, 0, trace, "mountain-pass");
    return c;
  }

  // Golden-section maximization of E on the segment a -> b.
  auto segment_max = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b, Eigen::VectorXd& best, double& bestE) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = 1.0;
    double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
    double f1 = E.energy(a + x1 * (b - a)), f2 = E.energy(a + x2 * (b - a));
    for (int it = 0; it < 40; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + r * (hi - lo);
        f2 = E.energy(a + x2 * (b - a));
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - r * (hi - lo);
        f1 = E.energy(a + x1 * (b - a));
      }
    }
    const double x = f1 > f2 ? x1 : x2;
    const double fx = std::max(f1, f2);
    if (fx > bestE) {
      bestE = fx;
      best = a + x * (b - a);
    }
  };

  double step = 1.0;
  for (int it = 0; it < opt.max_iter; ++it) {
    const int i = argmax();
    // Relocate the maximizing node to the true maximum along its two segments.
    Eigen::VectorXd top = path[i];
    double topE = energy[i];
    segment_max(path[i - 1], path[i], top, topE);
    segment_max(path[i], path[i + 1], top, topE);
    path[i] = top;
    energy[i] = topE;

    EnergyState s = E.evaluate(path[i]);
    trace.push_back(detail::trace_entry(it, s, forms));
    if (s.grad_norm <= opt.tol) {
      auto c = detail::make_point(s, forms, it, trace, "mountain-pass");
      detail::degenerate_check(c, geometry);
      return c;
    }
    if (auto polished = detail::try_polish(E, s, opt, threshold, trace, newton_its, it)) {
      auto c = detail::make_point(*polished, forms, it, trace, "mountain-pass");
      c.newton_iterations = newton_its;
      detail::degenerate_check(c, geometry);
      return c;
    }

    step = std::min(1.0, 2.0 * step);
    const double slope = s.grad_norm * s.grad_norm;
    Eigen::VectorXd trial;
    double trialE = 0.0;
    for (;;) {
      trial = s.coeffs - step * s.grad;
      trialE = E.energy(trial);
      if (trialE <= s.energy - opt.armijo * step * slope) break;
      step *= 0.5;
      if (step < 1e-16) throw SolverError(ErrorCode::NoConvergence, "line search stalled", detail::make_point(s, forms, it, trace, "mountain-pass"));
    }
    path[i] = trial;
    energy[i] = trialE;

    // Keep node spacing even when the maximizer wanders far from its neighbours.
    double mean = 0.0;
    for (int k = 0; k + 1 < n; ++k) mean += forms.norm_lambda(path[k + 1] - path[k]);
    mean /= (n - 1);
    const double local = std::max(forms.norm_lambda(path[i] - path[i - 1]), forms.norm_lambda(path[i + 1] - path[i]));
    if (local > 4.0 * mean) {
      std::vector<double> arc(n, 0.0);
      for (int k = 1; k < n; ++k) arc[k] = arc[k - 1] + forms.norm_lambda(path[k] - path[k - 1]);
      std::vector<Eigen::VectorXd> fresh(n);
      int seg = 0;
      for (int k = 0; k < n; ++k) {
        const double target = arc[n - 1] * k / (n - 1);
        while (seg < n - 2 && arc[seg + 1] < target) ++seg;
        const double len = arc[seg + 1] - arc[seg];
        const double w = len > 0.0 ? (target - arc[seg]) / len : 0.0;
        fresh[k] = (1.0 - w) * path[seg] + w * path[seg + 1];
      }
      path = std::move(fresh);
      for (int k = 0; k < n; ++k) energy[k] = E.energy(path[k]);
    }
  }
  const int i = argmax();
  auto s = E.evaluate(path[i]);
  throw SolverError(ErrorCode::NoConvergence, "iteration cap reached",
                    detail::make_point(s, forms, opt.max_iter, trace, "mountain-pass"));
}

namespace detail {

struct InnerResult {
  Eigen::VectorXd y;
  double t = 0.0;
  Eigen::VectorXd u;
  double energy = 0.0;
};

/// max over (y, t >= 0) of E(V y + t w): damped Newton ascent, falling back
/// to gradient ascent when the reduced Hessian is not negative definite.
inline InnerResult inner_max(const EnergyFunctional& E, const Eigen::MatrixXd& V, const Eigen::VectorXd& w,
                             Eigen::VectorXd y, double t, double radius_cap, double armijo) {
  const auto j = V.cols();
  Eigen::MatrixXd B(V.rows(), j + 1);
  B.leftCols(j) = V;
  B.col(j) = w;
  Eigen::VectorXd x(j + 1);
  x.head(j) = y;
  x(j) = t;
  Eigen::VectorXd u = B * x;
  double val = E.energy(u);
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd gx = B.transpose() * E.residual(u);
    const double scale = std::max(1.0, x.norm());
    if (gx.norm() <= 1e-13 * scale * std::max(1.0, std::sqrt(std::abs(val)))) break;
    const Eigen::MatrixXd Hx = B.transpose() * E.hessian_times(u, B);
    Eigen::LLT<Eigen::MatrixXd> neg(-0.5 * (Hx + Hx.transpose()));
    Eigen::VectorXd dir = neg.info() == Eigen::Success ? Eigen::VectorXd(neg.solve(gx)) : gx;
    const double slope = gx.dot(dir);
    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-14) {
      Eigen::VectorXd xt = x + alpha * dir;
      xt(j) = std::max(xt(j), 0.0);
      const Eigen::VectorXd ut = B * xt;
      const double vt = E.energy(ut);
      if (vt >= val + armijo * alpha * slope && vt > val) {
        x = xt;
        u = ut;
        val = vt;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (x.norm() > radius_cap) fail(ErrorCode::InnerMaxDiverged, "inner maximization left the radius cap");
    if (!moved) break;
  }
  return {x.head(j), x(j), u, val};
}

}  // namespace detail

/// Linking minimax over Q = {v + t e_{k0*}}: the reduced functional
/// w -> max_{v, t >= 0} E(v + t w) is minimized over unit directions w in the
/// ||.||_lambda-orthogonal complement of the negative block.
inline CriticalPoint linking_solve(const QuadraticForms& forms, const NonlinearitySpec& spec,
                                   const LinkingGeometry& geometry, const SolveOptions& opt = {}) {
  if (geometry.negative_dim() == 0) return mountain_pass_solve(forms, spec, geometry, opt);

  const EnergyFunctional E(forms, spec);
  const Eigen::MatrixXd& V = geometry.negative_basis;
  const auto j = V.cols();
  const double radius_cap = 1e8 * (1.0 + geometry.R);

  Eigen::VectorXd w = geometry.endpoint;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(j);
  double t = 0.5 * (geometry.rho + geometry.R);
  if (opt.warm_start) {
    const Eigen::VectorXd pw = detail::project_complement(forms, V, *opt.warm_start);
    if (forms.norm_lambda(pw) > 0.0) {
      w = detail::unit_lambda(forms, pw);
      t = forms.norm_lambda(pw);
      y = V.transpose() * (forms.A * *opt.warm_start);
    }
  }

  std::vector<TraceEntry> trace;
  int newton_its = 0;
  double threshold = opt.polish_threshold;
  auto inner = detail::inner_max(E, V, w, y, t, radius_cap, opt.armijo);
  double step = 1.0;
  for (int it = 0; it < opt.max_iter; ++it) {
    EnergyState s = E.evaluate(inner.u);
    trace.push_back(detail::trace_entry(it, s, forms));
    if (inner.t <= 0.0)
      throw SolverError(ErrorCode::DegenerateToZero, "inner maximizer collapsed onto the negative block",
                        detail::make_point(s, forms, it, trace, "linking"));
    if (s.grad_norm <= opt.tol || !std::isfinite(opt.tol)) {
      auto c = detail::make_point(s, forms, it, trace, "linking");
      if (std::isfinite(opt.tol)) detail::degenerate_check(c, geometry);
      return c;
    }
    if (auto polished = detail::try_polish(E, s, opt, threshold, trace, newton_its, it)) {
      auto c = detail::make_point(*polished, forms, it, trace, "linking");
      c.newton_iterations = newton_its;
      detail::degenerate_check(c, geometry);
      return c;
    }

    // Reduced gradient: component of grad E orthogonal to span(V, w).
    Eigen::VectorXd d = detail::project_complement(forms, V, s.grad);
    d -= forms.inner_lambda(d, w) * w;
    const double slope = forms.inner_lambda(d, d);
    step = std::min(1.0, 2.0 * step);
    for (;;) {
      const Eigen::VectorXd wt = detail::unit_lambda(forms, inner.t * w - step * d);
      auto trial = detail::inner_max(E, V, wt, inner.y, forms.norm_lambda(inner.t * w - step * d), radius_cap,
                                     opt.armijo);
      if (trial.energy <= inner.energy - opt.armijo * step * slope) {
        w = wt;
        inner = std::move(trial);
        break;
      }
      step *= 0.5;
      if (step < 1e-16)
        throw SolverError(ErrorCode::NoConvergence, "reduced line search stalled",
                          detail::make_point(s, forms, it, trace, "linking"));
    }
  }
  auto s = E.evaluate(inner.u);
  throw SolverError(ErrorCode::NoConvergence, "iteration cap reached",
                    detail::make_point(s, forms, opt.max_iter, trace, "linking"));
}

/// Chooses linking or mountain pass from the discrete spectrum and solves.
struct SolveOutcome {
  CriticalPoint point;
  LinkingGeometry geometry;
  std::optional<SpectralDecomposition> decomposition;
};

inline SolveOutcome solve_critical_point(const QuadraticForms& forms, const NonlinearitySpec& spec,
                                         const SolveOptions& opt = {}, const GeometryOptions& gopt = {},
                                         int pencil_count = 8) {
  require(!detail::vanishes(spec), ErrorCode::DegenerateToZero,
          "f vanishes identically: the quadratic energy has only the trivial critical point");
  SolveOutcome out;
  if (!forms.negative_part_vanishes()) {
    const int count = std::min<int>(pencil_count, static_cast<int>(forms.size()));
    out.decomposition = solve_pencil(forms, count);
  }
  out.geometry = find_linking_geometry(forms, spec, out.decomposition ? &*out.decomposition : nullptr, gopt);
  out.point = linking_solve(forms, spec, out.geometry, opt);
  return out;
}

}  // namespace biharm
