#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biharm/box.hpp"
#include "biharm/error.hpp"
#include "biharm/model_config.hpp"
#include "biharm/quadrature.hpp"

namespace biharm {

inline constexpr std::size_t kDefaultModeCap = 4096;
inline constexpr int kPanelOrder = 8;

/// L^2-orthonormal tensor sine basis on a box (Navier conditions on the
/// boundary).  Modes are ordered lexicographically, last axis fastest.
struct SpectralBasis {
  Box domain;
  int modes_per_dim = 0;
  std::size_t size = 0;
  Eigen::VectorXd nu;  // Laplacian eigenvalue of each mode

  int dim() const { return static_cast<int>(domain.dim()); }

  std::vector<int> multi_index(std::size_t flat) const {
    std::vector<int> k(domain.dim());
    for (int i = dim() - 1; i >= 0; --i) {
      k[i] = static_cast<int>(flat % modes_per_dim) + 1;
      flat /= modes_per_dim;
    }
    return k;
  }

  /// Value of the 1-D factor sqrt(2/L) sin(k pi (x - lo)/L) on `axis`.
  double factor(std::size_t axis, int k, double x) const {
    const double L = domain.length(axis);
    return std::sqrt(2.0 / L) * std::sin(k * std::numbers::pi * (x - domain.lo[axis]) / L);
  }
};

inline SpectralBasis build_basis(const Box& domain, int modes_per_dim, std::size_t max_modes = kDefaultModeCap) {
  require(domain.well_formed(), ErrorCode::InvalidGeometry, "malformed box");
  require(modes_per_dim >= 2, ErrorCode::InvalidConfig, "modes_per_dim must be >= 2");
  const double total = std::pow(static_cast<double>(modes_per_dim), static_cast<double>(domain.dim()));
  require(total <= static_cast<double>(max_modes), ErrorCode::ResourceLimit,
          "basis of " + std::to_string(static_cast<long long>(total)) + " modes exceeds the cap of " +
              std::to_string(max_modes));
  SpectralBasis b;
  b.domain = domain;
  b.modes_per_dim = modes_per_dim;
  b.size = static_cast<std::size_t>(total);
  b.nu.resize(static_cast<Eigen::Index>(b.size));
  for (std::size_t f = 0; f < b.size; ++f) {
    const auto k = b.multi_index(f);
    double s = 0.0;
    for (std::size_t i = 0; i < domain.dim(); ++i) {
      const double q = k[i] / domain.length(i);
      s += q * q;
    }
    b.nu(static_cast<Eigen::Index>(f)) = std::numbers::pi * std::numbers::pi * s;
  }
  return b;
}

/// Closed form of int_a^b sqrt(2/L) sin(k pi (x-d)/L) sqrt(2/L) sin(l pi (x-d)/L) dx
/// on the interval [d, d + L].
inline double sine_overlap(int k, int l, double d, double L, double a, double b) {
  const double pi = std::numbers::pi;
  const double sa = (a - d) / L;
  const double sb = (b - d) / L;
  auto sinc_int = [&](int m) {  // int_sa^sb cos(m pi s) ds
    if (m == 0) return sb - sa;
    return (std::sin(m * pi * sb) - std::sin(m * pi * sa)) / (m * pi);
  };
  return sinc_int(k - l) - sinc_int(k + l);
}

/// Closed form of int_a^b sqrt(2/L1) sin(k pi (x-d1)/L1) sqrt(2/L2) sin(l pi (x-d2)/L2) dx
/// for two different sine families.
inline double sine_cross_overlap(int k, double d1, double L1, int l, double d2, double L2, double a, double b) {
  const double pi = std::numbers::pi;
  // sin(A) sin(B) = (cos(A - B) - cos(A + B)) / 2 with A, B affine in x.
  const double ak = k * pi / L1, bk = -k * pi * d1 / L1;
  const double al = l * pi / L2, bl = -l * pi * d2 / L2;
  auto cos_int = [&](double s, double c) {  // int_a^b cos(s x + c) dx
    if (std::abs(s) < 1e-14) return (b - a) * std::cos(c);
    return (std::sin(s * b + c) - std::sin(s * a + c)) / s;
  };
  const double scale = std::sqrt(2.0 / L1) * std::sqrt(2.0 / L2);
  return 0.5 * scale * (cos_int(ak - al, bk - bl) - cos_int(ak + al, bk + bl));
}

/// Kronecker product over axes of per-axis m x m matrices (last axis fastest).
inline Eigen::MatrixXd kron_axes(const std::vector<Eigen::MatrixXd>& factors) {
  Eigen::MatrixXd out = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) {
    const auto& F = factors[i];
    Eigen::MatrixXd next(out.rows() * F.rows(), out.cols() * F.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      for (Eigen::Index c = 0; c < out.cols(); ++c)
        next.block(r * F.rows(), c * F.cols(), F.rows(), F.cols()) = out(r, c) * F;
    out = std::move(next);
  }
  return out;
}

/// Gram matrix of the basis restricted to `region` (a box inside the domain).
inline Eigen::MatrixXd region_overlap(const SpectralBasis& basis, const Box& region) {
  std::vector<Eigen::MatrixXd> factors;
  const int m = basis.modes_per_dim;
  for (std::size_t i = 0; i < basis.domain.dim(); ++i) {
    Eigen::MatrixXd S(m, m);
    for (int k = 1; k <= m; ++k)
      for (int l = 1; l <= m; ++l)
        S(k - 1, l - 1) = sine_overlap(k, l, basis.domain.lo[i], basis.domain.length(i), region.lo[i], region.hi[i]);
    factors.push_back(std::move(S));
  }
  return kron_axes(factors);
}

/// Tensor Gauss-Legendre rule on the basis domain together with the 1-D
/// basis factors sampled at its nodes.  Synthesis and analysis use sum
/// factorization.
class FieldSampler {
 public:
  FieldSampler() = default;

  FieldSampler(const SpectralBasis& basis, const std::vector<std::vector<double>>& breakpoints, int panels,
               int order = kPanelOrder)
      : modes_(basis.modes_per_dim) {
    for (std::size_t i = 0; i < basis.domain.dim(); ++i) {
      axes_.emplace_back(basis.domain.lo[i], basis.domain.hi[i], breakpoints[i], panels, order);
      const auto& ax = axes_.back();
      Eigen::MatrixXd B(static_cast<Eigen::Index>(ax.size()), modes_);
      Eigen::MatrixXd BW(static_cast<Eigen::Index>(ax.size()), modes_);
      for (std::size_t q = 0; q < ax.size(); ++q)
        for (int k = 1; k <= modes_; ++k) {
          B(q, k - 1) = basis.factor(i, k, ax.x[q]);
          BW(q, k - 1) = B(q, k - 1) * ax.w[q];
        }
      values_.push_back(std::move(B));
      weighted_t_.push_back(BW.transpose());
    }
  }

  std::size_t dim() const { return axes_.size(); }
  const AxisRule& axis(std::size_t i) const { return axes_[i]; }
  std::size_t point_count() const {
    std::size_t n = 1;
    for (const auto& a : axes_) n *= a.size();
    return n;
  }

  /// Values of sum_k c_k phi_k at every quadrature node.
  Tensor synthesize(const Eigen::VectorXd& coeffs) const {
    Tensor t(std::vector<int>(dim(), modes_), coeffs);
    for (std::size_t i = 0; i < dim(); ++i) t = mode_product(t, values_[i], i);
    return t;
  }

  /// Coefficients int g phi_k dx of a field sampled at the nodes.
  Eigen::VectorXd analyze(const Tensor& samples) const {
    Tensor t = samples;
    for (std::size_t i = 0; i < dim(); ++i) t = mode_product(t, weighted_t_[i], i);
    return t.data;
  }

  /// Dense matrix int g phi_k phi_l dx for a field g sampled at the nodes.
  Eigen::MatrixXd weighted_gram(const Tensor& g) const {
    // Contract each axis against the m^2 pair products of the 1-D factors.
    Tensor t = g;
    const int m2 = modes_ * modes_;
    for (std::size_t i = 0; i < dim(); ++i) {
      const auto& B = values_[i];
      const auto& ax = axes_[i];
      Eigen::MatrixXd P(m2, B.rows());
      for (Eigen::Index q = 0; q < B.rows(); ++q)
        for (int k = 0; k < modes_; ++k)
          for (int l = 0; l < modes_; ++l) P(k * modes_ + l, q) = ax.w[q] * B(q, k) * B(q, l);
      t = mode_product(t, P, i);
    }
    // t is indexed by (k0 l0, k1 l1, ...); unshuffle into (k0 k1 ..., l0 l1 ...).
    const std::size_t N = dim();
    long n = 1;
    for (std::size_t i = 0; i < N; ++i) n *= modes_;
    Eigen::MatrixXd out(n, n);
    std::vector<int> pair(N, 0);
    for (long flat = 0; flat < t.data.size(); ++flat) {
      long r = 0, c = 0;
      for (std::size_t i = 0; i < N; ++i) {
        r = r * modes_ + pair[i] / modes_;
        c = c * modes_ + pair[i] % modes_;
      }
      out(r, c) = t.data(flat);
      for (int i = static_cast<int>(N) - 1; i >= 0; --i) {
        if (++pair[i] < m2) break;
        pair[i] = 0;
      }
    }
    return out;
  }

  /// Sum of weights times g (plain integral of a sampled field).
  double integrate(const Tensor& g) const {
    Tensor t = g;
    for (std::size_t i = 0; i < dim(); ++i) {
      Eigen::MatrixXd w(1, static_cast<Eigen::Index>(axes_[i].size()));
      for (std::size_t q = 0; q < axes_[i].size(); ++q) w(0, q) = axes_[i].w[q];
      t = mode_product(t, w, i);
    }
    return t.data(0);
  }

  /// Coordinates of the node with flat index `flat`.
  std::vector<double> node(std::size_t flat) const {
    std::vector<double> x(dim());
    for (int i = static_cast<int>(dim()) - 1; i >= 0; --i) {
      const std::size_t n = axes_[i].size();
      x[i] = axes_[i].x[flat % n];
      flat /= n;
    }
    return x;
  }

 private:
  int modes_ = 0;
  std::vector<AxisRule> axes_;
  std::vector<Eigen::MatrixXd> values_;      // Q_i x m
  std::vector<Eigen::MatrixXd> weighted_t_;  // m x Q_i, weights folded in
};

/// Matrices of the split quadratic form in the sine basis.
///   A  = K + max{a0,0} G + P_plus    (inner product <.,.>_lambda)
///   Gm = max{-a0,0} G + P_minus      (negative part)
/// with K = diag(nu^2), G = diag(nu), M = I.
struct QuadraticForms {
  SpectralBasis basis;
  FieldSampler sampler;
  double lambda = 0.0;
  double a0 = 0.0;
  double b0 = 0.0;
  double outside_value = 0.0;  // 0 for forms assembled on the well bottom itself
  Eigen::VectorXd K;
  Eigen::VectorXd G;
  Eigen::MatrixXd P_plus;
  Eigen::MatrixXd P_minus;
  Eigen::MatrixXd A;
  Eigen::MatrixXd Gm;
  Eigen::MatrixXd omega_overlap;  // Gram matrix over Omega
  Eigen::LLT<Eigen::MatrixXd> A_llt;

  std::size_t size() const { return basis.size; }
  bool negative_part_vanishes() const { return Gm.cwiseAbs().maxCoeff() == 0.0; }

  Eigen::MatrixXd D() const { return A - Gm; }

  double norm_lambda(const Eigen::VectorXd& u) const { return std::sqrt(std::max(0.0, u.dot(A * u))); }
  double inner_lambda(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return u.dot(A * v); }
  double form_G(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return u.dot(Gm * v); }
  double form_D(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return u.dot(A * v) - u.dot(Gm * v); }

  /// Riesz representative w.r.t. <.,.>_lambda of the functional v -> r.v
  Eigen::VectorXd riesz(const Eigen::VectorXd& r) const { return A_llt.solve(r); }
};

namespace detail {

inline void finish_forms(QuadraticForms& f) {
  f.K = f.basis.nu.array().square();
  f.G = f.basis.nu;
  f.A = f.P_plus;
  f.A.diagonal() += f.K + std::max(f.a0, 0.0) * f.G;
  f.Gm = f.P_minus;
  f.Gm.diagonal() += std::max(-f.a0, 0.0) * f.G;
  // Exact symmetry for the eigen solvers.
  f.A = 0.5 * (f.A + f.A.transpose()).eval();
  f.Gm = 0.5 * (f.Gm + f.Gm.transpose()).eval();
  f.A_llt.compute(f.A);
  require(f.A_llt.info() == Eigen::Success, ErrorCode::FactorizationFailure,
          "<.,.>_lambda matrix is not positive definite");
}

inline std::vector<std::vector<double>> well_breakpoints(const WellPotential& well) {
  std::vector<std::vector<double>> bp(well.dim());
  for (std::size_t i = 0; i < well.dim(); ++i) {
    bp[i] = {well.omega.lo[i], well.omega.hi[i]};
    if (well.mollified()) {
      bp[i].push_back(well.omega.lo[i] - well.mollifier_width);
      bp[i].push_back(well.omega.hi[i] + well.mollifier_width);
    }
  }
  return bp;
}

}  // namespace detail

/// Forms of the steep-well problem on the truncation box D.
inline QuadraticForms assemble_forms(const SpectralBasis& basis, const ProblemParams& params) {
  const auto& well = params.well;
  require(params.lambda > lambda_floor(params.b0, well.b_infty), ErrorCode::InvalidLambda,
          "lambda must exceed max{0, -b0/b_infty}");
  require(basis.domain == well.domain, ErrorCode::InvalidGeometry, "basis and well use different boxes");
  QuadraticForms f;
  f.basis = basis;
  f.lambda = params.lambda;
  f.a0 = params.a0;
  f.b0 = params.b0;
  f.outside_value = well.outside_value;
  f.sampler = FieldSampler(basis, detail::well_breakpoints(well), params.quadrature_panels);
  f.omega_overlap = region_overlap(basis, well.omega);
  const auto n = static_cast<Eigen::Index>(basis.size);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  if (!well.mollified()) {
    // Region-wise constant weights: (lambda*0 + b0)^± on Omega, (lambda b_out + b0)^± outside.
    const double w_in = params.b0;
    const double w_out = params.lambda * well.outside_value + params.b0;
    const Eigen::MatrixXd outside = I - f.omega_overlap;
    f.P_plus = std::max(w_out, 0.0) * outside + std::max(w_in, 0.0) * f.omega_overlap;
    f.P_minus = std::max(-w_out, 0.0) * outside + std::max(-w_in, 0.0) * f.omega_overlap;
  } else {
    Tensor plus, minus;
    plus.shape.resize(basis.domain.dim());
    for (std::size_t i = 0; i < basis.domain.dim(); ++i) plus.shape[i] = static_cast<int>(f.sampler.axis(i).size());
    const auto count = static_cast<Eigen::Index>(f.sampler.point_count());
    plus.data.resize(count);
    minus = plus;
    for (Eigen::Index q = 0; q < count; ++q) {
      const auto x = f.sampler.node(static_cast<std::size_t>(q));
      const double v = params.lambda * eval_potential(well, x) + params.b0;
      plus.data(q) = std::max(v, 0.0);
      minus.data(q) = std::max(-v, 0.0);
    }
    f.P_plus = f.sampler.weighted_gram(plus);
    f.P_minus = f.sampler.weighted_gram(minus);
  }
  detail::finish_forms(f);
  return f;
}

/// Forms of the well-bottom problem on Omega itself (b = 0): A is the
/// H-inner product and Gm = max{-a0,0} G + max{-b0,0} M.
inline QuadraticForms assemble_limit_forms(const Box& omega, int modes_per_dim, int quadrature_panels, double a0,
                                           double b0, std::size_t max_modes = kDefaultModeCap) {
  QuadraticForms f;
  f.basis = build_basis(omega, modes_per_dim, max_modes);
  f.lambda = 0.0;
  f.a0 = a0;
  f.b0 = b0;
  f.outside_value = 0.0;
  f.sampler = FieldSampler(f.basis, std::vector<std::vector<double>>(omega.dim()), quadrature_panels);
  const auto n = static_cast<Eigen::Index>(f.basis.size);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  f.omega_overlap = I;
  f.P_plus = std::max(b0, 0.0) * I;
  f.P_minus = std::max(-b0, 0.0) * I;
  detail::finish_forms(f);
  return f;
}

/// Pointwise synthesis sum_k c_k phi_k(x).
inline std::vector<double> evaluate_field(const SpectralBasis& basis, const Eigen::VectorXd& coeffs,
                                          const std::vector<std::vector<double>>& points) {
  require(static_cast<std::size_t>(coeffs.size()) == basis.size, ErrorCode::InvalidConfig,
          "coefficient vector length does not match the basis");
  const int m = basis.modes_per_dim;
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& x : points) {
    require(basis.domain.contains(x), ErrorCode::OutOfDomain, "evaluation point outside the basis box");
    Tensor t(std::vector<int>(basis.domain.dim(), m), coeffs);
    for (std::size_t i = 0; i < basis.domain.dim(); ++i) {
      Eigen::MatrixXd row(1, m);
      for (int k = 1; k <= m; ++k) row(0, k - 1) = basis.factor(i, k, x[i]);
      t = mode_product(t, row, i);
    }
    out.push_back(t.data(0));
  }
  return out;
}

/// Writes the nonzero entries of a matrix as "row,col,value" (0-based).
inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::InvalidConfig, "cannot open " + path);
  os << "row,col,value\n";
  char buf[64];
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      if (M(r, c) == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%.17g", M(r, c));
      os << r << ',' << c << ',' << buf << '\n';
    }
}

/// --dump-forms: one CSV per matrix in `dir`.
inline std::vector<std::string> dump_forms(const QuadraticForms& f, const std::string& dir) {
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const Eigen::MatrixXd& M) {
    const std::string path = dir + "/forms_" + name + ".csv";
    write_matrix_csv(path, M);
    written.push_back(path);
  };
  put("A", f.A);
  put("Gm", f.Gm);
  put("K", f.K.asDiagonal().toDenseMatrix());
  put("G", f.G.asDiagonal().toDenseMatrix());
  put("P_plus", f.P_plus);
  put("P_minus", f.P_minus);
  return written;
}

}  // namespace biharm
