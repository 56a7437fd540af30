#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "biharm/error.hpp"

namespace biharm {

/// Gauss-Legendre rule on [-1, 1] (Golub-Welsch).
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) {
    require(n >= 1, ErrorCode::InvalidConfig, "Gauss-Legendre order must be >= 1");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      const double b = k / std::sqrt(4.0 * k * k - 1.0);
      J(k, k - 1) = b;
      J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
      nodes[i] = es.eigenvalues()(i);
      const double v = es.eigenvectors()(0, i);
      weights[i] = 2.0 * v * v;
    }
    // Symmetrize to remove eigensolver round-off.
    for (int i = 0; i < n / 2; ++i) {
      const double x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
      const double w = 0.5 * (weights[i] + weights[n - 1 - i]);
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
  }
};

/// Composite Gauss-Legendre rule on [lo, hi] whose panels never straddle a
/// breakpoint.  `panels` is the panel count a uniform split of the whole
/// interval would use; each segment between breakpoints gets its share.
struct AxisRule {
  std::vector<double> x;
  std::vector<double> w;

  AxisRule() = default;

  AxisRule(double lo, double hi, std::vector<double> breakpoints, int panels, int order) {
    breakpoints.push_back(lo);
    breakpoints.push_back(hi);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    const GaussLegendre gl(order);
    const double L = hi - lo;
    for (std::size_t s = 0; s + 1 < breakpoints.size(); ++s) {
      const double a = breakpoints[s];
      const double b = breakpoints[s + 1];
      if (a < lo || b > hi || b <= a) continue;
      const int n = std::max(1, static_cast<int>(std::ceil(panels * (b - a) / L - 1e-9)));
      const double h = (b - a) / n;
      for (int p = 0; p < n; ++p) {
        const double c = a + (p + 0.5) * h;
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
          x.push_back(c + 0.5 * h * gl.nodes[q]);
          w.push_back(0.5 * h * gl.weights[q]);
        }
      }
    }
  }

  std::size_t size() const { return x.size(); }
};

/// Row-major dense tensor with a shape vector; the last axis is contiguous.
struct Tensor {
  std::vector<int> shape;
  Eigen::VectorXd data;

  Tensor() = default;
  Tensor(std::vector<int> s, Eigen::VectorXd d) : shape(std::move(s)), data(std::move(d)) {}
};

/// Mode-`axis` product: contracts `axis` of `t` with the columns of `M`
/// (result extent along `axis` is M.rows()).
inline Tensor mode_product(const Tensor& t, const Eigen::MatrixXd& M, std::size_t axis) {
  long outer = 1;
  long inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= t.shape[i];
  for (std::size_t i = axis + 1; i < t.shape.size(); ++i) inner *= t.shape[i];
  const long d = t.shape[axis];
  const long r = M.rows();
  Tensor out;
  out.shape = t.shape;
  out.shape[axis] = static_cast<int>(r);
  out.data.resize(outer * r * inner);
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (long o = 0; o < outer; ++o) {
    Eigen::Map<const RowMat> X(t.data.data() + o * d * inner, d, inner);
    Eigen::Map<RowMat> Y(out.data.data() + o * r * inner, r, inner);
    Y.noalias() = M * X;
  }
  return out;
}

}  // namespace biharm
