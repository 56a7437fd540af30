#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "biharm/constants.hpp"
#include "biharm/discretization.hpp"
#include "biharm/variational_solver.hpp"

using namespace biharm;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double pi2 = pi * pi;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidConfig;
}

ProblemParams well(int N, double a0, double b0, double lambda, int m) {
  ProblemParams p;
  p.N = N;
  p.a0 = a0;
  p.b0 = b0;
  p.lambda = lambda;
  p.well.omega = Box::cube(N, 0.0, 1.0);
  p.well.domain = Box::cube(N, -1.0, 2.0);
  p.well.outside_value = 1.0;
  p.well.b_infty = 1.0;
  p.nonlinearity = NonlinearitySpec::power(4.0);
  p.modes_per_dim = m;
  p.quadrature_panels = 8;
  return p;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double decay = 1.0) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng) / std::pow(1.0 + i, decay);
  return v;
}

double adaptive(const std::function<double(double)>& f, double a, double b) {
  return gauss_kronrod<double, 31>::integrate(f, a, b, 6, 1e-13);
}

}  // namespace

TEST(Basis, Examples) {
  const auto b1 = build_basis(Box::cube(1, 0.0, 1.0), 3);
  ASSERT_EQ(b1.size, 3u);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(b1.nu(k), (k + 1) * (k + 1) * pi2, 1e-12);
  const auto b2 = build_basis(Box::cube(1, -1.0, 2.0), 2);
  EXPECT_NEAR(b2.nu(0), pi2 / 9.0, 1e-14);
  EXPECT_NEAR(b2.nu(1), 4.0 * pi2 / 9.0, 1e-13);
  const auto b3 = build_basis(Box::cube(2, 0.0, 1.0), 2);
  ASSERT_EQ(b3.size, 4u);
  const std::vector<double> want{2, 5, 5, 8};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(b3.nu(k), want[k] * pi2, 1e-12);
  EXPECT_EQ(b3.multi_index(1), std::vector<int>({1, 2}));
}

TEST(Basis, Limits) {
  EXPECT_EQ(code_of([] { build_basis(Box::cube(3, 0.0, 1.0), 17); }), ErrorCode::ResourceLimit);
  EXPECT_NO_THROW(build_basis(Box::cube(3, 0.0, 1.0), 16));
  EXPECT_NO_THROW(build_basis(Box::cube(1, 0.0, 1.0), 64));
  EXPECT_EQ(code_of([] { build_basis(Box::cube(1, 0.0, 1.0), 1); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { build_basis(Box::cube(3, 0.0, 1.0), 4, 63); }), ErrorCode::ResourceLimit);
}

TEST(Forms, PotentialMatricesAgainstAdaptiveQuadrature1D) {
  const auto p = well(1, 0.0, -2.0, 10.0, 12);
  const auto basis = build_basis(p.well.domain, p.modes_per_dim);
  const auto f = assemble_forms(basis, p);
  const double w_out = 10.0 - 2.0;
  for (int k = 1; k <= 12; ++k)
    for (int l = 1; l <= 12; ++l) {
      auto prod = [&](double x) { return basis.factor(0, k, x) * basis.factor(0, l, x); };
      const double in = adaptive(prod, 0.0, 1.0);
      const double out = adaptive(prod, -1.0, 0.0) + adaptive(prod, 1.0, 2.0);
      EXPECT_NEAR(f.P_minus(k - 1, l - 1), 2.0 * in, 1e-10 * std::max(1.0, std::abs(2.0 * in)));
      EXPECT_NEAR(f.P_plus(k - 1, l - 1), w_out * out, 1e-10 * std::max(1.0, std::abs(w_out * out)));
    }
}

TEST(Forms, PotentialMatricesAgainstNestedQuadrature2D) {
  auto p = well(2, 0.0, 0.0, 5.0, 4);
  p.well.omega = Box({0.0, 0.5}, {1.0, 1.25});
  const auto basis = build_basis(p.well.domain, p.modes_per_dim);
  const auto f = assemble_forms(basis, p);
  const std::vector<double> cuts_x{-1.0, 0.0, 1.0, 2.0}, cuts_y{-1.0, 0.5, 1.25, 2.0};
  for (std::size_t r : {0u, 5u, 9u, 15u})
    for (std::size_t c : {0u, 3u, 6u, 14u}) {
      const auto kr = basis.multi_index(r), kc = basis.multi_index(c);
      double ref = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const double bx = 0.5 * (cuts_x[i] + cuts_x[i + 1]), by = 0.5 * (cuts_y[j] + cuts_y[j + 1]);
          const double weight = eval_potential(p.well, std::vector<double>{bx, by}) * p.lambda;
          if (weight == 0.0) continue;
          ref += weight * adaptive(
                              [&](double y) {
                                return adaptive(
                                    [&](double x) {
                                      return basis.factor(0, kr[0], x) * basis.factor(0, kc[0], x) *
                                             basis.factor(1, kr[1], y) * basis.factor(1, kc[1], y);
                                    },
                                    cuts_x[i], cuts_x[i + 1]);
                              },
                              cuts_y[j], cuts_y[j + 1]);
        }
      EXPECT_NEAR(f.P_plus(r, c), ref, 1e-10 * std::max(1.0, std::abs(ref))) << r << "," << c;
    }
}

TEST(Forms, DefiniteCoefficientsGiveZeroNegativePart) {
  const auto p = well(1, 1.0, 1.0, 100.0, 10);
  const auto f = assemble_forms(build_basis(p.well.domain, 10), p);
  EXPECT_EQ(f.Gm.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(f.negative_part_vanishes());
}

TEST(Forms, NoExteriorIsDiagonal) {
  auto p = well(1, -15.0, 0.0, 1.0, 10);
  p.well.domain = p.well.omega;
  const auto basis = build_basis(p.well.domain, 10);
  const auto f = assemble_forms(basis, p);
  for (int k = 0; k < 10; ++k)
    for (int l = 0; l < 10; ++l) {
      EXPECT_NEAR(f.A(k, l), k == l ? basis.nu(k) * basis.nu(k) : 0.0, 1e-12 * basis.nu(9) * basis.nu(9));
      EXPECT_NEAR(f.Gm(k, l), k == l ? 15.0 * basis.nu(k) : 0.0, 1e-12 * basis.nu(9));
    }
}

TEST(Forms, RegionWiseSignSplit) {
  const auto p = well(1, 0.0, -2.0, 50.0, 10);
  const auto f = assemble_forms(build_basis(p.well.domain, 10), p);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(10, 10);
  EXPECT_LE((f.P_minus - 2.0 * f.omega_overlap).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((f.P_plus - 48.0 * (I - f.omega_overlap)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forms, Structure) {
  std::mt19937_64 rng(3);
  for (auto p : {well(1, -15.0, 0.0, 1e3, 24), well(2, 2.0, -3.0, 20.0, 6), well(1, -4.0, -1.0, 5.0, 16)}) {
    p.well.mollifier_width = p.N == 1 ? 0.3 : 0.0;
    const auto f = assemble_forms(build_basis(p.well.domain, p.modes_per_dim), p);
    EXPECT_LE((f.A - f.A.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((f.Gm - f.Gm.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(f.A_llt.info(), Eigen::Success);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.Gm, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()));
    const Eigen::VectorXd u = random_vector(rng, f.A.rows());
    EXPECT_NEAR(f.form_D(u, u), u.dot(f.D() * u), 1e-9 * std::abs(u.dot(f.A * u)));
  }
}

TEST(Forms, InvalidLambda) {
  auto p = well(1, 0.0, -2.0, 2.0, 8);
  EXPECT_EQ(code_of([&] { assemble_forms(build_basis(p.well.domain, 8), p); }), ErrorCode::InvalidLambda);
}

TEST(Forms, MonotoneInLambda) {
  std::mt19937_64 rng(11);
  for (double moll : {0.0, 0.25}) {
    auto p = well(1, -3.0, -2.0, 2.5, 16);
    p.well.mollifier_width = moll;
    const auto basis = build_basis(p.well.domain, 16);
    std::vector<QuadraticForms> forms;
    for (double lam : {2.5, 3.0, 10.0, 1e2, 1e4}) {
      p.lambda = lam;
      forms.push_back(assemble_forms(basis, p));
    }
    for (int s = 0; s < 100; ++s) {
      const Eigen::VectorXd u = random_vector(rng, 16);
      for (std::size_t i = 0; i + 1 < forms.size(); ++i) {
        const double a0 = u.dot(forms[i].A * u), a1 = u.dot(forms[i + 1].A * u);
        const double g0 = u.dot(forms[i].Gm * u), g1 = u.dot(forms[i + 1].Gm * u);
        EXPECT_GE(a1, a0 * (1.0 - 1e-13));
        EXPECT_LE(g1, g0 * (1.0 + 1e-13) + 1e-13);
      }
    }
  }
}

TEST(Forms, GagliardoNirenbergWithUnitConstant) {
  std::mt19937_64 rng(5);
  for (auto p : {well(1, 0.0, 0.0, 1.0, 24), well(3, 0.0, 0.0, 1.0, 5)}) {
    const auto f = assemble_forms(build_basis(p.well.domain, p.modes_per_dim), p);
    for (int s = 0; s < 200; ++s) {
      const Eigen::VectorXd u = random_vector(rng, f.A.rows(), s % 2 ? 0.0 : 1.5);
      const double g = u.dot(f.G.asDiagonal() * u);
      const double k = u.dot(f.K.asDiagonal() * u);
      EXPECT_LE(g * g, k * u.squaredNorm() * (1.0 + 1e-14));
    }
  }
}

TEST(Forms, DiscreteEmbeddingInequality) {
  std::mt19937_64 rng(9);
  for (double a0 : {-40.0, 2.0})
    for (double lam : {10.0, 100.0, 1e4}) {
      const auto p = well(3, a0, 0.0, lam, 4);
      const auto f = assemble_forms(build_basis(p.well.domain, 4), p);
      const double C = embedding_constants(p).C_lambda;
      for (int s = 0; s < 100; ++s) {
        const Eigen::VectorXd u = random_vector(rng, f.A.rows(), s % 2 ? 0.0 : 1.0);
        EXPECT_LE(u.squaredNorm(), C * u.dot(f.A * u));
      }
    }
}

TEST(EvaluateField, Examples) {
  const auto basis = build_basis(Box::cube(1, 0.0, 1.0), 6);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(6);
  e1(0) = 1.0;
  EXPECT_NEAR(evaluate_field(basis, e1, {{0.5}})[0], std::sqrt(2.0), 1e-15);
  for (double v : evaluate_field(basis, Eigen::VectorXd::Zero(6), {{0.1}, {0.7}, {1.0}})) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(code_of([&] { evaluate_field(basis, e1, {{1.5}}); }), ErrorCode::OutOfDomain);
  EXPECT_EQ(code_of([&] { evaluate_field(basis, Eigen::VectorXd::Zero(5), {{0.5}}); }), ErrorCode::InvalidConfig);
}

TEST(EvaluateField, MatchesDirectSummation) {
  std::mt19937_64 rng(21);
  const Box D({-1.0, 0.0, 0.5}, {2.0, 1.5, 1.0});
  const auto basis = build_basis(D, 5);
  const Eigen::VectorXd c = random_vector(rng, static_cast<Eigen::Index>(basis.size));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({-1.0 + 3.0 * U(rng), 1.5 * U(rng), 0.5 + 0.5 * U(rng)});
  const auto vals = evaluate_field(basis, c, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double direct = 0.0;
    for (int a = 1; a <= 5; ++a)
      for (int b = 1; b <= 5; ++b)
        for (int d = 1; d <= 5; ++d) {
          const double phi = std::sqrt(2.0 / 3.0) * std::sin(a * pi * (pts[i][0] + 1.0) / 3.0) *
                             std::sqrt(2.0 / 1.5) * std::sin(b * pi * pts[i][1] / 1.5) * std::sqrt(2.0 / 0.5) *
                             std::sin(d * pi * (pts[i][2] - 0.5) / 0.5);
          direct += c((a - 1) * 25 + (b - 1) * 5 + (d - 1)) * phi;
        }
    EXPECT_NEAR(vals[i], direct, 1e-12 * std::max(1.0, std::abs(direct)));
  }
}

TEST(Sampler, QuarticEnergyOfFirstMode) {
  auto p = well(1, 0.0, 0.0, 1.0, 8);
  p.well.domain = p.well.omega;
  const auto f = assemble_forms(build_basis(p.well.domain, 8), p);
  const EnergyFunctional E(f, NonlinearitySpec::power(4.0));
  for (double t : {0.1, 1.0, 3.0, 12.0}) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
    u(0) = t;
    const double exact = 0.5 * pi2 * pi2 * t * t - 0.375 * t * t * t * t;
    EXPECT_NEAR(E.energy(u), exact, 1e-12 * std::max(1.0, std::abs(exact)));
  }
}

TEST(Sampler, RoundTripAndGram) {
  std::mt19937_64 rng(2);
  const auto p = well(2, 0.0, 0.0, 1.0, 6);
  const auto f = assemble_forms(build_basis(p.well.domain, 6), p);
  const Eigen::VectorXd u = random_vector(rng, 36);
  EXPECT_LE((f.sampler.analyze(f.sampler.synthesize(u)) - u).norm(), 1e-12 * u.norm());
  Tensor one = f.sampler.synthesize(u);
  one.data.setOnes();
  EXPECT_LE((f.sampler.weighted_gram(one) - Eigen::MatrixXd::Identity(36, 36)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(f.sampler.integrate(one), 9.0, 1e-12);
}

TEST(DumpForms, CsvRoundTrip) {
  const auto p = well(1, -15.0, -1.0, 10.0, 6);
  const auto f = assemble_forms(build_basis(p.well.domain, 6), p);
  const auto dir = std::filesystem::temp_directory_path() / ("biharm_dump_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const auto files = dump_forms(f, dir.string());
  ASSERT_EQ(files.size(), 6u);
  std::ifstream in(dir / "forms_A.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "row,col,value");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(6, 6);
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string r, c, v;
    std::getline(ss, r, ',');
    std::getline(ss, c, ',');
    std::getline(ss, v);
    A(std::stoi(r), std::stoi(c)) = std::stod(v);
    ++rows;
  }
  EXPECT_EQ(A, f.A);
  EXPECT_EQ(rows, (f.A.array() != 0.0).count());
  std::ifstream k(dir / "forms_K.csv");
  int klines = 0;
  while (std::getline(k, line)) ++klines;
  EXPECT_EQ(klines, 7);
  std::filesystem::remove_all(dir);
}
