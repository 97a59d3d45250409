#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "qomor/linalg.hpp"

using namespace qomor;
using oracle::Mat;

TEST(RealSchur, DiagonalInputStaysDiagonal) {
  Mat a = Eigen::Vector2d(-1, -2).asDiagonal();
  const SchurForm<double> s = real_schur(a);
  EXPECT_NEAR(std::abs(s.quasi_triangular(1, 0)), 0.0, 1e-15);
  Eigen::Vector2d d = s.quasi_triangular.diagonal();
  std::sort(d.data(), d.data() + 2);
  EXPECT_NEAR(d(0), -2, 1e-14);
  EXPECT_NEAR(d(1), -1, 1e-14);
  EXPECT_LE((s.orthogonal.transpose() * s.orthogonal - Mat::Identity(2, 2)).norm(), 2e-12);
}

TEST(RealSchur, RotationGivesOneComplexBlock) {
  Mat a(2, 2);
  a << 0, 1, -1, 0;
  const SchurForm<double> s = real_schur(a);
  EXPECT_NE(s.quasi_triangular(1, 0), 0.0);
  const auto lambda = eigenvalues(s);
  EXPECT_NEAR(lambda(0).real(), 0, 1e-14);
  EXPECT_NEAR(std::abs(lambda(0).imag()), 1, 1e-14);
  EXPECT_NEAR(lambda(0).imag(), -lambda(1).imag(), 1e-14);
}

TEST(RealSchur, EigenvaluesMatchCharacteristicPolynomialRoots) {
  std::mt19937_64 gen(3);
  const Mat a = oracle::gaussian(gen, 8, 8);
  const SchurForm<double> s = real_schur(a);
  EXPECT_LE((a - s.orthogonal * s.quasi_triangular * s.orthogonal.transpose()).norm(), 1e-10 * a.norm());
  EXPECT_LE((s.orthogonal.transpose() * s.orthogonal - Mat::Identity(8, 8)).norm(), 1e-12 * 8);
  const auto lambda = eigenvalues(s);
  auto roots = oracle::char_poly_roots(a);
  for (Index i = 0; i < lambda.size(); ++i) {
    double best = 1e300;
    for (const auto& z : roots) {
      best = std::min(best, std::abs(std::complex<double>(double(z.real()), double(z.imag())) - lambda(i)));
    }
    EXPECT_LE(best, 1e-8) << "eigenvalue " << lambda(i);
  }
}

TEST(RealSchur, RejectsNonSquareAndNonFinite) {
  EXPECT_THROW(real_schur(Mat(2, 3)), ValidationError);
  Mat a = Mat::Identity(2, 2);
  a(0, 1) = std::nan("");
  EXPECT_THROW(real_schur(a), ValidationError);
}

TEST(Lyapunov, TwoStateControllabilityExample) {
  Mat a = -Mat::Identity(2, 2);
  Mat w(2, 2);
  w << 1, 2, 2, 4;
  Mat expected(2, 2);
  expected << 0.5, 1, 1, 2;
  const Mat x = solve_lyapunov(a, w);
  EXPECT_LE((x - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lyapunov, Scalar) {
  const Mat x = solve_lyapunov(Mat::Constant(1, 1, -0.5), Mat::Constant(1, 1, 1.0));
  EXPECT_NEAR(x(0, 0), 1.0, 1e-15);
}

TEST(Lyapunov, MatchesQuadratureOfIntegral) {
  const auto sys = oracle::random_system(7, 6, 2);
  const Mat w = sys.B() * sys.B().transpose();
  const Mat x = solve_lyapunov(sys.A(), w);
  const Mat q = oracle::gramian_simpson(sys.A(), w, 60.0, 6000);
  EXPECT_LE((x - q).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Lyapunov, ResidualSymmetryAndKroneckerAgreement) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sys = oracle::random_system(seed, 2 + seed % 9);
    const Mat w = sys.B() * sys.B().transpose() + Mat::Identity(sys.n(), sys.n());
    const Mat x = solve_lyapunov(sys.A(), w);
    EXPECT_LE((sys.A() * x + x * sys.A().transpose() + w).norm(), 1e-10 * std::max(1.0, w.norm()));
    EXPECT_LE((x - x.transpose()).norm(), 1e-12 * std::max(1.0, x.norm()));
    EXPECT_LE(oracle::rel(x, oracle::kron_lyapunov(sys.A(), w)), 1e-10);
  }
}

TEST(Lyapunov, RejectsUnstableAndMismatched) {
  EXPECT_THROW(solve_lyapunov(Mat::Identity(2, 2), Mat::Identity(2, 2)), NumericalError);
  EXPECT_THROW(solve_lyapunov(-Mat::Identity(2, 2), Mat::Identity(3, 3)), ValidationError);
}

TEST(Sylvester, NegativeIdentities) {
  Mat c(2, 2);
  c << 1, 2, 2, 4;
  const Mat x = solve_sylvester(-Mat::Identity(2, 2), -Mat::Identity(2, 2), c);
  EXPECT_LE((x - c / 2).norm(), 1e-15);
}

TEST(Sylvester, LyapunovIsTheSpecialCase) {
  const auto sys = oracle::random_system(12, 5, 2);
  const Mat w = sys.B() * sys.B().transpose();
  const Mat x = solve_sylvester(sys.A(), Mat(sys.A().transpose()), w);
  EXPECT_LE(oracle::rel(x, solve_lyapunov(sys.A(), w)), 1e-12);
}

TEST(Sylvester, RectangularMatchesKroneckerVectorization) {
  std::mt19937_64 gen(11);
  const Mat a = oracle::random_system(11, 4).A();
  const Mat b = oracle::random_system(111, 3).A();
  const Mat c = oracle::gaussian(gen, 4, 3);
  const Mat x = solve_sylvester(a, b, c);
  EXPECT_LE((a * x + x * b + c).norm(), 1e-10 * std::max(1.0, c.norm()));
  EXPECT_LE(oracle::rel(x, oracle::kron_sylvester(a, b, c)), 1e-10);
}

TEST(Sylvester, ComplexBlocksOnBothSides) {
  Mat a(3, 3), b(2, 2);
  a << -1, 5, 0, -5, -1, 0, 0, 0, -2;
  b << -0.5, 3, -3, -0.5;
  std::mt19937_64 gen(1);
  const Mat c = oracle::gaussian(gen, 3, 2);
  const Mat x = solve_sylvester(a, b, c);
  EXPECT_LE(oracle::rel(x, oracle::kron_sylvester(a, b, c)), 1e-12);
}

TEST(Sylvester, OverlappingSpectraRejected) {
  EXPECT_THROW(solve_sylvester(Mat::Identity(2, 2), Mat(-Mat::Identity(2, 2)), Mat::Ones(2, 2)),
               NumericalError);
  EXPECT_THROW(solve_sylvester(-Mat::Identity(2, 2), -Mat::Identity(3, 3), Mat::Ones(2, 2)), ValidationError);
}

TEST(PsdFactor, Identity) {
  const auto f = psd_factor(Mat::Identity(3, 3));
  EXPECT_EQ(f.rank, 3);
  EXPECT_LE((f.factor * f.factor.transpose() - Mat::Identity(3, 3)).norm(), 1e-14);
}

TEST(PsdFactor, RankOneGramian) {
  Mat g(2, 2);
  g << 0.5, 1, 1, 2;
  const auto f = psd_factor(g);
  ASSERT_EQ(f.rank, 1);
  EXPECT_LE((f.factor * f.factor.transpose() - g).norm(), 1e-14);
  EXPECT_NEAR(std::abs(f.factor(1, 0) / f.factor(0, 0)), 2.0, 1e-12);
}

TEST(PsdFactor, ExplicitZeroEigenvalueDropped) {
  const auto f = psd_factor(Mat(Eigen::Vector3d(2, 1, 0).asDiagonal()), 1e-12);
  EXPECT_EQ(f.rank, 2);
  EXPECT_EQ(f.factor.cols(), 2);
}

TEST(PsdFactor, RejectsIndefinite) {
  Mat g = Eigen::Vector2d(1, -0.5).asDiagonal();
  EXPECT_THROW(psd_factor(g), NumericalError);
}

TEST(PsdFactor, RoundTripOnRandomPsdMatrices) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 gen(seed);
    const Index n = 1 + seed % 20;
    const Index k = 1 + (seed * 7) % n;
    const Mat z = oracle::gaussian(gen, n, k);
    const Mat g = z * z.transpose();
    const double tol = 1e-12;
    const auto f = psd_factor(g, tol);
    EXPECT_LE((g - f.factor * f.factor.transpose()).norm(), tol * g.norm()) << "seed " << seed;
    EXPECT_LE(f.rank, k);
  }
}

TEST(Hurwitz, MarginAndRank) {
  EXPECT_TRUE(is_hurwitz(Mat(-Mat::Identity(3, 3))));
  EXPECT_FALSE(is_hurwitz(Mat(Eigen::Vector2d(-1, 0).asDiagonal())));
  EXPECT_EQ(numerical_rank(Mat(Eigen::Vector3d(1, 1e-3, 0).asDiagonal())), 2);
}
