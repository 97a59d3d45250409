#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qomor/gramians.hpp"
#include "qomor/metrics.hpp"

using namespace qomor;
using oracle::Mat;
using oracle::Vec;

namespace {

Mat diag21() { return Eigen::Vector2d(2, 1).asDiagonal(); }

}  // namespace

TEST(Controllability, TwoStateExample) {
  Mat expected(2, 2);
  expected << 0.5, 1, 1, 2;
  const auto p = controllability_gramian(oracle::two_state_example());
  EXPECT_LE((p.gramian - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(p.factor.rank, 1);
}

TEST(Controllability, BalancedExample) {
  const auto p = controllability_gramian(oracle::balanced_example());
  EXPECT_LE((p.gramian - diag21()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Controllability, MatchesQuadrature) {
  const auto sys = oracle::random_system(2, 8);
  const auto p = controllability_gramian(sys);
  const Mat ref = oracle::gramian_simpson(sys.A(), sys.B() * sys.B().transpose(), 60.0, 6000);
  EXPECT_LE((p.gramian - ref).cwiseAbs().maxCoeff(), 1e-7);
  const double w = (sys.B() * sys.B().transpose()).norm();
  EXPECT_LE((sys.A() * p.gramian + p.gramian * sys.A().transpose() + sys.B() * sys.B().transpose()).norm(),
            1e-10 * std::max(1.0, w));
}

TEST(Controllability, RejectsUnstable) {
  const auto sys = make_ldqo(Mat(Mat::Identity(2, 2)), Mat(Mat::Ones(2, 1)), Mat(Mat::Identity(2, 2)));
  EXPECT_THROW(controllability_gramian(sys), NumericalError);
}

TEST(QoObservability, BalancedExample) {
  const auto sys = oracle::balanced_example();
  const auto p = controllability_gramian(sys);
  const auto q = qo_observability_gramian(sys, p.gramian);
  EXPECT_LE((q.gramian - diag21()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(QoObservability, TwoStateExampleIsHalfOfP) {
  const auto sys = oracle::two_state_example();
  const auto p = controllability_gramian(sys);
  const auto q = qo_observability_gramian(sys, p.gramian);
  Mat expected(2, 2);
  expected << 0.25, 0.5, 0.5, 1;
  EXPECT_LE((q.gramian - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QoObservability, RightHandSideRanks) {
  const auto sys = oracle::two_state_example();
  const auto p = controllability_gramian(sys);
  const Mat mpm = sys.M() * p.gramian * sys.M();
  const auto rw = to_ld(sys);
  EXPECT_EQ(numerical_rank(Mat(rw.system.C.transpose() * rw.system.C)), 2);
  EXPECT_EQ(numerical_rank(mpm), 1);
  Vec b(2);
  b << 1, 2;
  EXPECT_LE((mpm - 0.5 * b * b.transpose()).norm(), 1e-12);
}

TEST(QoObservability, MatchesIntegralForm) {
  const auto sys = oracle::random_system(9, 6);
  const auto p = controllability_gramian(sys);
  const auto q = qo_observability_gramian(sys, p.gramian);
  const Mat mpm = sys.M() * p.gramian * sys.M();
  const Mat ref = oracle::gramian_simpson(Mat(sys.A().transpose()), mpm, 60.0, 6000);
  EXPECT_LE((q.gramian - ref).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LE((sys.A().transpose() * q.gramian + q.gramian * sys.A() + mpm).norm(), 1e-10 * std::max(1.0, mpm.norm()));
}

TEST(QoObservability, RejectsBadP) {
  const auto sys = oracle::two_state_example();
  Mat p(2, 2);
  p << 1, 2, 0, 1;
  EXPECT_THROW(qo_observability_gramian(sys, p), ValidationError);
  EXPECT_THROW(qo_observability_gramian(sys, Mat(Mat::Identity(3, 3))), ValidationError);
}

TEST(LdObservability, IdentityOutput) {
  const LdSystem<double> ld(-Mat::Identity(2, 2), Mat::Ones(2, 1), Mat::Identity(2, 2));
  const auto q = ld_observability_gramian(ld);
  EXPECT_LE((q.gramian - Mat::Identity(2, 2) / 2).norm(), 1e-14);
}

TEST(LdObservability, RewrittenTwoStateExample) {
  const auto rw = to_ld(oracle::two_state_example());
  const auto q = ld_observability_gramian(rw.system);
  EXPECT_LE((q.gramian - Mat::Identity(2, 2) / 2).norm(), 1e-14);
}

TEST(LdObservability, MatchesQuadrature) {
  const auto sys = oracle::random_system(6, 6);
  const auto rw = to_ld(sys);
  const Mat ctc = rw.system.C.transpose() * rw.system.C;
  const auto q = ld_observability_gramian(rw.system);
  const Mat ref = oracle::gramian_simpson(Mat(sys.A().transpose()), ctc, 60.0, 6000);
  EXPECT_LE((q.gramian - ref).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Unobservable, DiagonalWithZero) {
  const Mat k = unobservable_directions(Mat(Eigen::Vector3d(2, 1, 0).asDiagonal()));
  ASSERT_EQ(k.cols(), 1);
  EXPECT_NEAR(std::abs(k(2, 0)), 1.0, 1e-14);
}

TEST(Unobservable, FullRankGivesEmptyBasis) {
  EXPECT_EQ(unobservable_directions(Mat(Eigen::Vector3d(2, 1, 0.5).asDiagonal())).cols(), 0);
}

TEST(Unobservable, KernelPropertiesOnConstructedSystems) {
  // A leaves the trailing coordinates invariant and M vanishes on them, so Q
  // is singular while B still reaches every state.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 gen(seed);
    const Index n = 4 + seed % 3;
    const Index k = 2;
    Mat a = oracle::random_system(seed, n).A();
    a.topRightCorner(n - k, k).setZero();
    Mat m = Mat::Zero(n, n);
    const Mat f = oracle::gaussian(gen, n - k, n - k);
    m.topLeftCorner(n - k, n - k) = f * f.transpose();
    const auto sys = make_ldqo(a, Mat(oracle::gaussian(gen, n, 1)), m);
    const auto g = ldqo_gramians(sys);
    ASSERT_GT(min_eigenvalue(g.controllability.gramian), 0.0);
    const double tol = 1e-10;
    const Mat ker = unobservable_directions(g.observability.gramian, tol);
    ASSERT_EQ(ker.cols(), k) << "seed " << seed;
    EXPECT_LE((ker.transpose() * ker - Mat::Identity(k, k)).norm(), 1e-12);
    const double lam = max_eigenvalue(g.observability.gramian);
    for (Index j = 0; j < k; ++j) {
      const Vec v = ker.col(j);
      const Mat& p = g.controllability.gramian;
      EXPECT_LE((p * sys.M() * v).norm(), 10 * tol * p.norm() * sys.M().norm() * v.norm() + 1e-12);
      EXPECT_LE((g.observability.gramian * sys.A() * v).norm(), 10 * tol * std::max(1.0, lam));
    }
  }
}

TEST(GramianProperties, PsdOnRandomSystems) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto sys = oracle::random_system(seed, 1 + seed % 20, 1 + seed % 3, seed % 4 != 0);
    const auto g = ldqo_gramians(sys);
    const Mat& p = g.controllability.gramian;
    const Mat& q = g.observability.gramian;
    EXPECT_GE(min_eigenvalue(p), -1e-10 * max_eigenvalue(p)) << seed;
    EXPECT_GE(min_eigenvalue(q), -1e-10 * max_eigenvalue(q)) << seed;
  }
}

TEST(GramianProperties, RankOfProductBoundedByFactors) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 gen(seed + 1000);
    const Index n = 3 + seed % 8;
    const Index rm = 1 + seed % n;
    const Mat f = oracle::gaussian(gen, n, rm);
    const auto base = oracle::random_system(seed, n, 1 + seed % 2);
    const auto sys = make_ldqo(base.A(), base.B(), Mat(f * f.transpose()));
    const Mat p = controllability_gramian(sys).gramian;
    const Index rank_mpm = numerical_rank(Mat(sys.M() * p * sys.M()), 1e-10);
    EXPECT_LE(rank_mpm, std::min(numerical_rank(sys.M(), 1e-10), numerical_rank(p, 1e-10)));
  }
}

TEST(GramianProperties, IntegralEquivalenceSuite) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sys = oracle::random_system(seed + 50, 2 + seed % 9, 1 + seed % 2);
    const auto g = ldqo_gramians(sys);
    const Mat p_ref = gramian_quadrature(sys.A(), Mat(sys.B() * sys.B().transpose()));
    EXPECT_LE(oracle::rel(g.controllability.gramian, p_ref), 1e-6);
    const Mat w = sys.M() * g.controllability.gramian * sys.M();
    const Mat q_ref = gramian_quadrature(Mat(sys.A().transpose()), w);
    EXPECT_LE(oracle::rel(g.observability.gramian, q_ref), 1e-6);
  }
}

TEST(GramianProperties, KernelStatesProduceNoOutput) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    std::mt19937_64 gen(seed);
    const Index n = 4;
    Mat a = oracle::random_system(seed, n).A();
    a.topRightCorner(2, 2).setZero();
    Mat m = Mat::Zero(n, n);
    m.topLeftCorner(2, 2) = Mat::Identity(2, 2);
    const auto sys = make_ldqo(a, Mat(oracle::gaussian(gen, n, 1)), m);
    const auto g = ldqo_gramians(sys);
    const Mat ker = unobservable_directions(g.observability.gramian);
    ASSERT_EQ(ker.cols(), 2);
    const Vec x0 = ker.col(0) * 3.0;
    const auto check = observability_energy_check(sys, g.controllability.gramian, g.observability.gramian, x0,
                                                  SimulationOptions{40, 1e-3, true});
    const double scale = std::pow(x0.norm(), 4) * sys.M().squaredNorm();
    EXPECT_LE(check.observed, 1e-8 * scale);
    EXPECT_LE(std::abs(check.bound), 1e-8 * x0.squaredNorm() * g.observability.gramian.norm());
  }
}
