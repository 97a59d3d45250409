#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qomor/balancing.hpp"
#include "qomor/metrics.hpp"

using namespace qomor;
using oracle::Mat;
using oracle::Vec;

namespace {

LdqoSystem<double> scalar_system() {
  return LdqoSystem<double>(Mat::Constant(1, 1, -1.0), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0));
}

// Dense 2-D Simpson sum of trace(h(s1, s2) hhat(s1, s2)^T) for single-input
// systems, h(s1, s2) = (e^{A s1} B)^T M e^{A s2} B.
double dense_kernel_inner(const LdqoSystem<double>& h, const LdqoSystem<double>& hh, double horizon, int panels) {
  const double step = horizon / panels;
  auto samples = [&](const LdqoSystem<double>& s) {
    const Mat prop = oracle::expm(s.A(), step);
    Mat f(s.n(), panels + 1);
    Vec x = s.B().col(0);
    for (int k = 0; k <= panels; ++k) {
      f.col(k) = x;
      x = prop * x;
    }
    return Mat(f.transpose() * s.M() * f);
  };
  const Mat k1 = samples(h), k2 = samples(hh);
  Vec w(panels + 1);
  for (int k = 0; k <= panels; ++k) w(k) = (k == 0 || k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
  const double total = w.dot(k1.cwiseProduct(k2) * w);
  return total * (step / 3) * (step / 3);
}

BalancedRealization<double> as_balanced(const LdqoSystem<double>& sys, const Vec& sigma) {
  const Mat id = Mat::Identity(sys.n(), sys.n());
  return {id, id, sys, sigma};
}

// A = -diag(a), B = diag(b), M = diag(sqrt(2 a)) is balanced with
// sigma = b^2 / (2 a) and has M12 = 0 for every partition.
LdqoSystem<double> diagonal_balanced(const Vec& a, const Vec& b) {
  return LdqoSystem<double>(Mat((-a).asDiagonal()), Mat(b.asDiagonal()), Mat((2 * a).cwiseSqrt().asDiagonal()));
}

}  // namespace

TEST(H2Norm, ScalarSystem) {
  EXPECT_NEAR(h2_norm(scalar_system()), 0.5, 1e-14);
  EXPECT_NEAR(h2_norm_squared(scalar_system()), 0.25, 1e-14);
}

TEST(H2Norm, ZeroWeight) {
  const auto base = oracle::random_system(1, 4);
  EXPECT_EQ(h2_norm(LdqoSystem<double>(base.A(), base.B(), Mat::Zero(4, 4))), 0.0);
}

TEST(H2Norm, BalancedExample) { EXPECT_NEAR(h2_norm_squared(oracle::balanced_example()), 5.0, 1e-10); }

TEST(H2Norm, RejectsUnstable) {
  const LdqoSystem<double> sys(Mat::Identity(2, 2), Mat::Ones(2, 1), Mat::Identity(2, 2));
  EXPECT_THROW(h2_norm(sys), NumericalError);
}

TEST(H2Inner, SelfInnerIsSquaredNorm) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto sys = oracle::random_system(seed, 5, 2);
    EXPECT_NEAR(h2_inner(sys, sys), h2_norm_squared(sys), 1e-10 * h2_norm_squared(sys));
  }
}

TEST(H2Inner, ZeroSecondWeight) {
  const auto h = oracle::random_system(2, 5);
  const auto base = oracle::random_system(3, 3);
  EXPECT_EQ(h2_inner(h, LdqoSystem<double>(base.A(), base.B(), Mat::Zero(3, 3))), 0.0);
}

TEST(H2Inner, MatchesDenseKernelQuadrature) {
  const auto h = oracle::random_system(4, 6);
  const auto hh = oracle::random_system(5, 3);
  const double ref = dense_kernel_inner(h, hh, 60.0, 2400);
  EXPECT_NEAR(h2_inner(h, hh), ref, 1e-4 * std::abs(ref));
}

TEST(H2Inner, MismatchedInputsRejected) {
  EXPECT_THROW(h2_inner(oracle::random_system(1, 3, 1), oracle::random_system(2, 3, 2)), ValidationError);
}

TEST(H2Error, SelfIsZero) {
  const auto sys = oracle::random_system(7, 6);
  EXPECT_LE(h2_error(sys, sys), 1e-6 * h2_norm(sys));
}

TEST(H2Error, BalancedExampleAgainstZeroReduction) {
  const auto out = reduce_spbt(oracle::balanced_example(), 1);
  EXPECT_NEAR(h2_error(oracle::balanced_example(), *out.reduced), std::sqrt(5.0), 1e-9);
}

TEST(H2Error, PartsAreConsistent) {
  const auto h = oracle::random_system(8, 6);
  const auto out = reduce_spbt(h, 3);
  const auto p = h2_error_parts(h, *out.reduced);
  EXPECT_NEAR(p.norm_sq, h2_norm_squared(h), 1e-10 * p.norm_sq);
  EXPECT_NEAR(p.norm_sq_reduced, h2_norm_squared(*out.reduced), 1e-10 * p.norm_sq);
  EXPECT_NEAR(p.inner, h2_inner(h, *out.reduced), 1e-10 * p.norm_sq);
  EXPECT_NEAR(p.error_sq, p.norm_sq + p.norm_sq_reduced - 2 * p.inner, 1e-10 * p.norm_sq);
  EXPECT_DOUBLE_EQ(p.error, std::sqrt(p.error_sq));
}

TEST(LinfBound, TensorNormOfExponential) {
  // ||u (x) u||_{L2} = ||u||_{L2}^2 = int e^{-t/2} = 2; the value 1 is ||u^2||_{L2}.
  const auto u = SignalSpec::exp_decay(1.0, 0.25);
  EXPECT_NEAR(u_tensor_l2(u), 2.0, 1e-12);
  EXPECT_NEAR(u_squared_l2(u), 1.0, 1e-12);
}

TEST(LinfBound, TensorNormOfDampedQuadratic) {
  const auto u = SignalSpec::damped_quadratic(1.0, 0.2);
  EXPECT_NEAR(u_tensor_l2(u), 2343.75, 1e-9);
  const double quad = signal_quadrature(u, 2);
  EXPECT_NEAR(quad * quad, 2343.75 * 2343.75, 1e-6 * 2343.75 * 2343.75);
}

TEST(LinfBound, SinusoidRejected) {
  const auto h = oracle::random_system(1, 4);
  const auto out = reduce_spbt(h, 2);
  EXPECT_THROW(linf_output_bound(h, *out.reduced, SignalSpec::sin_plus_offset()), ValidationError);
}

TEST(LinfBound, HoldsInSimulation) {
  const auto h = oracle::random_system(3, 6);
  const auto out = reduce_spbt(h, 2);
  for (const auto& u : {SignalSpec::exp_decay(1.0, 0.25), SignalSpec::damped_quadratic(0.1, 0.2)}) {
    const auto rep = linf_output_bound(h, *out.reduced, u, SimulationOptions{40, 1e-3, false});
    ASSERT_TRUE(rep.bound_holds);
    EXPECT_TRUE(*rep.bound_holds);
    EXPECT_DOUBLE_EQ(rep.linf_bound, rep.h2_error * rep.u_tensor_l2);
    EXPECT_LE(*rep.observed_linf, rep.linf_bound * (1 + 1e-6) + 1e-8);
  }
}

TEST(HsvIdentity, BalancedExample) {
  const auto bal = as_balanced(oracle::balanced_example(), Eigen::Vector2d(2, 1));
  EXPECT_NEAR(hsv_error_identity(bal, 1), 5.0, 1e-9);
}

TEST(HsvIdentity, FullOrderIsZero) {
  const auto bal = as_balanced(oracle::balanced_example(), Eigen::Vector2d(2, 1));
  EXPECT_EQ(hsv_error_identity(bal, 2), 0.0);
}

TEST(HsvIdentity, RejectsUnbalanced) {
  const auto bal = as_balanced(oracle::random_system(1, 3), Eigen::Vector3d(3, 2, 1));
  EXPECT_THROW(hsv_error_identity(bal, 1), ValidationError);
}

// Extended precision: both sides cancel down from |H|^2 to the tiny error.
TEST(HsvIdentity, MatchesSquaredH2ErrorOnRandomBalancedSystems) {
  using Ld = long double;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sys = oracle::random_system(seed, 8);
    const auto bal =
        balanced_realization(LdqoSystem<Ld>(sys.A().cast<Ld>(), sys.B().cast<Ld>(), sys.M().cast<Ld>()));
    for (Index r : {2, 4, 6}) {
      const auto& s = bal.system;
      const LdqoSystem<Ld> red(s.A().topLeftCorner(r, r), s.B().topRows(r), s.M().topLeftCorner(r, r));
      const Ld e2 = h2_error_parts(s, red).error_sq;
      EXPECT_LE(std::abs(hsv_error_identity(bal, r) - e2), Ld(1e-8) * e2) << "seed " << seed << " r " << r;
    }
  }
}

TEST(HsvBound, EqualsIdentityWhenOffDiagonalWeightVanishes) {
  const Eigen::Vector3d a(1, 2, 3), b(4, 2, 1);
  const Vec sigma = b.cwiseAbs2().cwiseQuotient(2 * a);
  const auto bal = as_balanced(diagonal_balanced(a, b), sigma);
  for (Index r : {1, 2}) {
    const auto t = hsv_error_terms(bal, r);
    EXPECT_NEAR(t.bound, t.identity, 1e-12 * t.bound);
    EXPECT_NEAR(t.correction, 0.0, 1e-12 * t.bound);
  }
}

TEST(HsvBound, BalancedExampleDominatesIdentity) {
  const auto bal = as_balanced(oracle::balanced_example(), Eigen::Vector2d(2, 1));
  EXPECT_GE(hsv_error_bound(bal, 1), 5.0 - 1e-9);
}

TEST(HsvBound, DominatesIdentityOnRandomSuite) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto bal = balanced_realization(oracle::random_system(seed + 100, 8));
    for (Index r : {2, 4, 6}) {
      const auto t = hsv_error_terms(bal, r);
      EXPECT_TRUE(t.d_negative_semidefinite) << seed;
      EXPECT_LE(t.d_max_eigenvalue, 1e-8 * bal.sigma(0));
      EXPECT_GE(t.bound, t.identity - 1e-8 * std::max(1.0, std::abs(t.identity)));
    }
  }
}

TEST(KernelQuadrature, ScalarSystem) {
  EXPECT_NEAR(kernel_quadrature_norm(scalar_system(), 40.0), 0.25, 1e-6);
}

TEST(KernelQuadrature, ZeroWeight) {
  const auto base = oracle::random_system(1, 3);
  EXPECT_EQ(kernel_quadrature_norm(LdqoSystem<double>(base.A(), base.B(), Mat::Zero(3, 3))), 0.0);
}

TEST(KernelQuadrature, MatchesH2Norm) {
  const auto sys = oracle::random_system(6, 6);
  const double ref = h2_norm_squared(sys);
  EXPECT_NEAR(kernel_quadrature_norm(sys), ref, 1e-4 * ref);
}

TEST(Energy, ControllabilityEnergy) {
  EXPECT_DOUBLE_EQ(controllability_energy(Mat(Eigen::Vector2d(2, 1).asDiagonal()), Vec(Eigen::Vector2d(1, 0))),
                   0.25);
  Mat p(2, 2);
  p << 0.5, 1, 1, 2;
  EXPECT_THROW(controllability_energy(p, Vec(Eigen::Vector2d(1, 0))), NumericalError);
}

TEST(Energy, ScaledInitialStateSweep) {
  const auto sys = oracle::two_state_example();
  const auto g = ldqo_gramians(sys);
  const Vec dir = Eigen::Vector2d(1, 2).normalized();
  double scale = 10.0;
  ObservabilityEnergyCheck<double> check;
  for (int i = 0; i < 20; ++i, scale /= 2) {
    check = observability_energy_check(sys, g.controllability.gramian, g.observability.gramian, Vec(scale * dir),
                                       SimulationOptions{40, 1e-3, true});
    if (check.delta_ok) break;
  }
  ASSERT_TRUE(check.delta_ok);
  EXPECT_LE(check.sup_z, 1.0);
  EXPECT_NEAR(check.bound, 1.25 * scale * scale, 1e-10);
  EXPECT_NEAR(check.observed, std::pow(scale, 4) / 4, 1e-6);
  EXPECT_TRUE(check.bound_holds);
}

TEST(Energy, ObservationBoundWheneverDeltaHolds) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sys = oracle::random_system(seed, 4);
    const auto g = ldqo_gramians(sys);
    std::mt19937_64 gen(seed);
    const Vec x0 = g.controllability.factor.factor * oracle::gaussian(gen, g.controllability.factor.rank, 1);
    for (double s : {0.05, 0.2, 1.0}) {
      const auto c = observability_energy_check(sys, g.controllability.gramian, g.observability.gramian,
                                                Vec(s * x0.normalized()), SimulationOptions{40, 1e-3, true});
      if (!c.delta_ok) continue;
      ++checked;
      EXPECT_TRUE(c.bound_holds) << seed << " " << s;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(NormAxioms, CauchySchwarz) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto h = oracle::random_system(seed, 2 + seed % 6, 1 + seed % 2, seed % 3 != 0);
    const auto hh = oracle::random_system(seed + 500, 1 + seed % 4, 1 + seed % 2, seed % 5 != 0);
    const double nh = std::sqrt(std::abs(h2_norm_squared(h)));
    const double nhh = std::sqrt(std::abs(h2_norm_squared(hh)));
    const double scale = std::max(1.0, nh * nhh);
    EXPECT_LE(std::abs(h2_inner(h, hh)), nh * nhh + 1e-10 * scale) << seed;
  }
}
