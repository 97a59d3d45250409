#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "qomor/balancing.hpp"
#include "qomor/gramians.hpp"
#include "qomor/signals.hpp"
#include "qomor/simulate.hpp"
#include "qomor/systems.hpp"

namespace qomor {

namespace detail {

template <typename Scalar>
SchurForm<Scalar> hurwitz_schur(const Matrix<Scalar>& a, const char* what) {
  SchurForm<Scalar> s = real_schur(a);
  if (!is_hurwitz(s)) {
    std::ostringstream os;
    os << what << " is not Hurwitz (spectral abscissa " << spectral_abscissa(s) << ")";
    throw NumericalError(os.str());
  }
  return s;
}

/// Sylvester solve with one refinement step; a_mat and b_mat are op(A) and
/// op(B) as explicit matrices for the residual.
template <typename Scalar>
Matrix<Scalar> refined_sylvester(const SchurForm<Scalar>& sa, Op a_op, const SchurForm<Scalar>& sb,
                                 Op b_op, const Matrix<Scalar>& a_mat, const Matrix<Scalar>& b_mat,
                                 const Matrix<Scalar>& c) {
  Matrix<Scalar> x = solve_sylvester(sa, a_op, sb, b_op, c);
  const Matrix<Scalar> r = a_mat * x + x * b_mat + c;
  if (r.norm() > Scalar(1000) * Eigen::NumTraits<Scalar>::epsilon() * std::max(Scalar(1), c.norm())) {
    x += solve_sylvester(sa, a_op, sb, b_op, r);
  }
  return x;
}

}  // namespace detail

/// ||H||^2 = trace(B^T Q B).
template <typename Scalar>
Scalar h2_norm_squared(const LdqoSystem<Scalar>& sys, const GramianOptions& options = {}) {
  const SchurForm<Scalar> s = detail::hurwitz_schur(sys.A(), "A");
  const Matrix<Scalar> p = solve_lyapunov(s, Op::identity, sys.B() * sys.B().transpose(), options.lyapunov);
  const Matrix<Scalar> q = solve_lyapunov(s, Op::transpose, symmetrize(sys.M() * p * sys.M()),
                                          options.lyapunov);
  return (sys.B().transpose() * q * sys.B()).trace();
}

template <typename Scalar>
Scalar h2_norm(const LdqoSystem<Scalar>& sys, const GramianOptions& options = {}) {
  return std::sqrt(std::max(Scalar(0), h2_norm_squared(sys, options)));
}

template <typename Scalar>
struct CrossGramians {
  /// A X + X Ahat^T + B Bhat^T = 0.
  Matrix<Scalar> X;
  /// A^T Z + Z Ahat + M X Mhat = 0.
  Matrix<Scalar> Z;
};

template <typename Scalar>
CrossGramians<Scalar> cross_gramians(const LdqoSystem<Scalar>& h, const LdqoSystem<Scalar>& hh) {
  if (h.m() != hh.m()) throw ValidationError("systems have different input counts");
  const SchurForm<Scalar> s = detail::hurwitz_schur(h.A(), "A");
  const SchurForm<Scalar> sh = detail::hurwitz_schur(hh.A(), "reduced A");
  CrossGramians<Scalar> g;
  g.X = detail::refined_sylvester<Scalar>(s, Op::identity, sh, Op::transpose, h.A(),
                                          hh.A().transpose(), h.B() * hh.B().transpose());
  g.Z = detail::refined_sylvester<Scalar>(s, Op::transpose, sh, Op::identity, h.A().transpose(),
                                          hh.A(), h.M() * g.X * hh.M());
  return g;
}

/// <H, Hhat> = trace(B^T Z Bhat).
template <typename Scalar>
Scalar h2_inner(const LdqoSystem<Scalar>& h, const LdqoSystem<Scalar>& hh) {
  const CrossGramians<Scalar> g = cross_gramians(h, hh);
  return (h.B().transpose() * g.Z * hh.B()).trace();
}

template <typename Scalar>
struct H2ErrorParts {
  Scalar norm_sq = 0;
  Scalar norm_sq_reduced = 0;
  Scalar inner = 0;
  Scalar error_sq = 0;
  Scalar error = 0;
};

/// ||H - Hhat||^2 = ||H||^2 + ||Hhat||^2 - 2 <H, Hhat>. A negative value
/// within 1e-10 of the scale is rounding and clamps to zero; anything larger
/// is reported as an inconsistency.
template <typename Scalar>
H2ErrorParts<Scalar> h2_error_parts(const LdqoSystem<Scalar>& h, const LdqoSystem<Scalar>& hh) {
  H2ErrorParts<Scalar> e;
  e.norm_sq = h2_norm_squared(h);
  e.norm_sq_reduced = h2_norm_squared(hh);
  e.inner = h2_inner(h, hh);
  e.error_sq = e.norm_sq + e.norm_sq_reduced - 2 * e.inner;
  const Scalar scale = e.norm_sq + e.norm_sq_reduced + 2 * std::abs(e.inner);
  if (e.error_sq < 0) {
    if (e.error_sq < -Scalar(1e-10) * scale) {
      std::ostringstream os;
      os << "inconsistent H2 error: squared norm " << e.error_sq << " at scale " << scale;
      throw NumericalError(os.str());
    }
    e.error_sq = 0;
  }
  e.error = std::sqrt(e.error_sq);
  return e;
}

template <typename Scalar>
Scalar h2_error(const LdqoSystem<Scalar>& h, const LdqoSystem<Scalar>& hh) {
  return h2_error_parts(h, hh).error;
}

/// Terms of the singular-value error expression for the leading-r
/// truncation of a balanced realization.
template <typename Scalar>
struct HsvErrorTerms {
  /// trace((B2 B2^T + 2 Z2 A12 + 2 M_{:2}^T X M12 + 2 X2 A21^T) S2).
  Scalar bound = 0;
  /// trace(B1^T (Qhat - S1) B1), never positive in exact arithmetic.
  Scalar correction = 0;
  /// bound + correction; equals ||H - Hr||^2.
  Scalar identity = 0;
  /// Largest eigenvalue of Qhat - S1.
  Scalar d_max_eigenvalue = 0;
  bool d_negative_semidefinite = true;
};

namespace detail {

template <typename Scalar>
void require_balanced(const BalancedRealization<Scalar>& bal, Scalar tol) {
  const LdqoSystem<Scalar>& s = bal.system;
  if (bal.sigma.size() != s.n()) throw ValidationError("sigma does not match the realization");
  const Matrix<Scalar> sig = bal.sigma.asDiagonal();
  const Matrix<Scalar> bb = s.B() * s.B().transpose();
  const Matrix<Scalar> ctrl = s.A() * sig + sig * s.A().transpose() + bb;
  const Matrix<Scalar> mpm = s.M() * sig * s.M();
  const Matrix<Scalar> obs = s.A().transpose() * sig + sig * s.A() + mpm;
  const Scalar c_rel = ctrl.norm() / std::max(bb.norm(), std::numeric_limits<Scalar>::min());
  const Scalar o_rel = obs.norm() / std::max(mpm.norm(), std::numeric_limits<Scalar>::min());
  if (!(c_rel <= tol) || !(o_rel <= tol)) {
    std::ostringstream os;
    os << "realization is not balanced (relative residuals " << c_rel << ", " << o_rel << ")";
    throw ValidationError(os.str());
  }
}

}  // namespace detail

template <typename Scalar>
HsvErrorTerms<Scalar> hsv_error_terms(const BalancedRealization<Scalar>& bal, Index r,
                                      Scalar balance_tol = Scalar(1e-6)) {
  detail::require_balanced(bal, balance_tol);
  const LdqoSystem<Scalar>& s = bal.system;
  const Index n = s.n();
  if (r < 1 || r > n) throw ValidationError("truncation order must lie in [1, n]");
  HsvErrorTerms<Scalar> t;
  if (r == n) return t;
  const Index q = n - r;
  const Matrix<Scalar>& a = s.A();
  const Matrix<Scalar>& b = s.B();
  const Matrix<Scalar>& m = s.M();
  const Matrix<Scalar> s1 = bal.sigma.head(r).asDiagonal();
  const Matrix<Scalar> s2 = bal.sigma.tail(q).asDiagonal();
  const LdqoSystem<Scalar> reduced(a.topLeftCorner(r, r), b.topRows(r), m.topLeftCorner(r, r));

  const CrossGramians<Scalar> g = cross_gramians(s, reduced);
  const Matrix<Scalar> x2 = g.X.bottomRows(q);
  const Matrix<Scalar> z2 = g.Z.bottomRows(q);
  const Matrix<Scalar> a12 = a.topRightCorner(r, q);
  const Matrix<Scalar> a21 = a.bottomLeftCorner(q, r);
  const Matrix<Scalar> m12 = m.topRightCorner(r, q);
  const Matrix<Scalar> m_col2 = m.rightCols(q);
  const Matrix<Scalar> b2 = b.bottomRows(q);
  const Matrix<Scalar> inner = b2 * b2.transpose() + 2 * z2 * a12 +
                               2 * m_col2.transpose() * g.X * m12 + 2 * x2 * a21.transpose();
  t.bound = (inner * s2).trace();

  const SchurForm<Scalar> sr = real_schur(reduced.A());
  const Matrix<Scalar> p_hat = solve_lyapunov(sr, Op::identity, reduced.B() * reduced.B().transpose());
  const Matrix<Scalar> q_hat =
      solve_lyapunov(sr, Op::transpose, symmetrize(reduced.M() * p_hat * reduced.M()));
  const Matrix<Scalar> d = q_hat - s1;
  t.correction = (reduced.B().transpose() * d * reduced.B()).trace();
  t.identity = t.bound + t.correction;
  t.d_max_eigenvalue = max_eigenvalue(d);
  t.d_negative_semidefinite = t.d_max_eigenvalue <= Scalar(1e-8) * bal.sigma(0);
  return t;
}

/// The singular-value expression that equals ||H - Hr||^2.
template <typename Scalar>
Scalar hsv_error_identity(const BalancedRealization<Scalar>& bal, Index r) {
  return hsv_error_terms(bal, r).identity;
}

/// Upper bound on ||H - Hr||^2 depending on the truncated singular values.
template <typename Scalar>
Scalar hsv_error_bound(const BalancedRealization<Scalar>& bal, Index r) {
  const HsvErrorTerms<Scalar> t = hsv_error_terms(bal, r);
  if (!t.d_negative_semidefinite) {
    std::ostringstream os;
    os << "Qhat - Sigma_1 is not negative semi-definite (max eigenvalue " << t.d_max_eigenvalue << ")";
    throw NumericalError(os.str());
  }
  return t.bound;
}

template <typename Scalar>
struct ErrorBoundReport {
  Scalar h2_error = 0;
  std::optional<Scalar> hsv_identity_value;
  std::optional<Scalar> corollary_bound;
  /// ||u (x) u||_{L2} = ||u||_{L2}^2.
  Scalar u_tensor_l2 = 0;
  /// h2_error * u_tensor_l2.
  Scalar linf_bound = 0;
  std::optional<Scalar> observed_linf;
  /// observed_linf <= linf_bound (1 + 1e-6) + 1e-8 when simulated.
  std::optional<bool> bound_holds;
};

/// A posteriori bound ||y - yhat||_inf <= ||H - Hhat||_H2 ||u (x) u||_L2,
/// optionally checked against an RK4 co-simulation.
template <typename Scalar>
ErrorBoundReport<Scalar> linf_output_bound(const LdqoSystem<Scalar>& h, const LdqoSystem<Scalar>& hh,
                                           const SignalSpec& signal,
                                           std::optional<SimulationOptions> simulation = std::nullopt) {
  ErrorBoundReport<Scalar> rep;
  rep.u_tensor_l2 = Scalar(u_tensor_l2(signal, static_cast<long>(h.m())));
  rep.h2_error = h2_error(h, hh);
  rep.linf_bound = rep.h2_error * rep.u_tensor_l2;
  if (simulation) {
    const Trajectory<Scalar> y = simulate_ldqo(h, signal, *simulation);
    const Trajectory<Scalar> yh = simulate_ldqo(hh, signal, *simulation);
    rep.observed_linf = traj_linf(y, yh);
    rep.bound_holds = *rep.observed_linf <= rep.linf_bound * Scalar(1 + 1e-6) + Scalar(1e-8);
  }
  return rep;
}

namespace detail {

struct KernelGrid {
  double horizon;
  int panels;
};

template <typename Scalar>
KernelGrid kernel_grid(const Matrix<Scalar>& a, const Matrix<Scalar>& ah, double horizon, int panels) {
  const Scalar abscissa = std::max(spectral_abscissa(a), spectral_abscissa(ah));
  if (!(abscissa < 0)) throw NumericalError("kernel quadrature needs Hurwitz matrices");
  if (!(horizon > 0)) horizon = static_cast<double>(std::log(Scalar(1e9)) / -abscissa);
  if (panels <= 0) {
    const Scalar radius = std::max(eigenvalues(real_schur(a)).cwiseAbs().maxCoeff(),
                                   eigenvalues(real_schur(ah)).cwiseAbs().maxCoeff());
    const double wanted = std::ceil(horizon * static_cast<double>(radius) / 0.02);
    panels = static_cast<int>(std::clamp(wanted, 2000.0, 400000.0));
  }
  if (panels % 2 != 0) ++panels;
  return {horizon, panels};
}

inline double simpson_weight(int k, int panels) {
  if (k == 0 || k == panels) return 1.0;
  return k % 2 == 1 ? 4.0 : 2.0;
}

}  // namespace detail

/// Two-dimensional composite Simpson approximation of
///   int_0^T int_0^T trace(h(s1, s2) hhat(s1, s2)^T) ds1 ds2,
/// h(s1, s2) = (e^{A s1} B)^T M (e^{A s2} B). The double sum separates as
///   sum_k w_k trace(F_k^T M (sum_l w_l F_l Fhat_l^T) Mhat Fhat_k)
/// with F_k = e^{A t_k} B, which is the same sum evaluated in O(N) work.
template <typename Scalar>
Scalar kernel_quadrature_inner(const LdqoSystem<Scalar>& h, const LdqoSystem<Scalar>& hh,
                               double horizon = 0, int panels = 0) {
  if (h.m() != hh.m()) throw ValidationError("systems have different input counts");
  const detail::KernelGrid grid = detail::kernel_grid(h.A(), hh.A(), horizon, panels);
  const Scalar step = Scalar(grid.horizon) / grid.panels;
  const Matrix<Scalar> prop = (h.A() * step).exp();
  const Matrix<Scalar> prop_h = (hh.A() * step).exp();

  Matrix<Scalar> f = h.B();
  Matrix<Scalar> fh = hh.B();
  Matrix<Scalar> cross = Matrix<Scalar>::Zero(h.n(), hh.n());
  for (int k = 0; k <= grid.panels; ++k) {
    cross.noalias() += Scalar(detail::simpson_weight(k, grid.panels)) * f * fh.transpose();
    f = prop * f;
    fh = prop_h * fh;
  }
  const Matrix<Scalar> kernel = h.M() * cross * hh.M();
  f = h.B();
  fh = hh.B();
  Scalar total = 0;
  for (int k = 0; k <= grid.panels; ++k) {
    total += Scalar(detail::simpson_weight(k, grid.panels)) * (f.transpose() * kernel * fh).trace();
    f = prop * f;
    fh = prop_h * fh;
  }
  return total * (step / 3) * (step / 3);
}

/// Quadrature of int int ||h(s1, s2)||_F^2; approximates ||H||_H2^2.
template <typename Scalar>
Scalar kernel_quadrature_norm(const LdqoSystem<Scalar>& sys, double horizon = 0, int panels = 0) {
  return kernel_quadrature_inner(sys, sys, horizon, panels);
}

/// E_c(x0) = 1/2 x0^T P^{-1} x0.
template <typename DP, typename DX>
typename DP::Scalar controllability_energy(const Eigen::MatrixBase<DP>& p,
                                           const Eigen::MatrixBase<DX>& x0) {
  using Scalar = typename DP::Scalar;
  require_square(p, "P");
  if (x0.size() != p.rows()) throw ValidationError("x0 has the wrong dimension");
  Eigen::LLT<Matrix<Scalar>> llt(symmetrize(p));
  if (llt.info() != Eigen::Success) throw NumericalError("P is singular or not positive definite");
  if (llt.rcond() <= Scalar(100 * p.rows()) * Eigen::NumTraits<Scalar>::epsilon()) {
    throw NumericalError("P is numerically singular");
  }
  return x0.dot(llt.solve(Vector<Scalar>(x0))) / 2;
}

template <typename Scalar>
struct ObservabilityEnergyCheck {
  /// x0^T Q x0.
  Scalar bound = 0;
  /// int_0^horizon y(t)^2 dt with u = 0.
  Scalar observed = 0;
  /// sup_t ||z(t)|| <= 1 for x = Z_P z, and x(t) stays in range(Z_P).
  bool delta_ok = false;
  Scalar sup_z = 0;
  /// observed <= bound (1 + 1e-6) when delta_ok.
  bool bound_holds = false;
};

/// Zero-input output energy from x0 compared with x0^T Q x0. The trajectory
/// condition uses the factor P = Z_P Z_P^T: z(t) = Z_P^+ x(t).
template <typename Scalar>
ObservabilityEnergyCheck<Scalar> observability_energy_check(const LdqoSystem<Scalar>& sys,
                                                            const Matrix<Scalar>& p,
                                                            const Matrix<Scalar>& q,
                                                            const Vector<Scalar>& x0,
                                                            SimulationOptions simulation = {}) {
  if (x0.size() != sys.n()) throw ValidationError("x0 has the wrong dimension");
  simulation.store_states = true;
  const SignalSpec zero = SignalSpec::custom({0.0}, 1.0);
  const Trajectory<Scalar> traj = simulate_ldqo(sys, zero, simulation, std::optional<Vector<Scalar>>(x0));
  ObservabilityEnergyCheck<Scalar> c;
  c.bound = x0.dot(q * x0);
  const Vector<Scalar> y2 = traj.outputs.row(0).transpose().cwiseAbs2();
  const Index last = y2.size() - 1;
  c.observed = (y2.sum() - (y2(0) + y2(last)) / 2) * traj.dt;

  const GramianFactor<Scalar> zp = psd_factor(p, Scalar(1e-12), Scalar(1e-8));
  const Matrix<Scalar>& states = *traj.states;
  if (zp.rank == 0) {
    c.delta_ok = false;
  } else {
    const auto qr = zp.factor.colPivHouseholderQr();
    const Matrix<Scalar> z = qr.solve(states);
    const Scalar range_gap = (zp.factor * z - states).norm();
    c.sup_z = z.colwise().norm().maxCoeff();
    c.delta_ok = c.sup_z <= Scalar(1) && range_gap <= Scalar(1e-8) * std::max(Scalar(1), states.norm());
  }
  c.bound_holds = c.observed <= c.bound * Scalar(1 + 1e-6);
  return c;
}

}  // namespace qomor
