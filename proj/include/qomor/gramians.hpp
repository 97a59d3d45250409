#pragma once

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "qomor/linalg.hpp"
#include "qomor/systems.hpp"

namespace qomor {

struct GramianOptions {
  /// Eigenvalues at or below rank_tol * lambda_max are dropped from factors.
  double rank_tol = 1e-12;
  /// Negative eigenvalues down to -negative_tol * lambda_max are accepted as
  /// rounding noise of a semi-definite Gramian.
  double negative_tol = 1e-8;
  LyapunovOptions lyapunov{};
};

template <typename Scalar>
struct GramianResult {
  Matrix<Scalar> gramian;
  GramianFactor<Scalar> factor;
};

template <typename Scalar>
GramianResult<Scalar> make_gramian_result(Matrix<Scalar> g, GramianSource source,
                                          const GramianOptions& options) {
  GramianResult<Scalar> out{std::move(g), {}};
  out.factor = psd_factor(out.gramian, Scalar(options.rank_tol), Scalar(options.negative_tol));
  out.factor.source = source;
  return out;
}

/// Controllability Gramian: A P + P A^T + B B^T = 0.
template <typename Scalar>
GramianResult<Scalar> controllability_gramian(const SchurForm<Scalar>& schur,
                                              const LdqoSystem<Scalar>& sys,
                                              const GramianOptions& options = {}) {
  Matrix<Scalar> p = solve_lyapunov(schur, Op::identity, sys.B() * sys.B().transpose(),
                                    options.lyapunov);
  return make_gramian_result(std::move(p), GramianSource::controllability, options);
}

template <typename Scalar>
GramianResult<Scalar> controllability_gramian(const LdqoSystem<Scalar>& sys,
                                              const GramianOptions& options = {}) {
  Matrix<Scalar> p = solve_lyapunov(sys.A(), sys.B() * sys.B().transpose(), options.lyapunov);
  return make_gramian_result(std::move(p), GramianSource::controllability, options);
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> checked_mpm(const LdqoSystem<Scalar>& sys, const Matrix<Scalar>& p) {
  if (p.rows() != sys.n() || p.cols() != sys.n()) {
    throw ValidationError("controllability Gramian has the wrong dimension");
  }
  if (asymmetry(p) > Scalar(1e-10)) {
    throw ValidationError("controllability Gramian is not symmetric");
  }
  return symmetrize(sys.M() * p * sys.M());
}

}  // namespace detail

/// Observability Gramian of the quadratic-output system:
///   A^T Q + Q A + M P M = 0,
/// equivalently Q = int_0^inf e^{A^T s} M P M e^{A s} ds.
template <typename Scalar>
GramianResult<Scalar> qo_observability_gramian(const SchurForm<Scalar>& schur,
                                               const LdqoSystem<Scalar>& sys,
                                               const Matrix<Scalar>& p,
                                               const GramianOptions& options = {}) {
  Matrix<Scalar> q = solve_lyapunov(schur, Op::transpose, detail::checked_mpm(sys, p),
                                    options.lyapunov);
  return make_gramian_result(std::move(q), GramianSource::qo_observability, options);
}

template <typename Scalar>
GramianResult<Scalar> qo_observability_gramian(const LdqoSystem<Scalar>& sys,
                                               const Matrix<Scalar>& p,
                                               const GramianOptions& options = {}) {
  Matrix<Scalar> q = solve_adjoint_lyapunov(sys.A(), detail::checked_mpm(sys, p), options.lyapunov);
  return make_gramian_result(std::move(q), GramianSource::qo_observability, options);
}

/// Classical observability Gramian: A^T Q + Q A + C^T C = 0.
template <typename Scalar>
GramianResult<Scalar> ld_observability_gramian(const LdSystem<Scalar>& ld,
                                               const GramianOptions& options = {}) {
  Matrix<Scalar> q = solve_adjoint_lyapunov(ld.A, ld.C.transpose() * ld.C, options.lyapunov);
  return make_gramian_result(std::move(q), GramianSource::ld_observability, options);
}

/// Both Gramians of an LdqoSystem from a single Schur decomposition.
template <typename Scalar>
struct LdqoGramians {
  SchurForm<Scalar> schur;
  GramianResult<Scalar> controllability;
  GramianResult<Scalar> observability;
};

template <typename Scalar>
LdqoGramians<Scalar> ldqo_gramians(const LdqoSystem<Scalar>& sys,
                                   const GramianOptions& options = {}) {
  LdqoGramians<Scalar> out;
  out.schur = real_schur(sys.A());
  out.controllability = controllability_gramian(out.schur, sys, options);
  out.observability =
      qo_observability_gramian(out.schur, sys, out.controllability.gramian, options);
  return out;
}

/// Orthonormal basis of the numerical kernel of a PSD matrix: eigenvectors
/// whose eigenvalues are at or below tol * lambda_max.
template <typename Derived>
Matrix<typename Derived::Scalar> unobservable_directions(
    const Eigen::MatrixBase<Derived>& q,
    typename Derived::Scalar tol = typename Derived::Scalar(1e-10)) {
  using Scalar = typename Derived::Scalar;
  require_square(q, "Gramian");
  const Index n = q.rows();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(symmetrize(q));
  if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  const Scalar top = n > 0 ? eig.eigenvalues()(n - 1) : Scalar(0);
  Index k = 0;
  while (k < n && eig.eigenvalues()(k) <= tol * std::max(top, Scalar(0))) ++k;
  return eig.eigenvectors().leftCols(k);
}

struct QuadratureOptions {
  /// Upper integration limit; 0 picks T with exp(abscissa * T) <= 1e-9.
  double horizon = 0;
  /// Composite Simpson panels (even); 0 picks enough panels to resolve the
  /// fastest mode, at least 2000.
  int panels = 0;
};

namespace detail {

template <typename Scalar>
std::pair<Scalar, int> quadrature_grid(const Matrix<Scalar>& a, const QuadratureOptions& options) {
  const SchurForm<Scalar> schur = real_schur(a);
  Scalar horizon = Scalar(options.horizon);
  if (horizon <= 0) {
    const Scalar abscissa = spectral_abscissa(schur);
    if (!(abscissa < 0)) throw NumericalError("quadrature needs a Hurwitz matrix");
    horizon = std::log(Scalar(1e9)) / -abscissa;
  }
  int panels = options.panels;
  if (panels <= 0) {
    const Scalar radius = eigenvalues(schur).cwiseAbs().maxCoeff();
    const Scalar wanted = std::ceil(horizon * radius / Scalar(0.02));
    panels = static_cast<int>(std::clamp<Scalar>(wanted, Scalar(2000), Scalar(400000)));
  }
  if (panels % 2 != 0) ++panels;
  return {horizon, panels};
}

}  // namespace detail

/// Composite-Simpson quadrature of int_0^T e^{A t} W e^{A^T t} dt, stepping
/// the exponential by a fixed propagator. Independent of the Schur-based
/// solvers; serves as their oracle.
template <typename DA, typename DW>
Matrix<typename DA::Scalar> gramian_quadrature(const Eigen::MatrixBase<DA>& a,
                                               const Eigen::MatrixBase<DW>& w,
                                               const QuadratureOptions& options = {}) {
  using Scalar = typename DA::Scalar;
  const Matrix<Scalar> am = a;
  const auto [horizon, panels] = detail::quadrature_grid(am, options);
  const Scalar h = horizon / panels;
  const Matrix<Scalar> step = (am * h).exp();
  Matrix<Scalar> e = Matrix<Scalar>::Identity(am.rows(), am.cols());
  Matrix<Scalar> sum = Matrix<Scalar>::Zero(am.rows(), am.cols());
  for (int k = 0; k <= panels; ++k) {
    const Scalar weight = (k == 0 || k == panels) ? Scalar(1) : (k % 2 == 1 ? Scalar(4) : Scalar(2));
    sum.noalias() += weight * (e * w * e.transpose());
    e = step * e;
  }
  return symmetrize(sum * (h / Scalar(3)));
}

}  // namespace qomor
