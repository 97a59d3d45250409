#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "qomor/balancing.hpp"
#include "qomor/gramians.hpp"
#include "qomor/simulate.hpp"
#include "qomor/systems.hpp"

namespace qomor {

/// Mode-2 matricization of H (k x k^2): with H(a, b*k + c) = T(a, b, c),
/// returns H2(b, a*k + c) = T(a, b, c), so that
///   u^T H (v kron w) = v^T H2 (u kron w).
template <typename Derived>
Matrix<typename Derived::Scalar> mode2_matricization(const Eigen::MatrixBase<Derived>& h) {
  using Scalar = typename Derived::Scalar;
  const Index k = h.rows();
  if (h.cols() != k * k) throw ValidationError("H must be k x k^2");
  Matrix<Scalar> h2(k, k * k);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) {
      for (Index c = 0; c < k; ++c) h2(b, a * k + c) = h(a, b * k + c);
    }
  }
  return h2;
}

/// H (X kron Y) H^T for H laid out as in mode2_matricization, without
/// forming the Kronecker product: entry (a, b) is <X^T H_a Y, H_b>_F where
/// H_a is row a reshaped to k x k.
template <typename DH, typename DX, typename DY>
Matrix<typename DH::Scalar> kron_congruence(const Eigen::MatrixBase<DH>& h,
                                            const Eigen::MatrixBase<DX>& x,
                                            const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DH::Scalar;
  const Index rows = h.rows();
  const Index k = x.rows();
  if (h.cols() != k * k || y.rows() != k) throw ValidationError("kron_congruence dimension mismatch");
  std::vector<Index> active;
  for (Index a = 0; a < rows; ++a) {
    if (h.row(a).cwiseAbs().maxCoeff() > Scalar(0)) active.push_back(a);
  }
  // Row a of H reshaped with (b, c) -> H(a, b*k + c): a row-major k x k view.
  auto slice = [&](Index a) {
    Matrix<Scalar> s(k, k);
    for (Index b = 0; b < k; ++b) s.row(b) = h.block(a, b * k, 1, k);
    return s;
  };
  std::vector<Matrix<Scalar>> slices;
  for (Index a : active) slices.push_back(slice(a));
  Matrix<Scalar> out = Matrix<Scalar>::Zero(rows, rows);
  for (std::size_t i = 0; i < active.size(); ++i) {
    const Matrix<Scalar> t = x.transpose() * slices[i] * y;
    for (std::size_t j = 0; j < active.size(); ++j) {
      out(active[i], active[j]) = t.cwiseProduct(slices[j]).sum();
    }
  }
  return out;
}

enum class QbGramianScheme {
  /// One correction step from the linear-part Gramians (truncated Gramians).
  truncated,
  /// Plain fixed-point iteration of the full quadratic-type equations.
  fixed_point,
};

struct QbGramianOptions {
  /// Shift of the augmented diagonal entry; 0 selects 1e-6 * ||A||_F.
  double eps = 0;
  int max_iter = 100;
  double tol = 1e-10;
  QbGramianScheme scheme = QbGramianScheme::truncated;
  /// Fail fast above this many QB states.
  Index max_states = 101;
  GramianOptions gramian{};
};

inline std::string to_string(QbGramianScheme s) {
  return s == QbGramianScheme::truncated ? "truncated" : "fixed_point";
}

template <typename Scalar>
struct QbGramians {
  Matrix<Scalar> P;
  Matrix<Scalar> Q;
  int iterations = 0;
  bool converged = false;
  Scalar regularization_eps = 0;
  QbGramianScheme scheme = QbGramianScheme::truncated;
};

/// A_qb with -eps added on the augmented (last) diagonal entry.
template <typename Scalar>
Matrix<Scalar> regularized_qb_matrix(const QbSystem<Scalar>& qb, Scalar eps) {
  Matrix<Scalar> a = qb.A;
  a(a.rows() - 1, a.cols() - 1) -= eps;
  return a;
}

template <typename Scalar>
Scalar default_qb_eps(const QbSystem<Scalar>& qb) {
  return Scalar(1e-6) * qb.A.norm();
}

/// Quadratic and bilinear contributions to the reachability equation.
template <typename Scalar>
Matrix<Scalar> qb_reach_terms(const QbSystem<Scalar>& qb, const Matrix<Scalar>& p) {
  Matrix<Scalar> w = kron_congruence(qb.H, p, p);
  for (const auto& nj : qb.N) w.noalias() += nj * p * nj.transpose();
  return symmetrize(w);
}

/// Quadratic and bilinear contributions to the observability equation.
template <typename Scalar>
Matrix<Scalar> qb_observe_terms(const QbSystem<Scalar>& qb, const Matrix<Scalar>& h2,
                                const Matrix<Scalar>& p, const Matrix<Scalar>& q) {
  Matrix<Scalar> w = kron_congruence(h2, p, q);
  for (const auto& nj : qb.N) w.noalias() += nj.transpose() * q * nj;
  return symmetrize(w);
}

template <typename Scalar>
struct QbResiduals {
  Scalar reach = 0;
  Scalar observe = 0;
};

/// Residual norms of both quadratic-type Lyapunov equations (with the
/// regularized A), relative to max(1, ||B B^T||_F) and max(1, ||C^T C||_F).
template <typename Scalar>
QbResiduals<Scalar> qb_gramian_residuals(const QbSystem<Scalar>& qb, const QbGramians<Scalar>& g) {
  const Matrix<Scalar> a = regularized_qb_matrix(qb, g.regularization_eps);
  const Matrix<Scalar> bb = qb.B * qb.B.transpose();
  const Matrix<Scalar> cc = qb.C.transpose() * qb.C;
  const Matrix<Scalar> h2 = mode2_matricization(qb.H);
  QbResiduals<Scalar> r;
  r.reach = (a * g.P + g.P * a.transpose() + bb + qb_reach_terms(qb, g.P)).norm() /
            std::max(Scalar(1), bb.norm());
  r.observe = (a.transpose() * g.Q + g.Q * a + cc + qb_observe_terms(qb, h2, g.P, g.Q)).norm() /
              std::max(Scalar(1), cc.norm());
  return r;
}

namespace detail {

/// Fixed-point iteration X <- L^{-1}(W0 + terms(X)) starting from X0.
/// Convergence is judged on ||dX|| / ||X||; divergence on the step size
/// ||dX|| (relative to the fixed initial scale) growing three times in a row.
template <typename Scalar, typename Solve, typename Terms>
Matrix<Scalar> qb_fixed_point(Matrix<Scalar> x, Solve&& solve, Terms&& terms,
                              const QbGramianOptions& options, const char* what, int& iterations,
                              bool& converged) {
  const Scalar scale = std::max(x.norm(), std::numeric_limits<Scalar>::min());
  Scalar previous = std::numeric_limits<Scalar>::infinity();
  int growth = 0;
  converged = false;
  for (int it = 1; it <= options.max_iter; ++it) {
    Matrix<Scalar> next = solve(terms(x));
    const Scalar step = (next - x).norm() / scale;
    const Scalar change = (next - x).norm() / std::max(next.norm(), std::numeric_limits<Scalar>::min());
    x = std::move(next);
    iterations = it;
    if (!x.allFinite()) {
      throw NumericalError(std::string("QB ") + what + " Gramian iteration produced non-finite values");
    }
    if (change <= Scalar(options.tol)) {
      converged = true;
      return x;
    }
    growth = step > previous ? growth + 1 : 0;
    if (growth >= 3) {
      std::ostringstream os;
      os << "QB " << what << " Gramian fixed-point iteration diverges (relative change " << step
         << " grew for 3 consecutive iterations, iteration " << it << ")";
      throw NumericalError(os.str());
    }
    previous = step;
  }
  return x;
}

}  // namespace detail

/// Gramians of the quadratic-type Lyapunov equations
///   A_e P + P A_e^T + B B^T + H (P kron P) H^T + sum_j N_j P N_j^T = 0,
///   A_e^T Q + Q A_e + C^T C + H2 (P kron Q) H2^T + sum_j N_j^T Q N_j = 0,
/// with A_e the regularized A_qb and H2 the mode-2 matricization of H.
template <typename Scalar>
QbGramians<Scalar> qb_truncated_gramians(const QbSystem<Scalar>& qb,
                                         const QbGramianOptions& options = {}) {
  const Index k = qb.n();
  if (k > options.max_states) {
    std::ostringstream os;
    os << "QB Gramians with " << k << " states exceed the configured limit of "
       << options.max_states << " (Kronecker terms scale like k^4)";
    throw ValidationError(os.str());
  }
  if (options.max_iter < 1) throw ValidationError("max_iter must be at least 1");
  QbGramians<Scalar> g;
  g.scheme = options.scheme;
  g.regularization_eps = options.eps > 0 ? Scalar(options.eps) : default_qb_eps(qb);
  if (!(g.regularization_eps > 0)) throw ValidationError("regularization eps must be positive");

  const Matrix<Scalar> a = regularized_qb_matrix(qb, g.regularization_eps);
  const SchurForm<Scalar> schur = real_schur(a);
  const LyapunovOptions& lyap = options.gramian.lyapunov;
  const Matrix<Scalar> bb = qb.B * qb.B.transpose();
  const Matrix<Scalar> cc = qb.C.transpose() * qb.C;
  const Matrix<Scalar> h2 = mode2_matricization(qb.H);
  auto solve_p = [&](const Matrix<Scalar>& extra) {
    return solve_lyapunov(schur, Op::identity, Matrix<Scalar>(bb + extra), lyap);
  };
  const Matrix<Scalar> p1 = solve_lyapunov(schur, Op::identity, bb, lyap);
  const Matrix<Scalar> q1 = solve_lyapunov(schur, Op::transpose, cc, lyap);

  if (options.scheme == QbGramianScheme::truncated) {
    g.P = solve_p(qb_reach_terms(qb, p1));
    g.Q = solve_lyapunov(schur, Op::transpose, Matrix<Scalar>(cc + qb_observe_terms(qb, h2, p1, q1)),
                         lyap);
    g.iterations = 1;
    g.converged = true;
    return g;
  }

  int p_iterations = 0;
  bool p_converged = false;
  g.P = detail::qb_fixed_point<Scalar>(
      p1, solve_p, [&](const Matrix<Scalar>& p) { return qb_reach_terms(qb, p); }, options,
      "reachability", p_iterations, p_converged);
  auto solve_q = [&](const Matrix<Scalar>& extra) {
    return solve_lyapunov(schur, Op::transpose, Matrix<Scalar>(cc + extra), lyap);
  };
  int q_iterations = 0;
  bool q_converged = false;
  g.Q = detail::qb_fixed_point<Scalar>(
      q1, solve_q, [&](const Matrix<Scalar>& q) { return qb_observe_terms(qb, h2, g.P, q); },
      options, "observability", q_iterations, q_converged);
  g.iterations = p_iterations + q_iterations;
  g.converged = p_converged && q_converged;
  return g;
}

/// W^T H (V kron V) without forming V kron V.
template <typename Scalar>
Matrix<Scalar> project_quadratic(const Matrix<Scalar>& h, const Matrix<Scalar>& v,
                                 const Matrix<Scalar>& w) {
  const Index k = v.rows();
  const Index r = v.cols();
  Matrix<Scalar> rows = Matrix<Scalar>::Zero(h.rows(), r * r);
  for (Index a = 0; a < h.rows(); ++a) {
    if (h.row(a).cwiseAbs().maxCoeff() == Scalar(0)) continue;
    Matrix<Scalar> s(k, k);
    for (Index b = 0; b < k; ++b) s.row(b) = h.block(a, b * k, 1, k);
    const Matrix<Scalar> t = v.transpose() * s * v;
    for (Index i = 0; i < r; ++i) rows.block(a, i * r, 1, r) = t.row(i);
  }
  return w.transpose() * rows;
}

/// Petrov-Galerkin projection of a QB system.
template <typename Scalar>
QbSystem<Scalar> project(const QbSystem<Scalar>& qb, const Matrix<Scalar>& v, const Matrix<Scalar>& w) {
  std::vector<Matrix<Scalar>> n;
  for (const auto& nj : qb.N) n.push_back(w.transpose() * nj * v);
  return QbSystem<Scalar>(w.transpose() * qb.A * v, w.transpose() * qb.B, qb.C * v,
                          project_quadratic(qb.H, v, w), std::move(n));
}

/// Baseline: augment the output as a state and balance the quadratic-bilinear
/// realization with its Gramians. Gramians and SVD are reusable across orders.
template <typename Scalar>
struct QbtbtPlan {
  QbSystem<Scalar> qb;
  QbGramians<Scalar> gramians;
  BalancingBasis<Scalar> basis;
  ReductionOptions reduction;

  ReductionOutcome<Scalar> reduce(Index r) const {
    if (r < 1 || r > qb.n()) throw ValidationError("reduced order must lie in [1, n + 1]");
    SquareRootProjectors<Scalar> proj;
    if (basis.available_order() == 0) {
      // Zero output weight: nothing is observable, so project onto the
      // dominant reachable directions (any projection then has zero output).
      Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gramians.P);
      proj.V = eig.eigenvectors().rightCols(r).rowwise().reverse();
      proj.W = proj.V;
      proj.sigma = Vector<Scalar>::Zero(0);
    } else {
      proj = basis.truncate(r);
    }
    ReductionOutcome<Scalar> out;
    out.method = Method::qbtbt;
    out.reduced_qb = project(qb, proj.V, proj.W);
    out.qb = QbDiagnostics{gramians.iterations, gramians.converged,
                           static_cast<double>(gramians.regularization_eps), to_string(gramians.scheme)};
    const Matrix<Scalar> a_eps =
        proj.W.transpose() * regularized_qb_matrix(qb, gramians.regularization_eps) * proj.V;
    out.order = r;
    out.V = proj.V;
    out.W = proj.W;
    out.singular_values = proj.sigma;
    out.biorthogonality_error = (proj.W.transpose() * proj.V - Matrix<Scalar>::Identity(r, r)).norm();
    out.stability_ok = a_eps.allFinite() && is_hurwitz(a_eps);
    const Vector<Scalar>& s = proj.sigma;
    out.gap_warning = s.size() == 0 ||
                      (r < s.size() && s(r - 1) - s(r) <= Scalar(reduction.gap_tol) * s(0));
    return out;
  }
};

template <typename Scalar>
QbtbtPlan<Scalar> make_qbtbt_plan(const LdqoSystem<Scalar>& sys, const QbGramianOptions& options = {},
                                  const ReductionOptions& reduction = {}) {
  if (!is_hurwitz(sys.A())) throw NumericalError("A is not Hurwitz");
  QbtbtPlan<Scalar> plan;
  plan.qb = to_qb(sys);
  plan.reduction = reduction;
  plan.gramians = qb_truncated_gramians(plan.qb, options);
  const GramianFactor<Scalar> zp = psd_factor(plan.gramians.P, Scalar(reduction.gramian.rank_tol),
                                              Scalar(reduction.gramian.negative_tol));
  const GramianFactor<Scalar> zq = psd_factor(plan.gramians.Q, Scalar(reduction.gramian.rank_tol),
                                              Scalar(reduction.gramian.negative_tol));
  plan.basis = BalancingBasis<Scalar>(zp.factor, zq.factor, Scalar(reduction.sigma_floor));
  return plan;
}

template <typename Scalar>
ReductionOutcome<Scalar> reduce_qbtbt(const LdqoSystem<Scalar>& sys, Index r,
                                      const QbGramianOptions& options = {},
                                      const ReductionOptions& reduction = {}) {
  return make_qbtbt_plan(sys, options, reduction).reduce(r);
}

/// RK4 for the quadratic-bilinear vector field
///   x' = A x + B u + H (x kron x) + sum_j u_j N_j x,  y = C x,  x(0) = 0.
template <typename Scalar>
Trajectory<Scalar> simulate_qb(const QbSystem<Scalar>& qb, const SignalSpec& signal,
                               const SimulationOptions& options = {}) {
  const Index k = qb.n();
  const Vector<Scalar> b = qb.B.rowwise().sum();
  Matrix<Scalar> n_sum = Matrix<Scalar>::Zero(k, k);
  for (const auto& nj : qb.N) n_sum += nj;
  std::vector<Index> active;
  std::vector<Matrix<Scalar>> slices;
  for (Index a = 0; a < k; ++a) {
    if (qb.H.row(a).cwiseAbs().maxCoeff() == Scalar(0)) continue;
    Matrix<Scalar> s(k, k);
    for (Index i = 0; i < k; ++i) s.row(i) = qb.H.block(a, i * k, 1, k);
    active.push_back(a);
    slices.push_back(std::move(s));
  }
  auto rhs = [&](Scalar t, const Vector<Scalar>& x) -> Vector<Scalar> {
    const Scalar u = Scalar(signal(static_cast<double>(t)));
    Vector<Scalar> dx = qb.A * x + b * u + u * (n_sum * x);
    for (std::size_t i = 0; i < active.size(); ++i) dx(active[i]) += x.dot(slices[i] * x);
    return dx;
  };
  auto observe = [&](const Vector<Scalar>& x) { return Vector<Scalar>(qb.C * x); };
  return detail::rk4<Scalar>(rhs, Vector<Scalar>(Vector<Scalar>::Zero(k)), qb.C.rows(), observe,
                             options);
}

}  // namespace qomor
