#pragma once

#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qomor/linalg.hpp"

namespace qomor {

namespace detail {

inline void require_shape(Index rows, Index cols, Index want_rows, Index want_cols,
                          const std::string& what) {
  if (rows != want_rows || cols != want_cols) {
    std::ostringstream os;
    os << what << " is " << rows << "x" << cols << ", expected " << want_rows << "x" << want_cols;
    throw ValidationError(os.str());
  }
}

}  // namespace detail

/// Linear dynamics with a scalar quadratic output:
///   x' = A x + B u,  y = x^T M x,  x(0) = 0.
/// M is stored symmetrized; the quadratic form is unchanged by this.
template <typename Scalar>
class LdqoSystem {
 public:
  LdqoSystem() = default;

  LdqoSystem(Matrix<Scalar> a, Matrix<Scalar> b, const Matrix<Scalar>& m_raw)
      : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() < 1) throw ValidationError("A must have at least one row");
    require_square(a_, "A");
    const Index n = a_.rows();
    if (b_.cols() < 1) throw ValidationError("B must have at least one column");
    detail::require_shape(b_.rows(), b_.cols(), n, b_.cols(), "B");
    detail::require_shape(m_raw.rows(), m_raw.cols(), n, n, "M");
    require_finite(a_, "A");
    require_finite(b_, "B");
    require_finite(m_raw, "M");
    m_ = symmetrize(m_raw);
  }

  const Matrix<Scalar>& A() const { return a_; }
  const Matrix<Scalar>& B() const { return b_; }
  const Matrix<Scalar>& M() const { return m_; }
  Index n() const { return a_.rows(); }
  Index m() const { return b_.cols(); }

  template <typename Derived>
  Scalar output(const Eigen::MatrixBase<Derived>& x) const {
    return x.dot(m_ * x);
  }

 private:
  Matrix<Scalar> a_;
  Matrix<Scalar> b_;
  Matrix<Scalar> m_;
};

template <typename DA, typename DB, typename DM>
LdqoSystem<typename DA::Scalar> make_ldqo(const Eigen::MatrixBase<DA>& a,
                                          const Eigen::MatrixBase<DB>& b,
                                          const Eigen::MatrixBase<DM>& m_raw,
                                          bool require_stable = false) {
  using Scalar = typename DA::Scalar;
  LdqoSystem<Scalar> sys(a.eval(), b.eval(), m_raw.eval());
  if (require_stable && !is_hurwitz(sys.A())) {
    throw NumericalError("A is not Hurwitz");
  }
  return sys;
}

/// Classical linear system x' = A x + B u, y = C x. C may have zero rows.
template <typename Scalar>
struct LdSystem {
  Matrix<Scalar> A;
  Matrix<Scalar> B;
  Matrix<Scalar> C;

  LdSystem() = default;
  LdSystem(Matrix<Scalar> a, Matrix<Scalar> b, Matrix<Scalar> c)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)) {
    require_square(A, "A");
    detail::require_shape(B.rows(), B.cols(), A.rows(), B.cols(), "B");
    detail::require_shape(C.rows(), C.cols(), C.rows(), A.rows(), "C");
    require_finite(A, "A");
    require_finite(B, "B");
    require_finite(C, "C");
  }

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }
};

/// Quadratic-bilinear realization
///   x' = A x + B u + H (x kron x) + sum_j u_j N_j x,  y = C x.
/// Used both for the structured output augmentation of an LdqoSystem and for
/// its projected (reduced) counterparts.
template <typename Scalar>
struct QbSystem {
  Matrix<Scalar> A;
  Matrix<Scalar> B;
  Matrix<Scalar> C;
  Matrix<Scalar> H;
  std::vector<Matrix<Scalar>> N;

  QbSystem() = default;
  QbSystem(Matrix<Scalar> a, Matrix<Scalar> b, Matrix<Scalar> c, Matrix<Scalar> h,
           std::vector<Matrix<Scalar>> n)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), H(std::move(h)), N(std::move(n)) {
    require_square(A, "A_qb");
    const Index k = A.rows();
    detail::require_shape(B.rows(), B.cols(), k, B.cols(), "B_qb");
    detail::require_shape(C.rows(), C.cols(), C.rows(), k, "C_qb");
    detail::require_shape(H.rows(), H.cols(), k, k * k, "H_qb");
    if (static_cast<Index>(N.size()) != B.cols()) {
      throw ValidationError("number of bilinear matrices N_qb must equal the input count");
    }
    for (const auto& nj : N) detail::require_shape(nj.rows(), nj.cols(), k, k, "N_qb");
  }

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
};

enum class FactorMode { psd_only, absolute_split };

/// Result of rewriting an LdqoSystem as an LdSystem with C^T diag(signs) C = M.
/// The original output is y = sum_i signs_i * (C x)_i^2; all signs are +1 in
/// psd_only mode.
template <typename Scalar>
struct LdRewrite {
  LdSystem<Scalar> system;
  Vector<Scalar> signs;
  FactorMode mode = FactorMode::psd_only;
};

template <typename Scalar>
LdRewrite<Scalar> to_ld(const LdqoSystem<Scalar>& sys, FactorMode mode = FactorMode::psd_only,
                        Scalar rank_tol = Scalar(1e-12)) {
  const Index n = sys.n();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(sys.M());
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of M failed");
  const Vector<Scalar>& lambda = eig.eigenvalues();
  const Scalar top = lambda.cwiseAbs().maxCoeff();
  if (mode == FactorMode::psd_only && lambda(0) < -rank_tol * top) {
    std::ostringstream os;
    os << "M is indefinite (most negative eigenvalue " << lambda(0)
       << "); use the absolute_split mode";
    throw NumericalError(os.str());
  }
  std::vector<Index> kept;
  for (Index i = n - 1; i >= 0; --i) {
    if (std::abs(lambda(i)) > rank_tol * top && (mode == FactorMode::absolute_split || lambda(i) > 0)) {
      kept.push_back(i);
    }
  }
  // Largest magnitudes first.
  std::stable_sort(kept.begin(), kept.end(),
                   [&](Index l, Index r) { return std::abs(lambda(l)) > std::abs(lambda(r)); });
  const Index q = static_cast<Index>(kept.size());
  Matrix<Scalar> c(q, n);
  Vector<Scalar> signs(q);
  for (Index k = 0; k < q; ++k) {
    const Scalar value = lambda(kept[k]);
    c.row(k) = std::sqrt(std::abs(value)) * eig.eigenvectors().col(kept[k]).transpose();
    signs(k) = value > 0 ? Scalar(1) : Scalar(-1);
  }
  return {LdSystem<Scalar>(sys.A(), sys.B(), std::move(c)), std::move(signs), mode};
}

/// S = A^T M + M^T A, the weight of the quadratic term in dy/dt.
template <typename Scalar>
Matrix<Scalar> output_derivative_weight(const LdqoSystem<Scalar>& sys) {
  return sys.A().transpose() * sys.M() + sys.M().transpose() * sys.A();
}

/// Augments the output as the last state, x_qb = [x; y], so that
///   y' = x^T S x + 2 sum_j u_j b_j^T M x.
/// The output selector is C_qb = [0 ... 0 1] and H_qb has a single nonzero
/// row, laid out so that H_qb (x_qb kron x_qb) = x^T S x.
template <typename Scalar>
QbSystem<Scalar> to_qb(const LdqoSystem<Scalar>& sys) {
  const Index n = sys.n();
  const Index k = n + 1;
  const Matrix<Scalar> s = output_derivative_weight(sys);

  Matrix<Scalar> a = Matrix<Scalar>::Zero(k, k);
  a.topLeftCorner(n, n) = sys.A();
  Matrix<Scalar> b = Matrix<Scalar>::Zero(k, sys.m());
  b.topRows(n) = sys.B();
  Matrix<Scalar> c = Matrix<Scalar>::Zero(1, k);
  c(0, n) = Scalar(1);
  Matrix<Scalar> h = Matrix<Scalar>::Zero(k, k * k);
  for (Index i = 0; i < n; ++i) {
    // Column block i of the last row holds [s_i^T 0].
    h.block(n, i * k, 1, n) = s.col(i).transpose();
  }
  std::vector<Matrix<Scalar>> nq;
  for (Index j = 0; j < sys.m(); ++j) {
    Matrix<Scalar> nj = Matrix<Scalar>::Zero(k, k);
    nj.block(n, 0, 1, n) = Scalar(2) * sys.B().col(j).transpose() * sys.M();
    nq.push_back(std::move(nj));
  }
  return QbSystem<Scalar>(std::move(a), std::move(b), std::move(c), std::move(h), std::move(nq));
}

/// Petrov-Galerkin projection (W^T A V, W^T B, V^T M V).
template <typename Scalar>
LdqoSystem<Scalar> project(const LdqoSystem<Scalar>& sys, const Matrix<Scalar>& v,
                           const Matrix<Scalar>& w) {
  return LdqoSystem<Scalar>(w.transpose() * sys.A() * v, w.transpose() * sys.B(),
                            v.transpose() * sys.M() * v);
}

/// State transformation x = T z: (T^-1 A T, T^-1 B, T^T M T).
template <typename Scalar>
LdqoSystem<Scalar> transform(const LdqoSystem<Scalar>& sys, const Matrix<Scalar>& t,
                             const Matrix<Scalar>& t_inv) {
  return project(sys, t, Matrix<Scalar>(t_inv.transpose()));
}

}  // namespace qomor
