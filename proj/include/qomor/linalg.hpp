#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qomor/errors.hpp"

namespace qomor {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

/// Selects op(X) = X or op(X) = X^T in the Schur-based solvers, so that a
/// single Schur form serves both A and A^T.
enum class Op { identity, transpose };

/// Real Schur decomposition A = U T U^T. T is upper quasi-triangular with
/// 1x1 blocks for real eigenvalues and 2x2 blocks for complex pairs.
template <typename Scalar>
struct SchurForm {
  Matrix<Scalar> orthogonal;        // U
  Matrix<Scalar> quasi_triangular;  // T
};

enum class GramianSource {
  unspecified,
  controllability,
  qo_observability,
  ld_observability,
  qb_controllability,
  qb_observability,
};

/// Tall factor Z of a symmetric positive semi-definite matrix G = Z Z^T.
template <typename Scalar>
struct GramianFactor {
  Matrix<Scalar> factor;
  Index rank = 0;
  GramianSource source = GramianSource::unspecified;
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const std::string& what) {
  if (!x.allFinite()) {
    throw ValidationError(what + " contains NaN or Inf entries");
  }
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& x, const std::string& what) {
  if (x.rows() != x.cols()) {
    std::ostringstream os;
    os << what << " must be square, got " << x.rows() << "x" << x.cols();
    throw ValidationError(os.str());
  }
}

template <typename Derived>
Matrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& x) {
  return (x + x.transpose()) / typename Derived::Scalar(2);
}

/// ||X - X^T||_F / max(1, ||X||_F).
template <typename Derived>
typename Derived::Scalar asymmetry(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (x - x.transpose()).norm() / std::max(Scalar(1), x.norm());
}

namespace detail {

// Start index of every diagonal block of a quasi-triangular matrix stored in
// upper form, terminated by n.
template <typename Scalar>
std::vector<Index> diagonal_blocks(const Matrix<Scalar>& t) {
  std::vector<Index> starts;
  const Index n = t.rows();
  for (Index i = 0; i < n;) {
    starts.push_back(i);
    i += (i + 1 < n && t(i + 1, i) != Scalar(0)) ? 2 : 1;
  }
  starts.push_back(n);
  return starts;
}

// Solves S Y + Y T = R for blocks of size at most 2x2 through the
// vectorized (I kron S + T^T kron I) system.
template <typename Scalar>
Matrix<Scalar> solve_small_sylvester(const Matrix<Scalar>& s, const Matrix<Scalar>& t,
                                     const Matrix<Scalar>& r) {
  const Index p = s.rows();
  const Index q = t.rows();
  Matrix<Scalar> k = Matrix<Scalar>::Zero(p * q, p * q);
  for (Index b = 0; b < q; ++b) {
    for (Index a = 0; a < p; ++a) {
      for (Index c = 0; c < p; ++c) k(a + b * p, c + b * p) += s(a, c);
      for (Index d = 0; d < q; ++d) k(a + b * p, a + d * p) += t(d, b);
    }
  }
  Eigen::FullPivLU<Matrix<Scalar>> lu(k);
  if (!lu.isInvertible()) {
    throw NumericalError("Sylvester operator is singular: spectra of A and -B overlap");
  }
  const Vector<Scalar> y = lu.solve(Eigen::Map<const Vector<Scalar>>(r.data(), p * q));
  return Eigen::Map<const Matrix<Scalar>>(y.data(), p, q);
}

}  // namespace detail

template <typename Derived>
SchurForm<typename Derived::Scalar> real_schur(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require_square(a, "Schur input");
  require_finite(a, "Schur input");
  const Index n = a.rows();
  Eigen::RealSchur<Matrix<Scalar>> schur(n);
  schur.compute(a.eval());
  if (schur.info() != Eigen::Success) {
    std::ostringstream os;
    os << "real Schur iteration did not converge within "
       << Eigen::RealSchur<Matrix<Scalar>>::m_maxIterationsPerRow * n << " iterations (n = " << n
       << ")";
    throw NumericalError(os.str());
  }
  SchurForm<Scalar> out{schur.matrixU(), schur.matrixT()};
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 2; i < n; ++i) out.quasi_triangular(i, j) = Scalar(0);
  }
  return out;
}

template <typename Scalar>
Vector<std::complex<Scalar>> eigenvalues(const SchurForm<Scalar>& schur) {
  const Matrix<Scalar>& t = schur.quasi_triangular;
  const std::vector<Index> blocks = detail::diagonal_blocks(t);
  Vector<std::complex<Scalar>> lambda(t.rows());
  for (std::size_t k = 0; k + 1 < blocks.size(); ++k) {
    const Index i = blocks[k];
    if (blocks[k + 1] - i == 1) {
      lambda(i) = t(i, i);
      continue;
    }
    const Scalar mean = (t(i, i) + t(i + 1, i + 1)) / 2;
    const Scalar half_diff = (t(i, i) - t(i + 1, i + 1)) / 2;
    const Scalar disc = half_diff * half_diff + t(i, i + 1) * t(i + 1, i);
    if (disc >= 0) {
      lambda(i) = mean + std::sqrt(disc);
      lambda(i + 1) = mean - std::sqrt(disc);
    } else {
      lambda(i) = std::complex<Scalar>(mean, std::sqrt(-disc));
      lambda(i + 1) = std::complex<Scalar>(mean, -std::sqrt(-disc));
    }
  }
  return lambda;
}

template <typename Scalar>
Scalar spectral_abscissa(const SchurForm<Scalar>& schur) {
  if (schur.quasi_triangular.rows() == 0) return -std::numeric_limits<Scalar>::infinity();
  return eigenvalues(schur).real().maxCoeff();
}

template <typename Derived>
typename Derived::Scalar spectral_abscissa(const Eigen::MatrixBase<Derived>& a) {
  return spectral_abscissa(real_schur(a));
}

/// Hurwitz test with the margin rule: abscissa < -margin * ||A||_F.
template <typename Scalar>
bool is_hurwitz(const SchurForm<Scalar>& schur, Scalar margin = Scalar(1e-10)) {
  return spectral_abscissa(schur) < -margin * schur.quasi_triangular.norm();
}

template <typename Derived>
bool is_hurwitz(const Eigen::MatrixBase<Derived>& a,
                typename Derived::Scalar margin = typename Derived::Scalar(1e-10)) {
  return is_hurwitz(real_schur(a), margin);
}

/// Solves op(A) X + X op(B) + C = 0 by back-substitution over the real
/// Schur forms of A and B (Bartels-Stewart).
template <typename Scalar, typename DerivedC>
Matrix<Scalar> solve_sylvester(const SchurForm<Scalar>& a, Op a_op, const SchurForm<Scalar>& b,
                               Op b_op, const Eigen::MatrixBase<DerivedC>& c) {
  const Index m = a.quasi_triangular.rows();
  const Index n = b.quasi_triangular.rows();
  if (c.rows() != m || c.cols() != n) {
    std::ostringstream os;
    os << "Sylvester right-hand side is " << c.rows() << "x" << c.cols() << ", expected " << m
       << "x" << n;
    throw ValidationError(os.str());
  }
  require_finite(c, "Sylvester right-hand side");
  if (m == 0 || n == 0) return Matrix<Scalar>::Zero(m, n);

  const Vector<std::complex<Scalar>> la = eigenvalues(a);
  const Vector<std::complex<Scalar>> lb = eigenvalues(b);
  const Scalar scale = a.quasi_triangular.norm() + b.quasi_triangular.norm();
  const Scalar floor = 100 * std::numeric_limits<Scalar>::epsilon() * scale;
  Scalar separation = std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) separation = std::min(separation, std::abs(la(i) + lb(j)));
  }
  if (!(separation > floor)) {
    std::ostringstream os;
    os << "spectra of A and -B overlap: min |lambda_A + lambda_B| = " << separation;
    throw NumericalError(os.str());
  }

  const bool s_upper = a_op == Op::identity;
  const bool t_upper = b_op == Op::identity;
  const Matrix<Scalar> s = s_upper ? a.quasi_triangular : Matrix<Scalar>(a.quasi_triangular.transpose());
  const Matrix<Scalar> t = t_upper ? b.quasi_triangular : Matrix<Scalar>(b.quasi_triangular.transpose());
  const std::vector<Index> row_blocks = detail::diagonal_blocks(a.quasi_triangular);
  const std::vector<Index> col_blocks = detail::diagonal_blocks(b.quasi_triangular);

  const Matrix<Scalar> f = -(a.orthogonal.transpose() * c * b.orthogonal);
  Matrix<Scalar> y = Matrix<Scalar>::Zero(m, n);
  const std::size_t ncb = col_blocks.size() - 1;
  const std::size_t nrb = row_blocks.size() - 1;
  for (std::size_t jj = 0; jj < ncb; ++jj) {
    const std::size_t jb = t_upper ? jj : ncb - 1 - jj;
    const Index j0 = col_blocks[jb];
    const Index q = col_blocks[jb + 1] - j0;
    Matrix<Scalar> rhs = f.middleCols(j0, q);
    if (t_upper) {
      rhs.noalias() -= y.leftCols(j0) * t.block(0, j0, j0, q);
    } else {
      const Index tail = n - j0 - q;
      rhs.noalias() -= y.rightCols(tail) * t.block(j0 + q, j0, tail, q);
    }
    const Matrix<Scalar> t_jj = t.block(j0, j0, q, q);
    for (std::size_t ii = 0; ii < nrb; ++ii) {
      const std::size_t ib = s_upper ? nrb - 1 - ii : ii;
      const Index i0 = row_blocks[ib];
      const Index p = row_blocks[ib + 1] - i0;
      Matrix<Scalar> r = rhs.middleRows(i0, p);
      if (s_upper) {
        const Index tail = m - i0 - p;
        r.noalias() -= s.block(i0, i0 + p, p, tail) * y.block(i0 + p, j0, tail, q);
      } else {
        r.noalias() -= s.block(i0, 0, p, i0) * y.block(0, j0, i0, q);
      }
      y.block(i0, j0, p, q) = detail::solve_small_sylvester<Scalar>(s.block(i0, i0, p, p), t_jj, r);
    }
  }
  Matrix<Scalar> x = a.orthogonal * y * b.orthogonal.transpose();
  if (!x.allFinite()) throw NumericalError("Sylvester solution is not finite");
  return x;
}

/// ||A X + X B + C||_F / max(1, ||C||_F).
template <typename DA, typename DB, typename DX, typename DC>
typename DA::Scalar sylvester_residual(const Eigen::MatrixBase<DA>& a,
                                       const Eigen::MatrixBase<DB>& b,
                                       const Eigen::MatrixBase<DX>& x,
                                       const Eigen::MatrixBase<DC>& c) {
  using Scalar = typename DA::Scalar;
  return (a * x + x * b + c).norm() / std::max(Scalar(1), c.norm());
}

/// ||A X + X A^T + W||_F / max(1, ||W||_F).
template <typename DA, typename DX, typename DW>
typename DA::Scalar lyapunov_residual(const Eigen::MatrixBase<DA>& a,
                                      const Eigen::MatrixBase<DX>& x,
                                      const Eigen::MatrixBase<DW>& w) {
  return sylvester_residual(a, a.transpose(), x, w);
}

template <typename DA, typename DB, typename DC>
Matrix<typename DA::Scalar> solve_sylvester(const Eigen::MatrixBase<DA>& a,
                                            const Eigen::MatrixBase<DB>& b,
                                            const Eigen::MatrixBase<DC>& c) {
  using Scalar = typename DA::Scalar;
  require_square(a, "Sylvester A");
  require_square(b, "Sylvester B");
  const SchurForm<Scalar> sa = real_schur(a);
  const SchurForm<Scalar> sb = real_schur(b);
  Matrix<Scalar> x = solve_sylvester(sa, Op::identity, sb, Op::identity, c);
  // One step of iterative refinement when rounding left a visible residual.
  const Matrix<Scalar> r = a * x + x * b + c;
  if (r.norm() > Scalar(1000) * Eigen::NumTraits<Scalar>::epsilon() * std::max(Scalar(1), c.norm())) {
    x += solve_sylvester(sa, Op::identity, sb, Op::identity, r);
  }
  return x;
}

struct LyapunovOptions {
  double hurwitz_margin = 1e-10;
  double symmetry_tol = 1e-10;
};

/// Solves op(A) X + X op(A)^T + W = 0 for symmetric W; the result is
/// symmetrized before return.
template <typename Scalar, typename DerivedW>
Matrix<Scalar> solve_lyapunov(const SchurForm<Scalar>& a, Op op, const Eigen::MatrixBase<DerivedW>& w,
                              const LyapunovOptions& options = {}) {
  const Index n = a.quasi_triangular.rows();
  if (w.rows() != n || w.cols() != n) {
    std::ostringstream os;
    os << "Lyapunov right-hand side is " << w.rows() << "x" << w.cols() << ", expected " << n
       << "x" << n;
    throw ValidationError(os.str());
  }
  if (asymmetry(w) > Scalar(options.symmetry_tol)) {
    throw ValidationError("Lyapunov right-hand side is not symmetric");
  }
  if (!is_hurwitz(a, Scalar(options.hurwitz_margin))) {
    std::ostringstream os;
    os << "matrix is not Hurwitz (spectral abscissa " << spectral_abscissa(a) << ")";
    throw NumericalError(os.str());
  }
  const Op other = op == Op::identity ? Op::transpose : Op::identity;
  return symmetrize(solve_sylvester(a, op, a, other, symmetrize(w)));
}

/// Solves A X + X A^T + W = 0.
template <typename DA, typename DW>
Matrix<typename DA::Scalar> solve_lyapunov(const Eigen::MatrixBase<DA>& a,
                                           const Eigen::MatrixBase<DW>& w,
                                           const LyapunovOptions& options = {}) {
  using Scalar = typename DA::Scalar;
  require_square(a, "Lyapunov A");
  const SchurForm<Scalar> sa = real_schur(a);
  Matrix<Scalar> x = solve_lyapunov(sa, Op::identity, w, options);
  const Matrix<Scalar> r = symmetrize(a * x + x * a.transpose() + w);
  if (r.norm() > Scalar(1000) * Eigen::NumTraits<Scalar>::epsilon() * std::max(Scalar(1), w.norm())) {
    x += solve_lyapunov(sa, Op::identity, r, options);
  }
  return x;
}

/// Solves A^T X + X A + W = 0.
template <typename DA, typename DW>
Matrix<typename DA::Scalar> solve_adjoint_lyapunov(const Eigen::MatrixBase<DA>& a,
                                                   const Eigen::MatrixBase<DW>& w,
                                                   const LyapunovOptions& options = {}) {
  return solve_lyapunov(a.transpose(), w, options);
}

/// Factor Z of a numerically positive semi-definite G with G ~ Z Z^T, from
/// the symmetric eigendecomposition. Eigenvalues at or below
/// rank_tol * max|lambda| are dropped; negative eigenvalues no smaller than
/// -negative_tol * max|lambda| are treated as zero (negative_tol < 0 selects
/// rank_tol). Columns come in descending eigenvalue order.
template <typename Derived>
GramianFactor<typename Derived::Scalar> psd_factor(
    const Eigen::MatrixBase<Derived>& g,
    typename Derived::Scalar rank_tol = typename Derived::Scalar(1e-12),
    typename Derived::Scalar negative_tol = typename Derived::Scalar(-1)) {
  using Scalar = typename Derived::Scalar;
  require_square(g, "PSD factor input");
  require_finite(g, "PSD factor input");
  if (asymmetry(g) > Scalar(1e-8)) throw ValidationError("PSD factor input is not symmetric");
  if (negative_tol < 0) negative_tol = rank_tol;
  const Index n = g.rows();
  GramianFactor<Scalar> out;
  if (n == 0) {
    out.factor.resize(0, 0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(symmetrize(g));
  if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  const Vector<Scalar>& lambda = eig.eigenvalues();  // ascending
  const Scalar top = std::max(std::abs(lambda(0)), std::abs(lambda(n - 1)));
  if (top == Scalar(0)) {
    out.factor = Matrix<Scalar>::Zero(n, 0);
    return out;
  }
  if (lambda(0) < -negative_tol * top) {
    std::ostringstream os;
    os << "matrix is indefinite: most negative eigenvalue " << lambda(0) << " (largest magnitude "
       << top << ")";
    throw NumericalError(os.str());
  }
  Index k = 0;
  while (k < n && lambda(n - 1 - k) > rank_tol * top) ++k;
  out.rank = k;
  out.factor.resize(n, k);
  for (Index j = 0; j < k; ++j) {
    out.factor.col(j) = eig.eigenvectors().col(n - 1 - j) * std::sqrt(lambda(n - 1 - j));
  }
  return out;
}

/// Number of singular values above rel_tol * sigma_max.
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& x,
                     typename Derived::Scalar rel_tol = typename Derived::Scalar(1e-12)) {
  if (x.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix<typename Derived::Scalar>> svd(x.eval());
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0) return 0;
  return (sv.array() > rel_tol * sv(0)).count();
}

/// Largest eigenvalue of a symmetric matrix.
template <typename Derived>
typename Derived::Scalar max_eigenvalue(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() == 0) return -std::numeric_limits<Scalar>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(symmetrize(x), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(x.rows() - 1);
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() == 0) return std::numeric_limits<Scalar>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(symmetrize(x), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

}  // namespace qomor
