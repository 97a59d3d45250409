#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/SVD>

#include "qomor/gramians.hpp"
#include "qomor/systems.hpp"

namespace qomor {

enum class Method { spbt, ltbt, qbtbt };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::spbt: return "spbt";
    case Method::ltbt: return "ltbt";
    case Method::qbtbt: return "qbtbt";
  }
  return "unknown";
}

inline Method parse_method(const std::string& name) {
  if (name == "spbt") return Method::spbt;
  if (name == "ltbt") return Method::ltbt;
  if (name == "qbtbt") return Method::qbtbt;
  throw ValidationError("unknown method '" + name + "' (expected spbt, ltbt or qbtbt)");
}

/// Diagnostics of the quadratic-bilinear Gramian computation behind a QBTBT
/// reduction.
struct QbDiagnostics {
  int iterations = 0;
  bool converged = false;
  double regularization_eps = 0;
  std::string scheme;
};

template <typename Scalar>
struct ReductionOutcome {
  Method method = Method::spbt;
  Index order = 0;
  Matrix<Scalar> V;
  Matrix<Scalar> W;
  /// All computed singular values, descending.
  Vector<Scalar> singular_values;
  /// SPBT: the reduced system. LTBT: the induced LD_QO system (A, B, C^T S C).
  std::optional<LdqoSystem<Scalar>> reduced;
  std::optional<LdSystem<Scalar>> reduced_ld;
  /// Sign pattern of the LTBT output rows (see LdRewrite).
  Vector<Scalar> ld_signs;
  std::optional<QbSystem<Scalar>> reduced_qb;
  std::optional<QbDiagnostics> qb;
  bool stability_ok = false;
  bool gap_warning = false;
  Scalar biorthogonality_error = 0;
};

struct ReductionOptions {
  GramianOptions gramian{};
  /// Singular values below sigma_floor * sigma_1 cannot be retained.
  double sigma_floor = 1e-14;
  /// gap_warning is raised when sigma_r - sigma_{r+1} <= gap_tol * sigma_1.
  double gap_tol = 1e-8;
  FactorMode factor_mode = FactorMode::psd_only;
};

template <typename Scalar>
struct SquareRootProjectors {
  Matrix<Scalar> V;
  Matrix<Scalar> W;
  Vector<Scalar> sigma;
};

/// SVD of Zp^T Zq, kept so that projectors of any order can be cut from it.
template <typename Scalar>
class BalancingBasis {
 public:
  BalancingBasis() = default;

  BalancingBasis(Matrix<Scalar> zp, Matrix<Scalar> zq, Scalar sigma_floor = Scalar(1e-14))
      : zp_(std::move(zp)), zq_(std::move(zq)), floor_(sigma_floor) {
    if (zp_.rows() != zq_.rows()) throw ValidationError("Gramian factors have different row counts");
    const Matrix<Scalar> g = zp_.transpose() * zq_;
    if (g.size() == 0) {
      u_.resize(zp_.cols(), 0);
      v_.resize(zq_.cols(), 0);
      sigma_.resize(0);
      return;
    }
    Eigen::BDCSVD<Matrix<Scalar>> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u_ = svd.matrixU();
    v_ = svd.matrixV();
    sigma_ = svd.singularValues();
    // Largest-magnitude entry of each left singular vector made positive.
    for (Index j = 0; j < u_.cols(); ++j) {
      Index at = 0;
      u_.col(j).cwiseAbs().maxCoeff(&at);
      if (u_(at, j) < 0) {
        u_.col(j) *= Scalar(-1);
        v_.col(j) *= Scalar(-1);
      }
    }
  }

  const Vector<Scalar>& sigma() const { return sigma_; }
  Index states() const { return zp_.rows(); }

  /// Largest order whose singular values all clear the floor.
  Index available_order() const {
    if (sigma_.size() == 0 || !(sigma_(0) > 0)) return 0;
    return (sigma_.array() > floor_ * sigma_(0)).count();
  }

  SquareRootProjectors<Scalar> truncate(Index r) const {
    if (r < 1) throw ValidationError("reduced order must be at least 1");
    if (r > sigma_.size()) {
      std::ostringstream os;
      os << "reduced order " << r << " exceeds the rank of Zp^T Zq (" << sigma_.size() << ")";
      throw ValidationError(os.str());
    }
    if (r > available_order()) {
      std::ostringstream os;
      os << "sigma_" << r << " = " << sigma_(r - 1) << " is below the floor " << floor_
         << " * sigma_1; reduced order exceeds the numerical rank " << available_order();
      throw NumericalError(os.str());
    }
    const Vector<Scalar> scale = sigma_.head(r).cwiseSqrt().cwiseInverse();
    SquareRootProjectors<Scalar> out;
    out.V = zp_ * u_.leftCols(r) * scale.asDiagonal();
    out.W = zq_ * v_.leftCols(r) * scale.asDiagonal();
    out.sigma = sigma_;
    return out;
  }

 private:
  Matrix<Scalar> zp_;
  Matrix<Scalar> zq_;
  Matrix<Scalar> u_;
  Matrix<Scalar> v_;
  Vector<Scalar> sigma_;
  Scalar floor_ = Scalar(1e-14);
};

/// V = Zp U1 S1^{-1/2}, W = Zq V1 S1^{-1/2} from the SVD Zp^T Zq = U S V^T.
template <typename Scalar>
SquareRootProjectors<Scalar> square_root_projectors(const GramianFactor<Scalar>& zp,
                                                    const GramianFactor<Scalar>& zq, Index r,
                                                    Scalar sigma_floor = Scalar(1e-14)) {
  return BalancingBasis<Scalar>(zp.factor, zq.factor, sigma_floor).truncate(r);
}

/// Number of singular values with sigma_k >= theta * sigma_1 (at least 1).
template <typename Scalar>
Index order_for_threshold(const Vector<Scalar>& sigma, Scalar theta) {
  if (!(theta > 0) || !(theta <= 1)) throw ValidationError("threshold must lie in (0, 1]");
  if (sigma.size() == 0) throw ValidationError("no singular values available");
  const Index r = (sigma.array() >= theta * sigma(0)).count();
  return std::max<Index>(r, 1);
}

namespace detail {

template <typename Scalar>
void finish_outcome(ReductionOutcome<Scalar>& out, const Matrix<Scalar>& a_red,
                    const SquareRootProjectors<Scalar>& proj, Index r, const ReductionOptions& options) {
  out.order = r;
  out.V = proj.V;
  out.W = proj.W;
  out.singular_values = proj.sigma;
  out.biorthogonality_error = (proj.W.transpose() * proj.V - Matrix<Scalar>::Identity(r, r)).norm();
  out.stability_ok = a_red.allFinite() && is_hurwitz(a_red);
  const Vector<Scalar>& s = proj.sigma;
  out.gap_warning = r < s.size() && s(r - 1) - s(r) <= Scalar(options.gap_tol) * s(0);
}

}  // namespace detail

/// Gramians and SVD of the new method, reusable across orders.
template <typename Scalar>
struct SpbtPlan {
  LdqoSystem<Scalar> system;
  LdqoGramians<Scalar> gramians;
  BalancingBasis<Scalar> basis;
  ReductionOptions options;

  ReductionOutcome<Scalar> reduce(Index r) const {
    const SquareRootProjectors<Scalar> proj = basis.truncate(r);
    ReductionOutcome<Scalar> out;
    out.method = Method::spbt;
    out.reduced = project(system, proj.V, proj.W);
    detail::finish_outcome(out, out.reduced->A(), proj, r, options);
    return out;
  }
};

template <typename Scalar>
SpbtPlan<Scalar> make_spbt_plan(const LdqoSystem<Scalar>& sys, const ReductionOptions& options = {}) {
  SpbtPlan<Scalar> plan{sys, ldqo_gramians(sys, options.gramian), {}, options};
  plan.basis = BalancingBasis<Scalar>(plan.gramians.controllability.factor.factor,
                                      plan.gramians.observability.factor.factor,
                                      Scalar(options.sigma_floor));
  return plan;
}

/// Balanced truncation with the quadratic-output observability Gramian.
template <typename Scalar>
ReductionOutcome<Scalar> reduce_spbt(const LdqoSystem<Scalar>& sys, Index r,
                                     const ReductionOptions& options = {}) {
  return make_spbt_plan(sys, options).reduce(r);
}

/// Baseline: rewrite M = C^T C and balance the resulting linear system.
template <typename Scalar>
struct LtbtPlan {
  LdqoSystem<Scalar> system;
  LdRewrite<Scalar> rewrite;
  GramianResult<Scalar> controllability;
  GramianResult<Scalar> observability;
  BalancingBasis<Scalar> basis;
  ReductionOptions options;

  ReductionOutcome<Scalar> reduce(Index r) const {
    const SquareRootProjectors<Scalar> proj = basis.truncate(r);
    const LdSystem<Scalar>& ld = rewrite.system;
    ReductionOutcome<Scalar> out;
    out.method = Method::ltbt;
    out.reduced_ld = LdSystem<Scalar>(proj.W.transpose() * ld.A * proj.V, proj.W.transpose() * ld.B,
                                      ld.C * proj.V);
    out.ld_signs = rewrite.signs;
    const Matrix<Scalar>& c_red = out.reduced_ld->C;
    out.reduced = LdqoSystem<Scalar>(out.reduced_ld->A, out.reduced_ld->B,
                                     c_red.transpose() * rewrite.signs.asDiagonal() * c_red);
    detail::finish_outcome(out, out.reduced_ld->A, proj, r, options);
    return out;
  }
};

/// The controllability factor is computed exactly as for SPBT, so both
/// methods differ only on the observability side.
template <typename Scalar>
LtbtPlan<Scalar> make_ltbt_plan(const LdqoSystem<Scalar>& sys, const ReductionOptions& options = {}) {
  LtbtPlan<Scalar> plan;
  plan.system = sys;
  plan.options = options;
  plan.rewrite = to_ld(sys, options.factor_mode, Scalar(options.gramian.rank_tol));
  const SchurForm<Scalar> schur = real_schur(sys.A());
  plan.controllability = controllability_gramian(schur, sys, options.gramian);
  const LdSystem<Scalar>& ld = plan.rewrite.system;
  Matrix<Scalar> q = solve_lyapunov(schur, Op::transpose, ld.C.transpose() * ld.C,
                                    options.gramian.lyapunov);
  plan.observability = make_gramian_result(std::move(q), GramianSource::ld_observability,
                                           options.gramian);
  plan.basis = BalancingBasis<Scalar>(plan.controllability.factor.factor,
                                      plan.observability.factor.factor, Scalar(options.sigma_floor));
  return plan;
}

template <typename Scalar>
ReductionOutcome<Scalar> reduce_ltbt(const LdqoSystem<Scalar>& sys, Index r,
                                     const ReductionOptions& options = {}) {
  return make_ltbt_plan(sys, options).reduce(r);
}

/// State transformation to coordinates where P = Q = diag(sigma). With an
/// order k < n the transform is n x k, `inverse` is its k x n left inverse and
/// `system` is the balanced realization truncated to the leading k states.
template <typename Scalar>
struct BalancedRealization {
  Matrix<Scalar> transform;
  Matrix<Scalar> inverse;
  LdqoSystem<Scalar> system;
  Vector<Scalar> sigma;
};

template <typename Scalar>
BalancedRealization<Scalar> balanced_realization(const LdqoSystem<Scalar>& sys,
                                                 const ReductionOptions& options = {},
                                                 std::optional<Index> order = std::nullopt) {
  const LdqoGramians<Scalar> g = ldqo_gramians(sys, options.gramian);
  const Index n = sys.n();
  const Index k = order.value_or(n);
  if (k < 1 || k > n) throw ValidationError("balanced realization order must lie in [1, n]");
  if (!order && (g.controllability.factor.rank < n || g.observability.factor.rank < n)) {
    std::ostringstream os;
    os << "singular Gramian: numerical ranks P " << g.controllability.factor.rank << ", Q "
       << g.observability.factor.rank << " of " << n;
    throw NumericalError(os.str());
  }
  const BalancingBasis<Scalar> basis(g.controllability.factor.factor,
                                     g.observability.factor.factor, Scalar(options.sigma_floor));
  if (basis.available_order() < k) {
    throw NumericalError("singular Gramian product: fewer than the requested balanced states");
  }
  const SquareRootProjectors<Scalar> proj = basis.truncate(k);
  BalancedRealization<Scalar> out{proj.V, proj.W.transpose(), project(sys, proj.V, proj.W),
                                  proj.sigma.head(k)};
  // Second pass on the nearly balanced system: its transform is close to the
  // identity, so the Gramians become diagonal to working precision. For a
  // truncated realization this balances the k-state system itself.
  if (!is_hurwitz(out.system.A())) return out;
  const LdqoGramians<Scalar> g2 = ldqo_gramians(out.system, options.gramian);
  if (g2.controllability.factor.rank < k || g2.observability.factor.rank < k) return out;
  const BalancingBasis<Scalar> basis2(g2.controllability.factor.factor, g2.observability.factor.factor,
                                      Scalar(options.sigma_floor));
  if (basis2.available_order() < k) return out;
  const SquareRootProjectors<Scalar> proj2 = basis2.truncate(k);
  return {out.transform * proj2.V, proj2.W.transpose() * out.inverse,
          project(out.system, proj2.V, proj2.W), proj2.sigma.head(k)};
}

template <typename Scalar>
struct BalanceResidualReport {
  /// ||A11 S1 + S1 A11^T + B1 B1^T||_F.
  Scalar controllability_residual = 0;
  /// Largest eigenvalue of A11^T S1 + S1 A11 + M11 S1 M11.
  Scalar observability_max_eigenvalue = 0;
  /// -(A11^T S1 + S1 A11 + M11 S1 M11); equals M12 S2 M12^T for an exact
  /// balanced partition.
  Matrix<Scalar> observability_slack;
  bool inequality_ok = false;
};

/// Residuals of the partitioned balanced equations for the leading r states.
template <typename Scalar>
BalanceResidualReport<Scalar> check_reduced_balance_residual(const BalancedRealization<Scalar>& bal,
                                                              Index r) {
  const Index n = bal.system.n();
  if (r < 1 || r > n) throw ValidationError("partition order must lie in [1, n]");
  const auto a11 = bal.system.A().topLeftCorner(r, r);
  const auto b1 = bal.system.B().topRows(r);
  const auto m11 = bal.system.M().topLeftCorner(r, r);
  const Matrix<Scalar> s1 = bal.sigma.head(r).asDiagonal();
  BalanceResidualReport<Scalar> rep;
  rep.controllability_residual = (a11 * s1 + s1 * a11.transpose() + b1 * b1.transpose()).norm();
  const Matrix<Scalar> lhs = symmetrize(a11.transpose() * s1 + s1 * a11 + m11 * s1 * m11);
  rep.observability_slack = -lhs;
  rep.observability_max_eigenvalue = max_eigenvalue(lhs);
  rep.inequality_ok = rep.observability_max_eigenvalue <= Scalar(1e-8) * bal.sigma(0);
  return rep;
}

}  // namespace qomor
