#pragma once

#include <cmath>
#include <optional>
#include <sstream>

#include "qomor/linalg.hpp"
#include "qomor/signals.hpp"
#include "qomor/systems.hpp"

namespace qomor {

/// Uniform-grid samples t_k = k * dt, k = 0..N. outputs is p x (N+1);
/// states (when kept) is n x (N+1).
template <typename Scalar>
struct Trajectory {
  Vector<Scalar> times;
  Matrix<Scalar> outputs;
  std::optional<Matrix<Scalar>> states;
  Scalar dt = 0;

  Index samples() const { return times.size(); }
};

struct SimulationOptions {
  double t_final = 40.0;
  double dt = 1e-3;
  bool store_states = false;
};

namespace detail {

inline Index step_count(const SimulationOptions& options) {
  if (!(options.dt > 0) || !std::isfinite(options.dt)) throw ValidationError("dt must be positive");
  if (!(options.t_final > 0) || !std::isfinite(options.t_final)) {
    throw ValidationError("t_final must be positive");
  }
  return static_cast<Index>(std::ceil(options.t_final / options.dt - 1e-9));
}

/// Classic fourth-order Runge-Kutta for x' = rhs(t, x) from x(0) = x0 with
/// output column observe(x) at every grid point.
template <typename Scalar, typename Rhs, typename Observe>
Trajectory<Scalar> rk4(Rhs&& rhs, Vector<Scalar> x, Index outputs, Observe&& observe,
                       const SimulationOptions& options) {
  const Index steps = step_count(options);
  const Scalar h = Scalar(options.dt);
  Trajectory<Scalar> traj;
  traj.dt = h;
  traj.times.resize(steps + 1);
  traj.outputs.resize(outputs, steps + 1);
  if (options.store_states) traj.states = Matrix<Scalar>(x.size(), steps + 1);

  auto record = [&](Index k) {
    traj.times(k) = h * Scalar(k);
    traj.outputs.col(k) = observe(x);
    if (traj.states) traj.states->col(k) = x;
  };
  record(0);
  Vector<Scalar> k1, k2, k3, k4;
  for (Index k = 0; k < steps; ++k) {
    const Scalar t = h * Scalar(k);
    k1 = rhs(t, x);
    k2 = rhs(t + h / 2, Vector<Scalar>(x + (h / 2) * k1));
    k3 = rhs(t + h / 2, Vector<Scalar>(x + (h / 2) * k2));
    k4 = rhs(t + h, Vector<Scalar>(x + h * k3));
    x += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "integration blew up (non-finite state) at t = " << h * Scalar(k + 1)
         << "; reduce dt";
      throw NumericalError(os.str());
    }
    record(k + 1);
  }
  return traj;
}

template <typename Scalar>
Vector<Scalar> initial_state(Index n, const std::optional<Vector<Scalar>>& x0) {
  if (!x0) return Vector<Scalar>::Zero(n);
  if (x0->size() != n) throw ValidationError("initial state has the wrong dimension");
  require_finite(*x0, "initial state");
  return *x0;
}

}  // namespace detail

/// RK4 for x' = A x + B u, y = x^T M x; the scalar signal drives every input.
template <typename Scalar>
Trajectory<Scalar> simulate_ldqo(const LdqoSystem<Scalar>& sys, const SignalSpec& signal,
                                 const SimulationOptions& options = {},
                                 const std::optional<Vector<Scalar>>& x0 = std::nullopt) {
  const Matrix<Scalar>& a = sys.A();
  const Vector<Scalar> b = sys.B().rowwise().sum();
  const Matrix<Scalar>& m = sys.M();
  auto rhs = [&](Scalar t, const Vector<Scalar>& x) -> Vector<Scalar> {
    return a * x + b * Scalar(signal(static_cast<double>(t)));
  };
  auto observe = [&](const Vector<Scalar>& x) {
    Vector<Scalar> y(1);
    y(0) = x.dot(m * x);
    return y;
  };
  return detail::rk4<Scalar>(rhs, detail::initial_state<Scalar>(sys.n(), x0), 1, observe, options);
}

/// RK4 for x' = A x + B u, y = C x.
template <typename Scalar>
Trajectory<Scalar> simulate_ld(const LdSystem<Scalar>& sys, const SignalSpec& signal,
                               const SimulationOptions& options = {},
                               const std::optional<Vector<Scalar>>& x0 = std::nullopt) {
  const Vector<Scalar> b = sys.B.rowwise().sum();
  auto rhs = [&](Scalar t, const Vector<Scalar>& x) -> Vector<Scalar> {
    return sys.A * x + b * Scalar(signal(static_cast<double>(t)));
  };
  auto observe = [&](const Vector<Scalar>& x) { return Vector<Scalar>(sys.C * x); };
  return detail::rk4<Scalar>(rhs, detail::initial_state<Scalar>(sys.n(), x0), sys.p(), observe,
                             options);
}

/// Collapses linear outputs y_T into the scalar sum_i signs_i * y_T,i^2.
template <typename Scalar>
Trajectory<Scalar> quadratic_output(const Trajectory<Scalar>& linear, const Vector<Scalar>& signs) {
  if (signs.size() != linear.outputs.rows()) throw ValidationError("sign vector has the wrong length");
  Trajectory<Scalar> out = linear;
  out.outputs = (signs.asDiagonal() * linear.outputs.cwiseAbs2()).colwise().sum();
  return out;
}

/// Largest absolute output sample.
template <typename Scalar>
Scalar traj_linf(const Trajectory<Scalar>& a) {
  return a.outputs.size() == 0 ? Scalar(0) : a.outputs.cwiseAbs().maxCoeff();
}

/// Largest absolute difference of two trajectories on the same grid.
template <typename Scalar>
Scalar traj_linf(const Trajectory<Scalar>& a, const Trajectory<Scalar>& b) {
  if (a.samples() != b.samples() || a.outputs.rows() != b.outputs.rows() || a.dt != b.dt) {
    throw ValidationError("trajectories are not sampled on the same grid");
  }
  return (a.outputs - b.outputs).cwiseAbs().maxCoeff();
}

/// Trapezoid-rule (int ||y(t)||^2 dt)^{1/2}.
template <typename Scalar>
Scalar traj_l2(const Trajectory<Scalar>& a) {
  if (a.samples() < 2) return Scalar(0);
  const Vector<Scalar> sq = a.outputs.cwiseAbs2().colwise().sum().transpose();
  const Index last = sq.size() - 1;
  const Scalar sum = sq.sum() - (sq(0) + sq(last)) / 2;
  return std::sqrt(sum * a.dt);
}

}  // namespace qomor
