#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace qomor {

enum class SignalKind { sin_plus_offset, damped_quadratic, exp_decay, white_noise_sampled, custom_sampled };

std::string to_string(SignalKind kind);

/// Declarative scalar input signal, applied identically to every input
/// channel. Sampled kinds are linearly interpolated between samples; past the
/// last sample they decay as exp(-rate * (t - t_end)) when rate > 0 and
/// vanish otherwise.
struct SignalSpec {
  SignalKind kind = SignalKind::exp_decay;
  double amplitude = 1.0;
  /// Decay rate (exp_decay, damped_quadratic) or declared tail decay rate
  /// (sampled kinds).
  double rate = 0.25;
  double period = 10.0;
  double offset = 1.0;
  std::vector<double> samples;
  double sample_dt = 0.0;
  std::uint64_t seed = 0;
  bool is_l2 = true;
  /// Integral of u(t)^2 over [0, inf) when known analytically.
  std::optional<double> closed_form_l2sq;

  /// amplitude * sin(2 pi t / period) + offset. Not square integrable.
  static SignalSpec sin_plus_offset(double amplitude = 1.0, double period = 10.0, double offset = 1.0);
  /// amplitude * t^2 * exp(-rate t).
  static SignalSpec damped_quadratic(double amplitude = 1.0, double rate = 0.2);
  /// amplitude * exp(-rate t).
  static SignalSpec exp_decay(double amplitude = 1.0, double rate = 0.25);
  /// Gaussian samples with the given standard deviation on [0, duration],
  /// drawn from Rng(seed).
  static SignalSpec white_noise(std::uint64_t seed, double sample_dt, double duration,
                                double stddev = 1.0);
  static SignalSpec custom(std::vector<double> samples, double sample_dt, double tail_rate = 0.0);

  double operator()(double t) const;
  std::string label() const;
};

/// Integral of u^power over [0, t_final] by quadrature: adaptive Simpson for
/// analytic kinds, exact piecewise-linear integration plus the declared tail
/// for sampled kinds. power must be 2 or 4.
double signal_quadrature(const SignalSpec& signal, int power,
                         double t_final = std::numeric_limits<double>::infinity());

/// ||u||_{L2}^2 of the scalar signal; closed form when available.
double signal_l2sq(const SignalSpec& signal,
                   double t_final = std::numeric_limits<double>::infinity());

/// ||u (x) u||_{L2} for the signal broadcast to `inputs` channels. Through
/// ||u(s1) (x) u(s2)|| = ||u(s1)|| ||u(s2)|| this equals ||u||_{L2}^2.
/// Throws ValidationError for signals that are not square integrable.
double u_tensor_l2(const SignalSpec& signal, long inputs = 1,
                   double t_final = std::numeric_limits<double>::infinity());

/// ||u^2||_{L2} = (int u^4)^{1/2} of the scalar signal (pointwise square).
double u_squared_l2(const SignalSpec& signal,
                    double t_final = std::numeric_limits<double>::infinity());

/// Parses "kind" or "kind:key=value,key=value". Keys: amplitude, rate,
/// period, offset, seed, dt, duration, stddev.
SignalSpec parse_signal(const std::string& text);

}  // namespace qomor
