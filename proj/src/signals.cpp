#include "qomor/signals.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "qomor/errors.hpp"
#include "qomor/random.hpp"

namespace qomor {

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::sin_plus_offset: return "sin_plus_offset";
    case SignalKind::damped_quadratic: return "damped_quadratic";
    case SignalKind::exp_decay: return "exp_decay";
    case SignalKind::white_noise_sampled: return "white_noise_sampled";
    case SignalKind::custom_sampled: return "custom_sampled";
  }
  return "unknown";
}

SignalSpec SignalSpec::sin_plus_offset(double amplitude, double period, double offset) {
  if (!(period > 0)) throw ValidationError("sinusoid period must be positive");
  SignalSpec s;
  s.kind = SignalKind::sin_plus_offset;
  s.amplitude = amplitude;
  s.period = period;
  s.offset = offset;
  s.rate = 0;
  s.is_l2 = false;
  return s;
}

SignalSpec SignalSpec::damped_quadratic(double amplitude, double rate) {
  if (!(rate > 0)) throw ValidationError("decay rate must be positive");
  SignalSpec s;
  s.kind = SignalKind::damped_quadratic;
  s.amplitude = amplitude;
  s.rate = rate;
  // int t^4 exp(-2 r t) dt = 4! / (2 r)^5
  s.closed_form_l2sq = amplitude * amplitude * 24.0 / std::pow(2.0 * rate, 5);
  return s;
}

SignalSpec SignalSpec::exp_decay(double amplitude, double rate) {
  if (!(rate > 0)) throw ValidationError("decay rate must be positive");
  SignalSpec s;
  s.kind = SignalKind::exp_decay;
  s.amplitude = amplitude;
  s.rate = rate;
  s.closed_form_l2sq = amplitude * amplitude / (2.0 * rate);
  return s;
}

SignalSpec SignalSpec::white_noise(std::uint64_t seed, double sample_dt, double duration, double stddev) {
  if (!(sample_dt > 0) || !(duration > 0)) throw ValidationError("noise grid must be positive");
  Rng rng(seed);
  const auto count = static_cast<std::size_t>(std::llround(duration / sample_dt)) + 1;
  std::vector<double> samples(count);
  for (auto& x : samples) x = stddev * rng.normal();
  SignalSpec s = custom(std::move(samples), sample_dt, 0.0);
  s.kind = SignalKind::white_noise_sampled;
  s.seed = seed;
  s.amplitude = stddev;
  return s;
}

SignalSpec SignalSpec::custom(std::vector<double> samples, double sample_dt, double tail_rate) {
  if (samples.empty()) throw ValidationError("sampled signal needs at least one sample");
  if (!(sample_dt > 0)) throw ValidationError("sample spacing must be positive");
  if (tail_rate < 0) throw ValidationError("tail decay rate must be nonnegative");
  for (double x : samples) {
    if (!std::isfinite(x)) throw ValidationError("sampled signal contains a non-finite value");
  }
  SignalSpec s;
  s.kind = SignalKind::custom_sampled;
  s.samples = std::move(samples);
  s.sample_dt = sample_dt;
  s.rate = tail_rate;
  return s;
}

double SignalSpec::operator()(double t) const {
  if (t < 0) return 0.0;
  switch (kind) {
    case SignalKind::sin_plus_offset:
      return amplitude * std::sin(2.0 * std::numbers::pi * t / period) + offset;
    case SignalKind::damped_quadratic:
      return amplitude * t * t * std::exp(-rate * t);
    case SignalKind::exp_decay:
      return amplitude * std::exp(-rate * t);
    case SignalKind::white_noise_sampled:
    case SignalKind::custom_sampled: {
      const double end = sample_dt * static_cast<double>(samples.size() - 1);
      if (t >= end) {
        if (t == end) return samples.back();
        return rate > 0 ? samples.back() * std::exp(-rate * (t - end)) : 0.0;
      }
      const double pos = t / sample_dt;
      const auto i = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(i);
      return samples[i] + frac * (samples[i + 1] - samples[i]);
    }
  }
  return 0.0;
}

std::string SignalSpec::label() const {
  std::ostringstream os;
  os << to_string(kind);
  return os.str();
}

namespace {

double power_of(double x, int power) { return power == 2 ? x * x : (x * x) * (x * x); }

double adaptive_simpson(const SignalSpec& u, int power, double a, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = power_of(u(lm), power);
  const double frm = power_of(u(rm), power);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(u, power, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adaptive_simpson(u, power, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double analytic_quadrature(const SignalSpec& u, int power, double t_final) {
  double end = t_final;
  if (!std::isfinite(end)) {
    if (!u.is_l2) throw ValidationError("signal " + u.label() + " is not square integrable");
    // The integrand decays like exp(-power * rate * t) times a polynomial.
    end = 80.0 / (power * u.rate);
  }
  const int pieces = 256;
  const double h = end / pieces;
  double total = 0;
  for (int k = 0; k < pieces; ++k) {
    const double a = k * h;
    const double b = (k + 1) * h;
    const double fa = power_of(u(a), power);
    const double fb = power_of(u(b), power);
    const double fm = power_of(u(0.5 * (a + b)), power);
    const double whole = h / 6.0 * (fa + 4.0 * fm + fb);
    total += adaptive_simpson(u, power, a, b, fa, fm, fb, whole, 1e-15 * std::max(1.0, std::abs(whole)), 30);
  }
  return total;
}

double sampled_quadrature(const SignalSpec& u, int power, double t_final) {
  const double h = u.sample_dt;
  const std::size_t n = u.samples.size();
  const double end = h * static_cast<double>(n - 1);
  double total = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a0 = i * h;
    if (a0 >= t_final) break;
    double a = u.samples[i];
    double b = u.samples[i + 1];
    double width = h;
    if (a0 + h > t_final) {
      width = t_final - a0;
      b = u(t_final);
    }
    // Exact integrals of a linear function's square and fourth power.
    if (power == 2) {
      total += width * (a * a + a * b + b * b) / 3.0;
    } else {
      total += width * (a * a * a * a + a * a * a * b + a * a * b * b + a * b * b * b + b * b * b * b) / 5.0;
    }
  }
  if (t_final > end && u.rate > 0) {
    const double last = u.samples.back();
    const double span = t_final - end;
    const double full = power_of(last, power) / (power * u.rate);
    total += std::isfinite(span) ? full * (1.0 - std::exp(-power * u.rate * span)) : full;
  }
  return total;
}

}  // namespace

double signal_quadrature(const SignalSpec& signal, int power, double t_final) {
  if (power != 2 && power != 4) throw ValidationError("signal quadrature supports powers 2 and 4");
  if (!(t_final > 0)) throw ValidationError("integration horizon must be positive");
  switch (signal.kind) {
    case SignalKind::white_noise_sampled:
    case SignalKind::custom_sampled:
      return sampled_quadrature(signal, power, t_final);
    default:
      return analytic_quadrature(signal, power, t_final);
  }
}

double signal_l2sq(const SignalSpec& signal, double t_final) {
  if (!std::isfinite(t_final)) {
    if (!signal.is_l2) throw ValidationError("signal " + signal.label() + " is not square integrable");
    if (signal.closed_form_l2sq) return *signal.closed_form_l2sq;
  }
  return signal_quadrature(signal, 2, t_final);
}

double u_tensor_l2(const SignalSpec& signal, long inputs, double t_final) {
  if (inputs < 1) throw ValidationError("input count must be positive");
  if (!signal.is_l2) {
    throw ValidationError("||u (x) u||_L2 is unbounded for the non-L2 signal " + signal.label());
  }
  return static_cast<double>(inputs) * signal_l2sq(signal, t_final);
}

double u_squared_l2(const SignalSpec& signal, double t_final) {
  if (!signal.is_l2 && !std::isfinite(t_final)) {
    throw ValidationError("signal " + signal.label() + " is not square integrable");
  }
  if (std::isfinite(t_final)) return std::sqrt(signal_quadrature(signal, 4, t_final));
  const double a4 = std::pow(signal.amplitude, 4);
  switch (signal.kind) {
    case SignalKind::exp_decay:
      return std::sqrt(a4 / (4.0 * signal.rate));
    case SignalKind::damped_quadratic:
      // int t^8 exp(-4 r t) dt = 8! / (4 r)^9
      return std::sqrt(a4 * 40320.0 / std::pow(4.0 * signal.rate, 9));
    default:
      return std::sqrt(signal_quadrature(signal, 4, t_final));
  }
}

namespace {

double parse_number(const std::string& key, const std::string& text) {
  double value = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError("signal parameter '" + key + "' is not a number: '" + text + "'");
  }
  return value;
}

}  // namespace

SignalSpec parse_signal(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::map<std::string, double> params;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("signal parameter '" + item + "' lacks '='");
      const std::string key = item.substr(0, eq);
      params[key] = parse_number(key, item.substr(eq + 1));
    }
  }
  auto get = [&](const std::string& key, double fallback) {
    const auto it = params.find(key);
    if (it == params.end()) return fallback;
    const double v = it->second;
    params.erase(it);
    return v;
  };
  SignalSpec s;
  if (kind == "exp_decay") {
    const double amplitude = get("amplitude", 1.0);
    s = SignalSpec::exp_decay(amplitude, get("rate", 0.25));
  } else if (kind == "damped_quadratic") {
    const double amplitude = get("amplitude", 1.0);
    s = SignalSpec::damped_quadratic(amplitude, get("rate", 0.2));
  } else if (kind == "sin_plus_offset") {
    const double amplitude = get("amplitude", 1.0);
    const double period = get("period", 10.0);
    s = SignalSpec::sin_plus_offset(amplitude, period, get("offset", 1.0));
  } else if (kind == "white_noise" || kind == "white_noise_sampled") {
    const double seed = get("seed", 0.0);
    if (seed < 0 || seed != std::floor(seed)) throw ValidationError("noise seed must be a nonnegative integer");
    const double dt = get("dt", 0.01);
    const double duration = get("duration", 40.0);
    s = SignalSpec::white_noise(static_cast<std::uint64_t>(seed), dt, duration, get("stddev", 1.0));
  } else {
    throw ValidationError("unknown signal kind '" + kind +
                          "' (expected exp_decay, damped_quadratic, sin_plus_offset or white_noise)");
  }
  if (!params.empty()) {
    throw ValidationError("unknown parameter '" + params.begin()->first + "' for signal " + kind);
  }
  return s;
}

}  // namespace qomor
