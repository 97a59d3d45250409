#include "qomor/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qomor/random.hpp"

namespace qomor {

LdqoSystem<double> gen_heat1d(Index n, const HeatOptions& options) {
  if (n < 2) throw ValidationError("heat1d needs n >= 2");
  if (!(options.diffusivity > 0)) throw ValidationError("diffusivity must be positive");
  if (options.input_nodes.empty()) throw ValidationError("heat1d needs at least one input node");
  const double h = 1.0 / static_cast<double>(n + 1);
  const double scale = options.diffusivity / (h * h);
  Matrix<double> a = Matrix<double>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = -2.0 * scale;
    if (i > 0) a(i, i - 1) = scale;
    if (i + 1 < n) a(i, i + 1) = scale;
  }
  const auto m = static_cast<Index>(options.input_nodes.size());
  Matrix<double> b = Matrix<double>::Zero(n, m);
  for (Index j = 0; j < m; ++j) {
    const Index node = options.input_nodes[j];
    if (node < 0 || node >= n) throw ValidationError("heat1d input node out of range");
    b(node, j) = scale;
  }
  Matrix<double> weight;
  if (options.output == HeatOutput::average) {
    const Vector<double> c = Vector<double>::Constant(n, 1.0 / static_cast<double>(n));
    weight = c * c.transpose();
  } else {
    weight = Matrix<double>::Identity(n, n) / static_cast<double>(n);
  }
  return LdqoSystem<double>(std::move(a), std::move(b), weight);
}

LdqoSystem<double> gen_msd_chain(Index k_masses, const MsdOptions& options) {
  if (k_masses < 1) throw ValidationError("msd chain needs at least one mass");
  if (!(options.mass > 0) || !(options.stiffness > 0) || !(options.damping > 0)) {
    throw ValidationError("mass, stiffness and damping must be positive");
  }
  if (options.forcing_node < 0 || options.forcing_node >= k_masses) {
    throw ValidationError("forcing node out of range");
  }
  const Index k = k_masses;
  const Index n = 2 * k;
  Matrix<double> stiff = Matrix<double>::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    stiff(i, i) = i + 1 < k ? 2.0 * options.stiffness : options.stiffness;
    if (i > 0) stiff(i, i - 1) = -options.stiffness;
    if (i + 1 < k) stiff(i, i + 1) = -options.stiffness;
  }
  Matrix<double> a = Matrix<double>::Zero(n, n);
  a.topRightCorner(k, k).setIdentity();
  a.bottomLeftCorner(k, k) = -stiff / options.mass;
  a.bottomRightCorner(k, k) = -(options.damping / options.mass) * Matrix<double>::Identity(k, k);
  Matrix<double> b = Matrix<double>::Zero(n, 1);
  b(k + options.forcing_node, 0) = 1.0 / options.mass;

  const Index count = options.weighted_states > 0 ? options.weighted_states : std::min<Index>(n, 10);
  if (count > n) throw ValidationError("more weighted states than states");
  if (!options.weights.empty() && static_cast<Index>(options.weights.size()) != count) {
    throw ValidationError("weights must have one entry per weighted state");
  }
  // Partial Fisher-Yates shuffle picks the weighted indices.
  Rng rng(options.seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<double> w = options.weights.empty() ? std::vector<double>(count, 1.0) : options.weights;
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0)) throw ValidationError("weights must have a positive sum");
  Matrix<double> weight = Matrix<double>::Zero(n, n);
  for (Index i = 0; i < count; ++i) {
    if (w[static_cast<std::size_t>(i)] < 0) throw ValidationError("weights must be nonnegative");
    const Index at = order[static_cast<std::size_t>(i)];
    weight(at, at) = w[static_cast<std::size_t>(i)] / total;
  }
  return LdqoSystem<double>(std::move(a), std::move(b), weight);
}

LdqoSystem<double> gen_random_stable(Index n, Index m, std::uint64_t seed, const RandomOptions& options) {
  if (n < 1 || m < 1) throw ValidationError("random system needs n, m >= 1");
  Rng rng(seed);
  const double root = std::sqrt(static_cast<double>(n));
  Matrix<double> s(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) s(i, j) = rng.normal() / root;
  }
  const double target = -(0.1 + 0.9 * rng.uniform());
  const double shift = spectral_abscissa(s) - target;
  Matrix<double> a = s - shift * Matrix<double>::Identity(n, n);
  Matrix<double> b(n, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) b(i, j) = rng.normal();
  }
  Matrix<double> g(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  }
  Matrix<double> weight = options.indefinite_m ? Matrix<double>((g + g.transpose()) / (2.0 * root))
                                               : Matrix<double>(g.transpose() * g / static_cast<double>(n));
  return LdqoSystem<double>(std::move(a), std::move(b), weight);
}

}  // namespace qomor
