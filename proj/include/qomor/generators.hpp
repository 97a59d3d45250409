#pragma once

#include <cstdint>
#include <vector>

#include "qomor/systems.hpp"

namespace qomor {

enum class HeatOutput {
  /// M = c c^T with c = (1/n) 1: square of the mean temperature.
  average,
  /// M = I / n: mean of the squared temperatures.
  mean_square,
};

struct HeatOptions {
  double diffusivity = 0.01;
  /// Grid nodes driven by the inputs, one input per entry.
  std::vector<Index> input_nodes{0};
  HeatOutput output = HeatOutput::average;
};

/// Finite-difference heat equation on (0, 1) with Dirichlet ends, h = 1/(n+1):
/// A = (kappa / h^2) tridiag(1, -2, 1). Input j sets the temperature beyond
/// node input_nodes[j], which enters as B(i, j) = kappa / h^2.
LdqoSystem<double> gen_heat1d(Index n, const HeatOptions& options = {});

struct MsdOptions {
  double mass = 1.0;
  double stiffness = 1.0;
  double damping = 1.0;
  Index forcing_node = 0;
  /// Number of state indices carrying output weight (drawn without
  /// replacement from Rng(seed)); 0 selects min(n, 10).
  Index weighted_states = 0;
  /// Weights for the drawn indices; empty selects equal weights. They are
  /// normalized to sum to 1.
  std::vector<double> weights;
  std::uint64_t seed = 1;
};

/// Chain of k masses, the first tied to a wall and the last free:
///   Mm q'' + d q' + K q = f u,  K = stiffness * tridiag(-1, 2, -1) with
/// K(k-1, k-1) = stiffness. First-order state [q; q'] of size 2k and a
/// diagonal output weight on the drawn state indices.
LdqoSystem<double> gen_msd_chain(Index k_masses, const MsdOptions& options = {});

struct RandomOptions {
  /// Indefinite symmetric M instead of a PSD Gram matrix.
  bool indefinite_m = false;
};

/// Seeded random stable system. Stream order from Rng(seed): the n*n
/// normals of S (column-major), one uniform c, the n*m normals of B, the n*n
/// normals of G. A = S / sqrt(n) - shift I with the shift putting the
/// spectral abscissa at -(0.1 + 0.9 c). M = G^T G / n, or (G + G^T) / (2
/// sqrt(n)) when indefinite.
LdqoSystem<double> gen_random_stable(Index n, Index m, std::uint64_t seed,
                                     const RandomOptions& options = {});

}  // namespace qomor
