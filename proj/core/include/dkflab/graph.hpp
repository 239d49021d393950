#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "dkflab/errors.hpp"

namespace dkflab {

struct Edge {
  int i = 0;
  int j = 0;
  double weight = 1.0;
};

/// Undirected weighted communication graph with its Laplacian. The Laplacian
/// is assembled exactly from the edge weights: L[i][j] = -a_ij off-diagonal,
/// rows sum to zero by construction, so L·1 = 0 holds exactly.
struct SensorGraph {
  int node_count = 0;
  std::vector<Edge> edges;                     // normalized i < j, sorted
  Eigen::MatrixXd laplacian;
  std::vector<std::vector<int>> neighbors;     // sorted ascending per node

  double weight(int i, int j) const { return -laplacian(i, j); }
  std::size_t degree_sum() const;              // sum_i |N_i| = 2|E|
};

/// Eigen-structure of the Laplacian. u is the exact 1/sqrt(N)·1 vector; W
/// holds the remaining orthonormal eigenvectors with the sign convention
/// that each column's largest-magnitude entry is positive.
struct SpectralData {
  Eigen::VectorXd eigenvalues;  // ascending, eigenvalues[0] ~ 0
  Eigen::VectorXd u;
  Eigen::MatrixXd w;            // N x (N-1)
  double sigma_bar = 0.0;       // >= sigma_N; defaults to computed sigma_N

  double sigma_n() const { return eigenvalues[eigenvalues.size() - 1]; }
  /// Strict stability threshold for the dual-ascent update gains.
  double gain_bound() const { return 2.0 / (sigma_bar * sigma_bar); }
};

/// Validates and normalizes the edge list (0 <= i,j < n, i != j, weight > 0,
/// no duplicate unordered pairs) and assembles the Laplacian.
SensorGraph build_graph(int node_count, const std::vector<Edge>& edges);

/// Breadth-first reachability from node 0. Purely graph-theoretic.
bool is_connected(const SensorGraph& graph);

/// Symmetric eigendecomposition of the Laplacian. Requires a connected
/// graph; the override, when given, must be >= the computed sigma_N.
SpectralData spectral(const SensorGraph& graph,
                      std::optional<double> sigma_bar_override = std::nullopt);

/// Random spanning tree (random-walk construction) plus extra distinct
/// non-tree edges, all weights 1. Deterministic for a fixed seed.
SensorGraph random_connected_graph(int n, int extra_edges, std::uint64_t seed);

}  // namespace dkflab
