#include "dkflab/graph.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <deque>
#include <set>
#include <string>

#include "dkflab/rng.hpp"

namespace dkflab {

std::size_t SensorGraph::degree_sum() const {
  std::size_t total = 0;
  for (const auto& list : neighbors) total += list.size();
  return total;
}

SensorGraph build_graph(int node_count, const std::vector<Edge>& edges) {
  if (node_count < 1) raise(Errc::ConfigError, "build_graph: node_count must be >= 1");
  SensorGraph g;
  g.node_count = node_count;
  g.laplacian = Eigen::MatrixXd::Zero(node_count, node_count);
  g.neighbors.resize(node_count);

  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges) {
    if (e.i < 0 || e.i >= node_count || e.j < 0 || e.j >= node_count) {
      raise(Errc::ConfigError, "build_graph: edge endpoint out of range");
    }
    if (e.i == e.j) raise(Errc::SelfLoop, "build_graph: edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) + ")");
    if (e.weight <= 0.0) raise(Errc::NonPositiveWeight, "build_graph: weight " + std::to_string(e.weight));
    const auto key = std::minmax(e.i, e.j);
    if (!seen.insert(key).second) {
      raise(Errc::DuplicateEdge, "build_graph: edge (" + std::to_string(key.first) + ", " + std::to_string(key.second) + ")");
    }
    g.edges.push_back({key.first, key.second, e.weight});
    g.laplacian(key.first, key.second) = -e.weight;
    g.laplacian(key.second, key.first) = -e.weight;
    g.laplacian(key.first, key.first) += e.weight;
    g.laplacian(key.second, key.second) += e.weight;
    g.neighbors[key.first].push_back(key.second);
    g.neighbors[key.second].push_back(key.first);
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  for (auto& list : g.neighbors) std::sort(list.begin(), list.end());
  return g;
}

bool is_connected(const SensorGraph& graph) {
  if (graph.node_count <= 1) return true;
  std::vector<bool> visited(graph.node_count, false);
  std::deque<int> frontier{0};
  visited[0] = true;
  int reached = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop_front();
    for (int w : graph.neighbors[v]) {
      if (!visited[w]) {
        visited[w] = true;
        ++reached;
        frontier.push_back(w);
      }
    }
  }
  return reached == graph.node_count;
}

SpectralData spectral(const SensorGraph& graph, std::optional<double> sigma_bar_override) {
  const int n = graph.node_count;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(graph.laplacian);
  if (es.info() != Eigen::Success) raise(Errc::NoConvergence, "spectral: eigensolver failed");

  SpectralData s;
  s.eigenvalues = es.eigenvalues();
  const double sigma_n = s.eigenvalues[n - 1];
  if (n > 1 && s.eigenvalues[1] <= 1e-9 * std::max(sigma_n, 1e-300)) {
    raise(Errc::Disconnected, "spectral: sigma_2 = " + std::to_string(s.eigenvalues[1]));
  }

  s.u = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  s.w = es.eigenvectors().rightCols(n - 1);
  for (Eigen::Index c = 0; c < s.w.cols(); ++c) {
    Eigen::Index imax = 0;
    s.w.col(c).cwiseAbs().maxCoeff(&imax);
    if (s.w(imax, c) < 0.0) s.w.col(c) = -s.w.col(c);
  }

  if (sigma_bar_override) {
    if (*sigma_bar_override < sigma_n) {
      raise(Errc::InvalidBound, "spectral: sigma_bar " + std::to_string(*sigma_bar_override) +
                                    " < sigma_N " + std::to_string(sigma_n));
    }
    s.sigma_bar = *sigma_bar_override;
  } else {
    s.sigma_bar = sigma_n;
  }
  return s;
}

SensorGraph random_connected_graph(int n, int extra_edges, std::uint64_t seed) {
  if (n < 1) raise(Errc::ConfigError, "random_connected_graph: n must be >= 1");
  if (extra_edges < 0) raise(Errc::ConfigError, "random_connected_graph: extra_edges must be >= 0");
  const long long max_extra =
      static_cast<long long>(n) * (n - 1) / 2 - (n - 1);
  if (extra_edges > max_extra) {
    raise(Errc::TooManyEdges, "random_connected_graph: extra_edges " + std::to_string(extra_edges) +
                                  " > " + std::to_string(max_extra));
  }

  Rng rng = Rng::stream(seed, "graph");
  std::set<std::pair<int, int>> edges;

  // Random-walk spanning tree: walk uniformly on the vertex set, keep
  // first-entry edges.
  std::vector<bool> in_tree(n, false);
  int current = 0;
  in_tree[0] = true;
  int covered = 1;
  while (covered < n) {
    const int next = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    if (next == current) continue;
    if (!in_tree[next]) {
      in_tree[next] = true;
      ++covered;
      edges.insert(std::minmax(current, next));
    }
    current = next;
  }

  const std::size_t target = edges.size() + static_cast<std::size_t>(extra_edges);
  while (edges.size() < target) {
    const int i = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    if (i == j) continue;
    edges.insert(std::minmax(i, j));
  }

  std::vector<Edge> list;
  list.reserve(edges.size());
  for (const auto& [i, j] : edges) list.push_back({i, j, 1.0});
  return build_graph(n, list);
}

}  // namespace dkflab
