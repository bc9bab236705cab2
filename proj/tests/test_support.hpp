#pragma once

// Graph builders and brute-force oracles shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "navprior/navprior.hpp"

namespace navprior::testing {

inline std::string data_path(const std::string& name) { return std::string(NAVPRIOR_TEST_DATA) + "/" + name; }

inline Viewpoint vp(std::string id, double x, double y = 0.0, double z = 0.0, std::vector<std::string> labels = {}) {
  Viewpoint v;
  v.id = std::move(id);
  v.position = {x, y, z};
  v.labels = std::move(labels);
  return v;
}

// Unit-spaced chain n0 - n1 - ... along x.
inline EnvironmentGraph chain(int n, double spacing = 1.0, const std::string& env = "chain") {
  std::vector<Viewpoint> nodes;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    nodes.push_back(vp("n" + std::to_string(i), spacing * i));
    if (i > 0) edges.emplace_back("n" + std::to_string(i - 1), "n" + std::to_string(i));
  }
  return EnvironmentGraph(env, nodes, edges);
}

// Regular n-gon cycle with the given side length.
inline EnvironmentGraph cycle(int n, double side, const std::string& env = "cycle") {
  const double pi = std::acos(-1.0);
  const double radius = side / (2.0 * std::sin(pi / n));
  std::vector<Viewpoint> nodes;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * pi * i / n;
    nodes.push_back(vp("c" + std::to_string(i), radius * std::cos(a), radius * std::sin(a)));
    edges.emplace_back("c" + std::to_string(i), "c" + std::to_string((i + 1) % n));
  }
  return EnvironmentGraph(env, nodes, edges);
}

// Random geometric graph that may be disconnected (no component cut).
inline EnvironmentGraph random_graph(Rng& rng, int n, double extent, double radius, const std::string& env = "rand") {
  std::vector<Viewpoint> nodes;
  for (int i = 0; i < n; ++i) {
    nodes.push_back(vp(synthetic_node_id(i, n), rng.uniform(0.0, extent), rng.uniform(0.0, extent),
                       rng.uniform(0.0, 1.0), {i % 2 ? "red" : "blue", i % 3 ? "door" : "lamp"}));
  }
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (euclidean_distance(nodes[i], nodes[j]) <= radius) edges.emplace_back(nodes[i].id, nodes[j].id);
    }
  }
  return EnvironmentGraph(env, nodes, edges);
}

// Single-source Bellman-Ford over the edge list.
inline std::vector<double> bellman_ford(const EnvironmentGraph& g, std::size_t source) {
  const auto n = g.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  dist[source] = 0.0;
  const auto edges = g.edges();
  for (std::size_t round = 0; round + 1 < n; ++round) {
    bool changed = false;
    for (const auto& [a, b] : edges) {
      const auto ia = g.index_of(a);
      const auto ib = g.index_of(b);
      const double w = euclidean_distance(g.node_at(ia), g.node_at(ib));
      if (dist[ia] + w < dist[ib]) {
        dist[ib] = dist[ia] + w;
        changed = true;
      }
      if (dist[ib] + w < dist[ia]) {
        dist[ia] = dist[ib] + w;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return dist;
}

// Every self-avoiding walk of exactly `hops` edges from `start`, weighted by
// the probability that uniform choice among unvisited neighbors produces it.
// Walks that dead-end early contribute to `dead_end_mass`.
struct WalkEnumeration {
  std::vector<std::pair<std::vector<NodeId>, double>> walks;
  double dead_end_mass = 0.0;
};

inline void enumerate_walks(const EnvironmentGraph& g, std::vector<NodeId>& walk, int hops, double p,
                            WalkEnumeration& out) {
  if (static_cast<int>(walk.size()) == hops + 1) {
    out.walks.emplace_back(walk, p);
    return;
  }
  std::vector<NodeId> open;
  for (const auto& v : g.neighbors(walk.back())) {
    if (std::find(walk.begin(), walk.end(), v) == walk.end()) open.push_back(v);
  }
  if (open.empty()) {
    out.dead_end_mass += p;
    return;
  }
  for (const auto& v : open) {
    walk.push_back(v);
    enumerate_walks(g, walk, hops, p / static_cast<double>(open.size()), out);
    walk.pop_back();
  }
}

inline PathDataset random_dataset(const EnvironmentGraph& g, Rng& rng, int n_paths, int max_hops) {
  PathDataset ds;
  for (int k = 0; k < n_paths; ++k) {
    PathSample s;
    s.path_id = k;
    s.env_id = g.env_id();
    std::size_t cur = rng.uniform_index(g.size());
    while (g.neighbor_indices(cur).empty()) cur = rng.uniform_index(g.size());
    s.path.push_back(g.node_at(cur).id);
    const int hops = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(max_hops)));
    for (int h = 0; h < hops; ++h) {
      const auto& nb = g.neighbor_indices(cur);
      cur = nb[rng.uniform_index(nb.size())];
      s.path.push_back(g.node_at(cur).id);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace navprior::testing
