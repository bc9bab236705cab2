#pragma once

// Environment graphs: viewpoints with metric positions joined by undirected
// navigability edges. Node storage is sorted by id so that index order and
// lexicographic id order coincide; every neighbor list and every Dijkstra
// tie-break inherits that ordering.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "navprior/errors.hpp"
#include "navprior/random.hpp"

namespace navprior {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Viewpoint {
  std::string id;
  Vec3 position;
  bool included = true;
  std::vector<std::string> labels;

  friend bool operator==(const Viewpoint&, const Viewpoint&) = default;
};

inline double euclidean_distance(const Vec3& a, const Vec3& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

inline double euclidean_distance(const Viewpoint& a, const Viewpoint& b) noexcept {
  return euclidean_distance(a.position, b.position);
}

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

using NodeId = std::string;
using Edge = std::pair<NodeId, NodeId>;

class EnvironmentGraph {
 public:
  EnvironmentGraph() = default;

  // Throws DataError when an invariant does not hold: duplicate ids,
  // non-finite positions, self-loops, dangling or excluded edge endpoints.
  EnvironmentGraph(std::string env_id, std::vector<Viewpoint> nodes, const std::vector<Edge>& edges)
      : env_id_(std::move(env_id)), nodes_(std::move(nodes)) {
    std::sort(nodes_.begin(), nodes_.end(),
              [](const Viewpoint& a, const Viewpoint& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& p = nodes_[i].position;
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
        throw DataError("env '" + env_id_ + "': non-finite position for node '" + nodes_[i].id + "'");
      }
      if (i > 0 && nodes_[i - 1].id == nodes_[i].id) {
        throw DataError("env '" + env_id_ + "': duplicate node id '" + nodes_[i].id + "'");
      }
      index_.emplace(nodes_[i].id, i);
    }
    adjacency_.assign(nodes_.size(), {});
    for (const auto& [a, b] : edges) {
      const auto ia = lookup(a);
      const auto ib = lookup(b);
      if (!ia || !ib) {
        throw DataError("env '" + env_id_ + "': edge references unknown node '" + (ia ? b : a) + "'");
      }
      if (*ia == *ib) throw DataError("env '" + env_id_ + "': self-loop at '" + a + "'");
      if (!nodes_[*ia].included || !nodes_[*ib].included) {
        throw DataError("env '" + env_id_ + "': edge " + a + "-" + b + " touches an excluded node");
      }
      adjacency_[*ia].push_back(*ib);
      adjacency_[*ib].push_back(*ia);
    }
    neighbor_ids_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      auto& adj = adjacency_[i];
      std::sort(adj.begin(), adj.end());
      adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
      for (auto j : adj) neighbor_ids_[i].push_back(nodes_[j].id);
    }
  }

  const std::string& env_id() const noexcept { return env_id_; }
  std::span<const Viewpoint> nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool contains(std::string_view id) const { return lookup(id).has_value(); }

  std::optional<std::size_t> lookup(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(std::string_view id) const {
    if (auto i = lookup(id)) return *i;
    throw UnknownNodeError(std::string(id));
  }

  const Viewpoint& node(std::string_view id) const { return nodes_[index_of(id)]; }
  const Viewpoint& node_at(std::size_t i) const { return nodes_.at(i); }

  // Action space at `id`, lexicographic by id.
  const std::vector<NodeId>& neighbors(std::string_view id) const { return neighbor_ids_[index_of(id)]; }
  const std::vector<std::size_t>& neighbor_indices(std::size_t i) const { return adjacency_.at(i); }

  std::size_t degree(std::string_view id) const { return adjacency_[index_of(id)].size(); }

  bool has_edge(std::string_view a, std::string_view b) const {
    const auto ia = lookup(a);
    const auto ib = lookup(b);
    if (!ia || !ib) return false;
    const auto& adj = adjacency_[*ia];
    return std::binary_search(adj.begin(), adj.end(), *ib);
  }

  std::size_t edge_count() const noexcept {
    std::size_t twice = 0;
    for (const auto& adj : adjacency_) twice += adj.size();
    return twice / 2;
  }

  // Unordered pairs with first < second, sorted.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      for (auto j : adjacency_[i]) {
        if (i < j) out.emplace_back(nodes_[i].id, nodes_[j].id);
      }
    }
    return out;
  }

  double edge_length(std::size_t i, std::size_t j) const {
    return euclidean_distance(nodes_[i].position, nodes_[j].position);
  }

  // Single-source Dijkstra over euclidean edge weights. `prev` (optional)
  // receives the predecessor tree; SIZE_MAX marks roots and unreached nodes.
  // Equal-distance frontier entries pop in index (= id) order and only strict
  // improvements relax, so the tree is deterministic.
  std::vector<double> distances_from(std::size_t source, std::vector<std::size_t>* prev = nullptr) const {
    const std::size_t n = nodes_.size();
    std::vector<double> dist(n, kUnreachable);
    if (prev) prev->assign(n, SIZE_MAX);
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
    dist.at(source) = 0.0;
    frontier.emplace(0.0, source);
    std::vector<char> done(n, 0);
    while (!frontier.empty()) {
      auto [d, u] = frontier.top();
      frontier.pop();
      if (done[u]) continue;
      done[u] = 1;
      for (auto v : adjacency_[u]) {
        const double cand = d + edge_length(u, v);
        if (cand < dist[v]) {
          dist[v] = cand;
          if (prev) (*prev)[v] = u;
          frontier.emplace(cand, v);
        }
      }
    }
    return dist;
  }

  // Minimum-weight path a..b inclusive, or nullopt when unreachable.
  std::optional<std::vector<NodeId>> shortest_path(std::string_view a, std::string_view b) const {
    const auto ia = index_of(a);
    const auto ib = index_of(b);
    std::vector<std::size_t> prev;
    const auto dist = distances_from(ia, &prev);
    if (dist[ib] == kUnreachable) return std::nullopt;
    std::vector<NodeId> path;
    for (auto cur = ib; cur != SIZE_MAX; cur = prev[cur]) path.push_back(nodes_[cur].id);
    std::reverse(path.begin(), path.end());
    return path;
  }

  // Connected components as index lists, each sorted, ordered by smallest member.
  std::vector<std::vector<std::size_t>> connected_components() const {
    std::vector<std::vector<std::size_t>> comps;
    std::vector<char> seen(nodes_.size(), 0);
    for (std::size_t s = 0; s < nodes_.size(); ++s) {
      if (seen[s]) continue;
      std::vector<std::size_t> comp{s};
      seen[s] = 1;
      for (std::size_t k = 0; k < comp.size(); ++k) {
        for (auto v : adjacency_[comp[k]]) {
          if (!seen[v]) {
            seen[v] = 1;
            comp.push_back(v);
          }
        }
      }
      std::sort(comp.begin(), comp.end());
      comps.push_back(std::move(comp));
    }
    return comps;
  }

  bool is_labeled() const {
    return !nodes_.empty() &&
           std::all_of(nodes_.begin(), nodes_.end(), [](const Viewpoint& v) { return !v.labels.empty(); });
  }

 private:
  std::string env_id_;
  std::vector<Viewpoint> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::vector<NodeId>> neighbor_ids_;
};

inline const std::vector<NodeId>& neighbors(const EnvironmentGraph& g, std::string_view node) {
  return g.neighbors(node);
}

// Geodesic distance in meters; kUnreachable when no path exists.
inline double geodesic_distance(const EnvironmentGraph& g, std::string_view a, std::string_view b) {
  const auto ia = g.index_of(a);
  const auto ib = g.index_of(b);
  if (ia == ib) return 0.0;
  return g.distances_from(ia)[ib];
}

// Sum of euclidean lengths along consecutive nodes. Repeated nodes add 0.
inline double path_length(const EnvironmentGraph& g, std::span<const NodeId> path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    total += euclidean_distance(g.node(path[i - 1]), g.node(path[i]));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Matterport connectivity files

// Parses a connectivity JSON array. An edge joins i and j only when both
// records are included and each lists the other as unobstructed.
inline EnvironmentGraph load_connectivity(std::string_view content, const std::string& env_id) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("connectivity '" + env_id + "': malformed JSON: " + e.what());
  }
  if (!doc.is_array()) throw DataError("connectivity '" + env_id + "': top level must be an array");

  const std::size_t n = doc.size();
  std::vector<Viewpoint> nodes;
  std::vector<std::vector<bool>> unobstructed;
  nodes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = doc[i];
    auto fail = [&](const std::string& what) {
      return DataError("connectivity '" + env_id + "' record " + std::to_string(i) + ": " + what);
    };
    try {
      if (!rec.is_object()) throw fail("expected an object");
      Viewpoint vp;
      vp.id = rec.at("image_id").get<std::string>();
      vp.included = rec.at("included").get<bool>();
      const auto pose = rec.at("pose").get<std::vector<double>>();
      if (pose.size() != 16) throw fail("pose has " + std::to_string(pose.size()) + " entries, expected 16");
      vp.position = {pose[3], pose[7], pose[11]};
      auto row = rec.at("unobstructed").get<std::vector<bool>>();
      if (row.size() != n) {
        throw fail("unobstructed has " + std::to_string(row.size()) + " entries, expected " + std::to_string(n));
      }
      nodes.push_back(std::move(vp));
      unobstructed.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
  }

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (nodes[i].included && nodes[j].included && unobstructed[i][j] && unobstructed[j][i]) {
        edges.emplace_back(nodes[i].id, nodes[j].id);
      }
    }
  }
  return EnvironmentGraph(env_id, std::move(nodes), edges);
}

// ---------------------------------------------------------------------------
// Self-describing graph JSON

inline nlohmann::json graph_to_json(const EnvironmentGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& vp : g.nodes()) {
    nodes.push_back({{"id", vp.id},
                     {"position", {vp.position.x, vp.position.y, vp.position.z}},
                     {"included", vp.included},
                     {"labels", vp.labels}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  return {{"env_id", g.env_id()}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

inline EnvironmentGraph graph_from_json(const nlohmann::json& doc) {
  try {
    std::vector<Viewpoint> nodes;
    for (const auto& rec : doc.at("nodes")) {
      Viewpoint vp;
      vp.id = rec.at("id").get<std::string>();
      const auto pos = rec.at("position").get<std::vector<double>>();
      if (pos.size() != 3) throw DataError("graph node '" + vp.id + "': position must have 3 components");
      vp.position = {pos[0], pos[1], pos[2]};
      vp.included = rec.value("included", true);
      vp.labels = rec.value("labels", std::vector<std::string>{});
      nodes.push_back(std::move(vp));
    }
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      const auto pair = e.get<std::vector<std::string>>();
      if (pair.size() != 2) throw DataError("graph edge must have exactly 2 endpoints");
      edges.emplace_back(pair[0], pair[1]);
    }
    return EnvironmentGraph(doc.at("env_id").get<std::string>(), std::move(nodes), edges);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("graph JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic environments

struct SynthConfig {
  std::string env_id = "synth";
  int node_count = 60;
  double radius = 2.2;  // meters
  Vec3 extent{15.0, 15.0, 0.0};
  std::vector<std::string> vocabulary{"red",  "blue",  "green", "yellow", "door",  "window",
                                      "sofa", "table", "lamp",  "plant",  "stairs", "rug"};
  int labels_per_node = 2;
  int max_attempts = 20;

  void validate() const {
    if (node_count < 2) throw ConfigError("synthetic env: node_count must be >= 2");
    if (!(radius > 0.0)) throw ConfigError("synthetic env: radius must be > 0");
    if (extent.x < 0 || extent.y < 0 || extent.z < 0) throw ConfigError("synthetic env: extent must be >= 0");
    if (max_attempts < 1) throw ConfigError("synthetic env: max_attempts must be >= 1");
    if (labels_per_node < 0 || static_cast<std::size_t>(labels_per_node) > vocabulary.size()) {
      throw ConfigError("synthetic env: labels_per_node must be in [0, |vocabulary|]");
    }
  }
};

inline std::string synthetic_node_id(int index, int count) {
  const int width = std::max<int>(3, static_cast<int>(std::to_string(count - 1).size()));
  std::string digits = std::to_string(index);
  return "n" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, digits.size()), '0') + digits;
}

// Random geometric graph in the box [0,extent]. Disconnected draws are retried
// up to max_attempts; failing that, the draw with the largest component (the
// earliest on ties) is cut to that component.
inline EnvironmentGraph generate_synthetic_env(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.node_count);
  std::optional<EnvironmentGraph> best;
  std::vector<std::size_t> best_comp;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    std::vector<Viewpoint> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& vp = nodes[i];
      vp.id = synthetic_node_id(static_cast<int>(i), cfg.node_count);
      vp.position = {rng.uniform(0.0, cfg.extent.x), rng.uniform(0.0, cfg.extent.y), rng.uniform(0.0, cfg.extent.z)};
      std::vector<std::size_t> pool(cfg.vocabulary.size());
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (int k = 0; k < cfg.labels_per_node; ++k) {
        const auto pick = static_cast<std::size_t>(k) + rng.uniform_index(pool.size() - static_cast<std::size_t>(k));
        std::swap(pool[static_cast<std::size_t>(k)], pool[pick]);
        vp.labels.push_back(cfg.vocabulary[pool[static_cast<std::size_t>(k)]]);
      }
      std::sort(vp.labels.begin(), vp.labels.end());
    }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (euclidean_distance(nodes[i], nodes[j]) <= cfg.radius) edges.emplace_back(nodes[i].id, nodes[j].id);
      }
    }
    EnvironmentGraph g(cfg.env_id, std::move(nodes), edges);
    auto comps = g.connected_components();
    if (comps.size() == 1) return g;
    auto largest = std::max_element(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
      return a.size() < b.size();
    });
    if (!best || largest->size() > best_comp.size()) {
      best = std::move(g);
      best_comp = std::move(*largest);
    }
  }

  std::vector<Viewpoint> kept;
  for (auto i : best_comp) kept.push_back(best->node_at(i));
  std::vector<Edge> kept_edges;
  for (const auto& [a, b] : best->edges()) {
    if (std::binary_search(best_comp.begin(), best_comp.end(), best->index_of(a))) kept_edges.emplace_back(a, b);
  }
  return EnvironmentGraph(cfg.env_id, std::move(kept), kept_edges);
}

// ---------------------------------------------------------------------------
// Graph directories

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

using GraphMap = std::map<std::string, EnvironmentGraph>;

// Loads every `<env>_connectivity.json` (Matterport) and every other `*.json`
// (self-describing graph) in `dir`.
inline GraphMap load_graph_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("graph directory '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  GraphMap graphs;
  constexpr std::string_view kSuffix = "_connectivity.json";
  for (const auto& f : files) {
    const auto name = f.filename().string();
    EnvironmentGraph g;
    if (name.size() > kSuffix.size() && name.ends_with(kSuffix)) {
      g = load_connectivity(read_file(f), name.substr(0, name.size() - kSuffix.size()));
    } else {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(read_file(f));
      } catch (const nlohmann::json::parse_error& e) {
        throw DataError("graph '" + f.string() + "': malformed JSON: " + e.what());
      }
      g = graph_from_json(doc);
    }
    const auto id = g.env_id();
    if (!graphs.emplace(id, std::move(g)).second) throw DataError("duplicate environment '" + id + "' in " + dir.string());
  }
  return graphs;
}

inline void save_graph_dir(const GraphMap& graphs, const std::filesystem::path& dir) {
  for (const auto& [id, g] : graphs) write_file(dir / (id + "_graph.json"), graph_to_json(g).dump(2) + "\n");
}

}  // namespace navprior
