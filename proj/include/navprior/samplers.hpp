#pragma once

// Path samplers: endpoint-rejection shortest paths (the benchmark convention)
// and self-avoiding random walks with lengths drawn from a hop-count pmf.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "navprior/dataset.hpp"
#include "navprior/envgraph.hpp"
#include "navprior/errors.hpp"
#include "navprior/random.hpp"

namespace navprior {

enum class Strategy { kShortest, kRandomWalk };

inline std::string_view to_string(Strategy s) { return s == Strategy::kShortest ? "shortest" : "random-walk"; }

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "shortest") return Strategy::kShortest;
  if (s == "random-walk" || s == "random_walk") return Strategy::kRandomWalk;
  throw ConfigError("unknown sampling strategy '" + std::string(s) + "'");
}

struct SamplerConfig {
  double min_goal_distance = 3.0;  // meters
  int max_resample_attempts = 100;
  Strategy strategy = Strategy::kShortest;
  // Accept on geodesic rather than straight-line start-goal distance.
  bool geodesic_acceptance = false;
  // Hop-count window for shortest paths; 0 leaves that side open.
  int min_hops = 0;
  int max_hops = 0;

  void validate() const {
    if (!(min_goal_distance >= 0.0)) throw ConfigError("min_goal_distance must be >= 0");
    if (max_resample_attempts < 1) throw ConfigError("max_resample_attempts must be >= 1");
    if (min_hops < 0 || max_hops < 0) throw ConfigError("hop window bounds must be >= 0");
    if (max_hops > 0 && max_hops < min_hops) throw ConfigError("max_hops must be >= min_hops");
  }

  bool hops_allowed(std::size_t hops) const {
    return static_cast<int>(hops) >= min_hops && (max_hops == 0 || static_cast<int>(hops) <= max_hops);
  }
};

namespace detail {

inline std::vector<std::size_t> included_indices(const EnvironmentGraph& g) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.node_at(i).included) out.push_back(i);
  }
  return out;
}

inline double goal_distance(const EnvironmentGraph& g, const SamplerConfig& cfg, std::size_t a, std::size_t b,
                            const std::vector<double>* geodesic_from_a) {
  if (cfg.geodesic_acceptance) {
    return geodesic_from_a ? (*geodesic_from_a)[b] : g.distances_from(a)[b];
  }
  return g.edge_length(a, b);
}

}  // namespace detail

// Uniform (start, goal) pair with goal != start, rejected until the pair is
// reachable and at least min_goal_distance apart; returns the Dijkstra path.
inline PathSample sample_shortest_path(const EnvironmentGraph& g, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto pool = detail::included_indices(g);
  SamplerDiagnostics diag;
  if (pool.size() < 2) {
    diag.attempts = 0;
    throw SamplerExhaustedError(g.env_id(), diag);
  }
  while (diag.attempts < cfg.max_resample_attempts) {
    ++diag.attempts;
    const auto si = rng.uniform_index(pool.size());
    auto gi = rng.uniform_index(pool.size() - 1);
    if (gi >= si) ++gi;
    const auto start = pool[si];
    const auto goal = pool[gi];
    std::vector<std::size_t> prev;
    const auto dist = g.distances_from(start, &prev);
    if (dist[goal] == kUnreachable) {
      ++diag.unreachable;
      continue;
    }
    if (detail::goal_distance(g, cfg, start, goal, &dist) < cfg.min_goal_distance) {
      ++diag.too_close;
      continue;
    }
    PathSample s;
    s.env_id = g.env_id();
    for (auto cur = goal; cur != SIZE_MAX; cur = prev[cur]) s.path.push_back(g.node_at(cur).id);
    if (!cfg.hops_allowed(s.hops())) {
      ++diag.out_of_window;
      continue;
    }
    std::reverse(s.path.begin(), s.path.end());
    return s;
  }
  throw SamplerExhaustedError(g.env_id(), diag);
}

// Per attempt: uniform start, hop count h ~ lengths, then h uniform steps among
// neighbors not yet on the path. A dead end or a too-close endpoint discards
// the whole attempt.
inline PathSample sample_random_walk(const EnvironmentGraph& g, const LengthDistribution& lengths,
                                     const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  lengths.validate();
  const auto pool = detail::included_indices(g);
  SamplerDiagnostics diag;
  if (pool.size() < 2) throw SamplerExhaustedError(g.env_id(), diag);

  std::vector<char> on_path(g.size(), 0);
  std::vector<std::size_t> walk;
  std::vector<std::size_t> open;
  while (diag.attempts < cfg.max_resample_attempts) {
    ++diag.attempts;
    const auto start = pool[rng.uniform_index(pool.size())];
    const int hops = lengths.sample(rng);
    for (auto i : walk) on_path[i] = 0;
    walk.assign(1, start);
    on_path[start] = 1;
    bool stuck = false;
    for (int step = 0; step < hops; ++step) {
      open.clear();
      for (auto v : g.neighbor_indices(walk.back())) {
        if (!on_path[v]) open.push_back(v);
      }
      if (open.empty()) {
        stuck = true;
        break;
      }
      const auto next = open[rng.uniform_index(open.size())];
      on_path[next] = 1;
      walk.push_back(next);
    }
    if (stuck) {
      ++diag.dead_ends;
      continue;
    }
    if (detail::goal_distance(g, cfg, start, walk.back(), nullptr) < cfg.min_goal_distance) {
      ++diag.too_close;
      continue;
    }
    PathSample s;
    s.env_id = g.env_id();
    for (auto i : walk) s.path.push_back(g.node_at(i).id);
    return s;
  }
  throw SamplerExhaustedError(g.env_id(), diag);
}

// A sampling strategy bound to its configuration.
class PathSampler {
 public:
  explicit PathSampler(SamplerConfig cfg, std::optional<LengthDistribution> lengths = std::nullopt)
      : cfg_(std::move(cfg)), lengths_(std::move(lengths)) {
    cfg_.validate();
    if (cfg_.strategy == Strategy::kRandomWalk) {
      if (!lengths_) throw ConfigError("random-walk sampler requires a length distribution");
      lengths_->validate();
    }
  }

  const SamplerConfig& config() const noexcept { return cfg_; }

  PathSample operator()(const EnvironmentGraph& g, Rng& rng) const {
    if (cfg_.strategy == Strategy::kShortest) return sample_shortest_path(g, cfg_, rng);
    return sample_random_walk(g, *lengths_, cfg_, rng);
  }

 private:
  SamplerConfig cfg_;
  std::optional<LengthDistribution> lengths_;
};

struct SkippedEnvironment {
  std::string env_id;
  std::string reason;
  SamplerDiagnostics diagnostics;
};

struct SampledDataset {
  PathDataset dataset;
  std::vector<SkippedEnvironment> skipped;
};

// n_per_env paths per environment. Environment e (rank r in sorted id order)
// draws from the stream derive_seed(seed, e) and owns path ids
// id_offset + r*n_per_env + k, so output does not depend on input order.
// An environment whose sampler exhausts contributes no samples.
inline SampledDataset sample_dataset(const std::vector<const EnvironmentGraph*>& graphs, int n_per_env,
                                     const PathSampler& sampler, std::uint64_t seed, std::int64_t id_offset = 0) {
  if (n_per_env < 1) throw ConfigError("n_per_env must be >= 1");
  std::vector<const EnvironmentGraph*> ordered = graphs;
  std::sort(ordered.begin(), ordered.end(),
            [](const EnvironmentGraph* a, const EnvironmentGraph* b) { return a->env_id() < b->env_id(); });
  SampledDataset out;
  for (std::size_t rank = 0; rank < ordered.size(); ++rank) {
    const auto& g = *ordered[rank];
    Rng rng(derive_seed(seed, g.env_id()));
    std::vector<PathSample> batch;
    try {
      for (int k = 0; k < n_per_env; ++k) {
        auto s = sampler(g, rng);
        s.path_id = id_offset + static_cast<std::int64_t>(rank) * n_per_env + k;
        batch.push_back(std::move(s));
      }
    } catch (const SamplerExhaustedError& e) {
      out.skipped.push_back({g.env_id(), e.what(), e.diagnostics()});
      continue;
    }
    for (auto& s : batch) {
      out.dataset.provenance[s.path_id] = {0.0, path_length(g, s.path)};
      out.dataset.samples.push_back(std::move(s));
    }
  }
  return out;
}

inline SampledDataset sample_dataset(const GraphMap& graphs, int n_per_env, const PathSampler& sampler,
                                     std::uint64_t seed, std::int64_t id_offset = 0) {
  std::vector<const EnvironmentGraph*> ptrs;
  for (const auto& [id, g] : graphs) ptrs.push_back(&g);
  return sample_dataset(ptrs, n_per_env, sampler, seed, id_offset);
}

}  // namespace navprior
