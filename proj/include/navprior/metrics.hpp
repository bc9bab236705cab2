#pragma once

// Episode metrics: navigation error, success, oracle success and SPL
// (success * optimal / max(optimal, traversed)).

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "navprior/agents.hpp"
#include "navprior/envgraph.hpp"
#include "navprior/errors.hpp"
#include "navprior/format.hpp"

namespace navprior {

enum class DistanceMode { kGeodesic, kEuclidean };

inline DistanceMode distance_mode_from_string(std::string_view s) {
  if (s == "geodesic") return DistanceMode::kGeodesic;
  if (s == "euclidean") return DistanceMode::kEuclidean;
  throw ConfigError("unknown distance mode '" + std::string(s) + "'");
}

inline std::string_view to_string(DistanceMode m) { return m == DistanceMode::kGeodesic ? "geodesic" : "euclidean"; }

struct MetricConfig {
  double success_threshold = 3.0;  // meters, inclusive
  DistanceMode distance = DistanceMode::kGeodesic;
};

inline double goal_distance(const EnvironmentGraph& g, std::string_view node, std::string_view goal, DistanceMode mode) {
  if (mode == DistanceMode::kEuclidean) return euclidean_distance(g.node(node), g.node(goal));
  return geodesic_distance(g, node, goal);
}

// Distance from the final node to the goal; kUnreachable if disconnected.
inline double navigation_error(const EnvironmentGraph& g, const AgentTrace& trace, std::string_view goal,
                               DistanceMode mode = DistanceMode::kGeodesic) {
  g.index_of(goal);
  return goal_distance(g, trace.last(), goal, mode);
}

inline bool success(double ne, double threshold = 3.0) { return ne <= threshold; }

inline bool oracle_success(const EnvironmentGraph& g, const AgentTrace& trace, std::string_view goal,
                           const MetricConfig& cfg = {}) {
  const auto gi = g.index_of(goal);
  std::vector<double> from_goal;
  if (cfg.distance == DistanceMode::kGeodesic) from_goal = g.distances_from(gi);
  for (const auto& v : trace.visited) {
    const double d = cfg.distance == DistanceMode::kGeodesic ? from_goal[g.index_of(v)]
                                                             : euclidean_distance(g.node(v), g.node_at(gi));
    if (d <= cfg.success_threshold) return true;
  }
  return false;
}

inline double spl(bool succeeded, double optimal, double traversed) {
  // No route to the goal leaves the optimal length undefined.
  if (!succeeded || optimal == kUnreachable) return 0.0;
  const double denom = std::max(optimal, traversed);
  if (denom <= 0.0) return 1.0;
  return optimal / denom;
}

struct EpisodeMetrics {
  std::int64_t path_id = 0;
  std::string env_id;
  double ne = 0.0;
  bool success = false;
  bool oracle_success = false;
  double spl = 0.0;
  double trace_length = 0.0;
  double geodesic_optimal = 0.0;
};

struct AggregateMetrics {
  std::size_t episodes = 0;
  double ne = 0.0;
  double sr = 0.0;   // ratio in [0, 1]
  double osr = 0.0;  // ratio in [0, 1]
  double spl = 0.0;
  double trace_length = 0.0;
  double geodesic_optimal = 0.0;
};

struct EvalResult {
  std::vector<EpisodeMetrics> per_episode;  // path_id order
  AggregateMetrics aggregate;
};

inline EpisodeMetrics evaluate_episode(const EnvironmentGraph& g, std::int64_t path_id, const AgentTrace& trace,
                                       std::string_view goal, const MetricConfig& cfg = {}) {
  EpisodeMetrics m;
  m.path_id = path_id;
  m.env_id = g.env_id();
  m.ne = navigation_error(g, trace, goal, cfg.distance);
  m.success = success(m.ne, cfg.success_threshold);
  m.oracle_success = oracle_success(g, trace, goal, cfg);
  m.trace_length = path_length(g, trace.visited);
  m.geodesic_optimal = geodesic_distance(g, trace.start, goal);
  m.spl = spl(m.success, m.geodesic_optimal, m.trace_length);
  return m;
}

inline AggregateMetrics aggregate(const std::vector<EpisodeMetrics>& eps) {
  AggregateMetrics a;
  a.episodes = eps.size();
  if (eps.empty()) return a;
  for (const auto& e : eps) {
    a.ne += e.ne;
    a.sr += e.success ? 1.0 : 0.0;
    a.osr += e.oracle_success ? 1.0 : 0.0;
    a.spl += e.spl;
    a.trace_length += e.trace_length;
    a.geodesic_optimal += e.geodesic_optimal;
  }
  const double n = static_cast<double>(eps.size());
  a.ne /= n;
  a.sr /= n;
  a.osr /= n;
  a.spl /= n;
  a.trace_length /= n;
  a.geodesic_optimal /= n;
  return a;
}

// Goals keyed by path_id. Throws DataError naming the first trace whose goal
// or environment is missing.
inline EvalResult evaluate(const GraphMap& graphs, const std::vector<Rollout>& rollouts,
                           const std::map<std::int64_t, NodeId>& goals, const MetricConfig& cfg = {}) {
  std::vector<const Rollout*> ordered;
  for (const auto& r : rollouts) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Rollout* a, const Rollout* b) { return a->path_id < b->path_id; });
  EvalResult res;
  for (const auto* r : ordered) {
    auto goal = goals.find(r->path_id);
    if (goal == goals.end()) throw DataError("no goal for path_id " + std::to_string(r->path_id));
    auto g = graphs.find(r->trace.env_id);
    if (g == graphs.end()) throw DataError("path_id " + std::to_string(r->path_id) + ": missing environment '" + r->trace.env_id + "'");
    res.per_episode.push_back(evaluate_episode(g->second, r->path_id, r->trace, goal->second, cfg));
  }
  res.aggregate = aggregate(res.per_episode);
  return res;
}

inline std::map<std::int64_t, NodeId> goals_of(const PathDataset& ds) {
  std::map<std::int64_t, NodeId> out;
  for (const auto& s : ds.samples) out.emplace(s.path_id, s.goal());
  return out;
}

// Per-episode success columns are 0/1; the AGGREGATE row reports SR and OSR
// as percentages.
inline std::string eval_csv(const EvalResult& res) {
  std::ostringstream out;
  out << "path_id,env_id,ne,success,oracle_success,spl,trace_len,optimal_len\n";
  for (const auto& e : res.per_episode) {
    out << e.path_id << ',' << e.env_id << ',' << format_number(e.ne) << ',' << (e.success ? 1 : 0) << ','
        << (e.oracle_success ? 1 : 0) << ',' << format_number(e.spl) << ',' << format_number(e.trace_length) << ','
        << format_number(e.geodesic_optimal) << '\n';
  }
  const auto& a = res.aggregate;
  out << "AGGREGATE,," << format_number(a.ne) << ',' << format_number(100.0 * a.sr) << ','
      << format_number(100.0 * a.osr) << ',' << format_number(a.spl) << ',' << format_number(a.trace_length) << ','
      << format_number(a.geodesic_optimal) << '\n';
  return out.str();
}

}  // namespace navprior
