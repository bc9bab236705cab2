#pragma once

// Action-prior analysis: per-environment Markov transition matrices estimated
// from traversal counts, per-node skew factors and skew histograms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "navprior/dataset.hpp"
#include "navprior/envgraph.hpp"
#include "navprior/errors.hpp"
#include "navprior/format.hpp"

namespace navprior {

struct TransitionRow {
  std::map<NodeId, double> counts;
  std::map<NodeId, double> probs;

  double total() const {
    double t = 0.0;
    for (const auto& [v, c] : counts) t += c;
    return t;
  }

  void normalize() {
    probs.clear();
    const double t = total();
    for (const auto& [v, c] : counts) probs[v] = c / t;
  }

  double max_prob() const {
    double m = 0.0;
    for (const auto& [v, p] : probs) m = std::max(m, p);
    return m;
  }
};

// Directed transition counts: a path step u->v contributes to row u only.
// Rows exist only for nodes with at least one observed outgoing step.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(std::string env_id) : env_id_(std::move(env_id)) {}

  const std::string& env_id() const noexcept { return env_id_; }
  const std::map<NodeId, TransitionRow>& rows() const noexcept { return rows_; }

  const TransitionRow* row(std::string_view node) const {
    auto it = rows_.find(std::string(node));
    return it == rows_.end() ? nullptr : &it->second;
  }

  double count(std::string_view from, std::string_view to) const {
    const auto* r = row(from);
    if (!r) return 0.0;
    auto it = r->counts.find(std::string(to));
    return it == r->counts.end() ? 0.0 : it->second;
  }

  double prob(std::string_view from, std::string_view to) const {
    const auto* r = row(from);
    if (!r) return 0.0;
    auto it = r->probs.find(std::string(to));
    return it == r->probs.end() ? 0.0 : it->second;
  }

  // Adds `weight` observations of from->to. Call normalize() afterwards.
  void add_count(const NodeId& from, const NodeId& to, double weight = 1.0) {
    if (!(weight > 0.0)) return;
    rows_[from].counts[to] += weight;
  }

  void normalize() {
    for (auto& [u, r] : rows_) r.normalize();
  }

  // Elementwise count sum with `other` scaled by `weight` (same environment).
  void merge(const TransitionMatrix& other, double weight = 1.0) {
    for (const auto& [u, r] : other.rows_) {
      for (const auto& [v, c] : r.counts) add_count(u, v, c * weight);
    }
    normalize();
  }

  void scale_counts(double factor) {
    if (!(factor > 0.0)) throw ConfigError("count scale factor must be > 0");
    for (auto& [u, r] : rows_) {
      for (auto& [v, c] : r.counts) c *= factor;
    }
    normalize();
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::object();
    for (const auto& [u, r] : rows_) {
      nlohmann::json succ = nlohmann::json::object();
      for (const auto& [v, c] : r.counts) {
        if (c == std::floor(c) && c < 9.0e15) {
          succ[v] = static_cast<std::int64_t>(c);
        } else {
          succ[v] = c;
        }
      }
      rows[u] = std::move(succ);
    }
    return {{"env_id", env_id_}, {"rows", std::move(rows)}};
  }

  // Probabilities are recomputed from counts.
  static TransitionMatrix from_json(const nlohmann::json& doc) {
    try {
      TransitionMatrix m(doc.at("env_id").get<std::string>());
      for (const auto& [u, succ] : doc.at("rows").items()) {
        for (const auto& [v, c] : succ.items()) {
          const double count = c.get<double>();
          if (!(count > 0.0)) throw DataError("MTM '" + m.env_id_ + "': non-positive count " + u + "->" + v);
          m.add_count(u, v, count);
        }
      }
      m.normalize();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("MTM JSON: ") + e.what());
    }
  }

 private:
  std::string env_id_;
  std::map<NodeId, TransitionRow> rows_;
};

using MtmMap = std::map<std::string, TransitionMatrix>;

// Uses only samples whose env_id matches g. Throws DataError on a step that is
// not an edge of g.
inline TransitionMatrix build_mtm(const PathDataset& ds, const EnvironmentGraph& g) {
  TransitionMatrix m(g.env_id());
  for (const auto& s : ds.samples) {
    if (s.env_id != g.env_id()) continue;
    for (std::size_t i = 1; i < s.path.size(); ++i) {
      if (!g.has_edge(s.path[i - 1], s.path[i])) {
        throw DataError("path " + std::to_string(s.path_id) + ": " + s.path[i - 1] + " -> " + s.path[i] +
                        " is not an edge of env '" + g.env_id() + "'");
      }
      m.add_count(s.path[i - 1], s.path[i]);
    }
  }
  m.normalize();
  return m;
}

// One matrix per environment that appears in ds and in graphs.
inline MtmMap build_mtms(const PathDataset& ds, const GraphMap& graphs) {
  std::set<std::string> envs;
  for (const auto& s : ds.samples) envs.insert(s.env_id);
  MtmMap out;
  for (const auto& env : envs) {
    auto it = graphs.find(env);
    if (it == graphs.end()) throw DataError("dataset references missing environment '" + env + "'");
    out.emplace(env, build_mtm(ds, it->second));
  }
  return out;
}

inline nlohmann::json mtms_to_json(const MtmMap& mtms) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [env, m] : mtms) arr.push_back(m.to_json());
  return arr;
}

inline MtmMap mtms_from_json(const nlohmann::json& doc) {
  MtmMap out;
  auto add = [&](const nlohmann::json& item) {
    auto m = TransitionMatrix::from_json(item);
    const auto env = m.env_id();
    out.emplace(env, std::move(m));
  };
  if (doc.is_array()) {
    for (const auto& item : doc) add(item);
  } else {
    add(doc);
  }
  return out;
}

// Largest outgoing probability divided by the uniform probability 1/degree.
// nullopt when the node has no row (never left in the dataset).
inline std::optional<double> skew_factor(const TransitionMatrix& mtm, const EnvironmentGraph& g, std::string_view node) {
  const auto degree = g.degree(node);
  const auto* r = mtm.row(node);
  if (!r) return std::nullopt;
  if (degree == 0) {
    throw DataError("env '" + g.env_id() + "': node '" + std::string(node) + "' has a transition row but no neighbors");
  }
  return r->max_prob() * static_cast<double>(degree);
}

struct SkewReport {
  std::string env_id;
  std::map<NodeId, std::optional<double>> per_node;
  double threshold = 1.5;

  std::size_t visited() const {
    return static_cast<std::size_t>(std::count_if(per_node.begin(), per_node.end(),
                                                  [](const auto& kv) { return kv.second.has_value(); }));
  }

  // Fraction of visited nodes with skew <= threshold (0 when none visited).
  double fraction_within() const { return fraction_where([&](double s) { return s <= threshold + 1e-12; }); }

  double fraction_at_least(double bound) const { return fraction_where([&](double s) { return s >= bound - 1e-12; }); }

 private:
  template <typename Pred>
  double fraction_where(Pred pred) const {
    std::size_t hit = 0;
    std::size_t total = 0;
    for (const auto& [id, s] : per_node) {
      if (!s) continue;
      ++total;
      if (pred(*s)) ++hit;
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
  }
};

inline SkewReport skew_report(const TransitionMatrix& mtm, const EnvironmentGraph& g, double threshold = 1.5) {
  SkewReport rep;
  rep.env_id = g.env_id();
  rep.threshold = threshold;
  for (const auto& vp : g.nodes()) rep.per_node.emplace(vp.id, skew_factor(mtm, g, vp.id));
  return rep;
}

// Pooled fraction over several reports, weighting every visited node equally.
inline double pooled_fraction_within(const std::vector<SkewReport>& reports) {
  std::size_t hit = 0;
  std::size_t total = 0;
  for (const auto& r : reports) {
    for (const auto& [id, s] : r.per_node) {
      if (!s) continue;
      ++total;
      if (*s <= r.threshold + 1e-12) ++hit;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

inline double pooled_fraction_at_least(const std::vector<SkewReport>& reports, double bound) {
  std::size_t hit = 0;
  std::size_t total = 0;
  for (const auto& r : reports) {
    for (const auto& [id, s] : r.per_node) {
      if (!s) continue;
      ++total;
      if (*s >= bound - 1e-12) ++hit;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

struct Histogram {
  std::vector<double> bin_edges;  // bins + 1 entries; last is +inf
  std::vector<std::size_t> counts;
  std::size_t none_count = 0;

  std::size_t total() const {
    std::size_t t = none_count;
    for (auto c : counts) t += c;
    return t;
  }
};

// Bins [1, 1+w), [1+w, 1+2w), ... up to max_bin, then an overflow bin
// [max_bin, inf). Absent skews are tallied in none_count.
inline Histogram skew_histogram(const std::vector<SkewReport>& reports, double bin_width, double max_bin) {
  if (!(bin_width > 0.0)) throw ConfigError("bin_width must be > 0");
  if (!(max_bin > 1.0)) throw ConfigError("max_bin must be > 1");
  Histogram h;
  const auto regular = static_cast<std::size_t>(std::ceil((max_bin - 1.0) / bin_width - 1e-9));
  for (std::size_t i = 0; i < regular; ++i) h.bin_edges.push_back(1.0 + static_cast<double>(i) * bin_width);
  h.bin_edges.push_back(max_bin);
  h.bin_edges.push_back(std::numeric_limits<double>::infinity());
  h.counts.assign(h.bin_edges.size() - 1, 0);
  for (const auto& r : reports) {
    for (const auto& [id, s] : r.per_node) {
      if (!s) {
        ++h.none_count;
        continue;
      }
      std::size_t bin = 0;
      while (bin + 1 < h.counts.size() && *s >= h.bin_edges[bin + 1]) ++bin;
      ++h.counts[bin];
    }
  }
  return h;
}

inline std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << format_number(h.bin_edges[i]) << ',' << format_number(h.bin_edges[i + 1]) << ',' << h.counts[i] << '\n';
  }
  out << "none,none," << h.none_count << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Appearance-based prior transfer
//
// An agent placed in an environment it has no counts for can still apply
// priors by recognising its state: each target node borrows the row of the
// most label-similar visited source node (Jaccard similarity, ties to the
// smallest (env_id, node_id)), and spreads that row's probability over its own
// neighbors by label similarity to the source successors.

inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::vector<std::string> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::string> inter;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  const double uni = static_cast<double>(sa.size() + sb.size() - inter.size());
  return static_cast<double>(inter.size()) / uni;
}

struct PriorSource {
  const EnvironmentGraph* graph;
  const TransitionMatrix* mtm;
};

inline TransitionMatrix transfer_mtm(const std::vector<PriorSource>& sources, const EnvironmentGraph& target) {
  struct Candidate {
    const std::string* env;
    const NodeId* node;
    const std::vector<std::string>* labels;
    const TransitionRow* row;
    const EnvironmentGraph* graph;
  };
  std::vector<Candidate> pool;
  for (const auto& src : sources) {
    for (const auto& [u, r] : src.mtm->rows()) {
      pool.push_back({&src.graph->env_id(), &u, &src.graph->node(u).labels, &r, src.graph});
    }
  }
  std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(*a.env, *a.node) < std::tie(*b.env, *b.node);
  });

  TransitionMatrix out(target.env_id());
  for (const auto& vp : target.nodes()) {
    const auto& nbrs = target.neighbors(vp.id);
    if (nbrs.empty()) continue;
    const Candidate* best = nullptr;
    double best_sim = 0.0;
    for (const auto& c : pool) {
      const double sim = jaccard(vp.labels, *c.labels);
      if (sim > best_sim) {
        best_sim = sim;
        best = &c;
      }
    }
    if (!best) continue;
    for (const auto& v : nbrs) {
      double w = 0.0;
      for (const auto& [succ, p] : best->row->probs) w += p * jaccard(target.node(v).labels, best->graph->node(succ).labels);
      out.add_count(vp.id, v, w);
    }
  }
  out.normalize();
  return out;
}

}  // namespace navprior
