#pragma once

// Navigation agents. The random and MTM-greedy agents use no language; the
// templated speaker/follower pair stands in for learned instruction models
// and grounds directives in node labels; the blend agent mixes an MTM prior
// with the follower's label match.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "navprior/dataset.hpp"
#include "navprior/envgraph.hpp"
#include "navprior/errors.hpp"
#include "navprior/prioranalysis.hpp"
#include "navprior/random.hpp"

namespace navprior {

enum class StopReason { kStepBudget, kStopAction, kDeadEnd };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::kStepBudget: return "step-budget";
    case StopReason::kStopAction: return "stop-action";
    case StopReason::kDeadEnd: return "dead-end";
  }
  return "step-budget";
}

inline StopReason stop_reason_from_string(std::string_view s) {
  if (s == "step-budget") return StopReason::kStepBudget;
  if (s == "stop-action") return StopReason::kStopAction;
  if (s == "dead-end") return StopReason::kDeadEnd;
  throw DataError("unknown stopped_by '" + std::string(s) + "'");
}

struct AgentTrace {
  std::string env_id;
  NodeId start;
  std::vector<NodeId> visited;  // includes start
  StopReason stopped_by = StopReason::kStepBudget;
  int misses = 0;  // follower steps with no matching neighbor

  const NodeId& last() const { return visited.back(); }

  friend bool operator==(const AgentTrace&, const AgentTrace&) = default;
};

// What the agent does at a node the MTM has never seen leave.
enum class UnseenNodePolicy { kUniformRandom, kStop };

inline constexpr int kDefaultSteps = 5;

inline AgentTrace run_random_agent(const EnvironmentGraph& g, std::string_view start, int steps, Rng& rng) {
  AgentTrace t{g.env_id(), g.node(start).id, {g.node(start).id}, StopReason::kStepBudget, 0};
  for (int k = 0; k < steps; ++k) {
    const auto& nbrs = g.neighbors(t.last());
    if (nbrs.empty()) {
      t.stopped_by = StopReason::kDeadEnd;
      break;
    }
    t.visited.push_back(nbrs[rng.uniform_index(nbrs.size())]);
  }
  return t;
}

// Argmax of the MTM row over the action space; the first (smallest id)
// maximum wins. nullopt when the node has no row.
inline std::optional<NodeId> greedy_choice(const TransitionMatrix& mtm, const std::vector<NodeId>& nbrs,
                                           std::string_view current) {
  const auto* row = mtm.row(current);
  if (!row || nbrs.empty()) return std::nullopt;
  const NodeId* best = &nbrs.front();
  double best_p = mtm.prob(current, nbrs.front());
  for (std::size_t i = 1; i < nbrs.size(); ++i) {
    const double p = mtm.prob(current, nbrs[i]);
    if (p > best_p) {
      best_p = p;
      best = &nbrs[i];
    }
  }
  return *best;
}

inline AgentTrace run_greedy_mtm_agent(const EnvironmentGraph& g, const TransitionMatrix& mtm, std::string_view start,
                                       int steps, Rng& rng,
                                       UnseenNodePolicy policy = UnseenNodePolicy::kUniformRandom) {
  AgentTrace t{g.env_id(), g.node(start).id, {g.node(start).id}, StopReason::kStepBudget, 0};
  for (int k = 0; k < steps; ++k) {
    const auto& nbrs = g.neighbors(t.last());
    if (nbrs.empty()) {
      t.stopped_by = StopReason::kDeadEnd;
      break;
    }
    if (auto next = greedy_choice(mtm, nbrs, t.last())) {
      t.visited.push_back(*next);
    } else if (policy == UnseenNodePolicy::kStop) {
      t.stopped_by = StopReason::kStopAction;
      break;
    } else {
      t.visited.push_back(nbrs[rng.uniform_index(nbrs.size())]);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Templated speaker / follower

inline constexpr std::string_view kAmbiguousToken = "ambig";
inline constexpr std::string_view kDirectiveSeparator = "then";

struct Directive {
  std::vector<std::string> tokens;  // sorted label tokens, may include kAmbiguousToken

  bool ambiguous() const { return std::find(tokens.begin(), tokens.end(), kAmbiguousToken) != tokens.end(); }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& t : tokens) {
      if (t != kAmbiguousToken) out.push_back(t);
    }
    return out;
  }

  friend bool operator==(const Directive&, const Directive&) = default;
};

struct Instruction {
  std::vector<Directive> steps;

  bool ambiguous() const {
    return std::any_of(steps.begin(), steps.end(), [](const Directive& d) { return d.ambiguous(); });
  }

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

namespace detail {

inline bool contains_all(const std::vector<std::string>& haystack, const std::vector<std::string>& needles) {
  return std::all_of(needles.begin(), needles.end(), [&](const std::string& n) {
    return std::find(haystack.begin(), haystack.end(), n) != haystack.end();
  });
}

}  // namespace detail

// Directive for hop from -> to: the labels of `to` chosen by greedy set cover
// so that every other neighbor of `from` lacks at least one of them.
inline Directive describe_hop(const EnvironmentGraph& g, std::string_view from, std::string_view to) {
  std::vector<std::string> target = g.node(to).labels;
  std::sort(target.begin(), target.end());
  target.erase(std::unique(target.begin(), target.end()), target.end());

  std::vector<const std::vector<std::string>*> rivals;
  for (const auto& v : g.neighbors(from)) {
    if (v != to) rivals.push_back(&g.node(v).labels);
  }
  for (const auto* r : rivals) {
    if (detail::contains_all(*r, target)) {
      Directive d{target};
      d.tokens.emplace_back(kAmbiguousToken);
      std::sort(d.tokens.begin(), d.tokens.end());
      return d;
    }
  }

  std::vector<std::string> chosen;
  std::vector<char> covered(rivals.size(), 0);
  std::size_t remaining = rivals.size();
  while (remaining > 0) {
    const std::string* best = nullptr;
    std::size_t best_gain = 0;
    for (const auto& label : target) {
      if (std::find(chosen.begin(), chosen.end(), label) != chosen.end()) continue;
      std::size_t gain = 0;
      for (std::size_t i = 0; i < rivals.size(); ++i) {
        if (!covered[i] && std::find(rivals[i]->begin(), rivals[i]->end(), label) == rivals[i]->end()) ++gain;
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = &label;
      }
    }
    chosen.push_back(*best);
    for (std::size_t i = 0; i < rivals.size(); ++i) {
      if (!covered[i] && std::find(rivals[i]->begin(), rivals[i]->end(), *best) == rivals[i]->end()) {
        covered[i] = 1;
        --remaining;
      }
    }
  }
  // A hop with no rivals still names one landmark.
  if (chosen.empty() && !target.empty()) chosen.push_back(target.front());
  std::sort(chosen.begin(), chosen.end());
  return Directive{chosen};
}

inline Instruction generate_instruction(const EnvironmentGraph& g, const PathSample& path) {
  if (!g.is_labeled()) {
    throw DataError("env '" + g.env_id() + "' has no node labels; instructions need a synthetic environment");
  }
  Instruction instr;
  for (std::size_t i = 1; i < path.path.size(); ++i) {
    if (!g.has_edge(path.path[i - 1], path.path[i])) {
      throw DataError("path " + std::to_string(path.path_id) + ": " + path.path[i - 1] + " -> " + path.path[i] +
                      " is not an edge");
    }
    instr.steps.push_back(describe_hop(g, path.path[i - 1], path.path[i]));
  }
  return instr;
}

// Token form: directives joined by kDirectiveSeparator.
inline Tokens render_instruction(const Instruction& instr) {
  Tokens out;
  for (std::size_t i = 0; i < instr.steps.size(); ++i) {
    if (i > 0) out.emplace_back(kDirectiveSeparator);
    out.insert(out.end(), instr.steps[i].tokens.begin(), instr.steps[i].tokens.end());
  }
  return out;
}

inline Instruction parse_instruction(const Tokens& tokens) {
  Instruction instr;
  if (tokens.empty()) return instr;
  instr.steps.emplace_back();
  for (const auto& t : tokens) {
    if (t == kDirectiveSeparator) {
      instr.steps.emplace_back();
    } else {
      instr.steps.back().tokens.push_back(t);
    }
  }
  for (auto& d : instr.steps) std::sort(d.tokens.begin(), d.tokens.end());
  return instr;
}

// Moves to the smallest-id neighbor carrying every directive label; stays
// put (and counts a miss) when none does. Stops after the last directive.
inline AgentTrace run_follower_agent(const EnvironmentGraph& g, const Instruction& instr, std::string_view start) {
  AgentTrace t{g.env_id(), g.node(start).id, {g.node(start).id}, StopReason::kStopAction, 0};
  for (const auto& d : instr.steps) {
    const auto wanted = d.labels();
    const NodeId* next = nullptr;
    for (const auto& v : g.neighbors(t.last())) {
      if (detail::contains_all(g.node(v).labels, wanted)) {
        next = &v;
        break;
      }
    }
    if (next) {
      t.visited.push_back(*next);
    } else {
      ++t.misses;
      t.visited.push_back(t.last());
    }
  }
  return t;
}

// Fraction of directive labels carried by the node; 1 for an empty directive.
inline double label_match(const std::vector<std::string>& directive_labels, const std::vector<std::string>& node_labels) {
  if (directive_labels.empty()) return 1.0;
  std::size_t hit = 0;
  for (const auto& t : directive_labels) {
    if (std::find(node_labels.begin(), node_labels.end(), t) != node_labels.end()) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(directive_labels.size());
}

// Prior over the action space: MTM row probabilities, uniform without a row.
inline double prior_prob(const TransitionMatrix& mtm, std::string_view current, std::string_view next, std::size_t degree) {
  if (mtm.row(current)) return mtm.prob(current, next);
  return 1.0 / static_cast<double>(degree);
}

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
}

// One blend decision: argmax of lambda*prior + (1-lambda)*match, smallest id
// on ties. nullopt at a dead end.
inline std::optional<NodeId> blend_choice(const EnvironmentGraph& g, const TransitionMatrix& mtm, std::string_view current,
                                          const Directive& directive, double lambda) {
  check_lambda(lambda);
  const auto& nbrs = g.neighbors(current);
  if (nbrs.empty()) return std::nullopt;
  const auto wanted = directive.labels();
  const NodeId* best = nullptr;
  double best_score = -1.0;
  for (const auto& v : nbrs) {
    const double score =
        lambda * prior_prob(mtm, current, v, nbrs.size()) + (1.0 - lambda) * label_match(wanted, g.node(v).labels);
    if (score > best_score) {
      best_score = score;
      best = &v;
    }
  }
  return *best;
}

inline AgentTrace run_blend_agent(const EnvironmentGraph& g, const TransitionMatrix& mtm, const Instruction& instr,
                                  std::string_view start, double lambda) {
  check_lambda(lambda);
  AgentTrace t{g.env_id(), g.node(start).id, {g.node(start).id}, StopReason::kStopAction, 0};
  for (const auto& d : instr.steps) {
    auto next = blend_choice(g, mtm, t.last(), d, lambda);
    if (!next) {
      t.stopped_by = StopReason::kDeadEnd;
      break;
    }
    t.visited.push_back(*next);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Trace files (JSON lines)

struct Rollout {
  std::int64_t path_id = 0;
  AgentTrace trace;
};

inline std::string rollout_to_jsonl(const Rollout& r) {
  nlohmann::json j{{"path_id", r.path_id},
                   {"env_id", r.trace.env_id},
                   {"visited", r.trace.visited},
                   {"stopped_by", to_string(r.trace.stopped_by)}};
  return j.dump() + "\n";
}

inline std::vector<Rollout> rollouts_from_jsonl(std::string_view content) {
  std::vector<Rollout> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    const auto line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Rollout r;
      r.path_id = j.at("path_id").get<std::int64_t>();
      r.trace.env_id = j.at("env_id").get<std::string>();
      r.trace.visited = j.at("visited").get<std::vector<std::string>>();
      if (r.trace.visited.empty()) throw DataError("empty visited list");
      r.trace.start = r.trace.visited.front();
      r.trace.stopped_by = stop_reason_from_string(j.at("stopped_by").get<std::string>());
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError("traces line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace navprior
