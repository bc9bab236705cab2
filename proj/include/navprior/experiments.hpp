#pragma once

// End-to-end experiment pipelines over a shared, seed-determined world:
//   prior-only   greedy-MTM vs random agents on seen/unseen splits
//   skew         skew factors of shortest-path vs random-walk datasets
//   generalization  blend agents with shortest vs random-walk augmented
//                priors, a pure follower and a pure prior, on both splits.
//
// Every random quantity comes from a sub-stream derived from the master seed
// and a stage tag, so stages never perturb one another.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "navprior/agents.hpp"
#include "navprior/config.hpp"
#include "navprior/dataset.hpp"
#include "navprior/envgraph.hpp"
#include "navprior/errors.hpp"
#include "navprior/format.hpp"
#include "navprior/metrics.hpp"
#include "navprior/prioranalysis.hpp"
#include "navprior/random.hpp"
#include "navprior/samplers.hpp"

namespace navprior {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

inline SamplerConfig hop_window(int min_hops, int max_hops) {
  SamplerConfig c;
  c.min_hops = min_hops;
  c.max_hops = max_hops;
  return c;
}

struct ExperimentConfig {
  std::string experiment = "all";  // prior_only | skew | generalization | all
  std::uint64_t seed = 0;

  std::string env_source = "synthetic";  // synthetic | loaded
  std::string graphs_dir;
  int env_count = 12;
  SynthConfig synth;

  double fraction_seen = 0.8;
  int original_per_env = 20;  // benchmark-sized shortest-path training set
  int samples_per_env = 200;  // augmentation size per environment
  int eval_per_split = 500;
  double aug_weight = 1.0;  // pool weight of augmented counts in the MTM

  SamplerConfig sampler = hop_window(4, 6);

  int steps = kDefaultSteps;
  double lambda = 0.5;
  // Apply appearance-transferred priors in unseen environments.
  bool perceptual_unseen_prior = true;
  UnseenNodePolicy unseen_node_policy = UnseenNodePolicy::kUniformRandom;
  // Probability that a directive is replaced by one label of its target.
  double instruction_noise = 0.5;

  MetricConfig metric;

  double skew_threshold = 1.5;
  double skew_high = 2.0;
  double bin_width = 0.25;
  double max_bin = 4.0;

  std::string output_dir = "navprior_out";

  void validate() const {
    static const std::set<std::string> kExperiments{"prior_only", "skew", "generalization", "all"};
    if (!kExperiments.count(experiment)) throw ConfigError("unknown experiment '" + experiment + "'");
    if (env_source != "synthetic" && env_source != "loaded") throw ConfigError("env_source must be synthetic or loaded");
    if (env_source == "loaded" && graphs_dir.empty()) throw ConfigError("env_source = loaded requires graphs_dir");
    if (env_source == "synthetic") {
      if (env_count < 2) throw ConfigError("env_count must be >= 2");
      synth.validate();
      for (const auto& v : synth.vocabulary) {
        if (v == kAmbiguousToken || v == kDirectiveSeparator) throw ConfigError("vocabulary may not contain '" + v + "'");
        if (tokenize(v) != Tokens{v}) throw ConfigError("vocabulary token '" + v + "' is not a lowercase word");
      }
    }
    if (!(fraction_seen > 0.0 && fraction_seen < 1.0)) throw ConfigError("fraction_seen must be in (0, 1)");
    if (original_per_env < 1) throw ConfigError("original_per_env must be >= 1");
    if (samples_per_env < 1) throw ConfigError("samples_per_env must be >= 1");
    if (eval_per_split < 1) throw ConfigError("eval_per_split must be >= 1");
    if (!(aug_weight >= 0.0)) throw ConfigError("aug_weight must be >= 0");
    sampler.validate();
    if (steps < 0) throw ConfigError("steps must be >= 0");
    check_lambda(lambda);
    if (!(instruction_noise >= 0.0 && instruction_noise <= 1.0)) throw ConfigError("instruction_noise must be in [0, 1]");
    if (!(metric.success_threshold >= 0.0)) throw ConfigError("metric.threshold must be >= 0");
    if (!(bin_width > 0.0)) throw ConfigError("skew.bin_width must be > 0");
    if (!(max_bin > 1.0)) throw ConfigError("skew.max_bin must be > 1");
  }

  static ExperimentConfig from_doc(const KeyValueDoc& doc) {
    static const std::set<std::string> kKeys{
        "experiment", "seed", "env_source", "graphs_dir", "env_count", "synth.node_count", "synth.radius",
        "synth.extent_x", "synth.extent_y", "synth.extent_z", "synth.labels_per_node", "synth.vocabulary",
        "synth.max_attempts", "fraction_seen", "original_per_env", "samples_per_env", "eval_per_split", "aug_weight",
        "sampler.min_goal_distance", "sampler.max_resample_attempts", "sampler.geodesic_acceptance", "sampler.min_hops", "sampler.max_hops", "agent.steps",
        "agent.lambda", "agent.unseen_prior", "agent.unseen_node_policy", "agent.instruction_noise",
        "metric.threshold", "metric.distance", "skew.threshold", "skew.high", "skew.bin_width", "skew.max_bin",
        "output_dir"};
    for (const auto& [k, v] : doc.values()) {
      if (!kKeys.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    ExperimentConfig c;
    c.experiment = doc.string("experiment", c.experiment);
    const double seed = doc.number("seed", 0.0);
    if (seed < 0 || seed != static_cast<double>(static_cast<std::uint64_t>(seed))) {
      throw ConfigError("seed must be a non-negative integer");
    }
    c.seed = static_cast<std::uint64_t>(seed);
    c.env_source = doc.string("env_source", c.env_source);
    c.graphs_dir = doc.string("graphs_dir", c.graphs_dir);
    c.env_count = doc.integer("env_count", c.env_count);
    c.synth.node_count = doc.integer("synth.node_count", c.synth.node_count);
    c.synth.radius = doc.number("synth.radius", c.synth.radius);
    c.synth.extent.x = doc.number("synth.extent_x", c.synth.extent.x);
    c.synth.extent.y = doc.number("synth.extent_y", c.synth.extent.y);
    c.synth.extent.z = doc.number("synth.extent_z", c.synth.extent.z);
    c.synth.labels_per_node = doc.integer("synth.labels_per_node", c.synth.labels_per_node);
    c.synth.max_attempts = doc.integer("synth.max_attempts", c.synth.max_attempts);
    if (doc.has("synth.vocabulary")) {
      std::string raw = doc.string("synth.vocabulary", "");
      for (auto& ch : raw) {
        if (ch == ',') ch = ' ';
      }
      std::istringstream words(raw);
      c.synth.vocabulary.clear();
      for (std::string w; words >> w;) c.synth.vocabulary.push_back(w);
    }
    c.fraction_seen = doc.number("fraction_seen", c.fraction_seen);
    c.original_per_env = doc.integer("original_per_env", c.original_per_env);
    c.samples_per_env = doc.integer("samples_per_env", c.samples_per_env);
    c.eval_per_split = doc.integer("eval_per_split", c.eval_per_split);
    c.aug_weight = doc.number("aug_weight", c.aug_weight);
    c.sampler.min_goal_distance = doc.number("sampler.min_goal_distance", c.sampler.min_goal_distance);
    c.sampler.max_resample_attempts = doc.integer("sampler.max_resample_attempts", c.sampler.max_resample_attempts);
    c.sampler.geodesic_acceptance = doc.boolean("sampler.geodesic_acceptance", c.sampler.geodesic_acceptance);
    c.sampler.min_hops = doc.integer("sampler.min_hops", c.sampler.min_hops);
    c.sampler.max_hops = doc.integer("sampler.max_hops", c.sampler.max_hops);
    c.steps = doc.integer("agent.steps", c.steps);
    c.lambda = doc.number("agent.lambda", c.lambda);
    const auto prior = doc.string("agent.unseen_prior", "perceptual");
    if (prior != "perceptual" && prior != "none") throw ConfigError("agent.unseen_prior must be perceptual or none");
    c.perceptual_unseen_prior = prior == "perceptual";
    const auto policy = doc.string("agent.unseen_node_policy", "uniform");
    if (policy != "uniform" && policy != "stop") throw ConfigError("agent.unseen_node_policy must be uniform or stop");
    c.unseen_node_policy = policy == "uniform" ? UnseenNodePolicy::kUniformRandom : UnseenNodePolicy::kStop;
    c.instruction_noise = doc.number("agent.instruction_noise", c.instruction_noise);
    c.metric.success_threshold = doc.number("metric.threshold", c.metric.success_threshold);
    c.metric.distance = distance_mode_from_string(doc.string("metric.distance", "geodesic"));
    c.skew_threshold = doc.number("skew.threshold", c.skew_threshold);
    c.skew_high = doc.number("skew.high", c.skew_high);
    c.bin_width = doc.number("skew.bin_width", c.bin_width);
    c.max_bin = doc.number("skew.max_bin", c.max_bin);
    c.output_dir = doc.string("output_dir", c.output_dir);
    c.validate();
    return c;
  }

  static ExperimentConfig parse(std::string_view text) { return from_doc(KeyValueDoc::parse(text)); }

  // Round-trips through parse().
  std::string to_toml() const {
    std::ostringstream o;
    auto str = [](const std::string& s) { return "\"" + s + "\""; };
    auto num = [](double d) { return format_number(d); };
    std::string vocab;
    for (const auto& w : synth.vocabulary) vocab += (vocab.empty() ? "" : ",") + w;
    o << "experiment = " << str(experiment) << '\n'
      << "seed = " << seed << '\n'
      << "env_source = " << str(env_source) << '\n'
      << "graphs_dir = " << str(graphs_dir) << '\n'
      << "env_count = " << env_count << '\n'
      << "fraction_seen = " << num(fraction_seen) << '\n'
      << "original_per_env = " << original_per_env << '\n'
      << "samples_per_env = " << samples_per_env << '\n'
      << "eval_per_split = " << eval_per_split << '\n'
      << "aug_weight = " << num(aug_weight) << '\n'
      << "output_dir = " << str(output_dir) << "\n\n"
      << "[synth]\n"
      << "node_count = " << synth.node_count << '\n'
      << "radius = " << num(synth.radius) << '\n'
      << "extent_x = " << num(synth.extent.x) << '\n'
      << "extent_y = " << num(synth.extent.y) << '\n'
      << "extent_z = " << num(synth.extent.z) << '\n'
      << "labels_per_node = " << synth.labels_per_node << '\n'
      << "vocabulary = " << str(vocab) << '\n'
      << "max_attempts = " << synth.max_attempts << "\n\n"
      << "[sampler]\n"
      << "min_goal_distance = " << num(sampler.min_goal_distance) << '\n'
      << "max_resample_attempts = " << sampler.max_resample_attempts << '\n'
      << "geodesic_acceptance = " << (sampler.geodesic_acceptance ? "true" : "false") << '\n'
      << "min_hops = " << sampler.min_hops << '\n'
      << "max_hops = " << sampler.max_hops << "\n\n"
      << "[agent]\n"
      << "steps = " << steps << '\n'
      << "lambda = " << num(lambda) << '\n'
      << "unseen_prior = " << str(perceptual_unseen_prior ? "perceptual" : "none") << '\n'
      << "unseen_node_policy = " << str(unseen_node_policy == UnseenNodePolicy::kUniformRandom ? "uniform" : "stop") << '\n'
      << "instruction_noise = " << num(instruction_noise) << "\n\n"
      << "[metric]\n"
      << "threshold = " << num(metric.success_threshold) << '\n'
      << "distance = " << str(std::string(to_string(metric.distance))) << "\n\n"
      << "[skew]\n"
      << "threshold = " << num(skew_threshold) << '\n'
      << "high = " << num(skew_high) << '\n'
      << "bin_width = " << num(bin_width) << '\n'
      << "max_bin = " << num(max_bin) << '\n';
    return o.str();
  }
};

// ---------------------------------------------------------------------------
// Shared world

struct World {
  GraphMap graphs;
  EnvSplit split;
  PathDataset original;  // shortest paths on seen environments
  LengthDistribution lengths;
  PathDataset eval_seen;
  PathDataset eval_unseen;
  std::vector<SkippedEnvironment> skipped;

  std::vector<const EnvironmentGraph*> envs_in(const std::set<std::string>& ids) const {
    std::vector<const EnvironmentGraph*> out;
    for (const auto& id : ids) out.push_back(&graphs.at(id));
    return out;
  }

  std::vector<const EnvironmentGraph*> all_envs() const {
    std::vector<const EnvironmentGraph*> out;
    for (const auto& [id, g] : graphs) out.push_back(&g);
    return out;
  }
};

namespace stage_ids {
inline constexpr std::int64_t kOriginal = 0;
inline constexpr std::int64_t kAugShortest = 1'000'000;
inline constexpr std::int64_t kAugRandomWalk = 2'000'000;
inline constexpr std::int64_t kEvalSeen = 3'000'000;
inline constexpr std::int64_t kEvalUnseen = 4'000'000;
}  // namespace stage_ids

inline std::string env_name(int index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 2) digits = "0" + digits;
  return "env" + digits;
}

inline GraphMap make_environments(const ExperimentConfig& cfg) {
  if (cfg.env_source == "loaded") return load_graph_dir(cfg.graphs_dir);
  GraphMap graphs;
  for (int i = 0; i < cfg.env_count; ++i) {
    SynthConfig sc = cfg.synth;
    sc.env_id = env_name(i);
    Rng rng(derive_seed(cfg.seed, "env/" + sc.env_id));
    graphs.emplace(sc.env_id, generate_synthetic_env(sc, rng));
  }
  return graphs;
}

template <typename Fn>
auto with_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  }
}

inline SampledDataset sample_stage(const std::vector<const EnvironmentGraph*>& envs, int per_env, const PathSampler& sampler,
                                   const ExperimentConfig& cfg, std::string_view tag, std::int64_t id_offset) {
  return sample_dataset(envs, per_env, sampler, derive_seed(cfg.seed, tag), id_offset);
}

inline int per_env_count(int total, std::size_t envs) {
  return static_cast<int>((static_cast<std::size_t>(total) + envs - 1) / envs);
}

inline World build_world(const ExperimentConfig& cfg) {
  cfg.validate();
  World w;
  w.graphs = with_stage("environments", [&] { return make_environments(cfg); });
  std::vector<std::string> ids;
  for (const auto& [id, g] : w.graphs) ids.push_back(id);
  Rng split_rng(derive_seed(cfg.seed, "split"));
  w.split = with_stage("split", [&] { return split_environments(ids, cfg.fraction_seen, split_rng); });

  SamplerConfig sc = cfg.sampler;
  sc.strategy = Strategy::kShortest;
  const PathSampler shortest(sc);
  auto take = [&](SampledDataset sd, Split split) {
    w.skipped.insert(w.skipped.end(), sd.skipped.begin(), sd.skipped.end());
    sd.dataset.split = split;
    return std::move(sd.dataset);
  };
  w.original = take(sample_stage(w.envs_in(w.split.seen), cfg.original_per_env, shortest, cfg, "train/original",
                                 stage_ids::kOriginal),
                    Split::kTrain);
  if (w.original.empty()) throw DataError("training: every seen environment exhausted the sampler");
  w.lengths = empirical_length_distribution(w.original);

  const int seen_eval = per_env_count(cfg.eval_per_split, w.split.seen.size());
  const int unseen_eval = per_env_count(cfg.eval_per_split, w.split.unseen.size());
  w.eval_seen = take(sample_stage(w.envs_in(w.split.seen), seen_eval, shortest, cfg, "eval/seen", stage_ids::kEvalSeen),
                     Split::kValSeen);
  w.eval_unseen = take(
      sample_stage(w.envs_in(w.split.unseen), unseen_eval, shortest, cfg, "eval/unseen", stage_ids::kEvalUnseen),
      Split::kValUnseen);
  if (w.eval_seen.empty() || w.eval_unseen.empty()) throw DataError("evaluation: a split has no sampleable environment");
  return w;
}

// MTMs for the seen environments from the original data plus an augmentation
// weighted by cfg.aug_weight.
inline MtmMap pooled_mtms(const World& w, const PathDataset& augmented, const ExperimentConfig& cfg) {
  MtmMap out;
  for (const auto& env : w.split.seen) {
    const auto& g = w.graphs.at(env);
    auto m = build_mtm(w.original, g);
    if (cfg.aug_weight > 0.0) m.merge(build_mtm(augmented, g), cfg.aug_weight);
    out.emplace(env, std::move(m));
  }
  return out;
}

// Prior the agent applies in every environment: own counts where it trained,
// appearance-transferred (or empty) rows elsewhere.
inline MtmMap priors_for_all(const World& w, const MtmMap& seen_mtms, const ExperimentConfig& cfg) {
  MtmMap out = seen_mtms;
  std::vector<PriorSource> sources;
  for (const auto& [env, m] : seen_mtms) sources.push_back({&w.graphs.at(env), &m});
  for (const auto& env : w.split.unseen) {
    const auto& g = w.graphs.at(env);
    out.emplace(env, cfg.perceptual_unseen_prior && g.is_labeled() ? transfer_mtm(sources, g) : TransitionMatrix(env));
  }
  return out;
}

// Vague-instruction model: with probability `noise` a directive names one
// label of its target chosen uniformly.
inline Instruction noisy_instruction(const EnvironmentGraph& g, const PathSample& s, double noise, std::uint64_t seed) {
  auto instr = generate_instruction(g, s);
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s.path_id)));
  for (std::size_t i = 0; i < instr.steps.size(); ++i) {
    if (!rng.bernoulli(noise)) continue;
    const auto& labels = g.node(s.path[i + 1]).labels;
    instr.steps[i] = Directive{{labels[rng.uniform_index(labels.size())]}};
  }
  return instr;
}

// ---------------------------------------------------------------------------
// Reports

struct ConditionResult {
  std::string name;
  std::string augmentation;
  std::string split;  // seen | unseen
  EvalResult eval;
};

struct SkewSummary {
  std::string condition;
  std::size_t visited = 0;
  std::size_t nodes = 0;
  double fraction_within = 0.0;  // skew <= threshold
  double fraction_high = 0.0;    // skew >= skew_high
  Histogram histogram;
};

struct ExperimentReport {
  std::string experiment;
  ExperimentConfig config;
  EnvSplit split;
  std::vector<ConditionResult> conditions;
  std::vector<SkewSummary> skew;
  std::vector<SkippedEnvironment> skipped;
  std::string timestamp;

  const ConditionResult& condition(std::string_view name, std::string_view split_name) const {
    for (const auto& c : conditions) {
      if (c.name == name && c.split == split_name) return c;
    }
    throw std::out_of_range("no condition " + std::string(name) + "/" + std::string(split_name));
  }

  double sr(std::string_view name, std::string_view split_name) const { return condition(name, split_name).eval.aggregate.sr; }

  // Seen SR minus unseen SR.
  double gap(std::string_view name) const { return sr(name, "seen") - sr(name, "unseen"); }

  const SkewSummary& skew_for(std::string_view name) const {
    for (const auto& s : skew) {
      if (s.condition == name) return s;
    }
    throw std::out_of_range("no skew summary " + std::string(name));
  }

  nlohmann::json to_json() const {
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : conditions) {
      const auto& a = c.eval.aggregate;
      conds.push_back({{"condition", c.name},
                       {"augmentation", c.augmentation},
                       {"split", c.split},
                       {"seed", config.seed},
                       {"episodes", a.episodes},
                       {"ne", a.ne},
                       {"sr", a.sr},
                       {"osr", a.osr},
                       {"spl", a.spl}});
    }
    nlohmann::json skews = nlohmann::json::array();
    for (const auto& s : skew) {
      nlohmann::json bins = nlohmann::json::array();
      for (std::size_t i = 0; i < s.histogram.counts.size(); ++i) {
        bins.push_back({{"lo", s.histogram.bin_edges[i]},
                        {"hi", format_number(s.histogram.bin_edges[i + 1])},
                        {"count", s.histogram.counts[i]}});
      }
      skews.push_back({{"condition", s.condition},
                       {"seed", config.seed},
                       {"nodes", s.nodes},
                       {"visited", s.visited},
                       {"fraction_within_threshold", s.fraction_within},
                       {"fraction_high", s.fraction_high},
                       {"histogram", {{"bins", bins}, {"none", s.histogram.none_count}}}});
    }
    nlohmann::json skipped_json = nlohmann::json::array();
    for (const auto& s : skipped) skipped_json.push_back({{"env_id", s.env_id}, {"reason", s.reason}});
    return {{"experiment", experiment},
            {"seed", config.seed},
            {"config", config.to_toml()},
            {"split", {{"seen", split.seen}, {"unseen", split.unseen}}},
            {"conditions", conds},
            {"skew", skews},
            {"skipped", skipped_json},
            {"provenance", {{"version", kToolkitVersion}, {"timestamp", timestamp}}}};
  }

  // Table layout: one row per (condition, split). SR/OSR in percent.
  std::string table_csv() const {
    std::ostringstream o;
    o << "condition,augmentation,split,seed,episodes,ne,sr,osr,spl\n";
    for (const auto& c : conditions) {
      const auto& a = c.eval.aggregate;
      o << c.name << ',' << c.augmentation << ',' << c.split << ',' << config.seed << ',' << a.episodes << ','
        << format_number(a.ne) << ',' << format_number(100.0 * a.sr) << ',' << format_number(100.0 * a.osr) << ','
        << format_number(a.spl) << '\n';
    }
    return o.str();
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline ExperimentReport new_report(std::string name, const ExperimentConfig& cfg, const World& w) {
  ExperimentReport r;
  r.experiment = std::move(name);
  r.config = cfg;
  r.split = w.split;
  r.skipped = w.skipped;
  r.timestamp = utc_timestamp();
  return r;
}

template <typename AgentFn>
ConditionResult run_condition(const World& w, const PathDataset& episodes, std::string name, std::string augmentation,
                              std::string split, const ExperimentConfig& cfg, AgentFn&& agent) {
  std::vector<Rollout> rollouts;
  for (const auto& s : episodes.samples) {
    const auto& g = w.graphs.at(s.env_id);
    rollouts.push_back({s.path_id, agent(g, s)});
  }
  ConditionResult c{std::move(name), std::move(augmentation), std::move(split), {}};
  c.eval = evaluate(w.graphs, rollouts, goals_of(episodes), cfg.metric);
  return c;
}

inline PathDataset augmentation(const World& w, const ExperimentConfig& cfg, Strategy strategy,
                                const std::vector<const EnvironmentGraph*>& envs) {
  SamplerConfig sc = cfg.sampler;
  sc.strategy = strategy;
  const bool shortest = strategy == Strategy::kShortest;
  const PathSampler sampler(sc, shortest ? std::nullopt : std::optional<LengthDistribution>(w.lengths));
  auto sd = sample_stage(envs, cfg.samples_per_env, sampler, cfg, shortest ? "train/aug-shortest" : "train/aug-random-walk",
                         shortest ? stage_ids::kAugShortest : stage_ids::kAugRandomWalk);
  sd.dataset.split = Split::kSynthetic;
  return std::move(sd.dataset);
}

// Greedy and random rows; shared by the prior-only and generalization runs.
inline void add_prior_only_rows(ExperimentReport& r, const World& w, const ExperimentConfig& cfg, const MtmMap& priors,
                                bool include_random) {
  for (const auto& [split, eps] : {std::pair<std::string, const PathDataset*>{"seen", &w.eval_seen},
                                   std::pair<std::string, const PathDataset*>{"unseen", &w.eval_unseen}}) {
    r.conditions.push_back(run_condition(w, *eps, "greedy-mtm", "shortest", split, cfg,
                                         [&](const EnvironmentGraph& g, const PathSample& s) {
                                           Rng rng(derive_seed(cfg.seed, "greedy/" + std::to_string(s.path_id)));
                                           return run_greedy_mtm_agent(g, priors.at(g.env_id()), s.start(), cfg.steps,
                                                                       rng, cfg.unseen_node_policy);
                                         }));
    if (!include_random) continue;
    r.conditions.push_back(run_condition(w, *eps, "random", "none", split, cfg,
                                         [&](const EnvironmentGraph& g, const PathSample& s) {
                                           Rng rng(derive_seed(cfg.seed, "random/" + std::to_string(s.path_id)));
                                           return run_random_agent(g, s.start(), cfg.steps, rng);
                                         }));
  }
}

}  // namespace detail

inline ExperimentReport run_prior_only_experiment(const ExperimentConfig& cfg) {
  const auto w = build_world(cfg);
  auto r = detail::new_report("prior_only", cfg, w);
  const auto aug = with_stage("augmentation", [&] {
    return detail::augmentation(w, cfg, Strategy::kShortest, w.envs_in(w.split.seen));
  });
  const auto priors = with_stage("priors", [&] { return priors_for_all(w, pooled_mtms(w, aug, cfg), cfg); });
  with_stage("rollout", [&] { detail::add_prior_only_rows(r, w, cfg, priors, true); });
  return r;
}

inline ExperimentReport run_skew_experiment(const ExperimentConfig& cfg) {
  const auto w = build_world(cfg);
  auto r = detail::new_report("skew", cfg, w);
  const auto envs = w.all_envs();
  for (auto strategy : {Strategy::kShortest, Strategy::kRandomWalk}) {
    const auto ds = with_stage("sampling", [&] { return detail::augmentation(w, cfg, strategy, envs); });
    std::vector<SkewReport> reports;
    std::size_t nodes = 0;
    for (const auto* g : envs) {
      reports.push_back(skew_report(build_mtm(ds, *g), *g, cfg.skew_threshold));
      nodes += g->size();
    }
    SkewSummary s;
    s.condition = std::string(to_string(strategy));
    s.nodes = nodes;
    for (const auto& rep : reports) s.visited += rep.visited();
    s.fraction_within = pooled_fraction_within(reports);
    s.fraction_high = pooled_fraction_at_least(reports, cfg.skew_high);
    s.histogram = skew_histogram(reports, cfg.bin_width, cfg.max_bin);
    r.skew.push_back(std::move(s));
  }
  return r;
}

inline ExperimentReport run_generalization_experiment(const ExperimentConfig& cfg) {
  const auto w = build_world(cfg);
  for (const auto& [id, g] : w.graphs) {
    if (!g.is_labeled()) throw DataError("generalization experiment needs labeled environments; '" + id + "' has none");
  }
  auto r = detail::new_report("generalization", cfg, w);
  const auto seen = w.envs_in(w.split.seen);
  const auto aug_shortest = with_stage("augmentation", [&] { return detail::augmentation(w, cfg, Strategy::kShortest, seen); });
  const auto aug_walk = with_stage("augmentation", [&] { return detail::augmentation(w, cfg, Strategy::kRandomWalk, seen); });
  const auto prior_shortest = with_stage("priors", [&] { return priors_for_all(w, pooled_mtms(w, aug_shortest, cfg), cfg); });
  const auto prior_walk = with_stage("priors", [&] { return priors_for_all(w, pooled_mtms(w, aug_walk, cfg), cfg); });

  const std::uint64_t noise_seed = derive_seed(cfg.seed, "instructions");
  auto instruction_for = [&](const EnvironmentGraph& g, const PathSample& s) {
    return noisy_instruction(g, s, cfg.instruction_noise, noise_seed);
  };

  with_stage("rollout", [&] {
    for (const auto& [split, eps] : {std::pair<std::string, const PathDataset*>{"seen", &w.eval_seen},
                                     std::pair<std::string, const PathDataset*>{"unseen", &w.eval_unseen}}) {
      r.conditions.push_back(detail::run_condition(w, *eps, "blend", "shortest", split, cfg,
                                                   [&](const EnvironmentGraph& g, const PathSample& s) {
                                                     return run_blend_agent(g, prior_shortest.at(g.env_id()),
                                                                            instruction_for(g, s), s.start(), cfg.lambda);
                                                   }));
      r.conditions.push_back(detail::run_condition(w, *eps, "blend", "random-walk", split, cfg,
                                                   [&](const EnvironmentGraph& g, const PathSample& s) {
                                                     return run_blend_agent(g, prior_walk.at(g.env_id()),
                                                                            instruction_for(g, s), s.start(), cfg.lambda);
                                                   }));
      r.conditions.push_back(detail::run_condition(w, *eps, "follower", "none", split, cfg,
                                                   [&](const EnvironmentGraph& g, const PathSample& s) {
                                                     return run_follower_agent(g, instruction_for(g, s), s.start());
                                                   }));
    }
    // Pure prior (lambda = 1): the greedy agent on the shortest-augmented MTM.
    detail::add_prior_only_rows(r, w, cfg, prior_shortest, false);
  });
  // Distinguish the two blend rows by augmentation in lookups.
  for (auto& c : r.conditions) {
    if (c.name == "blend") c.name = "blend-" + c.augmentation;
    if (c.name == "greedy-mtm") c.name = "prior";
  }
  return r;
}

inline std::vector<ExperimentReport> run_experiments(const ExperimentConfig& cfg) {
  std::vector<ExperimentReport> out;
  if (cfg.experiment == "prior_only" || cfg.experiment == "all") out.push_back(run_prior_only_experiment(cfg));
  if (cfg.experiment == "skew" || cfg.experiment == "all") out.push_back(run_skew_experiment(cfg));
  if (cfg.experiment == "generalization" || cfg.experiment == "all") out.push_back(run_generalization_experiment(cfg));
  return out;
}

// Writes <experiment>_report.json, <experiment>_table.csv, per-condition
// episode CSVs, skew histograms, and the exact config (config.toml).
inline std::vector<std::filesystem::path> write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& p, const std::string& content) {
    write_file(p, content);
    written.push_back(p);
  };
  put(dir / "config.toml", r.config.to_toml());
  put(dir / (r.experiment + "_report.json"), r.to_json().dump(2) + "\n");
  if (!r.conditions.empty()) put(dir / (r.experiment + "_table.csv"), r.table_csv());
  for (const auto& c : r.conditions) {
    put(dir / "episodes" / (r.experiment + "_" + c.name + "_" + c.split + ".csv"), eval_csv(c.eval));
  }
  for (const auto& s : r.skew) put(dir / ("skew_histogram_" + s.condition + ".csv"), histogram_csv(s.histogram));
  return written;
}

}  // namespace navprior
