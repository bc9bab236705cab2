#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "navprior/navprior.hpp"

namespace fs = std::filesystem;
using namespace navprior;

namespace {

struct Args {
  // shared
  std::string graphs;
  std::string dataset;
  std::string out;
  std::uint64_t seed = 0;

  // generate
  std::string config;
  int env_count = 12;
  int node_count = 60;
  double radius = 2.2;

  // sample
  std::string strategy = "shortest";
  int n_per_env = 200;
  std::string length_dist;
  double min_goal_distance = 3.0;
  int min_hops = 0;
  int max_hops = 0;
  int max_attempts = 100;

  // analyze
  std::string out_mtm;
  std::string out_histogram;
  double bin_width = 0.25;
  double max_bin = 4.0;
  double threshold = 1.5;

  // rollout
  std::string agent = "greedy-mtm";
  int steps = kDefaultSteps;
  double lambda = 0.5;
  std::string mtm;
  std::string unseen_policy = "uniform";

  // evaluate
  std::string traces;
  std::string distance = "geodesic";

  // run / demo
  std::string output_dir;
  std::optional<std::uint64_t> seed_override;
};

void say(const std::string& line) { std::cout << line << '\n'; }

int cmd_generate(const Args& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) {
    cfg = ExperimentConfig::parse(read_file(a.config));
  } else {
    cfg.env_count = a.env_count;
    cfg.synth.node_count = a.node_count;
    cfg.synth.radius = a.radius;
  }
  cfg.seed = a.seed;
  cfg.env_source = "synthetic";
  cfg.synth.validate();
  const auto graphs = make_environments(cfg);
  save_graph_dir(graphs, a.out);
  for (const auto& [id, g] : graphs) {
    say(id + ": " + std::to_string(g.size()) + " nodes, " + std::to_string(g.edge_count()) + " edges");
  }
  return 0;
}

int cmd_sample(const Args& a) {
  const auto graphs = load_graph_dir(a.graphs);
  SamplerConfig sc;
  sc.strategy = strategy_from_string(a.strategy);
  sc.min_goal_distance = a.min_goal_distance;
  sc.max_resample_attempts = a.max_attempts;
  sc.min_hops = a.min_hops;
  sc.max_hops = a.max_hops;
  std::optional<LengthDistribution> lengths;
  if (sc.strategy == Strategy::kRandomWalk) {
    if (a.length_dist.empty()) throw ConfigError("--length-dist is required for random-walk sampling");
    try {
      lengths = LengthDistribution::from_json(nlohmann::json::parse(read_file(a.length_dist)));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("length distribution '" + a.length_dist + "': " + e.what());
    }
  }
  const PathSampler sampler(sc, lengths);
  auto sd = sample_dataset(graphs, a.n_per_env, sampler, a.seed);
  for (const auto& s : sd.skipped) std::cerr << "skipped " << s.env_id << ": " << s.reason << '\n';
  if (sd.dataset.empty()) {
    throw SamplerExhaustedError(sd.skipped.front().env_id, sd.skipped.front().diagnostics);
  }
  sd.dataset.split = Split::kSynthetic;
  write_file(a.out, save_r2r_json(sd.dataset));
  say("wrote " + std::to_string(sd.dataset.samples.size()) + " paths to " + a.out);
  return 0;
}

int cmd_length_dist(const Args& a) {
  const auto ds = load_dataset_path(a.dataset);
  const auto dist = empirical_length_distribution(ds);
  write_file(a.out, dist.to_json().dump(2) + "\n");
  say("mode " + std::to_string(dist.mode()) + " hops over " + std::to_string(ds.samples.size()) + " paths");
  return 0;
}

GraphMap load_checked(const Args& a, const PathDataset& ds) {
  auto graphs = load_graph_dir(a.graphs);
  const auto violations = validate(ds, graphs);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << v.describe() << '\n';
    throw DataError(std::to_string(violations.size()) + " dataset violation(s); first: " + violations.front().describe());
  }
  return graphs;
}

int cmd_analyze(const Args& a) {
  const auto ds = load_dataset_path(a.dataset);
  const auto graphs = load_checked(a, ds);
  MtmMap mtms;
  std::vector<SkewReport> reports;
  for (const auto& [id, g] : graphs) {
    auto m = build_mtm(ds, g);
    reports.push_back(skew_report(m, g, a.threshold));
    mtms.emplace(id, std::move(m));
  }
  if (!a.out_mtm.empty()) write_file(a.out_mtm, mtms_to_json(mtms).dump(2) + "\n");
  const auto hist = skew_histogram(reports, a.bin_width, a.max_bin);
  if (!a.out_histogram.empty()) write_file(a.out_histogram, histogram_csv(hist));
  say("fraction of visited nodes with skew <= " + format_number(a.threshold) + ": " +
      format_number(pooled_fraction_within(reports)));
  return 0;
}

int cmd_annotate(const Args& a) {
  auto ds = load_dataset_path(a.dataset);
  const auto graphs = load_checked(a, ds);
  for (auto& s : ds.samples) s.instructions = {render_instruction(generate_instruction(graphs.at(s.env_id), s))};
  write_file(a.out, save_r2r_json(ds));
  say("annotated " + std::to_string(ds.samples.size()) + " paths");
  return 0;
}

Instruction instruction_of(const EnvironmentGraph& g, const PathSample& s) {
  if (!s.instructions.empty()) return parse_instruction(s.instructions.front());
  return generate_instruction(g, s);
}

int cmd_rollout(const Args& a) {
  const auto ds = load_dataset_path(a.dataset);
  const auto graphs = load_checked(a, ds);
  check_lambda(a.lambda);
  if (a.steps < 0) throw ConfigError("--T must be >= 0");
  const bool needs_mtm = a.agent == "greedy-mtm" || a.agent == "blend";
  if (a.agent != "random" && a.agent != "follower" && !needs_mtm) throw ConfigError("unknown agent '" + a.agent + "'");
  if (a.unseen_policy != "uniform" && a.unseen_policy != "stop") throw ConfigError("--unseen-policy must be uniform or stop");
  const auto policy = a.unseen_policy == "uniform" ? UnseenNodePolicy::kUniformRandom : UnseenNodePolicy::kStop;
  MtmMap mtms;
  if (needs_mtm) {
    if (a.mtm.empty()) throw ConfigError("--mtm is required for agent '" + a.agent + "'");
    try {
      mtms = mtms_from_json(nlohmann::json::parse(read_file(a.mtm)));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("MTM file '" + a.mtm + "': " + e.what());
    }
  }
  auto ordered = ds.samples;
  std::sort(ordered.begin(), ordered.end(), [](const auto& x, const auto& y) { return x.path_id < y.path_id; });
  std::string out;
  for (const auto& s : ordered) {
    const auto& g = graphs.at(s.env_id);
    Rng rng(derive_seed(a.seed, static_cast<std::uint64_t>(s.path_id)));
    const TransitionMatrix empty(s.env_id);
    const auto it = mtms.find(s.env_id);
    const TransitionMatrix& m = it == mtms.end() ? empty : it->second;
    AgentTrace t;
    if (a.agent == "random") {
      t = run_random_agent(g, s.start(), a.steps, rng);
    } else if (a.agent == "greedy-mtm") {
      t = run_greedy_mtm_agent(g, m, s.start(), a.steps, rng, policy);
    } else if (a.agent == "follower") {
      t = run_follower_agent(g, instruction_of(g, s), s.start());
    } else {
      t = run_blend_agent(g, m, instruction_of(g, s), s.start(), a.lambda);
    }
    out += rollout_to_jsonl({s.path_id, std::move(t)});
  }
  write_file(a.out, out);
  say("wrote " + std::to_string(ordered.size()) + " traces to " + a.out);
  return 0;
}

int cmd_evaluate(const Args& a) {
  const auto ds = load_dataset_path(a.dataset);
  const auto graphs = load_checked(a, ds);
  const auto rollouts = rollouts_from_jsonl(read_file(a.traces));
  MetricConfig mc;
  mc.distance = distance_mode_from_string(a.distance);
  const auto res = evaluate(graphs, rollouts, goals_of(ds), mc);
  write_file(a.out, eval_csv(res));
  const auto& agg = res.aggregate;
  say("episodes " + std::to_string(agg.episodes) + "  NE " + format_number(agg.ne) + "  SR " + format_number(agg.sr) +
      "  OSR " + format_number(agg.osr) + "  SPL " + format_number(agg.spl));
  return 0;
}

void print_report(const ExperimentReport& r) {
  say("[" + r.experiment + "] seed " + std::to_string(r.config.seed));
  for (const auto& c : r.conditions) {
    const auto& agg = c.eval.aggregate;
    say("  " + c.name + " " + c.split + ": SR " + format_number(agg.sr) + "  NE " + format_number(agg.ne) + "  SPL " +
        format_number(agg.spl));
  }
  for (const auto& s : r.skew) {
    say("  " + s.condition + ": skew<=threshold " + format_number(s.fraction_within) + "  skew>=high " +
        format_number(s.fraction_high));
  }
}

int run_config(ExperimentConfig cfg, const Args& a) {
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  if (a.seed_override) cfg.seed = *a.seed_override;
  cfg.validate();
  for (const auto& r : run_experiments(cfg)) {
    write_report(r, fs::path(cfg.output_dir) / r.experiment);
    print_report(r);
  }
  return 0;
}

int cmd_run(const Args& a) {
  if (!fs::is_regular_file(a.config)) throw ConfigError("config file '" + a.config + "' not found");
  return run_config(ExperimentConfig::parse(read_file(a.config)), a);
}

int cmd_demo(const Args& a) {
  ExperimentConfig cfg;
  cfg.output_dir = "navprior_demo";
  return run_config(cfg, a);
}

int guarded(int (*fn)(const Args&), const Args& a) {
  try {
    return fn(a);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kConfig);
  } catch (const SamplerExhaustedError& e) {
    std::cerr << "sampler exhausted: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kSamplerExhausted);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  } catch (const UnknownNodeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Navigation-graph dataset sampling, action-prior analysis and agent evaluation"};
  app.require_subcommand(1);
  Args a;
  int (*chosen)(const Args&) = nullptr;

  auto* gen = app.add_subcommand("generate", "Write synthetic environment graphs");
  gen->add_option("--out", a.out, "Output directory")->required();
  gen->add_option("--seed", a.seed, "Seed");
  gen->add_option("--envs", a.env_count, "Number of environments");
  gen->add_option("--nodes", a.node_count, "Nodes per environment");
  gen->add_option("--radius", a.radius, "Connection radius in meters");
  gen->add_option("--config", a.config, "Take synth.* settings from an experiment config");
  gen->callback([&] { chosen = cmd_generate; });

  auto* sample = app.add_subcommand("sample", "Sample paths in R2R format");
  sample->add_option("--strategy", a.strategy, "shortest | random-walk")->check(CLI::IsMember({"shortest", "random-walk"}));
  sample->add_option("--n-per-env", a.n_per_env, "Paths per environment");
  sample->add_option("--seed", a.seed, "Seed");
  sample->add_option("--graphs", a.graphs, "Graph directory")->required();
  sample->add_option("--length-dist", a.length_dist, "Hop-count distribution JSON (random-walk)");
  sample->add_option("--min-goal-distance", a.min_goal_distance, "Minimum start-goal distance");
  sample->add_option("--min-hops", a.min_hops, "Shortest paths: minimum hop count (0 = none)");
  sample->add_option("--max-hops", a.max_hops, "Shortest paths: maximum hop count (0 = none)");
  sample->add_option("--max-attempts", a.max_attempts, "Resample attempts per path");
  sample->add_option("--out", a.out, "Output R2R JSON")->required();
  sample->callback([&] { chosen = cmd_sample; });

  auto* ld = app.add_subcommand("length-dist", "Empirical hop-count distribution of a dataset");
  ld->add_option("--dataset", a.dataset, "R2R JSON file or directory")->required();
  ld->add_option("--out", a.out, "Output JSON")->required();
  ld->callback([&] { chosen = cmd_length_dist; });

  auto* analyze = app.add_subcommand("analyze", "Transition matrices and skew histogram");
  analyze->add_option("--dataset", a.dataset, "R2R JSON file or directory")->required();
  analyze->add_option("--graphs", a.graphs, "Graph directory")->required();
  analyze->add_option("--out-mtm", a.out_mtm, "Output MTM JSON");
  analyze->add_option("--out-histogram", a.out_histogram, "Output histogram CSV");
  analyze->add_option("--bin-width", a.bin_width, "Histogram bin width");
  analyze->add_option("--max-bin", a.max_bin, "Lower edge of the overflow bin");
  analyze->add_option("--threshold", a.threshold, "Skew threshold for the summary line");
  analyze->callback([&] { chosen = cmd_analyze; });

  auto* annotate = app.add_subcommand("annotate", "Attach templated instructions to every path");
  annotate->add_option("--dataset", a.dataset, "R2R JSON file or directory")->required();
  annotate->add_option("--graphs", a.graphs, "Graph directory (labeled)")->required();
  annotate->add_option("--out", a.out, "Output R2R JSON")->required();
  annotate->callback([&] { chosen = cmd_annotate; });

  auto* rollout = app.add_subcommand("rollout", "Run an agent on every path's start");
  rollout->add_option("--agent", a.agent, "random | greedy-mtm | follower | blend")
      ->check(CLI::IsMember({"random", "greedy-mtm", "follower", "blend"}));
  rollout->add_option("--T", a.steps, "Step budget for random and greedy agents");
  rollout->add_option("--lambda", a.lambda, "Prior weight for the blend agent");
  rollout->add_option("--mtm", a.mtm, "MTM JSON (greedy-mtm, blend)");
  rollout->add_option("--unseen-policy", a.unseen_policy, "Greedy agent at unvisited nodes: uniform | stop");
  rollout->add_option("--dataset", a.dataset, "R2R JSON file or directory")->required();
  rollout->add_option("--graphs", a.graphs, "Graph directory")->required();
  rollout->add_option("--seed", a.seed, "Seed");
  rollout->add_option("--out", a.out, "Output JSON lines")->required();
  rollout->callback([&] { chosen = cmd_rollout; });

  auto* evaluate = app.add_subcommand("evaluate", "NE / SR / OSR / SPL for a trace file");
  evaluate->add_option("--traces", a.traces, "Trace JSON lines")->required();
  evaluate->add_option("--dataset", a.dataset, "R2R JSON file or directory (goals)")->required();
  evaluate->add_option("--graphs", a.graphs, "Graph directory")->required();
  evaluate->add_option("--out", a.out, "Output CSV")->required();
  evaluate->add_option("--distance", a.distance, "geodesic | euclidean")->check(CLI::IsMember({"geodesic", "euclidean"}));
  evaluate->callback([&] { chosen = cmd_evaluate; });

  auto* run = app.add_subcommand("run", "Run the experiments named in a config file");
  run->add_option("--config", a.config, "Experiment config (TOML subset)")->required();
  run->add_option("--output-dir", a.output_dir, "Override output_dir");
  run->add_option("--seed", a.seed_override, "Override seed");
  run->callback([&] { chosen = cmd_run; });

  auto* demo = app.add_subcommand("demo", "Run all experiments with default settings");
  demo->add_option("--output-dir", a.output_dir, "Output directory (default navprior_demo)");
  demo->add_option("--seed", a.seed_override, "Override seed");
  demo->callback([&] { chosen = cmd_demo; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }
  return guarded(chosen, a);
}
