// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance --only N   run criterion N
//
// Exit status is 0 only when every criterion that ran passed.

#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "test_support.hpp"

using namespace navprior;
using namespace navprior::testing;
namespace fs = std::filesystem;

namespace {

// Bounds fixed from a 20-seed pilot at the bundled defaults.
constexpr double kUnseenBand = 0.05;  // |greedy - random| unseen SR; pilot max 0.044
constexpr int kGapSeeds = 20;
constexpr int kGapSeedsRequired = 15;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) { return format_number(std::round(v * 10000.0) / 10000.0); }

ExperimentConfig bundled(const std::string& name) {
  return ExperimentConfig::parse(read_file(std::string(NAVPRIOR_CONFIG_DIR) + "/" + name + ".toml"));
}

Outcome criterion_skew() {
  Outcome o;
  const auto cfg = bundled("skew");
  o.require(cfg.env_count == 12 && cfg.samples_per_env == 200 && cfg.env_source == "synthetic",
            "bundled skew config is not 12 synthetic envs x 200 samples");
  Stopwatch clock;
  const auto r = run_skew_experiment(cfg);
  const double t = clock.seconds();
  const auto& walk = r.skew_for("random-walk");
  const auto& sp = r.skew_for("shortest");
  o.detail << "random-walk skew<=1.5 fraction " << fmt(walk.fraction_within) << " (need >= 0.9); skew>=2 shortest "
           << fmt(sp.fraction_high) << " vs random-walk " << fmt(walk.fraction_high) << "; " << fmt(t) << " s";
  o.pass = walk.fraction_within >= 0.90 && sp.fraction_high > walk.fraction_high && t < 10.0 &&
           cfg.skew_threshold == 1.5 && cfg.skew_high == 2.0 && o.pass;
  return o;
}

Outcome criterion_prior_only() {
  Outcome o;
  const auto cfg = bundled("prior_only");
  Stopwatch clock;
  const auto r = run_prior_only_experiment(cfg);
  const double t = clock.seconds();
  const double gs = r.sr("greedy-mtm", "seen");
  const double rs = r.sr("random", "seen");
  const double gu = r.sr("greedy-mtm", "unseen");
  const double ru = r.sr("random", "unseen");
  o.detail << "seen SR greedy " << fmt(gs) << " vs random " << fmt(rs) << " (need >= 1.5x); unseen |"
           << fmt(gu) << " - " << fmt(ru) << "| <= " << kUnseenBand << "; T=" << cfg.steps << "; " << fmt(t) << " s";
  o.pass = cfg.steps == 5 && gs >= 1.5 * rs && std::abs(gu - ru) <= kUnseenBand && t < 20.0;
  return o;
}

Outcome criterion_generalization() {
  Outcome o;
  auto cfg = bundled("generalization");
  Stopwatch clock;
  int wins = 0;
  for (int seed = 0; seed < kGapSeeds; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto r = run_generalization_experiment(cfg);
    const bool smaller_gap = r.gap("blend-random-walk") < r.gap("blend-shortest");
    const bool higher_unseen = r.sr("blend-random-walk", "unseen") > r.sr("blend-shortest", "unseen");
    if (smaller_gap && higher_unseen) ++wins;
  }
  const double t = clock.seconds();
  o.detail << "random-walk blend beats shortest blend on gap and unseen SR in " << wins << "/" << kGapSeeds
           << " seeds (need >= " << kGapSeedsRequired << "); " << fmt(t) << " s";
  o.pass = wins >= kGapSeedsRequired && t < 60.0;
  return o;
}

double chi_square_p_cycle() {
  const auto g = cycle(6, 2.0);
  LengthDistribution lengths;
  lengths.pmf = {{1, 0.2}, {2, 0.3}, {3, 0.3}, {5, 0.2}};
  SamplerConfig cfg;
  cfg.max_resample_attempts = 1000;
  std::map<std::vector<NodeId>, double> oracle;
  double z = 0.0;
  for (const auto& v : g.nodes()) {
    for (const auto& [h, ph] : lengths.pmf) {
      WalkEnumeration e;
      std::vector<NodeId> walk{v.id};
      enumerate_walks(g, walk, h, ph / static_cast<double>(g.size()), e);
      for (const auto& [w, p] : e.walks) {
        if (euclidean_distance(g.node(w.front()), g.node(w.back())) < cfg.min_goal_distance) continue;
        oracle[w] += p;
        z += p;
      }
    }
  }
  constexpr int kDraws = 24000;
  std::map<std::vector<NodeId>, int> seen;
  Rng rng(6);
  for (int i = 0; i < kDraws; ++i) {
    const auto s = sample_random_walk(g, lengths, cfg, rng);
    if (!oracle.count(s.path)) return 0.0;
    ++seen[s.path];
  }
  double stat = 0.0;
  for (const auto& [w, p] : oracle) {
    const double expected = p / z * kDraws;
    const double obs = seen.count(w) ? seen[w] : 0;
    stat += (obs - expected) * (obs - expected) / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(oracle.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

Outcome criterion_samplers() {
  Outcome o;
  Rng graphs(2024);
  SamplerConfig sc;
  sc.max_resample_attempts = 1000;
  int bf_mismatch = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 20 + static_cast<int>(graphs.uniform_index(41));
    const auto g = random_graph(graphs, n, 12.0, 2.8);
    Rng rng(static_cast<std::uint64_t>(t));
    const auto s = sample_shortest_path(g, sc, rng);
    const auto oracle = bellman_ford(g, g.index_of(s.start()));
    if (path_length(g, s.path) != oracle[g.index_of(s.goal())]) ++bf_mismatch;
  }
  o.require(bf_mismatch == 0, std::to_string(bf_mismatch) + " shortest paths differ from Bellman-Ford");

  LengthDistribution lengths;
  lengths.pmf = {{3, 0.3}, {4, 0.4}, {5, 0.3}};
  int bad = 0;
  int total = 0;
  Rng wg(77);
  for (int t = 0; t < 20; ++t) {
    const auto g = random_graph(wg, 40, 10.0, 2.6);
    Rng rng(static_cast<std::uint64_t>(t) + 100);
    for (int k = 0; k < 500; ++k, ++total) {
      const auto s = sample_random_walk(g, lengths, sc, rng);
      const std::set<NodeId> distinct(s.path.begin(), s.path.end());
      const bool ok = distinct.size() == s.path.size() &&
                      euclidean_distance(g.node(s.start()), g.node(s.goal())) >= 3.0 &&
                      lengths.pmf.count(static_cast<int>(s.hops())) > 0;
      if (!ok) ++bad;
    }
  }
  o.require(bad == 0, std::to_string(bad) + " random walks violate postconditions");
  const double p = chi_square_p_cycle();
  o.require(p > 0.01, "C6 chi-square p = " + fmt(p));
  if (o.pass) {
    o.detail << "100/100 Bellman-Ford matches; " << total << " walks valid; C6 chi-square p = " << fmt(p);
  }
  return o;
}

Outcome criterion_metrics() {
  Outcome o;
  const auto doc = nlohmann::json::parse(read_file(data_path("metrics_golden.json")));
  const auto g = graph_from_json(doc.at("graph"));
  int golden_bad = 0;
  std::vector<EpisodeMetrics> eps;
  for (const auto& ep : doc.at("episodes")) {
    AgentTrace t;
    t.env_id = g.env_id();
    t.visited = ep.at("visited").get<std::vector<NodeId>>();
    t.start = t.visited.front();
    const auto m = evaluate_episode(g, ep.at("path_id").get<std::int64_t>(), t, ep.at("goal").get<std::string>());
    eps.push_back(m);
    const bool ok = std::abs(m.ne - ep.at("ne").get<double>()) <= 1e-9 && m.success == ep.at("success").get<bool>() &&
                    m.oracle_success == ep.at("oracle_success").get<bool>() &&
                    std::abs(m.spl - ep.at("spl").get<double>()) <= 1e-9;
    if (!ok) ++golden_bad;
  }
  const auto agg = aggregate(eps);
  const auto& want = doc.at("aggregate");
  const bool agg_ok = std::abs(agg.ne - want.at("ne").get<double>()) <= 1e-9 &&
                      std::abs(agg.sr - want.at("sr").get<double>()) <= 1e-9 &&
                      std::abs(agg.osr - want.at("osr").get<double>()) <= 1e-9 &&
                      std::abs(agg.spl - want.at("spl").get<double>()) <= 1e-9;
  o.require(golden_bad == 0 && eps.size() == 5 && agg_ok, std::to_string(golden_bad) + " golden episodes differ");

  Rng rng(99);
  int violations = 0;
  int n = 0;
  while (n < 1000) {
    const auto rg = random_graph(rng, 30, 10.0, 2.2);
    for (int k = 0; k < 50; ++k, ++n) {
      const auto start = rg.node_at(rng.uniform_index(rg.size())).id;
      const auto goal = rg.node_at(rng.uniform_index(rg.size())).id;
      const auto t = run_random_agent(rg, start, static_cast<int>(rng.uniform_index(8)), rng);
      MetricConfig mc;
      if (rng.bernoulli(0.3)) mc.distance = DistanceMode::kEuclidean;
      const auto m = evaluate_episode(rg, k, t, goal, mc);
      if (!(m.spl >= 0.0 && m.spl <= 1.0) || (m.success && !m.oracle_success) || (m.ne == 0.0 && !m.success)) ++violations;
    }
  }
  o.require(violations == 0, std::to_string(violations) + " fuzzed episodes break an invariant");
  if (o.pass) o.detail << "5 golden episodes exact to 1e-9; " << n << " fuzzed episodes satisfy SPL/OSR/NE invariants";
  return o;
}

Outcome criterion_mtm() {
  Outcome o;
  Rng rng(31);
  int stochastic = 0, additive = 0, invariant = 0;
  for (int t = 0; t < 100; ++t) {
    const auto g = random_graph(rng, 25, 8.0, 2.5);
    const auto a = random_dataset(g, rng, 20, 6);
    const auto b = random_dataset(g, rng, 15, 6);
    PathDataset u = a;
    for (auto s : b.samples) {
      s.path_id += 1000;
      u.samples.push_back(s);
    }
    const auto ma = build_mtm(a, g);
    const auto mb = build_mtm(b, g);
    const auto mu = build_mtm(u, g);

    bool ok = true;
    for (const auto& [from, row] : mu.rows()) {
      double sum = 0.0;
      for (const auto& [to, p] : row.probs) sum += p;
      ok = ok && std::abs(sum - 1.0) <= 1e-9;
    }
    stochastic += ok;

    ok = true;
    for (const auto& [from, row] : mu.rows()) {
      for (const auto& [to, c] : row.counts) ok = ok && c == ma.count(from, to) + mb.count(from, to);
    }
    for (const auto* part : {&ma, &mb}) {
      for (const auto& [from, row] : part->rows()) {
        for (const auto& [to, c] : row.counts) ok = ok && mu.count(from, to) > 0.0;
      }
    }
    additive += ok;

    auto scaled = mu;
    scaled.scale_counts(0.1 + 50.0 * rng.uniform01());
    ok = true;
    for (std::size_t i = 0; i < g.size(); ++i) {
      Rng r1(static_cast<std::uint64_t>(i)), r2(static_cast<std::uint64_t>(i));
      ok = ok && run_greedy_mtm_agent(g, mu, g.node_at(i).id, kDefaultSteps, r1) ==
                     run_greedy_mtm_agent(g, scaled, g.node_at(i).id, kDefaultSteps, r2);
    }
    invariant += ok;
  }
  o.detail << "row-stochastic " << stochastic << "/100; additive " << additive << "/100; greedy argmax invariant "
           << invariant << "/100";
  o.pass = stochastic == 100 && additive == 100 && invariant == 100;
  return o;
}

// Hash of every file under dir, keyed by relative path. JSON reports drop
// their timestamp line first.
std::map<std::string, std::uint64_t> tree_hashes(const fs::path& dir) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::istringstream in(read_file(entry.path()));
    std::string kept;
    for (std::string line; std::getline(in, line);) {
      if (line.find("\"timestamp\":") != std::string::npos) continue;
      kept += line + "\n";
    }
    out[fs::relative(entry.path(), dir).string()] = fnv1a64(kept);
  }
  return out;
}

int run_cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + NAVPRIOR_CLI + "' " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

bool run_pipeline(const fs::path& cwd) {
  fs::remove_all(cwd);
  fs::create_directories(cwd);
  const std::vector<std::string> steps{
      "demo --output-dir demo",
      "generate --out stages/graphs --envs 4 --seed 3",
      "sample --strategy shortest --graphs stages/graphs --n-per-env 30 --seed 4 --out stages/shortest.json",
      "length-dist --dataset stages/shortest.json --out stages/lengths.json",
      "sample --strategy random-walk --graphs stages/graphs --length-dist stages/lengths.json --n-per-env 60 --seed 5 "
      "--out stages/walks.json",
      "analyze --dataset stages/walks.json --graphs stages/graphs --out-mtm stages/mtm.json --out-histogram "
      "stages/hist.csv --bin-width 0.25",
      "annotate --dataset stages/shortest.json --graphs stages/graphs --out stages/annotated.json",
      "rollout --agent greedy-mtm --T 5 --mtm stages/mtm.json --dataset stages/annotated.json --graphs stages/graphs "
      "--seed 6 --out stages/greedy.jsonl",
      "rollout --agent random --T 5 --dataset stages/annotated.json --graphs stages/graphs --seed 6 --out "
      "stages/random.jsonl",
      "rollout --agent blend --lambda 0.5 --mtm stages/mtm.json --dataset stages/annotated.json --graphs "
      "stages/graphs --out stages/blend.jsonl",
      "evaluate --traces stages/greedy.jsonl --dataset stages/annotated.json --graphs stages/graphs --out "
      "stages/greedy_eval.csv",
      "run --config '" + std::string(NAVPRIOR_CONFIG_DIR) + "/prior_only.toml' --output-dir run --seed 2",
  };
  for (const auto& s : steps) {
    if (run_cli(cwd, s) != 0) {
      std::cerr << "pipeline step failed: " << s << '\n';
      return false;
    }
  }
  return true;
}

Outcome criterion_determinism() {
  Outcome o;
  const fs::path root = fs::current_path() / "acceptance_determinism";
  const bool ok1 = run_pipeline(root / "a");
  const bool ok2 = run_pipeline(root / "b");
  o.require(ok1 && ok2, "a CLI step exited non-zero");
  if (!o.pass) return o;
  const auto ha = tree_hashes(root / "a");
  const auto hb = tree_hashes(root / "b");
  int differing = 0;
  for (const auto& [path, h] : ha) {
    auto it = hb.find(path);
    if (it == hb.end() || it->second != h) {
      ++differing;
      o.detail << (differing == 1 ? "differs: " : ", ") << path;
    }
  }
  o.require(differing == 0 && ha.size() == hb.size(), "");
  if (o.pass) o.detail << ha.size() << " files byte-identical across two runs (timestamps excluded)";
  const bool has_demo = ha.count("demo/prior_only/prior_only_report.json") && ha.count("demo/skew/skew_report.json") &&
                        ha.count("demo/generalization/generalization_report.json");
  o.require(has_demo, "demo did not write all three reports");
  fs::remove_all(root);
  return o;
}

Outcome criterion_formats() {
  Outcome o;
  const auto once = load_r2r_json(read_file(data_path("R2R_fixture.json")));
  const auto text = save_r2r_json(once);
  const auto twice = load_r2r_json(text);
  o.require(once == twice && save_r2r_json(twice) == text && once.size() == 3, "R2R load/save/load is not a fixpoint");
  const auto g = load_connectivity(read_file(data_path("three_viewpoint_connectivity.json")), "fixture");
  const bool conn_ok = g.size() == 3 && g.edge_count() == 1 && g.has_edge("vp_a", "vp_b") && !g.has_edge("vp_a", "vp_c") &&
                       g.node("vp_b").position == Vec3{2.5, 0.75, 1.5};
  o.require(conn_ok, "connectivity fixture: " + std::to_string(g.edge_count()) + " edges");
  if (o.pass) o.detail << "R2R fixture round-trips; connectivity fixture yields exactly 1 edge (vp_a-vp_b)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"skew reduction", criterion_skew},
      {"prior-only navigation", criterion_prior_only},
      {"generalization gap", criterion_generalization},
      {"sampler correctness", criterion_samplers},
      {"metric oracle suite", criterion_metrics},
      {"MTM properties", criterion_mtm},
      {"determinism", criterion_determinism},
      {"format fidelity", criterion_formats},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only != 0 && only != id) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    all = all && o.pass;
    std::cout << "criterion " << id << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail.str() << std::endl;
  }
  return all ? 0 : 1;
}
