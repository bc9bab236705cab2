#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace navprior;
using namespace navprior::testing;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.env_count = 6;
  cfg.samples_per_env = 60;
  cfg.eval_per_split = 60;
  return cfg;
}

nlohmann::json without_timestamp(nlohmann::json j) {
  j["provenance"].erase("timestamp");
  return j;
}

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  const auto doc = KeyValueDoc::parse(
      "# comment\nseed = 7\nname = \"a # b\"  # trailing\n[agent]\nlambda = 0.25\nflag = true\n");
  EXPECT_EQ(doc.integer("seed", 0), 7);
  EXPECT_EQ(doc.string("name", ""), "a # b");
  EXPECT_DOUBLE_EQ(doc.number("agent.lambda", 0), 0.25);
  EXPECT_TRUE(doc.boolean("agent.flag", false));
  EXPECT_THROW(KeyValueDoc::parse("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(KeyValueDoc::parse("a 1\n"), ConfigError);
  EXPECT_THROW(KeyValueDoc::parse("a = \"open\n"), ConfigError);
  EXPECT_THROW(doc.number("name", 0), ConfigError);
  EXPECT_THROW(KeyValueDoc::parse("x = 1.5").integer("x", 0), ConfigError);
}

TEST(Config, TomlRoundTripAndValidation) {
  ExperimentConfig cfg;
  cfg.seed = 12;
  cfg.lambda = 0.75;
  cfg.sampler.min_hops = 3;
  cfg.metric.distance = DistanceMode::kEuclidean;
  cfg.unseen_node_policy = UnseenNodePolicy::kStop;
  const auto text = cfg.to_toml();
  EXPECT_EQ(ExperimentConfig::parse(text).to_toml(), text);
  EXPECT_EQ(ExperimentConfig::parse("").to_toml(), ExperimentConfig{}.to_toml());

  EXPECT_THROW(ExperimentConfig::parse("samples_per_env = 0\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("unknown_key = 1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[agent]\nlambda = 2\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("experiment = \"table9\"\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("seed = -1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[synth]\nvocabulary = \"red,then\"\n"), ConfigError);
}

TEST(Config, BundledConfigsParse) {
  for (const auto* name : {"demo", "prior_only", "skew", "generalization"}) {
    const auto path = std::string(NAVPRIOR_TEST_DATA) + "/../../configs/" + name + ".toml";
    EXPECT_NO_THROW(ExperimentConfig::parse(read_file(path))) << name;
  }
}

TEST(World, SplitsAreDisjointAndEvalUsesShortestPaths) {
  const auto cfg = small_config();
  const auto w = build_world(cfg);
  EXPECT_EQ(w.split.seen.size() + w.split.unseen.size(), 6u);
  for (const auto& u : w.split.unseen) EXPECT_EQ(w.split.seen.count(u), 0u);
  for (const auto& s : w.original.samples) EXPECT_EQ(w.split.seen.count(s.env_id), 1u);
  for (const auto& s : w.eval_unseen.samples) EXPECT_EQ(w.split.unseen.count(s.env_id), 1u);
  for (const auto* ds : {&w.original, &w.eval_seen, &w.eval_unseen}) {
    EXPECT_TRUE(validate(*ds, w.graphs).empty());
    for (const auto& s : ds->samples) {
      const auto& g = w.graphs.at(s.env_id);
      EXPECT_DOUBLE_EQ(path_length(g, s.path), geodesic_distance(g, s.start(), s.goal()));
    }
  }
}

TEST(Experiments, DeterministicModuloTimestamp) {
  const auto cfg = small_config();
  for (const auto& run : {run_prior_only_experiment, run_skew_experiment, run_generalization_experiment}) {
    const auto a = run(cfg);
    const auto b = run(cfg);
    EXPECT_EQ(without_timestamp(a.to_json()), without_timestamp(b.to_json()));
    EXPECT_EQ(a.table_csv(), b.table_csv());
  }
}

TEST(Experiments, SeedChangeKeepsSchema) {
  auto cfg = small_config();
  const auto a = run_prior_only_experiment(cfg);
  cfg.seed = 1;
  const auto b = run_prior_only_experiment(cfg);
  EXPECT_NE(a.table_csv(), b.table_csv());
  ASSERT_EQ(a.conditions.size(), b.conditions.size());
  for (std::size_t i = 0; i < a.conditions.size(); ++i) {
    EXPECT_EQ(a.conditions[i].name, b.conditions[i].name);
    EXPECT_EQ(a.conditions[i].split, b.conditions[i].split);
  }
  std::vector<std::string> ka, kb;
  for (const auto& [k, v] : a.to_json().items()) ka.push_back(k);
  for (const auto& [k, v] : b.to_json().items()) kb.push_back(k);
  EXPECT_EQ(ka, kb);
}

TEST(Experiments, PriorRowsReproducePriorOnlyRun) {
  const auto cfg = small_config();
  const auto po = run_prior_only_experiment(cfg);
  const auto ge = run_generalization_experiment(cfg);
  for (const auto* split : {"seen", "unseen"}) {
    EXPECT_EQ(eval_csv(ge.condition("prior", split).eval), eval_csv(po.condition("greedy-mtm", split).eval));
  }
}

TEST(Experiments, ReportLayout) {
  const auto cfg = small_config();
  const auto ge = run_generalization_experiment(cfg);
  std::vector<std::string> names;
  for (const auto& c : ge.conditions) names.push_back(c.name + "/" + c.split);
  EXPECT_EQ(names, (std::vector<std::string>{"blend-shortest/seen", "blend-random-walk/seen", "follower/seen",
                                             "blend-shortest/unseen", "blend-random-walk/unseen", "follower/unseen",
                                             "prior/seen", "prior/unseen"}));
  const auto sk = run_skew_experiment(cfg);
  ASSERT_EQ(sk.skew.size(), 2u);
  EXPECT_EQ(sk.skew[0].condition, "shortest");
  EXPECT_EQ(sk.skew[1].condition, "random-walk");
  EXPECT_EQ(sk.skew[0].histogram.total(), sk.skew[0].nodes);
  const auto j = sk.to_json();
  EXPECT_EQ(j.at("provenance").at("version"), std::string(kToolkitVersion));
  EXPECT_EQ(ExperimentConfig::parse(j.at("config").get<std::string>()).to_toml(), cfg.to_toml());
}

// Defaults, seed 0. Holds for 16 of seeds 0-19, so only this seed is pinned.
TEST(Experiments, FollowerHasTheSmallestGapAtDefaults) {
  const auto r = run_generalization_experiment(ExperimentConfig{});
  EXPECT_GT(r.sr("blend-shortest", "seen"), r.sr("blend-shortest", "unseen"));
  EXPECT_GT(r.gap("blend-shortest"), r.gap("blend-random-walk"));
  for (const auto* name : {"blend-shortest", "blend-random-walk", "prior"}) EXPECT_LT(r.gap("follower"), r.gap(name));
}

TEST(Experiments, WrittenConfigReproducesReport) {
  const auto dir = std::filesystem::temp_directory_path() / "navprior_report_test";
  std::filesystem::remove_all(dir);
  const auto cfg = small_config();
  const auto r = run_prior_only_experiment(cfg);
  const auto files = write_report(r, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "prior_only_report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "prior_only_table.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "episodes" / "prior_only_random_seen.csv"));
  const auto again = run_prior_only_experiment(ExperimentConfig::parse(read_file(dir / "config.toml")));
  EXPECT_EQ(again.table_csv(), read_file(dir / "prior_only_table.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Experiments, LoadedGraphsWithoutLabelsSupportPriorOnly) {
  const auto dir = std::filesystem::temp_directory_path() / "navprior_loaded_graphs";
  std::filesystem::remove_all(dir);
  GraphMap graphs;
  Rng rng(3);
  for (int i = 0; i < 4; ++i) {
    auto g = random_graph(rng, 40, 10.0, 2.8, "L" + std::to_string(i));
    std::vector<Viewpoint> nodes(g.nodes().begin(), g.nodes().end());
    for (auto& v : nodes) v.labels.clear();
    graphs.emplace(g.env_id(), EnvironmentGraph(g.env_id(), nodes, g.edges()));
  }
  save_graph_dir(graphs, dir);
  auto cfg = small_config();
  cfg.env_source = "loaded";
  cfg.graphs_dir = dir.string();
  cfg.sampler = SamplerConfig{};
  EXPECT_NO_THROW(run_prior_only_experiment(cfg));
  EXPECT_THROW(run_generalization_experiment(cfg), DataError);
  std::filesystem::remove_all(dir);
}
