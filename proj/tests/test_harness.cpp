#include <gtest/gtest.h>

#include "learning_support.hpp"
#include "uavnet/harness.hpp"

using namespace uavnet;
using namespace testsupport;

namespace {

ExperimentConfig quick_config(PolicyKind p = PolicyKind::random) {
  ExperimentConfig c;
  c.roadmap = fixture("grid5.json");
  c.policy = p;
  c.uavs = 2;
  c.horizon = 8;
  c.seeds = {1, 2};
  c.eval_episodes = 2;
  c.train = small_train_config(15);
  return c;
}

double parse(const std::string& s) { return std::stod(s); }

}  // namespace

TEST(Config, DefaultsFromEmptyDocument) {
  ExperimentConfig c = config_from_json(json::object());
  EXPECT_EQ(c.uavs, 3);
  EXPECT_EQ(c.horizon, 20);
  EXPECT_EQ(c.policy, PolicyKind::q_sdam);
  EXPECT_EQ(c.train.episodes, 3000);
  EXPECT_EQ(c.train.mask.mode, MaskMode::linear);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(c.sweep_policies.size(), 4u);
  EXPECT_FALSE(c.reward.norm1.has_value());
}

TEST(Config, RoundTripsThroughJson) {
  ExperimentConfig c = quick_config(PolicyKind::q_sam);
  c.score.phi0 = 1234.5;
  c.train.mask = {MaskMode::fixed, 4};
  c.trace = fixture("grid5_trace.csv");
  ExperimentConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, RejectsUnknownKeys) {
  try {
    config_from_json(json::parse(R"({"train": {"episodez": 3}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "train.episodez");
  }
  EXPECT_THROW(config_from_json(json::parse(R"({"colour": 1})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"uavs": "three"})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"train": {"mask_mode": "half"}})")), ConfigError);
}

TEST(Config, OverridesApplyOnTopOfFile) {
  auto dir = scratch("cfg_override");
  std::ofstream(dir / "c.json") << R"({"roadmap": "map.json", "uavs": 2, "train": {"episodes": 10}})";
  ExperimentConfig c =
      load_config(dir / "c.json", {"uavs=5", "train.gamma=0.9", "policy=mu_greedy", "scenario=hello world"});
  EXPECT_EQ(c.uavs, 5);
  EXPECT_EQ(c.train.episodes, 10);
  EXPECT_EQ(c.train.gamma, 0.9);
  EXPECT_EQ(c.policy, PolicyKind::mu_greedy);
  EXPECT_EQ(c.scenario, "hello world");
  EXPECT_EQ(c.roadmap, dir / "map.json");
  EXPECT_THROW(load_config(dir / "c.json", {"novalue"}), ConfigError);
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

TEST(Config, ValidationNamesTheField) {
  ExperimentConfig c = quick_config();
  c.roadmap = "/nonexistent/map.json";
  try {
    validate(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "roadmap");
  }
  c = quick_config();
  c.uavs = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = quick_config();
  c.seeds.clear();
  EXPECT_THROW(validate(c), ConfigError);
  c = quick_config();
  c.roadmap.clear();
  EXPECT_THROW(build_scenario(c), ConfigError);
}

TEST(Config, ShippedConfigLoads) {
  ExperimentConfig c = load_config(fs::path(UAVNET_SOURCE_DIR) / "configs" / "grid5.json");
  validate(c);
  EXPECT_EQ(c.uavs, 3);
  EXPECT_EQ(c.seeds.size(), 3u);
}

TEST(Run, WritesMetricsAndArtifacts) {
  auto dir = scratch("run_random");
  RunResult r = run(quick_config(), dir / "out");
  ASSERT_EQ(r.seeds.size(), 2u);
  CsvTable t = read_csv(dir / "out" / "metrics.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"policy", "C", "seed", "M_C", "M_E", "M_F", "O1", "O2", "return"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "random");
  EXPECT_EQ(t.rows[0][1], "2");
  EXPECT_EQ(t.rows[1][2], "2");
  EXPECT_DOUBLE_EQ(parse(t.rows[0][3]), r.seeds[0].eval.m_c.mean);
  EXPECT_TRUE(fs::exists(dir / "out" / "config.resolved.json"));
  EXPECT_FALSE(fs::exists(dir / "out.partial"));

  CsvTable log = read_csv(dir / "out" / "seed_1" / "episode_log.csv");
  EXPECT_EQ(log.rows.size(), 8u);
  ExperimentConfig back = load_config(dir / "out" / "config.resolved.json");
  EXPECT_EQ(to_json(back), to_json(quick_config()));
}

TEST(Run, RerunIsByteIdentical) {
  auto dir = scratch("run_twice");
  run(quick_config(PolicyKind::q_sdam), dir / "a");
  run(quick_config(PolicyKind::q_sdam), dir / "b");
  for (const char* f : {"metrics.csv", "seed_1/learning_curve.csv", "seed_2/checkpoint.txt", "seed_1/episode_log.csv",
                        "seed_2/learning_curve.svg"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Run, LearnedArtifactsReparse) {
  auto dir = scratch("run_learned");
  RunResult r = run(quick_config(PolicyKind::q_sdam), dir / "out");
  const auto seed = dir / "out" / "seed_1";
  CsvTable curve = read_csv(seed / "learning_curve.csv");
  EXPECT_EQ(curve.header, (std::vector<std::string>{"episode", "return", "epsilon", "N_A", "loss_mean"}));
  ASSERT_EQ(curve.rows.size(), 15u);
  EXPECT_EQ(curve.rows.back()[3], "25");
  std::ifstream ck(seed / "checkpoint.txt");
  NamedNets nets = load_checkpoint(ck);
  ASSERT_EQ(nets.size(), 6u);
  EXPECT_EQ(nets[0].first, "agent_1");
  EXPECT_EQ(nets[5].first, "mixer_v");
  json meta = json::parse(slurp(seed / "policy.json"));
  EXPECT_EQ(meta["n_a"], 25);
  EXPECT_NE(slurp(seed / "learning_curve.svg").find("<svg"), std::string::npos);
}

TEST(Run, CheckpointEvalReproducesMetrics) {
  auto dir = scratch("run_ckpt");
  ExperimentConfig c = quick_config(PolicyKind::q_sdam);
  c.seeds = {3};
  RunResult trained = run(c, dir / "train");
  RunResult evald = run_eval(c, dir / "eval", dir / "train" / "seed_3");
  EXPECT_EQ(slurp(dir / "train" / "metrics.csv"), slurp(dir / "eval" / "metrics.csv"));
  EXPECT_EQ(trained.seeds[0].eval.o2.mean, evald.seeds[0].eval.o2.mean);
  EXPECT_THROW(run_eval(c, dir / "nockpt"), ConfigError);
  c.uavs = 3;
  EXPECT_THROW(run_eval(c, dir / "wrong", dir / "train" / "seed_3"), ConfigError);
}

TEST(Run, ScoreDumpFiles) {
  auto dir = scratch("dump");
  ExperimentConfig c = quick_config(PolicyKind::mu_greedy);
  Scenario sc = build_scenario(c);
  dump_scores(MuGreedyPolicy{c.score}, sc, c.score, 3, 1, dir);
  CsvTable t = read_csv(dir / "scores_t1_u2.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"vertex", "score", "masked"}));
  ASSERT_EQ(t.rows.size(), 25u);
  int permitted = 0;
  for (const auto& r : t.rows) permitted += r[2] == "0";
  EXPECT_EQ(permitted, 3);
  EXPECT_TRUE(fs::exists(dir / "scores_t8_u1.csv"));
}

TEST(Staging, FailureLeavesNoPartialOutput) {
  auto dir = scratch("staged");
  fs::create_directories(dir / "out");
  std::ofstream(dir / "out" / "keep.txt") << "old";
  try {
    detail::StagedDir staged(dir / "out");
    std::ofstream(staged.path() / "half.txt") << "new";
    throw std::runtime_error("boom");
  } catch (const std::runtime_error&) {
  }
  EXPECT_FALSE(fs::exists(dir / "out.partial"));
  EXPECT_EQ(slurp(dir / "out" / "keep.txt"), "old");
  {
    detail::StagedDir staged(dir / "out");
    std::ofstream(staged.path() / "fresh.txt") << "x";
    staged.commit();
  }
  EXPECT_FALSE(fs::exists(dir / "out" / "keep.txt"));
  EXPECT_TRUE(fs::exists(dir / "out" / "fresh.txt"));
}

TEST(Sweep, RowsAndSummaries) {
  auto dir = scratch("sweep");
  ExperimentConfig c = quick_config();
  c.sweep_policies = {PolicyKind::mu_greedy, PolicyKind::random};
  c.seeds = {1, 2, 3};
  SweepResult s = sweep_uavs(c, {1, 3}, dir / "out");
  EXPECT_TRUE(s.failures.empty());
  CsvTable t = read_csv(dir / "out" / "sweep.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"policy", "C", "seed", "M_C", "M_E", "M_F"}));
  ASSERT_EQ(t.rows.size(), 2u * 2 * (3 + 2));
  for (std::size_t base = 0; base < t.rows.size(); base += 5) {
    for (int col : {3, 4, 5}) {
      double mean = 0;
      for (int i = 0; i < 3; ++i) mean += parse(t.rows[base + i][col]);
      mean /= 3;
      double var = 0;
      for (int i = 0; i < 3; ++i) var += std::pow(parse(t.rows[base + i][col]) - mean, 2);
      EXPECT_EQ(t.rows[base + 3][2], "mean");
      EXPECT_NEAR(parse(t.rows[base + 3][col]), mean, 1e-9 * (1 + std::abs(mean)));
      EXPECT_EQ(t.rows[base + 4][2], "std");
      EXPECT_NEAR(parse(t.rows[base + 4][col]), std::sqrt(var / 3), 1e-9 * (1 + std::abs(mean)));
    }
  }
  for (const char* m : {"M_C", "M_E", "M_F"}) EXPECT_TRUE(fs::exists(dir / "out" / (std::string("sweep_") + m + ".svg")));
  EXPECT_TRUE(fs::exists(dir / "out" / "random_C3" / "metrics.csv"));
  EXPECT_FALSE(fs::exists(dir / "out" / "failures.txt"));
}

TEST(Sweep, FailingCellIsFlaggedAndOthersComplete) {
  auto dir = scratch("sweep_fail");
  ExperimentConfig c = quick_config();
  c.sweep_policies = {PolicyKind::random};
  c.seeds = {1};
  CellRunner runner = [](const ExperimentConfig& cfg, const fs::path& out) {
    if (cfg.uavs == 2) throw std::runtime_error("injected");
    return run(cfg, out);
  };
  SweepResult s = sweep_uavs(c, {1, 2, 3}, dir / "out", runner);
  ASSERT_EQ(s.failures.size(), 1u);
  EXPECT_NE(s.failures[0].find("random_C2"), std::string::npos);
  EXPECT_EQ(s.cells.size(), 2u);
  EXPECT_NE(slurp(dir / "out" / "failures.txt").find("injected"), std::string::npos);
  EXPECT_EQ(read_csv(dir / "out" / "sweep.csv").rows.size(), 2u * 3);
  EXPECT_THROW(sweep_uavs(c, {}, dir / "bad"), ConfigError);
}

TEST(GraphInfo, Grid5) {
  RoadGraph g = load_roadmap(fixture("grid5.json"));
  GraphInfo info = graph_info(g);
  EXPECT_EQ(info.n, 25);
  EXPECT_EQ(info.m, 40);
  EXPECT_EQ(info.degree_histogram.at(2), 4);
  EXPECT_EQ(info.degree_histogram.at(3), 12);
  EXPECT_EQ(info.degree_histogram.at(4), 9);
  EXPECT_EQ(info.hop_diameter, 8);
  EXPECT_NEAR(info.euclidean_diameter, std::hypot(800.0, 800.0), 1e-9);
  // sum over vertices of d(d-1)/2
  EXPECT_EQ(info.dual_edges, static_cast<std::size_t>(4 * 1 + 12 * 3 + 9 * 6));
  std::ostringstream out;
  write_graph_info(out, info);
  std::istringstream in(out.str());
  CsvTable t = read_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"key", "value"}));
  EXPECT_EQ(t.rows[0], (std::vector<std::string>{"n", "25"}));
}

TEST(GenTraffic, MatchesFixtureAndReloads) {
  auto dir = scratch("gen");
  TrafficTrace t = gen_traffic(fixture("grid5.json"), {12, 0.3, 7}, 20, dir / "sub" / "trace.csv");
  EXPECT_EQ(slurp(dir / "sub" / "trace.csv"), slurp(fixture("grid5_trace.csv")));
  RoadGraph g = load_roadmap(fixture("grid5.json"));
  TrafficTrace back = load_trace(dir / "sub" / "trace.csv", g, 20);
  ASSERT_EQ(back.slots.size(), t.slots.size());
  for (std::size_t i = 0; i < t.slots.size(); ++i) EXPECT_EQ(back.slots[i].p_e, t.slots[i].p_e);
}

TEST(Csv, RejectsRaggedRows) {
  std::istringstream in("a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv(in), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), ParseError);
}

TEST(Svg, ChartsAreWellFormed) {
  std::string s = line_chart_svg({{"a<b", {1, 2, 3}, {0, 1, 4}}}, "t", "x", "y");
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("a&lt;b"), std::string::npos);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  std::string b = bar_chart_svg({"C=1", "C=2"}, {{"p", {1, 2}, {3, std::nan("")}}}, "t", "x", "y");
  EXPECT_NE(b.find("<rect"), std::string::npos);
}

TEST(Sweep, SingleCountReducesToRun) {
  auto dir = scratch("sweep_single");
  ExperimentConfig c = quick_config(PolicyKind::mu_greedy);
  c.sweep_policies = {PolicyKind::mu_greedy};
  c.uavs = 1;
  sweep_uavs(c, {1}, dir / "sweep");
  run(c, dir / "run");
  EXPECT_EQ(slurp(dir / "sweep" / "mu_greedy_C1" / "metrics.csv"), slurp(dir / "run" / "metrics.csv"));
}
