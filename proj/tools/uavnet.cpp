#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uavnet/harness.hpp"

using namespace uavnet;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kConfig = 2, kPartial = 3 };

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  long long seed = -1;
  std::string policy;
  std::string uavs;
};

void add_common(CLI::App* cmd, Common& c, bool with_policy) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--set", c.sets, "override a config key, e.g. train.episodes=500")->take_all();
  cmd->add_option("--out", c.out, "output location");
  cmd->add_option("--seed", c.seed, "run a single seed instead of the configured list");
  if (with_policy) cmd->add_option("--policy", c.policy, "q_sdam | q_sam | mu_greedy | random");
}

std::vector<int> parse_uav_list(const std::string& text) {
  std::vector<int> out;
  for (auto part : split(text, ',')) {
    auto v = parse_int<int>(part);
    if (!v) throw ConfigError("--uavs", "not an integer list: '" + text + "'");
    out.push_back(*v);
  }
  return out;
}

ExperimentConfig resolve(const Common& c) {
  std::vector<std::string> sets = c.sets;
  if (!c.policy.empty()) sets.push_back("policy=\"" + c.policy + "\"");
  if (c.seed >= 0) sets.push_back("seeds=[" + std::to_string(c.seed) + "]");
  ExperimentConfig cfg = load_config(c.config, sets);
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

void print_summary(const RunResult& r, const fs::path& dir) {
  std::cout << "policy " << to_string(r.policy) << ", C=" << r.uavs << '\n';
  for (const auto& s : r.seeds)
    std::cout << "  seed " << s.seed << ": M_C=" << format_double(s.eval.m_c.mean)
              << " M_E=" << format_double(s.eval.m_e.mean) << " M_F=" << format_double(s.eval.m_f.mean) << '\n';
  std::cout << "wrote " << dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-UAV deployment simulator and learner for vehicular networks"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, sweep_opts, gen_opts;
  std::string checkpoint, dump_dir, info_roadmap, info_out;
  int uav_count = 0;

  auto* train_cmd = app.add_subcommand("train", "train (if the policy learns) and evaluate per seed");
  add_common(train_cmd, train_opts, true);
  train_cmd->add_option("--uavs", uav_count, "number of UAVs");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a baseline or a stored checkpoint");
  add_common(eval_cmd, eval_opts, true);
  eval_cmd->add_option("--uavs", uav_count, "number of UAVs");
  eval_cmd->add_option("--checkpoint", checkpoint, "seed directory written by train");
  eval_cmd->add_option("--dump-scores", dump_dir, "write per-slot action scores for one episode");

  auto* sweep_cmd = app.add_subcommand("sweep", "run every configured policy for each UAV count");
  add_common(sweep_cmd, sweep_opts, false);
  sweep_cmd->add_option("--policy", sweep_opts.policy, "comma-separated policy list");
  sweep_cmd->add_option("--uavs", sweep_opts.uavs, "comma-separated UAV counts")->required();

  auto* gen_cmd = app.add_subcommand("gen-traffic", "synthesize a traffic trace for the configured roadmap");
  add_common(gen_cmd, gen_opts, false);

  auto* info_cmd = app.add_subcommand("graph-info", "summarize a roadmap file");
  info_cmd->add_option("roadmap", info_roadmap, "roadmap JSON")->required();
  info_cmd->add_option("--out", info_out, "write the report to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      if (uav_count > 0) train_opts.sets.push_back("uavs=" + std::to_string(uav_count));
      const ExperimentConfig cfg = resolve(train_opts);
      print_summary(run(cfg, cfg.output_dir), cfg.output_dir);
    } else if (*eval_cmd) {
      if (uav_count > 0) eval_opts.sets.push_back("uavs=" + std::to_string(uav_count));
      ExperimentConfig cfg = resolve(eval_opts);
      if (!checkpoint.empty() && eval_opts.policy.empty()) {
        std::ifstream meta(fs::path(checkpoint) / "policy.json");
        if (meta) cfg.policy = policy_kind_from_string(json::parse(meta).value("policy", "q_sdam"));
      }
      print_summary(run_eval(cfg, cfg.output_dir, checkpoint), cfg.output_dir);
      if (!dump_dir.empty()) {
        const Scenario sc = build_scenario(cfg);
        std::shared_ptr<const Policy> policy;
        int n_a = sc.graph->vertex_count();
        if (!checkpoint.empty()) {
          auto learned = load_learned_policy(checkpoint, cfg.score, cfg.uavs);
          n_a = learned->n_a();
          policy = learned;
        } else if (cfg.policy == PolicyKind::mu_greedy) {
          policy = std::make_shared<MuGreedyPolicy>(cfg.score);
        } else {
          policy = std::make_shared<RandomPolicy>();
        }
        dump_scores(*policy, sc, cfg.score, n_a, cfg.seeds.front(), dump_dir);
        std::cout << "wrote score dumps to " << dump_dir << '\n';
      }
    } else if (*sweep_cmd) {
      const std::string policies = sweep_opts.policy;
      sweep_opts.policy.clear();
      ExperimentConfig cfg = resolve(sweep_opts);
      if (!policies.empty()) {
        cfg.sweep_policies.clear();
        for (auto p : split(policies, ',')) cfg.sweep_policies.push_back(policy_kind_from_string(std::string(p)));
      }
      const SweepResult res = sweep_uavs(cfg, parse_uav_list(sweep_opts.uavs), cfg.output_dir);
      std::cout << "wrote " << (cfg.output_dir / "sweep.csv").string() << " (" << res.cells.size() << " cells)\n";
      if (!res.failures.empty()) {
        for (const auto& f : res.failures) std::cerr << "failed: " << f << '\n';
        return kPartial;
      }
    } else if (*gen_cmd) {
      ExperimentConfig cfg = load_config(gen_opts.config, gen_opts.sets);
      if (gen_opts.seed >= 0) cfg.synth.seed = static_cast<std::uint64_t>(gen_opts.seed);
      if (cfg.roadmap.empty()) throw ConfigError("roadmap", "is required");
      if (cfg.horizon < 1) throw ConfigError("horizon", "must be >= 1");
      const fs::path out = gen_opts.out.empty() ? fs::path("trace.csv") : fs::path(gen_opts.out);
      const TrafficTrace t = gen_traffic(cfg.roadmap, cfg.synth, cfg.horizon, out);
      std::cout << "wrote " << out.string() << " (T=" << t.horizon() << ")\n";
    } else if (*info_cmd) {
      const GraphInfo info = graph_info(load_roadmap(info_roadmap));
      if (info_out.empty()) {
        write_graph_info(std::cout, info);
      } else {
        std::ofstream out(info_out);
        write_graph_info(out, info);
      }
    }
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kConfig;
  } catch (const ParseError& err) {
    std::cerr << err.what() << '\n';
    return kConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
