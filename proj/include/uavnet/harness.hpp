#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavnet/baselines.hpp"
#include "uavnet/env.hpp"
#include "uavnet/error.hpp"
#include "uavnet/format.hpp"
#include "uavnet/qmix.hpp"
#include "uavnet/road_graph.hpp"
#include "uavnet/sdam.hpp"
#include "uavnet/svg.hpp"
#include "uavnet/traffic.hpp"
#include "uavnet/valuenet.hpp"

namespace uavnet {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct ExperimentConfig {
  std::string scenario = "scenario";
  fs::path roadmap;
  fs::path trace;  // empty: synthesize
  SynthParams synth{12, 0.3, 7};
  int uavs = 3;
  int horizon = 20;  // 0: take from the trace file
  EnergyParams energy;
  RewardParams reward;
  ScoreParams score;
  TrainConfig train;
  PolicyKind policy = PolicyKind::q_sdam;
  int fixed_na = 0;  // Q-SAM width; 0 = max(1, n/4)
  std::vector<std::uint64_t> seeds{1};
  int eval_episodes = 10;
  std::vector<PolicyKind> sweep_policies{PolicyKind::q_sdam, PolicyKind::q_sam, PolicyKind::mu_greedy,
                                         PolicyKind::random};
  fs::path output_dir = "runs/default";
};

// ---------------------------------------------------------------------------
// JSON <-> config. Every key is optional; unknown keys are rejected.
// ---------------------------------------------------------------------------

namespace detail {

class ConfigReader {
public:
  ConfigReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["scenario"] = c.scenario;
  j["roadmap"] = c.roadmap.string();
  j["trace"] = c.trace.empty() ? json(nullptr) : json(c.trace.string());
  j["synth"] = {{"vehicle_count", c.synth.vehicle_count},
                {"move_probability", c.synth.move_probability},
                {"seed", c.synth.seed}};
  j["uavs"] = c.uavs;
  j["horizon"] = c.horizon;
  j["energy"] = {{"eps1", c.energy.eps1},
                 {"eps2", c.energy.eps2},
                 {"eps3", c.energy.eps3},
                 {"fly_speed", c.energy.fly_speed},
                 {"slot_seconds", c.energy.slot_seconds},
                 {"initial_energy", c.energy.initial_energy}};
  j["reward"] = {{"alpha0", c.reward.alpha0},
                 {"beta0", c.reward.beta0},
                 {"norm1", detail::opt_json(c.reward.norm1)},
                 {"norm2", detail::opt_json(c.reward.norm2)}};
  j["score"] = {{"alpha1", c.score.alpha1},
                {"beta1", c.score.beta1},
                {"phi0", detail::opt_json(c.score.phi0)},
                {"phi1", detail::opt_json(c.score.phi1)}};
  const TrainConfig& t = c.train;
  j["train"] = {{"episodes", t.episodes},
                {"gamma", t.gamma},
                {"epsilon_start", t.epsilon_start},
                {"epsilon_end", t.epsilon_end},
                {"epsilon_decay_fraction", t.epsilon_decay_fraction},
                {"batch_size", t.batch_size},
                {"buffer_episodes", t.buffer_episodes},
                {"target_update_interval", t.target_update_interval},
                {"update_period", t.update_period},
                {"updates_per_episode", t.updates_per_episode},
                {"learning_rate", t.learning_rate},
                {"grad_clip", t.grad_clip},
                {"agent_hidden", t.agent_hidden},
                {"mixer_embed", t.mixer_embed},
                {"mask_mode", to_string(t.mask.mode)},
                {"fixed_na", t.mask.fixed_na}};
  j["policy"] = to_string(c.policy);
  j["fixed_na"] = c.fixed_na;
  j["seeds"] = c.seeds;
  j["eval_episodes"] = c.eval_episodes;
  j["sweep_policies"] = json::array();
  for (auto p : c.sweep_policies) j["sweep_policies"].push_back(to_string(p));
  j["output_dir"] = c.output_dir.string();
  return j;
}

// Relative paths are resolved against base_dir.
inline ExperimentConfig config_from_json(const json& j, const fs::path& base_dir = {}) {
  ExperimentConfig c;
  detail::ConfigReader r(j, "");
  r.get("scenario", c.scenario);
  std::string roadmap, trace, out;
  r.get("roadmap", roadmap);
  r.get("trace", trace);
  r.get("output_dir", out);
  auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  c.roadmap = resolve(roadmap);
  c.trace = resolve(trace);
  if (!out.empty()) c.output_dir = out;

  if (const json* s = r.child("synth")) {
    detail::ConfigReader sr(*s, "synth");
    sr.get("vehicle_count", c.synth.vehicle_count);
    sr.get("move_probability", c.synth.move_probability);
    sr.get("seed", c.synth.seed);
    sr.finish();
  }
  r.get("uavs", c.uavs);
  r.get("horizon", c.horizon);
  if (const json* e = r.child("energy")) {
    detail::ConfigReader er(*e, "energy");
    er.get("eps1", c.energy.eps1);
    er.get("eps2", c.energy.eps2);
    er.get("eps3", c.energy.eps3);
    er.get("fly_speed", c.energy.fly_speed);
    er.get("slot_seconds", c.energy.slot_seconds);
    er.get("initial_energy", c.energy.initial_energy);
    er.finish();
  }
  if (const json* w = r.child("reward")) {
    detail::ConfigReader wr(*w, "reward");
    wr.get("alpha0", c.reward.alpha0);
    wr.get("beta0", c.reward.beta0);
    wr.get_optional("norm1", c.reward.norm1);
    wr.get_optional("norm2", c.reward.norm2);
    wr.finish();
  }
  if (const json* s = r.child("score")) {
    detail::ConfigReader sr(*s, "score");
    sr.get("alpha1", c.score.alpha1);
    sr.get("beta1", c.score.beta1);
    sr.get_optional("phi0", c.score.phi0);
    sr.get_optional("phi1", c.score.phi1);
    sr.finish();
  }
  if (const json* t = r.child("train")) {
    detail::ConfigReader tr(*t, "train");
    TrainConfig& tc = c.train;
    tr.get("episodes", tc.episodes);
    tr.get("gamma", tc.gamma);
    tr.get("epsilon_start", tc.epsilon_start);
    tr.get("epsilon_end", tc.epsilon_end);
    tr.get("epsilon_decay_fraction", tc.epsilon_decay_fraction);
    tr.get("batch_size", tc.batch_size);
    tr.get("buffer_episodes", tc.buffer_episodes);
    tr.get("target_update_interval", tc.target_update_interval);
    tr.get("update_period", tc.update_period);
    tr.get("updates_per_episode", tc.updates_per_episode);
    tr.get("learning_rate", tc.learning_rate);
    tr.get("grad_clip", tc.grad_clip);
    tr.get("agent_hidden", tc.agent_hidden);
    tr.get("mixer_embed", tc.mixer_embed);
    std::string mode = to_string(tc.mask.mode);
    tr.get("mask_mode", mode);
    try {
      tc.mask.mode = mask_mode_from_string(mode);
    } catch (const ConfigError&) {
      throw ConfigError("train.mask_mode", "expected linear | fixed | off, got '" + mode + "'");
    }
    tr.get("fixed_na", tc.mask.fixed_na);
    tr.finish();
  }
  std::string policy = to_string(c.policy);
  r.get("policy", policy);
  c.policy = policy_kind_from_string(policy);
  r.get("fixed_na", c.fixed_na);
  r.get("seeds", c.seeds);
  r.get("eval_episodes", c.eval_episodes);
  std::vector<std::string> sweep;
  r.get("sweep_policies", sweep);
  if (!sweep.empty()) {
    c.sweep_policies.clear();
    for (const auto& s : sweep) c.sweep_policies.push_back(policy_kind_from_string(s));
  }
  r.finish();
  return c;
}

// "a.b.c=value"; value is parsed as JSON when possible, else taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {}) {
  json doc = json::object();
  fs::path base;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& err) {
      throw ParseError(path.string(), {err.what()});
    }
    base = path.parent_path();
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc, base);
}

inline void validate(const ExperimentConfig& c) {
  if (c.roadmap.empty()) throw ConfigError("roadmap", "is required");
  if (!fs::exists(c.roadmap)) throw ConfigError("roadmap", "file not found: " + c.roadmap.string());
  if (!c.trace.empty() && !fs::exists(c.trace)) throw ConfigError("trace", "file not found: " + c.trace.string());
  if (c.trace.empty() && c.horizon < 1) throw ConfigError("horizon", "must be >= 1 when traffic is synthesized");
  if (c.horizon < 0) throw ConfigError("horizon", "must be >= 0");
  if (c.uavs < 1) throw ConfigError("uavs", "must be >= 1");
  if (c.seeds.empty()) throw ConfigError("seeds", "must not be empty");
  if (c.eval_episodes < 1) throw ConfigError("eval_episodes", "must be >= 1");
  if (c.fixed_na < 0) throw ConfigError("fixed_na", "must be >= 0");
  if (c.synth.vehicle_count < 0) throw ConfigError("synth.vehicle_count", "must be >= 0");
  if (!(c.synth.move_probability >= 0.0 && c.synth.move_probability <= 1.0))
    throw ConfigError("synth.move_probability", "must be in [0, 1]");
  c.energy.validate();
  c.reward.validate();
  c.train.validate();
}

// ---------------------------------------------------------------------------
// Scenario assembly
// ---------------------------------------------------------------------------

struct Scenario {
  std::shared_ptr<const RoadGraph> graph;
  std::shared_ptr<const TrafficTrace> trace;
  EnvConfig env;

  EnvFactory factory() const {
    return [g = graph, t = trace, e = env] { return Environment(g, t, e); };
  }
};

inline Scenario build_scenario(const ExperimentConfig& c) {
  validate(c);
  Scenario s;
  s.graph = std::make_shared<const RoadGraph>(load_roadmap(c.roadmap));
  if (c.trace.empty())
    s.trace = std::make_shared<const TrafficTrace>(synth_trace(*s.graph, c.synth, c.horizon));
  else
    s.trace = std::make_shared<const TrafficTrace>(load_trace(c.trace, *s.graph, c.horizon));
  s.env.uavs = c.uavs;
  s.env.energy = c.energy;
  s.env.reward = c.reward;
  return s;
}

inline int effective_fixed_na(const ExperimentConfig& c, int n) {
  return c.fixed_na > 0 ? c.fixed_na : default_fixed_na(n);
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct SeedResult {
  std::uint64_t seed = 0;
  EvaluationReport eval;
  std::vector<CurvePoint> curve;  // empty for non-learning policies
};

struct RunResult {
  PolicyKind policy = PolicyKind::random;
  int uavs = 0;
  std::vector<SeedResult> seeds;
};

namespace detail {

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <typename Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

inline NamedNets named_nets(const QmixNets& nets) {
  NamedNets out;
  for (std::size_t u = 0; u < nets.agents.size(); ++u) out.emplace_back("agent_" + std::to_string(u + 1), nets.agents[u]);
  out.emplace_back("mixer_w1", nets.mixer.hyper_w1);
  out.emplace_back("mixer_b1", nets.mixer.hyper_b1);
  out.emplace_back("mixer_w2", nets.mixer.hyper_w2);
  out.emplace_back("mixer_v", nets.mixer.hyper_v);
  return out;
}

// Writes into a sibling staging directory and swaps it in on success, so a
// failed run leaves no partial output behind.
class StagedDir {
public:
  explicit StagedDir(fs::path target) : target_(std::move(target)) {
    staging_ = target_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~StagedDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  const fs::path& path() const { return staging_; }

  void commit() {
    fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

}  // namespace detail

// Minimal reader for the CSV files written here: header row plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline CsvTable read_csv(std::istream& in, const std::string& source = "<csv>") {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, {"empty file"});
  auto owned = [](std::string_view l) {
    std::vector<std::string> out;
    for (auto c : split(l, ',')) out.emplace_back(c);
    return out;
  };
  t.header = owned(line);
  std::vector<std::string> problems;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = owned(line);
    if (cells.size() != t.header.size())
      problems.push_back("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                         " cells, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!problems.empty()) throw ParseError(source, problems);
  return t;
}

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_csv(in, path.string());
}

inline const char* metrics_header() { return "policy,C,seed,M_C,M_E,M_F,O1,O2,return"; }

inline void write_metrics_rows(std::ostream& out, const RunResult& run) {
  for (const auto& s : run.seeds)
    out << to_string(run.policy) << ',' << run.uavs << ',' << s.seed << ',' << format_double(s.eval.m_c.mean) << ','
        << format_double(s.eval.m_e.mean) << ',' << format_double(s.eval.m_f.mean) << ','
        << format_double(s.eval.o1.mean) << ',' << format_double(s.eval.o2.mean) << ','
        << format_double(s.eval.episode_return.mean) << '\n';
}

// Policy for one seed: trains when the policy learns, then evaluates.
inline SeedResult run_seed(const ExperimentConfig& c, const Scenario& sc, std::uint64_t seed, const fs::path& dir) {
  SeedResult res;
  res.seed = seed;
  const EnvFactory factory = sc.factory();
  std::shared_ptr<const Policy> policy;
  if (is_learned(c.policy)) {
    TrainConfig tc = c.train;
    tc.seed = seed;
    TrainResult tr = c.policy == PolicyKind::q_sam
                         ? q_sam_train(factory, tc, c.score, effective_fixed_na(c, sc.graph->vertex_count()))
                         : train(factory, tc, c.score);
    res.curve = tr.curve;
    policy = tr.policy;
    if (!dir.empty()) {
      detail::write_file(dir / "learning_curve.csv", detail::to_text([&](auto& os) { write_learning_curve(os, tr.curve); }));
      detail::write_file(dir / "learning_curve.svg", learning_curve_svg(tr.curve, to_string(c.policy)));
      detail::write_file(dir / "checkpoint.txt",
                         detail::to_text([&](auto& os) { save_checkpoint(os, detail::named_nets(tr.nets)); }));
      json meta = {{"policy", to_string(c.policy)}, {"n_a", tr.policy->n_a()}, {"uavs", c.uavs}};
      detail::write_file(dir / "policy.json", meta.dump(2) + "\n");
    }
  } else if (c.policy == PolicyKind::mu_greedy) {
    policy = std::make_shared<MuGreedyPolicy>(c.score);
  } else {
    policy = std::make_shared<RandomPolicy>();
  }
  res.eval = evaluate(*policy, factory, c.eval_episodes, seed);
  if (!dir.empty())
    detail::write_file(dir / "episode_log.csv",
                       detail::to_text([&](auto& os) { write_episode_log(os, res.eval.logs.front()); }));
  return res;
}

// One directory per run: resolved config, metrics.csv and per-seed artifacts.
inline RunResult run(const ExperimentConfig& c, const fs::path& out_dir) {
  const Scenario sc = build_scenario(c);
  detail::StagedDir staged(out_dir);
  detail::write_file(staged.path() / "config.resolved.json", to_json(c).dump(2) + "\n");
  RunResult result;
  result.policy = c.policy;
  result.uavs = c.uavs;
  for (auto seed : c.seeds) {
    const fs::path dir = staged.path() / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    result.seeds.push_back(run_seed(c, sc, seed, dir));
  }
  detail::write_file(staged.path() / "metrics.csv", detail::to_text([&](auto& os) {
                       os << metrics_header() << '\n';
                       write_metrics_rows(os, result);
                     }));
  staged.commit();
  return result;
}

// Evaluation of a stored checkpoint (policy.json + checkpoint.txt).
inline std::shared_ptr<LearnedPolicy> load_learned_policy(const fs::path& dir, const ScoreParams& score, int uavs) {
  std::ifstream meta_in(dir / "policy.json");
  if (!meta_in) throw ConfigError("--checkpoint", "missing policy.json in " + dir.string());
  json meta = json::parse(meta_in);
  std::ifstream in(dir / "checkpoint.txt");
  if (!in) throw ConfigError("--checkpoint", "missing checkpoint.txt in " + dir.string());
  NamedNets nets = load_checkpoint(in);
  std::vector<DenseNet> agents;
  for (auto& [name, net] : nets)
    if (name.rfind("agent_", 0) == 0) agents.push_back(std::move(net));
  if (static_cast<int>(agents.size()) != uavs)
    throw ConfigError("uavs", "checkpoint holds " + std::to_string(agents.size()) + " agents, config asks for " +
                                  std::to_string(uavs));
  return std::make_shared<LearnedPolicy>(meta.value("policy", "q_sdam"), std::move(agents), score,
                                         meta.value("n_a", 1));
}

inline RunResult run_eval(const ExperimentConfig& c, const fs::path& out_dir, const fs::path& checkpoint_dir = {}) {
  const Scenario sc = build_scenario(c);
  std::shared_ptr<const Policy> policy;
  if (!checkpoint_dir.empty())
    policy = load_learned_policy(checkpoint_dir, c.score, c.uavs);
  else if (c.policy == PolicyKind::mu_greedy)
    policy = std::make_shared<MuGreedyPolicy>(c.score);
  else if (c.policy == PolicyKind::random)
    policy = std::make_shared<RandomPolicy>();
  else
    throw ConfigError("policy", std::string(to_string(c.policy)) + " needs --checkpoint for eval");

  detail::StagedDir staged(out_dir);
  detail::write_file(staged.path() / "config.resolved.json", to_json(c).dump(2) + "\n");
  RunResult result;
  result.policy = c.policy;
  result.uavs = c.uavs;
  for (auto seed : c.seeds) {
    SeedResult s;
    s.seed = seed;
    s.eval = evaluate(*policy, sc.factory(), c.eval_episodes, seed);
    const fs::path dir = staged.path() / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    detail::write_file(dir / "episode_log.csv",
                       detail::to_text([&](auto& os) { write_episode_log(os, s.eval.logs.front()); }));
    result.seeds.push_back(std::move(s));
  }
  detail::write_file(staged.path() / "metrics.csv", detail::to_text([&](auto& os) {
                       os << metrics_header() << '\n';
                       write_metrics_rows(os, result);
                     }));
  staged.commit();
  return result;
}

// One greedy episode; before each slot writes scores_t<t>_u<u>.csv per alive UAV.
inline void dump_scores(const Policy& policy, const Scenario& sc, const ScoreParams& score, int n_a,
                        std::uint64_t seed, const fs::path& dir) {
  fs::create_directories(dir);
  Environment env = sc.factory()();
  const ScoreParams sp = score.resolved(env.graph());
  Rng rng(seed);
  while (!env.done()) {
    for (int u = 0; u < env.uav_count(); ++u) {
      if (!env.uavs()[u].alive) continue;
      const auto view = connectivity_view(env, u);
      const auto s = scores(view, env.graph(), sp);
      const ActionMask mask = rank_and_mask(s, std::min(n_a, env.graph().vertex_count()));
      detail::write_file(dir / ("scores_t" + std::to_string(env.slot()) + "_u" + std::to_string(u + 1) + ".csv"),
                         detail::to_text([&](auto& os) { write_score_dump(os, s, mask); }));
    }
    env.step(policy.joint_action(env, rng));
  }
}

// ---------------------------------------------------------------------------
// UAV-count sweep
// ---------------------------------------------------------------------------

struct SweepResult {
  std::vector<RunResult> cells;
  std::vector<std::string> failures;
};

inline void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "policy,C,seed,M_C,M_E,M_F\n";
  for (const auto& cell : sweep.cells) {
    std::vector<double> mc, me, mf;
    for (const auto& s : cell.seeds) {
      out << to_string(cell.policy) << ',' << cell.uavs << ',' << s.seed << ',' << format_double(s.eval.m_c.mean)
          << ',' << format_double(s.eval.m_e.mean) << ',' << format_double(s.eval.m_f.mean) << '\n';
      mc.push_back(s.eval.m_c.mean);
      me.push_back(s.eval.m_e.mean);
      mf.push_back(s.eval.m_f.mean);
    }
    const MetricSummary a = summarize(mc), b = summarize(me), d = summarize(mf);
    out << to_string(cell.policy) << ',' << cell.uavs << ",mean," << format_double(a.mean) << ','
        << format_double(b.mean) << ',' << format_double(d.mean) << '\n';
    out << to_string(cell.policy) << ',' << cell.uavs << ",std," << format_double(a.stddev) << ','
        << format_double(b.stddev) << ',' << format_double(d.stddev) << '\n';
  }
}

namespace detail {

inline double pick_metric(const EvaluationReport& r, const std::string& metric) {
  if (metric == "M_C") return r.m_c.mean;
  if (metric == "M_E") return r.m_e.mean;
  return r.m_f.mean;
}

}  // namespace detail

// One run per (policy, C). A failing cell is recorded and skipped.
using CellRunner = std::function<RunResult(const ExperimentConfig&, const fs::path&)>;

inline SweepResult sweep_uavs(const ExperimentConfig& base, const std::vector<int>& uav_counts, const fs::path& out_dir,
                              const CellRunner& runner = run) {
  if (uav_counts.empty()) throw ConfigError("--uavs", "empty list");
  for (int c : uav_counts)
    if (c < 1) throw ConfigError("--uavs", "UAV counts must be >= 1");
  validate(base);
  SweepResult sweep;
  detail::StagedDir staged(out_dir);
  detail::write_file(staged.path() / "config.resolved.json", to_json(base).dump(2) + "\n");
  for (PolicyKind p : base.sweep_policies) {
    for (int uavs : uav_counts) {
      ExperimentConfig c = base;
      c.policy = p;
      c.uavs = uavs;
      const std::string cell = std::string(to_string(p)) + "_C" + std::to_string(uavs);
      try {
        sweep.cells.push_back(runner(c, staged.path() / cell));
      } catch (const std::exception& err) {
        sweep.failures.push_back(cell + ": " + err.what());
      }
    }
  }
  detail::write_file(staged.path() / "sweep.csv", detail::to_text([&](auto& os) { write_sweep_csv(os, sweep); }));
  std::vector<std::string> groups;
  for (int c : uav_counts) groups.push_back("C=" + std::to_string(c));
  for (const char* metric : {"M_C", "M_E", "M_F"}) {
    std::vector<SvgSeries> series;
    for (PolicyKind p : base.sweep_policies) {
      SvgSeries s{to_string(p), {}, {}};
      for (int uavs : uav_counts) {
        double y = std::nan("");
        for (const auto& cell : sweep.cells) {
          if (cell.policy != p || cell.uavs != uavs) continue;
          std::vector<double> vals;
          for (const auto& r : cell.seeds) vals.push_back(detail::pick_metric(r.eval, metric));
          y = summarize(vals).mean;
        }
        s.x.push_back(uavs);
        s.y.push_back(y);
      }
      series.push_back(std::move(s));
    }
    detail::write_file(staged.path() / (std::string("sweep_") + metric + ".svg"),
                       bar_chart_svg(groups, series, std::string(metric) + " by number of UAVs", "UAVs", metric));
  }
  if (!sweep.failures.empty()) {
    std::string text;
    for (const auto& f : sweep.failures) text += f + "\n";
    detail::write_file(staged.path() / "failures.txt", text);
  }
  staged.commit();
  return sweep;
}

// ---------------------------------------------------------------------------
// Graph report and traffic generation
// ---------------------------------------------------------------------------

struct GraphInfo {
  int n = 0;
  int m = 0;
  std::map<int, int> degree_histogram;
  double euclidean_diameter = 0.0;
  int hop_diameter = 0;
  int dual_vertices = 0;
  std::size_t dual_edges = 0;
  std::vector<int> stations;
  std::vector<int> rsu;
  std::vector<std::string> warnings;
};

inline GraphInfo graph_info(const RoadGraph& g) {
  GraphInfo info;
  info.n = g.vertex_count();
  info.m = g.edge_count();
  for (int v = 0; v < g.vertex_count(); ++v) ++info.degree_histogram[g.degree(v)];
  info.euclidean_diameter = euclidean_diameter(g);
  info.hop_diameter = hop_diameter(g);
  const DualGraph dual = build_dual(g);
  info.dual_vertices = dual.vertex_count;
  info.dual_edges = dual.edges.size();
  info.stations = g.station_vertices();
  info.rsu = g.rsu_vertices();
  info.warnings = g.warnings();
  return info;
}

inline void write_graph_info(std::ostream& out, const GraphInfo& info) {
  auto list = [](const std::vector<int>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + std::to_string(xs[i]);
    return s;
  };
  out << "key,value\n";
  out << "n," << info.n << '\n';
  out << "m," << info.m << '\n';
  for (const auto& [deg, count] : info.degree_histogram) out << "degree_" << deg << ',' << count << '\n';
  out << "euclidean_diameter_m," << format_double(info.euclidean_diameter) << '\n';
  out << "hop_diameter," << info.hop_diameter << '\n';
  out << "dual_vertices," << info.dual_vertices << '\n';
  out << "dual_edges," << info.dual_edges << '\n';
  out << "stations," << list(info.stations) << '\n';
  out << "rsu," << list(info.rsu) << '\n';
  for (const auto& w : info.warnings) out << "warning," << w << '\n';
}

inline TrafficTrace gen_traffic(const fs::path& roadmap, const SynthParams& p, int horizon, const fs::path& out_path) {
  const RoadGraph g = load_roadmap(roadmap);
  TrafficTrace trace = synth_trace(g, p, horizon);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_trace(out_path, trace);
  return trace;
}

}  // namespace uavnet
