#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "uavnet/error.hpp"
#include "uavnet/format.hpp"
#include "uavnet/road_graph.hpp"
#include "uavnet/traffic.hpp"

namespace uavnet {

// Coefficients of the per-slot energy model.
struct EnergyParams {
  double eps1 = 100.0;              // hover power, J/s
  double eps2 = 5.0;                // communication power, J/s
  double eps3 = 25.0;               // flight energy, J/m
  double fly_speed = 15.0;          // m/s
  double slot_seconds = 60.0;       // s
  double initial_energy = 6.0e5;    // J

  void validate() const {
    auto check = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("energy.") + name, "must be > 0");
    };
    check(eps1, "eps1");
    check(eps2, "eps2");
    check(eps3, "eps3");
    check(fly_speed, "fly_speed");
    check(slot_seconds, "slot_seconds");
    check(initial_energy, "initial_energy");
  }
};

// Reward weights; unset normalizers are resolved per slot by the environment
// (norm1: vehicles present in the slot, floor 1; norm2: hover for a full slot
// plus a flight across the map diameter).
struct RewardParams {
  double alpha0 = 1.0;
  double beta0 = 1.0;
  std::optional<double> norm1;
  std::optional<double> norm2;

  void validate() const {
    if (!(alpha0 > 0.0)) throw ConfigError("reward.alpha0", "must be > 0");
    if (!(beta0 > 0.0)) throw ConfigError("reward.beta0", "must be > 0");
    if (norm1 && !(*norm1 > 0.0)) throw ConfigError("reward.norm1", "must be > 0");
    if (norm2 && !(*norm2 > 0.0)) throw ConfigError("reward.norm2", "must be > 0");
  }
};

struct UavState {
  int id = 1;  // 1..C
  int pos = 0;
  double energy = 0.0;
  double consumed = 0.0;  // running sum of per-slot costs; energy = initial - consumed
  bool alive = true;
};

// Hover/communication energy is charged for the part of the slot not spent
// flying; flight energy is proportional to the straight-line distance.
inline double energy_cost(const UavState& uav, int target, const RoadGraph& g, const EnergyParams& ep) {
  if (!g.is_vertex(target)) throw InputError("energy_cost: unknown vertex " + std::to_string(target));
  const double l = flight_distance(g, uav.pos, target);
  const double hover = std::max(0.0, ep.slot_seconds - l / ep.fly_speed);
  return (ep.eps1 + ep.eps2) * hover + ep.eps3 * l;
}

// Team reward for one slot. The connectivity term is 0 when there are no
// c-components. Normalizers must be resolved.
inline double reward(const CComponentReport& report, std::span<const double> energies, const RewardParams& rp) {
  if (!rp.norm1 || !rp.norm2) throw InputError("reward: normalizers must be resolved");
  if (energies.empty()) throw InputError("reward: no UAV energies");
  double connectivity = 0.0;
  if (report.k > 0) connectivity = rp.alpha0 / (*rp.norm1 * report.k) * static_cast<double>(report.total_vehicles());
  double spent = 0.0;
  for (double e : energies) spent += e;
  return connectivity - rp.beta0 / (*rp.norm2 * static_cast<double>(energies.size())) * spent;
}

// Everything observable in one slot, stored compactly. Observations and
// global states are encodings of a frame.
struct Frame {
  int t = 1;
  std::vector<double> p_e;   // counts scaled by the trace maximum
  std::vector<char> con_e;
  std::vector<int> positions;
  std::vector<double> energy_fraction;
  std::vector<char> alive;
};

// [p_e (m) | con_e (m) | one-hot own position (n)]
struct Observation {
  std::vector<double> features;
};

// [p_e (m) | con_e (m) | multi-hot alive positions (n) | energy fraction (C)]
struct GlobalState {
  int t = 1;
  std::vector<double> features;
};

inline int observation_size(const RoadGraph& g) { return 2 * g.edge_count() + g.vertex_count(); }
inline int state_size(const RoadGraph& g, int uavs) { return 2 * g.edge_count() + g.vertex_count() + uavs; }

inline void encode_observation(const Frame& f, int agent, int n, std::span<double> out) {
  const std::size_t m = f.p_e.size();
  if (out.size() != 2 * m + n) throw InputError("encode_observation: output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t e = 0; e < m; ++e) {
    out[e] = f.p_e[e];
    out[m + e] = f.con_e[e] ? 1.0 : 0.0;
  }
  out[2 * m + f.positions.at(agent)] = 1.0;
}

inline void encode_state(const Frame& f, int n, std::span<double> out) {
  const std::size_t m = f.p_e.size();
  const std::size_t c = f.positions.size();
  if (out.size() != 2 * m + n + c) throw InputError("encode_state: output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t e = 0; e < m; ++e) {
    out[e] = f.p_e[e];
    out[m + e] = f.con_e[e] ? 1.0 : 0.0;
  }
  for (std::size_t u = 0; u < c; ++u) {
    if (f.alive[u]) out[2 * m + f.positions[u]] = 1.0;
    out[2 * m + n + u] = f.energy_fraction[u];
  }
}

struct StepOutcome {
  double reward = 0.0;
  std::vector<Observation> observations;
  GlobalState state;
  bool done = false;
  std::vector<double> energy_spent;
  CComponentReport report;
};

struct ResetOutcome {
  GlobalState state;
  std::vector<Observation> observations;
};

struct SlotRecord {
  int t = 1;
  int k = 0;
  std::int64_t sum_n = 0;
  int sum_size = 0;
  std::vector<double> flight;  // per UAV, m
  std::vector<double> energy;  // per UAV, J
  double reward = 0.0;

  double mc() const { return k > 0 ? static_cast<double>(sum_n) / k : 0.0; }
  double me() const { return k > 0 ? static_cast<double>(sum_size) / k : 0.0; }
  double mf() const {
    double s = 0.0;
    for (double l : flight) s += l;
    return flight.empty() ? 0.0 : s / static_cast<double>(flight.size());
  }
};

struct EpisodeLog {
  int horizon = 0;
  int uavs = 0;
  std::vector<SlotRecord> slots;

  bool complete() const { return horizon > 0 && static_cast<int>(slots.size()) == horizon; }
  double episode_return() const {
    double r = 0.0;
    for (const auto& s : slots) r += s.reward;
    return r;
  }
};

struct MetricsReport {
  double m_c = 0.0;
  double m_e = 0.0;
  double m_f = 0.0;
  double o1 = 0.0;
  double o2 = 0.0;
  std::vector<double> m_c_series;
  std::vector<double> m_e_series;
  std::vector<double> m_f_series;
  std::vector<double> o2_series;  // mean energy per UAV in each slot
};

// Per-slot averages first, then the temporal mean; o1 coincides with m_c
// under this reading.
inline MetricsReport metrics(const EpisodeLog& log) {
  if (!log.complete())
    throw InputError("metrics: episode log has " + std::to_string(log.slots.size()) + " of " +
                     std::to_string(log.horizon) + " slots");
  MetricsReport r;
  const double T = log.horizon;
  const double C = log.uavs;
  double flight = 0.0, energy = 0.0;
  for (const auto& s : log.slots) {
    r.m_c_series.push_back(s.mc());
    r.m_e_series.push_back(s.me());
    r.m_f_series.push_back(s.mf());
    double slot_energy = 0.0;
    for (double e : s.energy) slot_energy += e;
    r.o2_series.push_back(slot_energy / C);
    for (double l : s.flight) flight += l;
    energy += slot_energy;
    r.m_c += s.mc();
    r.m_e += s.me();
  }
  r.m_c /= T;
  r.m_e /= T;
  r.m_f = flight / (C * T);
  r.o1 = r.m_c;
  r.o2 = energy / (C * T);
  return r;
}

inline void write_episode_log(std::ostream& out, const EpisodeLog& log) {
  out << "t,k,sum_n,M_C_t,M_E_t,M_F_t,r_t";
  for (int u = 1; u <= log.uavs; ++u) out << ",e_" << u;
  out << '\n';
  for (const auto& s : log.slots) {
    out << s.t << ',' << s.k << ',' << s.sum_n << ',' << format_double(s.mc()) << ',' << format_double(s.me())
        << ',' << format_double(s.mf()) << ',' << format_double(s.reward);
    for (double e : s.energy) out << ',' << format_double(e);
    out << '\n';
  }
}

struct EnvConfig {
  int uavs = 1;
  EnergyParams energy;
  RewardParams reward;
};

// Discrete time-slot multi-UAV environment. Single-threaded; mutate only via
// reset/step. The graph and trace are shared read-only.
class Environment {
public:
  Environment(std::shared_ptr<const RoadGraph> graph, std::shared_ptr<const TrafficTrace> trace, EnvConfig cfg)
      : graph_(std::move(graph)), trace_(std::move(trace)), cfg_(std::move(cfg)), dual_(build_dual(*graph_)) {
    if (cfg_.uavs <= 0) throw ConfigError("uavs", "must be >= 1");
    if (graph_->station_vertices().empty()) throw ConfigError("stations", "road graph has no stations");
    if (trace_->horizon() < 1) throw ConfigError("trace", "empty trace");
    for (const auto& s : trace_->slots)
      if (static_cast<int>(s.p_e.size()) != graph_->edge_count())
        throw InputError("trace does not match the road graph");
    cfg_.energy.validate();
    cfg_.reward.validate();
    diameter_ = euclidean_diameter(*graph_);
    norm_pe_ = std::max(1, trace_->max_count());
    reset();
  }

  ResetOutcome reset() {
    const auto& stations = graph_->station_vertices();
    uavs_.clear();
    for (int u = 0; u < cfg_.uavs; ++u) {
      UavState s;
      s.id = u + 1;
      s.pos = stations[u % stations.size()];
      s.energy = cfg_.energy.initial_energy;
      uavs_.push_back(s);
    }
    t_ = 1;
    log_ = EpisodeLog{trace_->horizon(), cfg_.uavs, {}};
    recolor(t_);
    return {global_state(), all_observations()};
  }

  // One target vertex per UAV (index order). Entries for depleted UAVs are
  // ignored: they stay put, spend nothing and cover nothing.
  StepOutcome step(std::span<const int> joint_action) {
    if (t_ > horizon()) throw InputError("step: episode is done; call reset()");
    if (static_cast<int>(joint_action.size()) != cfg_.uavs)
      throw InputError("step: expected " + std::to_string(cfg_.uavs) + " actions, got " +
                       std::to_string(joint_action.size()));
    for (int u = 0; u < cfg_.uavs; ++u)
      if (uavs_[u].alive && !graph_->is_vertex(joint_action[u]))
        throw InputError("step: UAV " + std::to_string(u + 1) + " action " + std::to_string(joint_action[u]) +
                         " is not a vertex");

    SlotRecord rec;
    rec.t = t_;
    rec.flight.assign(cfg_.uavs, 0.0);
    rec.energy.assign(cfg_.uavs, 0.0);
    std::vector<char> covering(cfg_.uavs, 0);
    for (int u = 0; u < cfg_.uavs; ++u) {
      UavState& s = uavs_[u];
      if (!s.alive) continue;
      covering[u] = 1;
      const int target = joint_action[u];
      rec.flight[u] = flight_distance(*graph_, s.pos, target);
      rec.energy[u] = energy_cost(s, target, *graph_, cfg_.energy);
      s.consumed += rec.energy[u];
      s.energy = cfg_.energy.initial_energy - s.consumed;
      s.pos = target;
    }

    const TrafficSnapshot& traffic = snapshot(*trace_, t_);
    coloring_ = color(*graph_, coverage(covering), traffic);
    report_ = c_components(dual_, coloring_, traffic);

    rec.k = report_.k;
    rec.sum_n = report_.total_vehicles();
    for (const auto& c : report_.components) rec.sum_size += c.size();
    rec.reward = reward(report_, rec.energy, resolved_reward(traffic));

    StepOutcome out;
    out.reward = rec.reward;
    out.energy_spent = rec.energy;
    out.report = report_;
    log_.slots.push_back(std::move(rec));

    for (auto& s : uavs_)
      if (s.alive && s.energy <= 0.0) s.alive = false;

    ++t_;
    out.done = t_ > horizon();
    recolor(std::min(t_, horizon()));
    out.observations = all_observations();
    out.state = global_state();
    return out;
  }

  Observation observe(int agent) const {
    check_agent(agent);
    if (!uavs_[agent].alive) throw InputError("observe: UAV " + std::to_string(agent + 1) + " is depleted");
    return encoded_observation(agent);
  }

  GlobalState global_state() const {
    GlobalState s;
    s.t = t_;
    s.features.resize(state_size(*graph_, cfg_.uavs));
    encode_state(frame(), graph_->vertex_count(), s.features);
    return s;
  }

  Frame frame() const {
    Frame f;
    f.t = t_;
    const TrafficSnapshot& traffic = snapshot(*trace_, std::min(t_, horizon()));
    f.p_e.resize(traffic.p_e.size());
    for (std::size_t e = 0; e < traffic.p_e.size(); ++e) f.p_e[e] = traffic.p_e[e] / static_cast<double>(norm_pe_);
    f.con_e = coloring_.c_edge;
    for (const auto& s : uavs_) {
      f.positions.push_back(s.pos);
      f.energy_fraction.push_back(s.energy / cfg_.energy.initial_energy);
      f.alive.push_back(s.alive ? 1 : 0);
    }
    return f;
  }

  // Slot the next step() acts in, 1-based; horizon()+1 once done.
  int slot() const { return t_; }
  int horizon() const { return trace_->horizon(); }
  bool done() const { return t_ > horizon(); }
  int uav_count() const { return cfg_.uavs; }
  const std::vector<UavState>& uavs() const { return uavs_; }
  const RoadGraph& graph() const { return *graph_; }
  const DualGraph& dual() const { return dual_; }
  const TrafficTrace& trace() const { return *trace_; }
  const EnvConfig& config() const { return cfg_; }
  const ConnectivityColoring& coloring() const { return coloring_; }
  const CComponentReport& components() const { return report_; }
  const EpisodeLog& log() const { return log_; }
  double diameter() const { return diameter_; }
  int norm_pe() const { return norm_pe_; }

  RewardParams resolved_reward(const TrafficSnapshot& traffic) const {
    RewardParams rp = cfg_.reward;
    if (!rp.norm1) rp.norm1 = std::max<double>(1.0, static_cast<double>(traffic.total()));
    if (!rp.norm2)
      rp.norm2 = (cfg_.energy.eps1 + cfg_.energy.eps2) * cfg_.energy.slot_seconds + cfg_.energy.eps3 * diameter_;
    return rp;
  }

private:
  void check_agent(int agent) const {
    if (agent < 0 || agent >= cfg_.uavs) throw InputError("unknown UAV index " + std::to_string(agent));
  }

  CoverageMap coverage(const std::vector<char>& covering) const {
    CoverageMap cov(*graph_);
    for (int u = 0; u < cfg_.uavs; ++u)
      if (covering[u]) cov.place_uav(uavs_[u].pos, uavs_[u].id);
    return cov;
  }

  void recolor(int t) {
    std::vector<char> covering(cfg_.uavs);
    for (int u = 0; u < cfg_.uavs; ++u) covering[u] = uavs_[u].alive;
    const TrafficSnapshot& traffic = snapshot(*trace_, t);
    coloring_ = color(*graph_, coverage(covering), traffic);
    report_ = c_components(dual_, coloring_, traffic);
  }

  Observation encoded_observation(int agent) const {
    Observation o;
    o.features.resize(observation_size(*graph_));
    encode_observation(frame(), agent, graph_->vertex_count(), o.features);
    return o;
  }

  std::vector<Observation> all_observations() const {
    std::vector<Observation> out;
    for (int u = 0; u < cfg_.uavs; ++u) out.push_back(encoded_observation(u));
    return out;
  }

  std::shared_ptr<const RoadGraph> graph_;
  std::shared_ptr<const TrafficTrace> trace_;
  EnvConfig cfg_;
  DualGraph dual_;
  double diameter_ = 0.0;
  int norm_pe_ = 1;

  int t_ = 1;
  std::vector<UavState> uavs_;
  ConnectivityColoring coloring_;
  CComponentReport report_;
  EpisodeLog log_;
};

}  // namespace uavnet
