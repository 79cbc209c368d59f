#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "uavnet/env.hpp"
#include "uavnet/error.hpp"
#include "uavnet/format.hpp"
#include "uavnet/road_graph.hpp"

namespace uavnet {

// Weights of the action score. Unset normalizers resolve to the map's
// euclidean diameter (phi0) and maximum vertex degree (phi1).
struct ScoreParams {
  double alpha1 = 1.0;
  double beta1 = 1.0;
  std::optional<double> phi0;
  std::optional<double> phi1;

  ScoreParams resolved(const RoadGraph& g) const {
    ScoreParams sp = *this;
    if (!sp.phi0) sp.phi0 = std::max(1.0, euclidean_diameter(g));
    if (!sp.phi1) sp.phi1 = std::max(1, g.max_degree());
    if (!(*sp.phi0 > 0.0)) throw ConfigError("score.phi0", "must be > 0");
    if (!(*sp.phi1 > 0.0)) throw ConfigError("score.phi1", "must be > 0");
    return sp;
  }
};

// con(v, t) is the c-vertex flag of the current slot's coloring.
struct VertexConnectivityView {
  std::vector<char> con;
  int previous = 0;  // a_u(t-1)
};

inline VertexConnectivityView connectivity_view(const Environment& env, int agent) {
  return {env.coloring().c_vertex, env.uavs().at(agent).pos};
}

// Connected candidates are pushed below every unconnected one at the same
// distance and otherwise ranked by proximity; unconnected candidates trade
// distance against the number of connected neighbours.
inline double score(const VertexConnectivityView& view, int candidate, const RoadGraph& g, const ScoreParams& sp) {
  if (!sp.phi0 || !sp.phi1) throw InputError("score: normalizers must be resolved");
  if (!g.is_vertex(candidate)) throw InputError("score: unknown vertex " + std::to_string(candidate));
  const double l = flight_distance(g, candidate, view.previous);
  if (view.con.at(candidate)) return -1.0 - l / *sp.phi0;
  int connected_neighbours = 0;
  for (int v : neighbors(g, candidate)) connected_neighbours += view.con[v] ? 1 : 0;
  return -(sp.alpha1 / *sp.phi0) * l + (sp.beta1 / *sp.phi1) * connected_neighbours;
}

inline std::vector<double> scores(const VertexConnectivityView& view, const RoadGraph& g, const ScoreParams& sp) {
  std::vector<double> out(g.vertex_count());
  for (int v = 0; v < g.vertex_count(); ++v) out[v] = score(view, v, g, sp);
  return out;
}

struct ActionMask {
  std::vector<char> mu;
  int n_a = 0;

  int size() const { return static_cast<int>(mu.size()); }
  bool allows(int action) const { return action >= 0 && action < size() && mu[action]; }
  int permitted_count() const { return static_cast<int>(std::count(mu.begin(), mu.end(), 1)); }
  std::vector<int> permitted() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (mu[i]) out.push_back(i);
    return out;
  }

  static ActionMask all(int n) { return {std::vector<char>(n, 1), n}; }
};

// Descending by score, ties to the lower vertex id; the first
// min(n_a, n) ranks are permitted.
inline ActionMask rank_and_mask(std::span<const double> s, int n_a) {
  if (n_a < 1) throw InputError("rank_and_mask: N_A must be >= 1");
  if (s.empty()) throw InputError("rank_and_mask: no candidates");
  const int n = static_cast<int>(s.size());
  const int keep = std::min(n_a, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](int a, int b) { return s[a] > s[b] || (s[a] == s[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + keep, order.end(), better);
  ActionMask mask{std::vector<char>(n, 0), n_a};
  for (int i = 0; i < keep; ++i) mask.mu[order[i]] = 1;
  return mask;
}

enum class MaskMode { linear, fixed, off };

inline const char* to_string(MaskMode m) {
  switch (m) {
    case MaskMode::linear: return "linear";
    case MaskMode::fixed: return "fixed";
    case MaskMode::off: return "off";
  }
  return "?";
}

inline MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "linear") return MaskMode::linear;
  if (s == "fixed") return MaskMode::fixed;
  if (s == "off") return MaskMode::off;
  throw ConfigError("mask_mode", "expected linear | fixed | off, got '" + s + "'");
}

struct MaskSchedule {
  MaskMode mode = MaskMode::linear;
  int fixed_na = 1;  // used when mode == fixed
};

// N_A for episode s of S. Linear grows as floor(s/S * |A|) with a floor of 1;
// with the mask off every action stays available.
inline int schedule_na(int s, int total, int n_actions, const MaskSchedule& sched) {
  if (total <= 0) throw InputError("schedule_na: total episodes must be > 0");
  if (n_actions < 1) throw InputError("schedule_na: no actions");
  if (s < 1 || s > total) throw InputError("schedule_na: episode " + std::to_string(s) + " outside [1, S]");
  switch (sched.mode) {
    case MaskMode::linear: {
      const long long na = static_cast<long long>(s) * n_actions / total;
      return static_cast<int>(std::max<long long>(1, na));
    }
    case MaskMode::fixed: return std::clamp(sched.fixed_na, 1, n_actions);
    case MaskMode::off: return n_actions;
  }
  return n_actions;
}

inline ActionMask mask_for(const VertexConnectivityView& view, const RoadGraph& g, const ScoreParams& sp, int n_a) {
  if (n_a >= g.vertex_count()) {
    if (n_a < 1) throw InputError("mask_for: N_A must be >= 1");
    return ActionMask{std::vector<char>(g.vertex_count(), 1), n_a};
  }
  return rank_and_mask(scores(view, g, sp), n_a);
}

inline ActionMask mask_for(const Environment& env, int agent, const ScoreParams& sp, int n_a) {
  return mask_for(connectivity_view(env, agent), env.graph(), sp, n_a);
}

// Debug dump: "vertex,score,masked" where masked = 1 for excluded actions.
inline void write_score_dump(std::ostream& out, std::span<const double> s, const ActionMask& mask) {
  out << "vertex,score,masked\n";
  for (std::size_t v = 0; v < s.size(); ++v)
    out << v << ',' << format_double(s[v]) << ',' << (mask.mu[v] ? 0 : 1) << '\n';
}

}  // namespace uavnet
