#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "uavnet/env.hpp"
#include "uavnet/rng.hpp"
#include "uavnet/road_graph.hpp"
#include "uavnet/traffic.hpp"

namespace testsupport {

using namespace uavnet;

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(UAVNET_FIXTURE_DIR) / name;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("uavnet_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Simple random graph: n vertices in a square, each candidate pair kept with
// probability density. Station at vertex 0.
inline RoadGraph random_graph(Rng& rng, int n, double density, int rsu_count = 0) {
  std::vector<Vertex> vs;
  for (int i = 0; i < n; ++i) vs.push_back({i, {rng.uniform(0, 1000), rng.uniform(0, 1000)}});
  std::vector<Edge> es;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (rng.bernoulli(density)) {
        const double len = std::hypot(vs[a].coord.x - vs[b].coord.x, vs[a].coord.y - vs[b].coord.y);
        // orientation shuffled so (u, v) order carries no meaning
        if (rng.bernoulli(0.5))
          es.push_back({static_cast<int>(es.size()), a, b, len});
        else
          es.push_back({static_cast<int>(es.size()), b, a, len});
      }
  std::vector<int> rsu;
  for (int i = 0; i < rsu_count; ++i) rsu.push_back(static_cast<int>(rng.below(n)));
  return RoadGraph(std::move(vs), std::move(es), std::move(rsu), {0});
}

inline TrafficSnapshot random_traffic(Rng& rng, const RoadGraph& g, double busy, int max_count = 6) {
  TrafficSnapshot t;
  t.p_e.assign(g.edge_count(), 0);
  for (auto& c : t.p_e)
    if (rng.bernoulli(busy)) c = 1 + static_cast<int>(rng.below(max_count));
  return t;
}

inline CoverageMap random_coverage(Rng& rng, const RoadGraph& g, double p) {
  CoverageMap cov(g);
  for (int v = 0; v < g.vertex_count(); ++v)
    if (rng.bernoulli(p)) cov.place_uav(v, 1 + static_cast<int>(rng.below(4)));
  return cov;
}

// Coloring straight from the definitions, written independently of color().
inline ConnectivityColoring coloring_oracle(const RoadGraph& g, const CoverageMap& cov,
                                            const TrafficSnapshot& tr) {
  ConnectivityColoring c;
  c.c_edge.assign(g.edge_count(), 0);
  c.c_vertex.assign(g.vertex_count(), 0);
  for (int e = 0; e < g.edge_count(); ++e) {
    const Edge& ed = g.edge(e);
    c.c_edge[e] = tr.p_e[e] > 0 || cov[ed.u] >= 0 || cov[ed.v] >= 0;
  }
  for (int v = 0; v < g.vertex_count(); ++v) {
    bool black = cov[v] >= 0;
    for (int e = 0; e < g.edge_count(); ++e) {
      const Edge& ed = g.edge(e);
      if ((ed.u == v || ed.v == v) && tr.p_e[e] > 0) black = true;
    }
    c.c_vertex[v] = black;
  }
  return c;
}

// Components by BFS over c-edges that share an endpoint, scanning all edge
// pairs; returns sorted edge sets with vehicle sums, ordered by first edge.
struct OracleComponent {
  std::vector<int> edges;
  long long vehicles = 0;
  bool operator==(const OracleComponent&) const = default;
};

inline std::vector<OracleComponent> components_oracle(const RoadGraph& g, const std::vector<char>& c_edge,
                                                      const TrafficSnapshot& tr) {
  const int m = g.edge_count();
  auto touch = [&](int a, int b) {
    const Edge& x = g.edge(a);
    const Edge& y = g.edge(b);
    return x.u == y.u || x.u == y.v || x.v == y.u || x.v == y.v;
  };
  std::vector<char> seen(m, 0);
  std::vector<OracleComponent> out;
  for (int s = 0; s < m; ++s) {
    if (!c_edge[s] || seen[s]) continue;
    OracleComponent comp;
    std::queue<int> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      int e = q.front();
      q.pop();
      comp.edges.push_back(e);
      comp.vehicles += tr.p_e[e];
      for (int f = 0; f < m; ++f)
        if (!seen[f] && c_edge[f] && touch(e, f)) {
          seen[f] = 1;
          q.push(f);
        }
    }
    std::sort(comp.edges.begin(), comp.edges.end());
    out.push_back(std::move(comp));
  }
  return out;
}

inline std::vector<OracleComponent> as_oracle(const CComponentReport& r) {
  std::vector<OracleComponent> out;
  for (const auto& c : r.components) out.push_back({c.edges, c.vehicle_sum});
  return out;
}

inline long long choose2(long long d) { return d * (d - 1) / 2; }

inline std::shared_ptr<const RoadGraph> grid5() {
  return std::make_shared<const RoadGraph>(grid_roadmap(5, 5, 200.0, {12}, {0, 4, 20}));
}

inline std::shared_ptr<const TrafficTrace> grid5_trace(const RoadGraph& g, int horizon = 20) {
  return std::make_shared<const TrafficTrace>(synth_trace(g, {12, 0.3, 7}, horizon));
}

inline std::shared_ptr<const TrafficTrace> constant_trace(const RoadGraph& g, int horizon, std::vector<int> p_e) {
  TrafficTrace t;
  if (p_e.empty()) p_e.assign(g.edge_count(), 0);
  t.slots.assign(horizon, TrafficSnapshot{p_e});
  return std::make_shared<const TrafficTrace>(std::move(t));
}

// 0 - 1 - 2 path with 100 m spacing.
inline std::shared_ptr<const RoadGraph> path3(std::vector<int> rsu = {}) {
  return std::make_shared<const RoadGraph>(RoadGraph({{0, {0, 0}}, {1, {100, 0}}, {2, {200, 0}}},
                                                     {{0, 0, 1, 100}, {1, 1, 2, 100}}, std::move(rsu), {0}));
}

}  // namespace testsupport
