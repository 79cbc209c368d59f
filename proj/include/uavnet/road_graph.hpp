#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "uavnet/error.hpp"

namespace uavnet {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Vertex {
  int id = 0;
  Point coord;
};

struct Edge {
  int id = 0;
  int u = 0;
  int v = 0;
  double length = 0.0;  // meters

  int other(int w) const { return w == u ? v : u; }
};

// Road topology graph: intersections as vertices, road segments as edges.
// Immutable once constructed; the constructor rejects every invariant
// violation at once so a bad roadmap reports all of its problems.
class RoadGraph {
public:
  RoadGraph(std::vector<Vertex> vertices, std::vector<Edge> edges, std::vector<int> rsu,
            std::vector<int> stations)
      : vertices_(std::move(vertices)),
        edges_(std::move(edges)),
        rsu_(std::move(rsu)),
        stations_(std::move(stations)) {
    validate();
    std::sort(rsu_.begin(), rsu_.end());
    rsu_.erase(std::unique(rsu_.begin(), rsu_.end()), rsu_.end());

    incident_.assign(vertices_.size(), {});
    for (const auto& e : edges_) {
      incident_[e.u].push_back(e.id);
      incident_[e.v].push_back(e.id);
    }
    adjacent_.assign(vertices_.size(), {});
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      for (int eid : incident_[v]) adjacent_[v].push_back(edges_[eid].other(static_cast<int>(v)));
      std::sort(adjacent_[v].begin(), adjacent_[v].end());
      adjacent_[v].erase(std::unique(adjacent_[v].begin(), adjacent_[v].end()), adjacent_[v].end());
    }
    if (!connected()) warnings_.push_back("road graph is not connected");
  }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vertex& vertex(int v) const { return vertices_.at(v); }
  const Edge& edge(int e) const { return edges_.at(e); }

  // Sorted, deduplicated.
  const std::vector<int>& rsu_vertices() const { return rsu_; }
  // Take-off points in file order; UAVs are assigned round-robin.
  const std::vector<int>& station_vertices() const { return stations_; }

  // delta(v): ids of edges incident to v, ascending.
  std::span<const int> incident(int v) const { return incident_.at(v); }
  int degree(int v) const { return static_cast<int>(incident_.at(v).size()); }
  int max_degree() const {
    int d = 0;
    for (const auto& inc : incident_) d = std::max<int>(d, static_cast<int>(inc.size()));
    return d;
  }

  bool is_vertex(int v) const { return v >= 0 && v < vertex_count(); }

  const std::vector<std::string>& warnings() const { return warnings_; }

  bool connected() const {
    if (vertices_.empty()) return true;
    std::vector<char> seen(vertices_.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int eid : incident_[v]) {
        int w = edges_[eid].other(v);
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == vertices_.size();
  }

  // Distinct adjacent vertices, ascending.
  std::span<const int> adjacent(int v) const { return adjacent_.at(v); }

private:
  void validate() const {
    std::vector<std::string> problems;
    const int n = static_cast<int>(vertices_.size());
    for (int i = 0; i < n; ++i) {
      if (vertices_[i].id != i)
        problems.push_back("vertex at position " + std::to_string(i) + " has id " +
                           std::to_string(vertices_[i].id) + " (ids must be 0..n-1 in order)");
      if (!std::isfinite(vertices_[i].coord.x) || !std::isfinite(vertices_[i].coord.y))
        problems.push_back("vertex " + std::to_string(i) + " has non-finite coordinates");
    }
    std::set<std::pair<int, int>> seen;
    for (int i = 0; i < static_cast<int>(edges_.size()); ++i) {
      const Edge& e = edges_[i];
      const std::string tag = "edge " + std::to_string(e.id);
      if (e.id != i)
        problems.push_back("edge at position " + std::to_string(i) + " has id " +
                           std::to_string(e.id) + " (ids must be 0..m-1 in order)");
      bool ok = true;
      if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n) {
        problems.push_back(tag + " references an unknown vertex");
        ok = false;
      } else if (e.u == e.v) {
        problems.push_back(tag + " is a self-loop");
        ok = false;
      }
      if (!(e.length >= 0.0) || !std::isfinite(e.length))
        problems.push_back(tag + " has invalid length");
      if (ok && !seen.insert({std::min(e.u, e.v), std::max(e.u, e.v)}).second)
        problems.push_back(tag + " duplicates an existing edge between vertices " +
                           std::to_string(std::min(e.u, e.v)) + " and " +
                           std::to_string(std::max(e.u, e.v)));
    }
    for (int r : rsu_)
      if (r < 0 || r >= n) problems.push_back("rsu vertex " + std::to_string(r) + " is unknown");
    if (stations_.empty()) problems.push_back("no station vertices");
    for (int s : stations_)
      if (s < 0 || s >= n) problems.push_back("station vertex " + std::to_string(s) + " is unknown");
    if (!problems.empty()) throw ParseError("invalid road graph", std::move(problems));
  }

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<int> rsu_;
  std::vector<int> stations_;
  std::vector<std::vector<int>> incident_;
  std::vector<std::vector<int>> adjacent_;
  std::vector<std::string> warnings_;
};

// N(v), ascending.
inline std::span<const int> neighbors(const RoadGraph& g, int v) { return g.adjacent(v); }

// Straight-line distance l(vi, vj) between intersections.
inline double flight_distance(const RoadGraph& g, int vi, int vj) {
  if (vi == vj) return 0.0;
  const Point& a = g.vertex(vi).coord;
  const Point& b = g.vertex(vj).coord;
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Largest pairwise flight distance.
inline double euclidean_diameter(const RoadGraph& g) {
  double d = 0.0;
  for (int i = 0; i < g.vertex_count(); ++i)
    for (int j = i + 1; j < g.vertex_count(); ++j) d = std::max(d, flight_distance(g, i, j));
  return d;
}

// Longest shortest path in edge hops; -1 if the graph is disconnected.
inline int hop_diameter(const RoadGraph& g) {
  const int n = g.vertex_count();
  int best = 0;
  std::vector<int> dist(n);
  for (int s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<int> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int w : neighbors(g, v))
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
    }
    for (int d : dist) {
      if (d < 0) return -1;
      best = std::max(best, d);
    }
  }
  return best;
}

// p_v per vertex: -1 uncovered, 0 RSU, u > 0 UAV u.
class CoverageMap {
public:
  static constexpr int kUncovered = -1;
  static constexpr int kRsu = 0;

  explicit CoverageMap(const RoadGraph& g) : p_v_(g.vertex_count(), kUncovered) {
    for (int r : g.rsu_vertices()) p_v_[r] = kRsu;
  }

  // RSU coverage is permanent. Co-located UAVs keep the highest id.
  void place_uav(int v, int uav_id) {
    if (v < 0 || v >= static_cast<int>(p_v_.size()))
      throw InputError("coverage: unknown vertex " + std::to_string(v));
    if (uav_id < 1) throw InputError("coverage: UAV ids start at 1");
    if (p_v_[v] != kRsu) p_v_[v] = std::max(p_v_[v], uav_id);
  }

  int operator[](int v) const { return p_v_.at(v); }
  bool covered(int v) const { return p_v_.at(v) >= 0; }
  int size() const { return static_cast<int>(p_v_.size()); }
  const std::vector<int>& values() const { return p_v_; }

private:
  std::vector<int> p_v_;
};

// p_e for one time slot.
struct TrafficSnapshot {
  std::vector<int> p_e;

  std::int64_t total() const { return std::accumulate(p_e.begin(), p_e.end(), std::int64_t{0}); }
  int max_count() const { return p_e.empty() ? 0 : *std::max_element(p_e.begin(), p_e.end()); }
};

struct DualEdge {
  int a = 0;    // smaller dual vertex (= RTG edge id)
  int b = 0;    // larger dual vertex
  int via = 0;  // shared RTG vertex
};

// Line graph of the RTG. Dual vertex i is RTG edge i, so phi is the identity
// on indices and only the dual edges need storing.
struct DualGraph {
  int vertex_count = 0;
  std::vector<DualEdge> edges;
};

inline DualGraph build_dual(const RoadGraph& g) {
  DualGraph dual;
  dual.vertex_count = g.edge_count();
  for (int v = 0; v < g.vertex_count(); ++v) {
    auto inc = g.incident(v);
    for (std::size_t i = 0; i < inc.size(); ++i)
      for (std::size_t j = i + 1; j < inc.size(); ++j)
        dual.edges.push_back({std::min(inc[i], inc[j]), std::max(inc[i], inc[j]), v});
  }
  std::sort(dual.edges.begin(), dual.edges.end(), [](const DualEdge& l, const DualEdge& r) {
    return std::tie(l.a, l.b, l.via) < std::tie(r.a, r.b, r.via);
  });
  return dual;
}

struct ConnectivityColoring {
  std::vector<char> c_edge;
  std::vector<char> c_vertex;
};

inline ConnectivityColoring color(const RoadGraph& g, const CoverageMap& cov,
                                  const TrafficSnapshot& traffic) {
  if (cov.size() != g.vertex_count())
    throw InputError("color: coverage map has " + std::to_string(cov.size()) +
                     " vertices, graph has " + std::to_string(g.vertex_count()));
  if (static_cast<int>(traffic.p_e.size()) != g.edge_count())
    throw InputError("color: traffic snapshot has " + std::to_string(traffic.p_e.size()) +
                     " edges, graph has " + std::to_string(g.edge_count()));

  ConnectivityColoring c;
  c.c_edge.assign(g.edge_count(), 0);
  c.c_vertex.assign(g.vertex_count(), 0);
  for (int v = 0; v < g.vertex_count(); ++v) c.c_vertex[v] = cov.covered(v);
  for (const Edge& e : g.edges()) {
    if (traffic.p_e[e.id] < 0) throw InputError("color: negative count on edge " + std::to_string(e.id));
    if (traffic.p_e[e.id] > 0) {
      c.c_edge[e.id] = 1;
      c.c_vertex[e.u] = c.c_vertex[e.v] = 1;
    } else if (cov.covered(e.u) || cov.covered(e.v)) {
      c.c_edge[e.id] = 1;
    }
  }
  return c;
}

struct CComponent {
  std::vector<int> edges;  // ascending RTG edge ids
  std::int64_t vehicle_sum = 0;

  int size() const { return static_cast<int>(edges.size()); }
};

struct CComponentReport {
  int k = 0;
  std::vector<CComponent> components;  // ordered by smallest edge id

  std::int64_t total_vehicles() const {
    std::int64_t s = 0;
    for (const auto& c : components) s += c.vehicle_sum;
    return s;
  }
};

namespace detail {

class DisjointSet {
public:
  explicit DisjointSet(int n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

}  // namespace detail

// Connected components of the dual subgraph induced by black (c-edge) dual
// vertices. Vehicle sums are taken from the slot's traffic.
inline CComponentReport c_components(const DualGraph& dual, const ConnectivityColoring& coloring,
                                     const TrafficSnapshot& traffic) {
  if (static_cast<int>(coloring.c_edge.size()) != dual.vertex_count ||
      static_cast<int>(traffic.p_e.size()) != dual.vertex_count)
    throw InputError("c_components: coloring/traffic do not match the dual graph");

  detail::DisjointSet dsu(dual.vertex_count);
  for (const DualEdge& de : dual.edges)
    if (coloring.c_edge[de.a] && coloring.c_edge[de.b]) dsu.unite(de.a, de.b);

  CComponentReport report;
  std::vector<int> slot(dual.vertex_count, -1);
  for (int e = 0; e < dual.vertex_count; ++e) {
    if (!coloring.c_edge[e]) continue;
    int root = dsu.find(e);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(report.components.size());
      report.components.emplace_back();
    }
    CComponent& comp = report.components[slot[root]];
    comp.edges.push_back(e);
    comp.vehicle_sum += traffic.p_e[e];
  }
  report.k = static_cast<int>(report.components.size());
  return report;
}

}  // namespace uavnet
