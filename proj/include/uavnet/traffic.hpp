#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavnet/error.hpp"
#include "uavnet/format.hpp"
#include "uavnet/rng.hpp"
#include "uavnet/road_graph.hpp"

namespace uavnet {

// T slots of per-edge vehicle counts. Slots are 1-based in the model and
// 0-based in files and storage.
struct TrafficTrace {
  std::vector<TrafficSnapshot> slots;

  int horizon() const { return static_cast<int>(slots.size()); }

  int max_count() const {
    int m = 0;
    for (const auto& s : slots) m = std::max(m, s.max_count());
    return m;
  }
};

inline const TrafficSnapshot& snapshot(const TrafficTrace& trace, int t) {
  if (t < 1 || t > trace.horizon())
    throw InputError("snapshot: slot " + std::to_string(t) + " outside [1, " +
                     std::to_string(trace.horizon()) + "]");
  return trace.slots[t - 1];
}

struct SynthParams {
  int vehicle_count = 0;
  double move_probability = 0.3;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Roadmap JSON
// ---------------------------------------------------------------------------

namespace detail {

class FieldReader {
public:
  explicit FieldReader(std::vector<std::string>& problems) : problems_(problems) {}

  template <typename T>
  bool read(const nlohmann::json& obj, const char* key, const std::string& path, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      problems_.push_back(path + "." + key + ": missing");
      return false;
    }
    if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) {
        problems_.push_back(path + "." + key + ": expected integer");
        return false;
      }
    } else {
      if (!it->is_number()) {
        problems_.push_back(path + "." + key + ": expected number");
        return false;
      }
    }
    out = it->get<T>();
    return true;
  }

private:
  std::vector<std::string>& problems_;
};

inline std::vector<int> read_int_list(const nlohmann::json& doc, const char* key, bool required,
                                      std::vector<std::string>& problems) {
  std::vector<int> out;
  auto it = doc.find(key);
  if (it == doc.end()) {
    if (required) problems.push_back(std::string(key) + ": missing");
    return out;
  }
  if (!it->is_array()) {
    problems.push_back(std::string(key) + ": expected array of integers");
    return out;
  }
  for (std::size_t i = 0; i < it->size(); ++i) {
    if (!(*it)[i].is_number_integer())
      problems.push_back(std::string(key) + "[" + std::to_string(i) + "]: expected integer");
    else
      out.push_back((*it)[i].get<int>());
  }
  return out;
}

}  // namespace detail

inline RoadGraph roadmap_from_json(const nlohmann::json& doc, const std::string& source = "roadmap") {
  std::vector<std::string> problems;
  if (!doc.is_object()) throw ParseError(source, {"top level must be an object"});

  detail::FieldReader reader(problems);
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;

  auto vit = doc.find("vertices");
  if (vit == doc.end() || !vit->is_array()) {
    problems.push_back("vertices: missing or not an array");
  } else {
    for (std::size_t i = 0; i < vit->size(); ++i) {
      const auto& item = (*vit)[i];
      const std::string path = "vertices[" + std::to_string(i) + "]";
      if (!item.is_object()) {
        problems.push_back(path + ": expected object");
        continue;
      }
      Vertex v;
      bool ok = reader.read(item, "id", path, v.id);
      ok = reader.read(item, "x", path, v.coord.x) && ok;
      ok = reader.read(item, "y", path, v.coord.y) && ok;
      if (ok) vertices.push_back(v);
    }
  }

  auto eit = doc.find("edges");
  if (eit == doc.end() || !eit->is_array()) {
    problems.push_back("edges: missing or not an array");
  } else {
    for (std::size_t i = 0; i < eit->size(); ++i) {
      const auto& item = (*eit)[i];
      const std::string path = "edges[" + std::to_string(i) + "]";
      if (!item.is_object()) {
        problems.push_back(path + ": expected object");
        continue;
      }
      Edge e;
      bool ok = reader.read(item, "id", path, e.id);
      ok = reader.read(item, "u", path, e.u) && ok;
      ok = reader.read(item, "v", path, e.v) && ok;
      ok = reader.read(item, "length", path, e.length) && ok;
      if (ok) edges.push_back(e);
    }
  }

  auto rsu = detail::read_int_list(doc, "rsu", false, problems);
  auto stations = detail::read_int_list(doc, "stations", true, problems);
  if (!problems.empty()) throw ParseError(source, std::move(problems));

  // Files may list entries in any order; ids must still be contiguous.
  std::sort(vertices.begin(), vertices.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::sort(edges.begin(), edges.end(), [](auto& a, auto& b) { return a.id < b.id; });
  try {
    return RoadGraph(std::move(vertices), std::move(edges), std::move(rsu), std::move(stations));
  } catch (const ParseError& err) {
    throw ParseError(source, err.problems());
  }
}

inline RoadGraph load_roadmap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), {"cannot open file"});
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(path.string(), {err.what()});
  }
  return roadmap_from_json(doc, path.string());
}

inline nlohmann::json roadmap_to_json(const RoadGraph& g) {
  nlohmann::json doc;
  doc["vertices"] = nlohmann::json::array();
  for (const auto& v : g.vertices()) doc["vertices"].push_back({{"id", v.id}, {"x", v.coord.x}, {"y", v.coord.y}});
  doc["edges"] = nlohmann::json::array();
  for (const auto& e : g.edges())
    doc["edges"].push_back({{"id", e.id}, {"u", e.u}, {"v", e.v}, {"length", e.length}});
  doc["rsu"] = g.rsu_vertices();
  doc["stations"] = g.station_vertices();
  return doc;
}

// rows x cols lattice with the given spacing; vertex id = r * cols + c.
inline RoadGraph grid_roadmap(int rows, int cols, double spacing, std::vector<int> rsu,
                              std::vector<int> stations) {
  std::vector<Vertex> vs;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) vs.push_back({r * cols + c, {c * spacing, r * spacing}});
  std::vector<Edge> es;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int v = r * cols + c;
      if (c + 1 < cols) es.push_back({static_cast<int>(es.size()), v, v + 1, spacing});
      if (r + 1 < rows) es.push_back({static_cast<int>(es.size()), v, v + cols, spacing});
    }
  return RoadGraph(std::move(vs), std::move(es), std::move(rsu), std::move(stations));
}

// Random geometric graph on a square: a random spanning tree (each vertex
// joins its nearest earlier vertex) plus random chords.
inline RoadGraph random_roadmap(int n, int extra_edges, double extent, Rng& rng, int rsu_count = 0,
                                int station_count = 1) {
  std::vector<Vertex> vs;
  for (int i = 0; i < n; ++i) vs.push_back({i, {rng.uniform(0.0, extent), rng.uniform(0.0, extent)}});
  auto dist = [&](int a, int b) { return std::hypot(vs[a].coord.x - vs[b].coord.x, vs[a].coord.y - vs[b].coord.y); };
  std::set<std::pair<int, int>> used;
  std::vector<Edge> es;
  auto add = [&](int a, int b) {
    auto key = std::make_pair(std::min(a, b), std::max(a, b));
    if (a == b || !used.insert(key).second) return;
    es.push_back({static_cast<int>(es.size()), key.first, key.second, dist(a, b)});
  };
  for (int i = 1; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < i; ++j)
      if (dist(i, j) < dist(i, best)) best = j;
    add(i, best);
  }
  for (int k = 0; k < extra_edges && n > 1; ++k) {
    int a = static_cast<int>(rng.below(n));
    int b = static_cast<int>(rng.below(n));
    add(a, b);
  }
  std::vector<int> rsu, stations;
  for (int i = 0; i < rsu_count && n > 0; ++i) rsu.push_back(static_cast<int>(rng.below(n)));
  for (int i = 0; i < std::max(1, station_count); ++i) stations.push_back(static_cast<int>(rng.below(std::max(1, n))));
  return RoadGraph(std::move(vs), std::move(es), std::move(rsu), std::move(stations));
}

// ---------------------------------------------------------------------------
// Trace CSV: header "t,edge,count", 0-based t, absent pairs are zero.
// ---------------------------------------------------------------------------

inline TrafficTrace parse_trace(std::istream& in, const RoadGraph& g, const std::string& source = "trace",
                                int expected_horizon = 0) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "t,edge,count")
    throw ParseError(source, {"line 1: expected header 't,edge,count'"});

  std::vector<std::string> problems;
  std::map<int, std::map<int, int>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    auto cells = split(line, ',');
    if (cells.size() != 3) {
      problems.push_back(where + ": expected 3 columns");
      continue;
    }
    auto t = parse_int<int>(cells[0]);
    auto e = parse_int<int>(cells[1]);
    auto c = parse_int<int>(cells[2]);
    if (!t || !e || !c) {
      problems.push_back(where + ": non-integer field");
      continue;
    }
    if (*t < 0) problems.push_back(where + ": negative slot " + std::to_string(*t));
    if (*e < 0 || *e >= g.edge_count()) problems.push_back(where + ": unknown edge id " + std::to_string(*e));
    if (*c < 0) problems.push_back(where + ": negative count " + std::to_string(*c));
    if (*t < 0 || *e < 0 || *e >= g.edge_count() || *c < 0) continue;
    if (!rows[*t].emplace(*e, *c).second)
      problems.push_back(where + ": duplicate entry for slot " + std::to_string(*t) + ", edge " + std::to_string(*e));
  }
  if (rows.empty() && problems.empty()) problems.push_back("no data rows");

  const int horizon = rows.empty() ? 0 : rows.rbegin()->first + 1;
  for (int t = 0; t < horizon; ++t)
    if (!rows.count(t)) problems.push_back("slot " + std::to_string(t) + " is missing");
  if (expected_horizon > 0 && horizon != expected_horizon)
    problems.push_back("horizon is " + std::to_string(horizon) + ", expected " + std::to_string(expected_horizon));
  if (!problems.empty()) throw ParseError(source, std::move(problems));

  TrafficTrace trace;
  trace.slots.assign(horizon, TrafficSnapshot{std::vector<int>(g.edge_count(), 0)});
  for (const auto& [t, cells] : rows)
    for (const auto& [e, c] : cells) trace.slots[t].p_e[e] = c;
  return trace;
}

inline TrafficTrace load_trace(const std::filesystem::path& path, const RoadGraph& g, int expected_horizon = 0) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), {"cannot open file"});
  return parse_trace(in, g, path.string(), expected_horizon);
}

// Nonzero cells only, plus an explicit zero row for empty slots so the
// horizon survives a round trip.
inline void write_trace(std::ostream& out, const TrafficTrace& trace) {
  out << "t,edge,count\n";
  for (int t = 0; t < trace.horizon(); ++t) {
    bool any = false;
    const auto& p_e = trace.slots[t].p_e;
    for (std::size_t e = 0; e < p_e.size(); ++e)
      if (p_e[e] != 0) {
        out << t << ',' << e << ',' << p_e[e] << '\n';
        any = true;
      }
    if (!any) out << t << ",0,0\n";
  }
}

inline void save_trace(const std::filesystem::path& path, const TrafficTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trace(out, trace);
}

// Edge-level random walk: each vehicle starts on a uniform edge and, each
// slot, hops with the given probability to a uniform edge sharing a vertex.
inline TrafficTrace synth_trace(const RoadGraph& g, const SynthParams& p, int horizon) {
  if (p.vehicle_count < 0) throw InputError("synth_trace: vehicle_count must be >= 0");
  if (!(p.move_probability >= 0.0 && p.move_probability <= 1.0))
    throw InputError("synth_trace: move_probability must be in [0, 1]");
  if (horizon < 1) throw InputError("synth_trace: horizon must be >= 1");
  const int m = g.edge_count();
  if (m == 0 && p.vehicle_count > 0) throw InputError("synth_trace: graph has no edges");

  std::vector<std::vector<int>> adjacent_edges(m);
  for (const Edge& e : g.edges()) {
    for (int end : {e.u, e.v})
      for (int f : g.incident(end))
        if (f != e.id) adjacent_edges[e.id].push_back(f);
  }

  Rng rng(p.seed);
  std::vector<int> where(p.vehicle_count);
  for (auto& w : where) w = static_cast<int>(rng.below(m));

  TrafficTrace trace;
  for (int t = 0; t < horizon; ++t) {
    if (t > 0) {
      for (auto& w : where) {
        if (!rng.bernoulli(p.move_probability)) continue;
        const auto& options = adjacent_edges[w];
        if (!options.empty()) w = options[rng.below(options.size())];
      }
    }
    TrafficSnapshot snap{std::vector<int>(m, 0)};
    for (int w : where) ++snap.p_e[w];
    trace.slots.push_back(std::move(snap));
  }
  return trace;
}

}  // namespace uavnet
