#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include <json.hpp>

#include "crotad/graphs.hpp"
#include "crotad/types.hpp"

namespace crotad {

/// Per-itinerary visit statistics: frequencies, the frequently visited set
/// S_pos, and the pseudo-label counts P / N once clustering has run.
/// S_neg is never materialized; membership is "not in s_pos".
struct ItineraryStats {
    ODPair od;
    double delta_od = 0.2;
    std::map<CellId, double> visit_freq;
    std::set<CellId> s_pos;
    std::int64_t pseudo_normal = 0;     // P
    std::int64_t pseudo_anomalous = 0;  // N

    bool in_s_pos(CellId c) const { return s_pos.count(c) > 0; }

    double theta() const {
        if (pseudo_anomalous <= 0) throw InvalidArgumentError("theta requires N >= 1");
        return static_cast<double>(pseudo_normal) / static_cast<double>(pseudo_anomalous);
    }
};

/// Occurrence-count frequencies over one itinerary's training trajectories.
/// Counting is with multiplicity: a cell revisited twice in one trajectory
/// contributes two occurrences, so frequencies may exceed 1.
inline ItineraryStats frequent_cells(const std::vector<CellTrajectory>& trajs_od,
                                     double delta_od) {
    if (trajs_od.empty()) throw InsufficientDataError("no trajectories for itinerary");
    if (!(delta_od > 0.0 && delta_od <= 1.0)) throw InvalidArgumentError("delta_od must be in (0,1]");
    ItineraryStats stats;
    stats.od = trajs_od.front().od;
    stats.delta_od = delta_od;
    for (const auto& traj : trajs_od)
        for (const CellId& c : traj.cells) stats.visit_freq[c] += 1.0;
    const double denom = static_cast<double>(trajs_od.size());
    for (auto& [cell, freq] : stats.visit_freq) {
        freq /= denom;
        if (freq > delta_od) stats.s_pos.insert(cell);
    }
    return stats;
}

/// Fraction of window positions whose cell is frequently visited,
/// position-wise with multiplicity.
inline double normality_score(const Window& window, const ItineraryStats& stats) {
    if (window.empty()) throw InvalidArgumentError("normality score of empty window");
    std::size_t hits = 0;
    for (const CellId& c : window)
        if (stats.in_s_pos(c)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(window.size());
}

/// Sign weight for contrastive pairs: +1 for confidently normal, 0 for the
/// uncertainty band, -1 for likely-noise pairs that should repel.
inline int pair_weight(double s, double delta1, double delta2) {
    if (!(delta2 >= 0.0 && delta2 < delta1 && delta1 <= 1.0))
        throw InvalidArgumentError("pair_weight requires 0 <= delta2 < delta1 <= 1");
    if (s >= delta1) return 1;
    if (s > delta2) return 0;
    return -1;
}

/// Route subgraph: S_pos vertices and the hierarchical edges between them.
struct RouteSubgraph {
    ODPair od;
    std::vector<CellId> vertices;                       // sorted
    std::vector<std::pair<CellId, CellId>> edges;       // sorted pairs
    std::vector<std::vector<int>> out_nbrs;             // by vertex index

    int index_of(CellId c) const {
        auto it = std::lower_bound(vertices.begin(), vertices.end(), c);
        if (it == vertices.end() || *it != c) return -1;
        return static_cast<int>(it - vertices.begin());
    }
};

inline RouteSubgraph route_subgraph(const ItineraryStats& stats, const HierarchicalGraph& g) {
    RouteSubgraph sub;
    sub.od = stats.od;
    sub.vertices.assign(stats.s_pos.begin(), stats.s_pos.end());
    sub.out_nbrs.resize(sub.vertices.size());
    for (const auto& [edge, tags] : g.edges) {
        (void)tags;
        const int a = sub.index_of(edge.first);
        const int b = sub.index_of(edge.second);
        if (a >= 0 && b >= 0) {
            sub.edges.push_back(edge);
            sub.out_nbrs[static_cast<std::size_t>(a)].push_back(b);
        }
    }
    return sub;
}

// ---------------------------------------------------------------------------
// Persistence: one JSON record per itinerary.
// ---------------------------------------------------------------------------

inline nlohmann::json stats_to_json(const ItineraryStats& s) {
    nlohmann::json j;
    j["version"] = 1;
    j["od"] = s.od.key;
    j["delta_od"] = s.delta_od;
    nlohmann::json freq = nlohmann::json::array();
    for (const auto& [cell, f] : s.visit_freq) freq.push_back({cell.v, f});
    j["visit_freq"] = std::move(freq);
    nlohmann::json pos = nlohmann::json::array();
    for (const CellId& c : s.s_pos) pos.push_back(c.v);
    j["s_pos"] = std::move(pos);
    j["pseudo_normal"] = s.pseudo_normal;
    j["pseudo_anomalous"] = s.pseudo_anomalous;
    return j;
}

inline ItineraryStats stats_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != 1) throw IoError("unsupported stats record version");
    ItineraryStats s;
    s.od.key = j.at("od").get<std::string>();
    s.delta_od = j.at("delta_od").get<double>();
    for (const auto& entry : j.at("visit_freq"))
        s.visit_freq[CellId{entry.at(0).get<std::uint64_t>()}] = entry.at(1).get<double>();
    for (const auto& v : j.at("s_pos")) s.s_pos.insert(CellId{v.get<std::uint64_t>()});
    s.pseudo_normal = j.at("pseudo_normal").get<std::int64_t>();
    s.pseudo_anomalous = j.at("pseudo_anomalous").get<std::int64_t>();
    return s;
}

inline void save_stats(const std::map<ODPair, ItineraryStats>& all, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write stats: " + path);
    for (const auto& [od, s] : all) out << stats_to_json(s).dump() << "\n";
}

inline std::map<ODPair, ItineraryStats> load_stats(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read stats: " + path);
    std::map<ODPair, ItineraryStats> all;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ItineraryStats s = stats_from_json(nlohmann::json::parse(line));
        all[s.od] = std::move(s);
    }
    return all;
}

}  // namespace crotad
