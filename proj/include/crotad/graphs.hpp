#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crotad/indexer.hpp"
#include "crotad/types.hpp"

namespace crotad {

enum class GraphKind : std::uint8_t { road = 1, context = 2, mobility = 4 };

/// Directed graph over raw coordinates (road intersections, transit stops).
struct PointGraph {
    GraphKind kind = GraphKind::road;
    std::vector<GeoPoint> vertices;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // indices into vertices
};

/// Directed graph over cells of one resolution.
struct CellGraph {
    GraphKind kind = GraphKind::road;
    std::set<CellId> vertices;
    std::set<std::pair<CellId, CellId>> edges;
};

/// Merged road/context/mobility graph. Edge values are OR-ed source tags.
struct HierarchicalGraph {
    int resolution = 0;
    std::set<CellId> vertices;
    std::map<std::pair<CellId, CellId>, std::uint8_t> edges;

    std::vector<CellId> vertex_list() const { return {vertices.begin(), vertices.end()}; }

    bool has_edge(CellId a, CellId b) const { return edges.count({a, b}) > 0; }
};

/// Map a coordinate-keyed graph onto cells: vertices map through the
/// indexer, an edge survives only when its endpoints land in distinct
/// cells, parallel edges collapse.
inline CellGraph map_graph(const HexIndexer& indexer, const PointGraph& g, int resolution) {
    CellGraph out;
    out.kind = g.kind;
    std::vector<CellId> mapped(g.vertices.size());
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
        mapped[i] = indexer.index_point(g.vertices[i], resolution);
        out.vertices.insert(mapped[i]);
    }
    for (const auto& [u, v] : g.edges) {
        if (u >= g.vertices.size() || v >= g.vertices.size())
            throw InvalidArgumentError("edge references missing vertex");
        if (mapped[u] != mapped[v]) out.edges.insert({mapped[u], mapped[v]});
    }
    return out;
}

/// Transition graph of consecutive cell pairs across training trajectories.
inline CellGraph build_mobility_graph(const std::vector<CellTrajectory>& trajs) {
    CellGraph out;
    out.kind = GraphKind::mobility;
    for (const auto& traj : trajs) {
        for (std::size_t i = 0; i < traj.cells.size(); ++i) {
            out.vertices.insert(traj.cells[i]);
            if (i + 1 < traj.cells.size()) out.edges.insert({traj.cells[i], traj.cells[i + 1]});
        }
    }
    return out;
}

/// Union of cell graphs with per-edge source-tag OR. Commutative,
/// associative and idempotent. Self-loops never occur by construction of
/// the parts (map_graph drops them; mobility pairs come from deduplicated
/// sequences).
inline HierarchicalGraph merge_graphs(const std::vector<CellGraph>& parts, int resolution) {
    HierarchicalGraph out;
    out.resolution = resolution;
    for (const auto& part : parts) {
        for (const CellId& v : part.vertices) {
            if (v.resolution() != resolution)
                throw ResolutionMismatchError("graph part at wrong resolution");
            out.vertices.insert(v);
        }
        for (const auto& e : part.edges) out.edges[e] |= static_cast<std::uint8_t>(part.kind);
    }
    return out;
}

/// Symmetrize a directed point graph (roads and stop sequences are
/// traversable both ways at cell granularity for road/context sources).
inline PointGraph symmetrized(PointGraph g) {
    std::set<std::pair<std::size_t, std::size_t>> seen(g.edges.begin(), g.edges.end());
    const auto original = g.edges;
    for (const auto& [u, v] : original)
        if (seen.insert({v, u}).second) g.edges.push_back({v, u});
    return g;
}

}  // namespace crotad
