#pragma once

#include <istream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "crotad/indexer.hpp"
#include "crotad/types.hpp"

namespace crotad {

/// Assign every point to its cell at `resolution`, then collapse runs of
/// consecutive duplicates. Revisits (A,B,A) are preserved.
inline CellTrajectory match_trajectory(const HexIndexer& indexer, const RawTrajectory& traj,
                                       int resolution) {
    if (traj.points.empty()) throw InvalidArgumentError("trajectory has no points");
    CellTrajectory out;
    out.traj_id = traj.traj_id;
    out.od = traj.od;
    out.cells.reserve(traj.points.size());
    for (const auto& p : traj.points) {
        const CellId c = indexer.index_point(p, resolution);
        if (out.cells.empty() || out.cells.back() != c) out.cells.push_back(c);
    }
    return out;
}

/// Collapse consecutive duplicate cells in-place semantics for already
/// mapped sequences. Idempotent.
inline std::vector<CellId> dedup_cells(const std::vector<CellId>& cells) {
    std::vector<CellId> out;
    out.reserve(cells.size());
    for (const CellId& c : cells)
        if (out.empty() || out.back() != c) out.push_back(c);
    return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

/// Read `traj_id,route_id,lon,lat,timestamp` CSV (header required).
/// Rows are grouped by traj_id in first-seen order; timestamps must be
/// non-decreasing within one trajectory.
inline std::vector<RawTrajectory> read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty trajectory CSV");
    {
        const auto header = detail::split_csv_line(line);
        if (header.size() != 5 || header[0] != "traj_id" || header[1] != "route_id" ||
            header[2] != "lon" || header[3] != "lat" || header[4] != "timestamp")
            throw IoError("expected CSV header traj_id,route_id,lon,lat,timestamp");
    }
    std::vector<RawTrajectory> trajs;
    std::unordered_map<std::string, std::size_t> index_of;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 5)
            throw IoError("line " + std::to_string(line_no) + ": expected 5 CSV fields");
        GeoPoint p;
        try {
            p.lon = std::stod(fields[2]);
            p.lat = std::stod(fields[3]);
            p.t = std::stoll(fields[4]);
        } catch (const std::exception&) {
            throw IoError("line " + std::to_string(line_no) + ": malformed numeric field");
        }
        require_valid_coordinates(p.lon, p.lat);
        auto [it, inserted] = index_of.try_emplace(fields[0], trajs.size());
        if (inserted) trajs.push_back(RawTrajectory{fields[0], od_from_route(fields[1]), {}});
        RawTrajectory& traj = trajs[it->second];
        if (!traj.points.empty() && p.t < traj.points.back().t)
            throw OrderingError("line " + std::to_string(line_no) +
                                ": timestamps decrease within trajectory " + fields[0]);
        traj.points.push_back(p);
    }
    return trajs;
}

}  // namespace crotad
