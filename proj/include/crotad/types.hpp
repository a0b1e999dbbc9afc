#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace crotad {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidCoordinateError : Error {
    using Error::Error;
};
struct ResolutionMismatchError : Error {
    using Error::Error;
};
struct InvalidArgumentError : Error {
    using Error::Error;
};
struct InsufficientDataError : Error {
    using Error::Error;
};
struct MissingArtifactError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct GenerationError : Error {
    using Error::Error;
};
struct OrderingError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Core domain types
// ---------------------------------------------------------------------------

/// WGS84 coordinate with timestamp (seconds since epoch).
struct GeoPoint {
    double lon = 0.0;
    double lat = 0.0;
    std::int64_t t = 0;
};

inline bool valid_coordinates(double lon, double lat) {
    return lon >= -180.0 && lon <= 180.0 && lat >= -90.0 && lat <= 90.0;
}

inline void require_valid_coordinates(double lon, double lat) {
    if (!valid_coordinates(lon, lat))
        throw InvalidCoordinateError("coordinate out of range: lon=" + std::to_string(lon) +
                                     " lat=" + std::to_string(lat));
}

/// Opaque 64-bit hex-cell identifier. The top 4 bits carry the resolution,
/// the low 60 bits are indexer-defined payload. Cells from different
/// resolutions never compare equal.
struct CellId {
    std::uint64_t v = 0;

    int resolution() const { return static_cast<int>(v >> 60); }

    friend auto operator<=>(const CellId&, const CellId&) = default;
};

inline std::uint64_t cell_payload(CellId c) { return c.v & ((std::uint64_t{1} << 60) - 1); }

inline CellId make_cell(int resolution, std::uint64_t payload) {
    return CellId{(static_cast<std::uint64_t>(resolution) << 60) |
                  (payload & ((std::uint64_t{1} << 60) - 1))};
}

/// Itinerary key. Either a named route id with direction (fixed transit) or
/// an origin/destination cell pair rendered as a stable string.
struct ODPair {
    std::string key;

    friend auto operator<=>(const ODPair&, const ODPair&) = default;
};

inline ODPair od_from_route(const std::string& route_id) { return ODPair{route_id}; }

inline ODPair od_from_cells(CellId origin, CellId destination) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "od:%016llx-%016llx",
                  static_cast<unsigned long long>(origin.v),
                  static_cast<unsigned long long>(destination.v));
    return ODPair{std::string(buf)};
}

struct RawTrajectory {
    std::string traj_id;
    ODPair od;
    std::vector<GeoPoint> points;
};

/// Deduplicated cell sequence: no two consecutive cells are equal.
struct CellTrajectory {
    std::string traj_id;
    ODPair od;
    std::vector<CellId> cells;

    std::size_t size() const { return cells.size(); }
};

/// A window is a contiguous slice of a cell trajectory, the detection unit.
using Window = std::vector<CellId>;

}  // namespace crotad

template <>
struct std::hash<crotad::CellId> {
    std::size_t operator()(const crotad::CellId& c) const noexcept {
        std::uint64_t x = c.v + 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return static_cast<std::size_t>(x ^ (x >> 31));
    }
};

template <>
struct std::hash<crotad::ODPair> {
    std::size_t operator()(const crotad::ODPair& od) const noexcept {
        return std::hash<std::string>{}(od.key);
    }
};
