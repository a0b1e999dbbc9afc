#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <vector>

#include "crotad/types.hpp"

namespace crotad {

namespace hexmath {

/// Axial hex coordinate. Neighbor directions are the six unit steps of the
/// triangular lattice spanned by u=(1,0) and v=(0,1) with v at 60° from u.
struct Axial {
    std::int64_t q = 0;
    std::int64_t r = 0;

    friend auto operator<=>(const Axial&, const Axial&) = default;
};

inline constexpr Axial kDirections[6] = {{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}};

inline std::int64_t hex_distance(Axial a, Axial b) {
    const std::int64_t dq = a.q - b.q;
    const std::int64_t dr = a.r - b.r;
    return (std::llabs(dq) + std::llabs(dr) + std::llabs(dq + dr)) / 2;
}

/// Round fractional axial coordinates to the nearest lattice point
/// (cube-coordinate rounding).
inline Axial round_axial(double q, double r) {
    const double s = -q - r;
    double rq = std::round(q), rr = std::round(r), rs = std::round(s);
    const double dq = std::abs(rq - q), dr = std::abs(rr - r), ds = std::abs(rs - s);
    if (dq > dr && dq > ds)
        rq = -rr - rs;
    else if (dr > ds)
        rr = -rq - rs;
    return Axial{static_cast<std::int64_t>(rq), static_cast<std::int64_t>(rr)};
}

/// All axial offsets within hex distance k of the origin, spiral order.
inline std::vector<Axial> disk_offsets(int k) {
    std::vector<Axial> out;
    out.reserve(static_cast<std::size_t>(1 + 3 * k * (k + 1)));
    for (std::int64_t q = -k; q <= k; ++q) {
        for (std::int64_t r = -k; r <= k; ++r) {
            if (std::llabs(q + r) <= k) out.push_back(Axial{q, r});
        }
    }
    return out;
}

}  // namespace hexmath

/// Hierarchical hexagonal cell indexer. Implementations must be immutable
/// after construction; all queries are safe for concurrent use.
class HexIndexer {
public:
    virtual ~HexIndexer() = default;

    virtual int max_resolution() const = 0;

    /// Unique cell at `resolution` containing (assigned to) point p.
    virtual CellId index_point(const GeoPoint& p, int resolution) const = 0;

    /// Adjacent cells at the same resolution (≤ 6; fewer at a closed
    /// universe boundary).
    virtual std::vector<CellId> neighbors(CellId c) const = 0;

    /// Minimal hop count between two cells of equal resolution.
    virtual int hop_distance(CellId a, CellId b) const = 0;

    /// Ring union: every cell within k hops of c, including c itself.
    virtual std::vector<CellId> k_hop_neighbors(CellId c, int k) const = 0;

    /// Containing cell one resolution coarser. Throws for single-resolution
    /// indexers.
    virtual CellId parent(CellId c) const = 0;

    virtual GeoPoint cell_center(CellId c) const = 0;

    /// Six polygon corners, counterclockwise.
    virtual std::vector<GeoPoint> cell_boundary(CellId c) const = 0;

    /// Full cell list for closed universes (synthetic grids); nullopt when
    /// the universe is unbounded.
    virtual std::optional<std::vector<CellId>> universe() const = 0;
};

}  // namespace crotad
