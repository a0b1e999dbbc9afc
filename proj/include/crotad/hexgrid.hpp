#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "crotad/indexer.hpp"

namespace crotad {

/// Bounded single-resolution hex grid over axial coordinates
/// 0 <= q < width, 0 <= r < height. The universe is closed and enumerable,
/// which the property tests and the micro-benchmark rely on. Cell centers
/// are laid out in a small lon/lat patch around a configurable origin.
class SyntheticHexGrid final : public HexIndexer {
public:
    SyntheticHexGrid(int width, int height, int resolution = 0, double spacing_deg = 0.01,
                     double origin_lon = 0.0, double origin_lat = 0.0)
        : width_(width),
          height_(height),
          resolution_(resolution),
          spacing_(spacing_deg),
          origin_lon_(origin_lon),
          origin_lat_(origin_lat) {
        if (width <= 0 || height <= 0) throw InvalidArgumentError("grid dimensions must be positive");
        if (resolution < 0 || resolution > 15) throw InvalidArgumentError("resolution out of range");
        if (width > 0xffff || height > 0xffff) throw InvalidArgumentError("grid too large");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int resolution() const { return resolution_; }

    CellId cell_at(std::int64_t q, std::int64_t r) const {
        if (!in_bounds(q, r)) throw InvalidArgumentError("axial coordinate outside grid");
        return make_cell(resolution_, (static_cast<std::uint64_t>(q) << 16) |
                                          static_cast<std::uint64_t>(r));
    }

    hexmath::Axial axial(CellId c) const {
        check_cell(c);
        const std::uint64_t payload = cell_payload(c);
        return hexmath::Axial{static_cast<std::int64_t>((payload >> 16) & 0xffff),
                              static_cast<std::int64_t>(payload & 0xffff)};
    }

    int max_resolution() const override { return resolution_; }

    CellId index_point(const GeoPoint& p, int resolution) const override {
        require_valid_coordinates(p.lon, p.lat);
        if (resolution != resolution_)
            throw InvalidArgumentError("synthetic grid supports a single resolution");
        const double x = p.lon - origin_lon_;
        const double y = p.lat - origin_lat_;
        // Invert center layout: x = s*(q + r/2), y = s*(sqrt(3)/2)*r.
        const double rf = y / (spacing_ * kSqrt3_2);
        const double qf = x / spacing_ - rf / 2.0;
        hexmath::Axial a = hexmath::round_axial(qf, rf);
        // Points outside the patch clamp to the nearest boundary cell.
        a.q = std::min<std::int64_t>(std::max<std::int64_t>(a.q, 0), width_ - 1);
        a.r = std::min<std::int64_t>(std::max<std::int64_t>(a.r, 0), height_ - 1);
        return cell_at(a.q, a.r);
    }

    std::vector<CellId> neighbors(CellId c) const override {
        const hexmath::Axial a = axial(c);
        std::vector<CellId> out;
        out.reserve(6);
        for (const auto& d : hexmath::kDirections) {
            const std::int64_t q = a.q + d.q, r = a.r + d.r;
            if (in_bounds(q, r)) out.push_back(cell_at(q, r));
        }
        return out;
    }

    int hop_distance(CellId a, CellId b) const override {
        if (a.resolution() != b.resolution())
            throw ResolutionMismatchError("hop_distance requires equal resolutions");
        // The axial-rectangle universe is hex-convex, so the closed-form
        // lattice distance equals the in-grid shortest path.
        return static_cast<int>(hexmath::hex_distance(axial(a), axial(b)));
    }

    std::vector<CellId> k_hop_neighbors(CellId c, int k) const override {
        if (k < 0) throw InvalidArgumentError("k must be non-negative");
        const hexmath::Axial a = axial(c);
        std::vector<CellId> out;
        for (const auto& d : hexmath::disk_offsets(k)) {
            const std::int64_t q = a.q + d.q, r = a.r + d.r;
            if (in_bounds(q, r)) out.push_back(cell_at(q, r));
        }
        return out;
    }

    CellId parent(CellId) const override {
        throw InvalidArgumentError("synthetic grid has no resolution hierarchy");
    }

    GeoPoint cell_center(CellId c) const override {
        const hexmath::Axial a = axial(c);
        GeoPoint p;
        p.lon = origin_lon_ + spacing_ * (static_cast<double>(a.q) + static_cast<double>(a.r) / 2.0);
        p.lat = origin_lat_ + spacing_ * kSqrt3_2 * static_cast<double>(a.r);
        return p;
    }

    std::vector<GeoPoint> cell_boundary(CellId c) const override {
        const GeoPoint ctr = cell_center(c);
        std::vector<GeoPoint> corners;
        corners.reserve(6);
        const double rad = spacing_ / kSqrt3;  // circumradius
        for (int i = 0; i < 6; ++i) {
            const double ang = (60.0 * i + 30.0) * kPi / 180.0;
            corners.push_back(GeoPoint{ctr.lon + rad * std::cos(ang), ctr.lat + rad * std::sin(ang), 0});
        }
        return corners;
    }

    std::optional<std::vector<CellId>> universe() const override {
        std::vector<CellId> all;
        all.reserve(static_cast<std::size_t>(width_) * height_);
        for (std::int64_t r = 0; r < height_; ++r)
            for (std::int64_t q = 0; q < width_; ++q) all.push_back(cell_at(q, r));
        return all;
    }

    // -- manifest ----------------------------------------------------------

    std::string to_manifest() const {
        std::ostringstream os;
        os << "crotad-hexgrid v1\n";
        os << "scheme axial-16bit\n";
        os << "resolution " << resolution_ << "\n";
        os << "width " << width_ << "\n";
        os << "height " << height_ << "\n";
        os << "spacing_deg " << format_double(spacing_) << "\n";
        os << "origin_lon " << format_double(origin_lon_) << "\n";
        os << "origin_lat " << format_double(origin_lat_) << "\n";
        return os.str();
    }

    static SyntheticHexGrid from_manifest(std::istream& in) {
        std::string header;
        std::getline(in, header);
        if (header != "crotad-hexgrid v1") throw IoError("bad grid manifest header: " + header);
        int resolution = 0, width = 0, height = 0;
        double spacing = 0.01, olon = 0.0, olat = 0.0;
        std::string scheme = "axial-16bit";
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key == "scheme")
                ls >> scheme;
            else if (key == "resolution")
                ls >> resolution;
            else if (key == "width")
                ls >> width;
            else if (key == "height")
                ls >> height;
            else if (key == "spacing_deg")
                ls >> spacing;
            else if (key == "origin_lon")
                ls >> olon;
            else if (key == "origin_lat")
                ls >> olat;
            else
                throw IoError("unknown grid manifest key: " + key);
        }
        if (scheme != "axial-16bit") throw IoError("unsupported grid scheme: " + scheme);
        return SyntheticHexGrid(width, height, resolution, spacing, olon, olat);
    }

    void save_manifest(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write grid manifest: " + path);
        out << to_manifest();
    }

    static SyntheticHexGrid load_manifest(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot read grid manifest: " + path);
        return from_manifest(in);
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    static constexpr double kSqrt3 = 1.7320508075688772;
    static constexpr double kSqrt3_2 = kSqrt3 / 2.0;

    static std::string format_double(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    }

    bool in_bounds(std::int64_t q, std::int64_t r) const {
        return q >= 0 && q < width_ && r >= 0 && r < height_;
    }

    void check_cell(CellId c) const {
        if (c.resolution() != resolution_) throw ResolutionMismatchError("cell resolution mismatch");
        const std::uint64_t payload = cell_payload(c);
        const auto q = static_cast<std::int64_t>((payload >> 16) & 0xffff);
        const auto r = static_cast<std::int64_t>(payload & 0xffff);
        if (!in_bounds(q, r)) throw InvalidArgumentError("cell outside grid universe");
    }

    int width_, height_, resolution_;
    double spacing_, origin_lon_, origin_lat_;
};

}  // namespace crotad
