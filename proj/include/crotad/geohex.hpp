#pragma once

#include <array>
#include <cmath>
#include <complex>

#include "crotad/indexer.hpp"

namespace crotad {

/// Hierarchical hexagonal index over WGS84 coordinates, aperture 7: each
/// cell has seven children (center + ring) on a lattice rotated by
/// atan(sqrt(3)/5) and shrunk by sqrt(7) per resolution step.
///
/// A cell id is a base-lattice coordinate plus a digit path. Points are
/// assigned at the finest resolution and coarser cells are exact digit
/// truncations, so parent(index(p, g+1)) == index(p, g) holds for every
/// point by construction.
///
/// Geometry is planar-equirectangular (longitude scaled by cos of a
/// reference latitude), intended for city-scale regions away from the
/// poles and the antimeridian.
class GeoHexIndex final : public HexIndexer {
public:
    static constexpr int kMaxResolution = 12;

    explicit GeoHexIndex(double base_spacing_deg = 20.0, double ref_lat_deg = 0.0,
                         double origin_lon = 0.0, double origin_lat = 0.0)
        : spacing0_(base_spacing_deg),
          cos_ref_(std::cos(ref_lat_deg * kPi / 180.0)),
          origin_lon_(origin_lon),
          origin_lat_(origin_lat) {
        if (base_spacing_deg <= 0) throw InvalidArgumentError("base spacing must be positive");
        if (cos_ref_ <= 1e-6) throw InvalidArgumentError("reference latitude too close to a pole");
        Complex z = Complex(spacing0_, 0);
        for (int g = 0; g <= kMaxResolution; ++g) {
            lattice_scale_[g] = z;
            z /= kAperture;
        }
    }

    int max_resolution() const override { return kMaxResolution; }

    CellId index_point(const GeoPoint& p, int resolution) const override {
        require_valid_coordinates(p.lon, p.lat);
        check_resolution(resolution);
        const hexmath::Axial fine = round_to_lattice(project(p), kMaxResolution);
        CellId c = compose(fine, kMaxResolution);
        for (int g = kMaxResolution; g > resolution; --g) c = parent(c);
        return c;
    }

    std::vector<CellId> neighbors(CellId c) const override {
        const int g = c.resolution();
        check_resolution(g);
        const hexmath::Axial a = decompose(c);
        std::vector<CellId> out;
        out.reserve(6);
        for (const auto& d : hexmath::kDirections)
            out.push_back(compose(hexmath::Axial{a.q + d.q, a.r + d.r}, g));
        return out;
    }

    int hop_distance(CellId a, CellId b) const override {
        if (a.resolution() != b.resolution())
            throw ResolutionMismatchError("hop_distance requires equal resolutions");
        return static_cast<int>(hexmath::hex_distance(decompose(a), decompose(b)));
    }

    std::vector<CellId> k_hop_neighbors(CellId c, int k) const override {
        if (k < 0) throw InvalidArgumentError("k must be non-negative");
        const int g = c.resolution();
        check_resolution(g);
        const hexmath::Axial a = decompose(c);
        std::vector<CellId> out;
        for (const auto& d : hexmath::disk_offsets(k))
            out.push_back(compose(hexmath::Axial{a.q + d.q, a.r + d.r}, g));
        return out;
    }

    CellId parent(CellId c) const override {
        const int g = c.resolution();
        if (g <= 0) throw InvalidArgumentError("no parent above resolution 0");
        check_resolution(g);
        std::uint64_t payload = cell_payload(c);
        payload &= ~(std::uint64_t{7} << digit_shift(g));
        return make_cell(g - 1, payload);
    }

    GeoPoint cell_center(CellId c) const override {
        const int g = c.resolution();
        check_resolution(g);
        return unproject(lattice_to_plane(decompose(c), g));
    }

    std::vector<GeoPoint> cell_boundary(CellId c) const override {
        const int g = c.resolution();
        check_resolution(g);
        const Complex ctr = lattice_to_plane(decompose(c), g);
        // Voronoi corner of the unit triangular lattice, rotated six times.
        const Complex corner0 = (Complex(1, 0) + kOmega) / 3.0;
        std::vector<GeoPoint> out;
        out.reserve(6);
        Complex rot(1, 0);
        for (int i = 0; i < 6; ++i) {
            out.push_back(unproject(ctr + lattice_scale_[g] * corner0 * rot));
            rot *= kOmega;
        }
        return out;
    }

    std::optional<std::vector<CellId>> universe() const override { return std::nullopt; }

    /// Exact lattice coordinate of a cell on its resolution's lattice.
    hexmath::Axial decompose(CellId c) const {
        const int g = c.resolution();
        const std::uint64_t payload = cell_payload(c);
        hexmath::Axial a{static_cast<std::int64_t>((payload >> 50) & 0x3ff) - 512,
                         static_cast<std::int64_t>((payload >> 40) & 0x3ff) - 512};
        for (int i = 1; i <= g; ++i) {
            const int d = static_cast<int>((payload >> digit_shift(i)) & 0x7);
            a = step_down(a, d);
        }
        return a;
    }

    /// Cell id whose resolution-g lattice coordinate is `a`.
    CellId compose(hexmath::Axial a, int g) const {
        std::array<int, kMaxResolution> digits{};
        for (int i = g; i >= 1; --i) {
            int chosen = -1;
            for (int d = 0; d < 7; ++d) {
                const hexmath::Axial o = digit_offset(d);
                const std::int64_t x = a.q - o.q, y = a.r - o.r;
                if ((3 * x + y) % 7 == 0 && (-x + 2 * y) % 7 == 0) {
                    chosen = d;
                    a = hexmath::Axial{(3 * x + y) / 7, (-x + 2 * y) / 7};
                    break;
                }
            }
            if (chosen < 0) throw Error("digit decomposition failed");  // unreachable
            digits[static_cast<std::size_t>(i - 1)] = chosen;
        }
        if (a.q < -512 || a.q > 511 || a.r < -512 || a.r > 511)
            throw InvalidCoordinateError("cell outside supported base extent");
        std::uint64_t payload = (static_cast<std::uint64_t>(a.q + 512) << 50) |
                                (static_cast<std::uint64_t>(a.r + 512) << 40);
        for (int i = 1; i <= g; ++i)
            payload |= static_cast<std::uint64_t>(digits[static_cast<std::size_t>(i - 1)])
                       << digit_shift(i);
        return make_cell(g, payload);
    }

private:
    using Complex = std::complex<double>;

    static constexpr double kPi = 3.14159265358979323846;
    static constexpr double kSqrt3_2 = 0.8660254037844386;
    // Sixth root of unity: the lattice basis is {1, omega}.
    static inline const Complex kOmega{0.5, kSqrt3_2};
    // Aperture-7 child lattice generator 2 + omega; |2 + omega|^2 == 7.
    static inline const Complex kAperture{2.5, kSqrt3_2};

    static int digit_shift(int level) { return 40 - 3 * level; }

    static hexmath::Axial digit_offset(int d) {
        return d == 0 ? hexmath::Axial{0, 0} : hexmath::kDirections[d - 1];
    }

    /// One hierarchy step: child coordinate = A * parent + digit offset,
    /// where A is multiplication by (2 + omega) on axial coordinates.
    static hexmath::Axial step_down(hexmath::Axial a, int d) {
        const hexmath::Axial o = digit_offset(d);
        return hexmath::Axial{2 * a.q - a.r + o.q, a.q + 3 * a.r + o.r};
    }

    static void check_resolution(int g) {
        if (g < 0 || g > kMaxResolution) throw InvalidArgumentError("resolution out of range");
    }

    Complex project(const GeoPoint& p) const {
        return Complex((p.lon - origin_lon_) * cos_ref_, p.lat - origin_lat_);
    }

    GeoPoint unproject(Complex xy) const {
        return GeoPoint{xy.real() / cos_ref_ + origin_lon_, xy.imag() + origin_lat_, 0};
    }

    Complex lattice_to_plane(hexmath::Axial a, int g) const {
        return lattice_scale_[g] *
               (Complex(static_cast<double>(a.q), 0) + kOmega * static_cast<double>(a.r));
    }

    hexmath::Axial round_to_lattice(Complex xy, int g) const {
        const Complex w = xy / lattice_scale_[g];
        const double r = w.imag() / kSqrt3_2;
        const double q = w.real() - r / 2.0;
        return hexmath::round_axial(q, r);
    }

    double spacing0_;
    double cos_ref_;
    double origin_lon_, origin_lat_;
    std::array<Complex, kMaxResolution + 1> lattice_scale_;
};

}  // namespace crotad
