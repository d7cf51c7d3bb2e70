#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>

#include "radkd/error.hpp"

namespace radkd {

/// Sensor grid and ego-lane geometry. Range bin j is centred at j * range_resolution;
/// azimuth bin m maps linearly onto [-fov/2, +fov/2].
struct RadarGeometry {
    std::size_t n_range = 464;
    std::size_t n_azimuth = 256;
    double range_resolution = 0.65; // meters per bin
    double fov_degrees = 90.0;      // total azimuth field of view
    double lane_half_width = 1.75;  // meters

    friend bool operator==(const RadarGeometry&, const RadarGeometry&) = default;

    void validate() const {
        require(n_range > 0 && n_azimuth > 1, ErrorKind::Config, "geometry: bin counts must be positive");
        require(range_resolution > 0.0, ErrorKind::Config, "geometry: range_resolution must be > 0");
        require(fov_degrees > 0.0 && fov_degrees <= 180.0, ErrorKind::Config,
                "geometry: fov_degrees must be in (0, 180]");
        require(lane_half_width > 0.0, ErrorKind::Config, "geometry: lane_half_width must be > 0");
    }

    double fov_radians() const { return fov_degrees * std::numbers::pi / 180.0; }
    double azimuth_step() const { return fov_radians() / static_cast<double>(n_azimuth - 1); }
    double azimuth_angle(double bin) const { return -0.5 * fov_radians() + bin * azimuth_step(); }
    double range_of_bin(double bin) const { return bin * range_resolution; }
    double max_range() const { return (static_cast<double>(n_range) - 0.5) * range_resolution; }
    std::size_t cells() const { return n_range * n_azimuth; }
};

struct PolarPosition {
    double range_bin;
    double azimuth_bin;
};

/// Fractional (range, azimuth) bin of a Cartesian point; empty when the angle
/// falls outside the field of view.
inline std::optional<PolarPosition> polar_of(const RadarGeometry& geometry, double down_range,
                                             double cross_range) {
    require(down_range > 0.0, ErrorKind::Config, "polar_of: down_range must be > 0");
    const double theta = std::atan2(cross_range, down_range);
    const double half = 0.5 * geometry.fov_radians();
    if (theta < -half || theta > half) return std::nullopt;
    return PolarPosition{std::hypot(down_range, cross_range) / geometry.range_resolution,
                         (theta + half) / geometry.azimuth_step()};
}

} // namespace radkd
