#pragma once

// Synthetic range-azimuth drive generator. Objects are stationary; the host
// approaches them at the drive's speed profile. Each frame is a noise-free
// sum of Gaussian reflector blobs plus a Rayleigh noise floor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "radkd/error.hpp"
#include "radkd/geometry.hpp"
#include "radkd/random.hpp"
#include "radkd/tensor.hpp"

namespace radkd {

/// One decision per range bin (0/1).
using LabelVector = std::vector<std::uint8_t>;

enum class ObjectKind : std::uint8_t { Debris = 0, Guardrail = 1, Signpost = 2 };

struct SceneObject {
    double down_range = 0.0;  // meters ahead of the host
    double cross_range = 0.0; // meters, + = left
    double rcs = 1.0;
    double extent_range = 0.5;
    double extent_cross = 0.5;
    ObjectKind kind = ObjectKind::Debris;

    friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

/// Forward-model constants shared by every frame of a drive.
struct SensorModel {
    double reference_range = 100.0; // amplitude = rcs * (reference_range / r)^2
    double range_psf_bins = 0.5;    // point-spread sigma along range
    double azimuth_psf_bins = 0.6;  // point-spread sigma along azimuth
    double noise_sigma = 1.0;       // Rayleigh scale of the noise floor; 0 disables noise

    void validate() const {
        require(reference_range > 0.0 && range_psf_bins > 0.0 && azimuth_psf_bins > 0.0,
                ErrorKind::Config, "sensor model: reference range and point-spread widths must be > 0");
        require(noise_sigma >= 0.0, ErrorKind::Config, "sensor model: noise_sigma must be >= 0");
    }
};

struct Frame {
    Tensor map; // [n_range, n_azimuth], magnitudes >= 0
    float host_speed = 0.0f;
    double timestamp = 0.0;
    LabelVector ground_truth;

    friend bool operator==(const Frame&, const Frame&) = default;
};

struct Drive {
    RadarGeometry geometry;
    std::vector<Frame> frames;
    double frame_interval = 0.065;
    std::uint64_t seed = 0;

    friend bool operator==(const Drive&, const Drive&) = default;
};

struct RenderStats {
    std::size_t skipped = 0; // objects behind the host, beyond max range, or outside the FOV
};

inline bool in_ego_lane(const RadarGeometry& geometry, const SceneObject& obj) {
    return std::abs(obj.cross_range) <= geometry.lane_half_width;
}

/// Range bins covered by an object along its slant range.
inline std::pair<std::size_t, std::size_t> covered_bins(const RadarGeometry& geometry, double range,
                                                        double extent) {
    const double lo = std::max(0.0, std::round((range - 0.5 * extent) / geometry.range_resolution));
    const double hi = std::round((range + 0.5 * extent) / geometry.range_resolution);
    const double last = static_cast<double>(geometry.n_range - 1);
    return {static_cast<std::size_t>(std::min(lo, last)), static_cast<std::size_t>(std::min(hi, last))};
}

/// Adds one reflector's noise-free blob to the map. Returns false if it was skipped.
inline bool add_reflector(Tensor& map, const RadarGeometry& geometry, const SensorModel& sensor,
                          const SceneObject& obj) {
    if (obj.down_range <= 0.0) return false;
    const auto pos = polar_of(geometry, obj.down_range, obj.cross_range);
    if (!pos) return false;
    const double range = std::hypot(obj.down_range, obj.cross_range);
    if (std::round(pos->range_bin) > static_cast<double>(geometry.n_range - 1)) return false;

    const double amp = obj.rcs * std::pow(sensor.reference_range / std::max(range, 1e-3), 2.0);
    const double sr = std::hypot(sensor.range_psf_bins, 0.5 * obj.extent_range / geometry.range_resolution);
    const double angular_bins = (obj.extent_cross / std::max(range, 1e-3)) / geometry.azimuth_step();
    const double sa = std::hypot(sensor.azimuth_psf_bins, 0.5 * angular_bins);

    const auto lo_r = static_cast<long>(std::floor(pos->range_bin - 4.0 * sr));
    const auto hi_r = static_cast<long>(std::ceil(pos->range_bin + 4.0 * sr));
    const auto lo_a = static_cast<long>(std::floor(pos->azimuth_bin - 4.0 * sa));
    const auto hi_a = static_cast<long>(std::ceil(pos->azimuth_bin + 4.0 * sa));
    const long n_r = static_cast<long>(geometry.n_range);
    const long n_a = static_cast<long>(geometry.n_azimuth);
    for (long j = std::max(0L, lo_r); j <= std::min(n_r - 1, hi_r); ++j) {
        const double dr = (static_cast<double>(j) - pos->range_bin) / sr;
        for (long m = std::max(0L, lo_a); m <= std::min(n_a - 1, hi_a); ++m) {
            const double da = (static_cast<double>(m) - pos->azimuth_bin) / sa;
            map.at(static_cast<std::size_t>(j), static_cast<std::size_t>(m)) +=
                static_cast<float>(amp * std::exp(-0.5 * (dr * dr + da * da)));
        }
    }
    return true;
}

/// Renders one frame: reflector blobs, then the Rayleigh floor drawn from rng.
/// Ground truth marks the range bins covered by in-lane debris.
inline Frame render_frame(const RadarGeometry& geometry, const std::vector<SceneObject>& objects,
                          double host_speed, const SensorModel& sensor, Rng& rng,
                          RenderStats* stats = nullptr) {
    geometry.validate();
    sensor.validate();
    require(host_speed >= 0.0, ErrorKind::Config, "render_frame: host speed must be >= 0");
    Frame frame{Tensor({geometry.n_range, geometry.n_azimuth}), static_cast<float>(host_speed), 0.0,
                LabelVector(geometry.n_range, 0)};
    for (const auto& obj : objects) {
        if (!add_reflector(frame.map, geometry, sensor, obj)) {
            if (stats) ++stats->skipped;
            continue;
        }
        if (obj.kind == ObjectKind::Debris && in_ego_lane(geometry, obj)) {
            const auto [lo, hi] =
                covered_bins(geometry, std::hypot(obj.down_range, obj.cross_range), obj.extent_range);
            for (std::size_t j = lo; j <= hi; ++j) frame.ground_truth[j] = 1;
        }
    }
    if (sensor.noise_sigma > 0.0)
        for (float& v : frame.map.values()) v += static_cast<float>(rng.rayleigh(sensor.noise_sigma));
    return frame;
}

// ---------------------------------------------------------------------------
// Drive generation
// ---------------------------------------------------------------------------

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double draw(Rng& rng) const { return rng.uniform(lo, hi); }
    bool valid() const { return lo <= hi; }
};

struct SpeedSegment {
    std::size_t frames = 0;
    double speed = 0.0;
};

/// Randomised scene layout: one in-lane target, optional out-of-lane debris,
/// guardrail posts along one or both lane edges, and occasional signposts.
struct RandomScene {
    double target_probability = 1.0;
    Interval target_down_range{285.0, 299.0};
    Interval target_cross_range{-1.2, 1.2};
    Interval target_rcs{60.0, 180.0};
    Interval debris_extent_range{0.2, 1.0};
    Interval debris_extent_cross{0.3, 1.5};

    std::size_t max_out_of_lane_debris = 2;
    Interval out_of_lane_cross_range{3.0, 6.0}; // magnitude; side is random
    Interval out_of_lane_down_range{120.0, 299.0};

    double guardrail_probability = 0.8;
    Interval guardrail_offset{5.0, 8.0};
    Interval guardrail_spacing{15.0, 30.0};
    Interval guardrail_rcs{15.0, 60.0};

    std::size_t max_signposts = 2;
    Interval signpost_offset{4.0, 9.0};
    Interval signpost_rcs{40.0, 150.0};

    Interval host_speed{10.0, 30.0};
    double low_speed_probability = 0.1;
    Interval low_speed{1.0, 4.0};
};

struct DriveSpec {
    RadarGeometry geometry;
    SensorModel sensor;
    std::size_t n_frames = 80;
    double frame_interval = 0.065;
    std::vector<SpeedSegment> speed_profile; // empty: drawn from scene.host_speed
    std::vector<SceneObject> objects;        // placed at frame 0, in addition to any random scene
    std::optional<RandomScene> scene;

    void validate() const {
        geometry.validate();
        sensor.validate();
        require(frame_interval > 0.0, ErrorKind::Config, "drive spec: frame_interval must be > 0");
        std::size_t profiled = 0;
        for (const auto& seg : speed_profile) {
            require(seg.speed >= 0.0 && std::isfinite(seg.speed), ErrorKind::Config,
                    "drive spec: segment speed must be finite and >= 0");
            profiled += seg.frames;
        }
        require(speed_profile.empty() || profiled >= n_frames, ErrorKind::Config,
                "drive spec: speed profile covers " + std::to_string(profiled) + " of " +
                    std::to_string(n_frames) + " frames");
        require(!speed_profile.empty() || scene.has_value(), ErrorKind::Config,
                "drive spec: needs a speed profile or a random scene");
        for (const auto& obj : objects)
            require(obj.rcs >= 0.0 && obj.extent_range > 0.0 && obj.extent_cross > 0.0 && obj.down_range > 0.0,
                    ErrorKind::Config, "drive spec: objects need rcs >= 0, positive extents and down_range");
        if (scene) {
            const auto& s = *scene;
            for (const Interval* iv :
                 {&s.target_down_range, &s.target_cross_range, &s.target_rcs, &s.debris_extent_range,
                  &s.debris_extent_cross, &s.out_of_lane_cross_range, &s.out_of_lane_down_range,
                  &s.guardrail_offset, &s.guardrail_spacing, &s.guardrail_rcs, &s.signpost_offset,
                  &s.signpost_rcs, &s.host_speed, &s.low_speed})
                require(iv->valid(), ErrorKind::Config, "drive spec: interval with lo > hi");
            require(s.target_down_range.lo > 0.0 && s.out_of_lane_down_range.lo > 0.0, ErrorKind::Config,
                    "drive spec: down ranges must be > 0");
            require(s.guardrail_spacing.lo > 0.0, ErrorKind::Config, "drive spec: guardrail spacing must be > 0");
            require(s.host_speed.lo >= 0.0 && s.low_speed.lo >= 0.0, ErrorKind::Config,
                    "drive spec: speeds must be >= 0");
        }
    }
};

namespace detail {

inline double draw_side(Rng& rng) { return rng.bernoulli(0.5) ? 1.0 : -1.0; }

inline std::vector<SceneObject> layout_scene(const RandomScene& s, double travel, Rng& rng) {
    std::vector<SceneObject> objects;
    if (rng.bernoulli(s.target_probability)) {
        objects.push_back({s.target_down_range.draw(rng), s.target_cross_range.draw(rng), s.target_rcs.draw(rng),
                           s.debris_extent_range.draw(rng), s.debris_extent_cross.draw(rng), ObjectKind::Debris});
    }
    const std::size_t n_out = rng.below(s.max_out_of_lane_debris + 1);
    for (std::size_t i = 0; i < n_out; ++i) {
        const double cross = draw_side(rng) * s.out_of_lane_cross_range.draw(rng);
        objects.push_back({s.out_of_lane_down_range.draw(rng), cross, s.target_rcs.draw(rng),
                           s.debris_extent_range.draw(rng), s.debris_extent_cross.draw(rng), ObjectKind::Debris});
    }
    for (double side : {1.0, -1.0}) {
        if (!rng.bernoulli(s.guardrail_probability)) continue;
        const double offset = side * s.guardrail_offset.draw(rng);
        const double spacing = s.guardrail_spacing.draw(rng);
        const double rcs = s.guardrail_rcs.draw(rng);
        for (double d = 10.0 + spacing * rng.uniform(); d < 310.0 + travel; d += spacing)
            objects.push_back({d, offset, rcs, 0.3, 0.3, ObjectKind::Guardrail});
    }
    const std::size_t n_sign = rng.below(s.max_signposts + 1);
    for (std::size_t i = 0; i < n_sign; ++i) {
        objects.push_back({rng.uniform(60.0, 300.0 + travel), draw_side(rng) * s.signpost_offset.draw(rng),
                           s.signpost_rcs.draw(rng), 0.5, 1.0, ObjectKind::Signpost});
    }
    return objects;
}

} // namespace detail

/// Deterministic for a fixed seed. Frame i is rendered with speed v_i, and every
/// object's down range shrinks by v_i * frame_interval before frame i+1.
inline Drive generate_drive(const DriveSpec& spec, std::uint64_t seed, RenderStats* stats = nullptr) {
    spec.validate();
    Rng scene_rng = Rng::substream(seed, 0);

    std::vector<double> speeds;
    speeds.reserve(spec.n_frames);
    if (!spec.speed_profile.empty()) {
        for (const auto& seg : spec.speed_profile)
            for (std::size_t k = 0; k < seg.frames && speeds.size() < spec.n_frames; ++k) speeds.push_back(seg.speed);
    } else {
        const auto& s = *spec.scene;
        const double v = scene_rng.bernoulli(s.low_speed_probability) ? s.low_speed.draw(scene_rng)
                                                                      : s.host_speed.draw(scene_rng);
        speeds.assign(spec.n_frames, v);
    }
    double travel = 0.0;
    for (double v : speeds) travel += v * spec.frame_interval;

    std::vector<SceneObject> objects = spec.objects;
    if (spec.scene) {
        auto random_objects = detail::layout_scene(*spec.scene, travel, scene_rng);
        objects.insert(objects.end(), random_objects.begin(), random_objects.end());
    }

    Drive drive{spec.geometry, {}, spec.frame_interval, seed};
    drive.frames.reserve(spec.n_frames);
    for (std::size_t i = 0; i < spec.n_frames; ++i) {
        Rng noise_rng = Rng::substream(seed, i + 1);
        Frame frame = render_frame(spec.geometry, objects, speeds[i], spec.sensor, noise_rng, stats);
        frame.timestamp = static_cast<double>(i) * spec.frame_interval;
        drive.frames.push_back(std::move(frame));
        for (auto& obj : objects) obj.down_range -= speeds[i] * spec.frame_interval;
    }
    return drive;
}

/// Default scene used by the CLI and the end-to-end suite.
inline DriveSpec default_drive_spec() {
    DriveSpec spec;
    spec.scene = RandomScene{};
    return spec;
}

} // namespace radkd
