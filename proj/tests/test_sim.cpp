#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "radkd/sim.hpp"

using namespace radkd;

namespace {

SensorModel quiet() {
    SensorModel s;
    s.noise_sigma = 0.0;
    return s;
}

std::pair<std::size_t, std::size_t> argmax(const Tensor& map) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < map.size(); ++i)
        if (map[i] > map[best]) best = i;
    return {best / map.dim(1), best % map.dim(1)};
}

DriveSpec constant_speed(double speed, std::vector<SceneObject> objects, std::size_t frames = 6) {
    DriveSpec spec;
    spec.sensor = quiet();
    spec.n_frames = frames;
    spec.speed_profile = {{frames, speed}};
    spec.objects = std::move(objects);
    return spec;
}

} // namespace

TEST(Polar, BoresightIsCentreBin) {
    RadarGeometry g;
    const auto p = polar_of(g, 100.0, 0.0);
    ASSERT_TRUE(p);
    EXPECT_DOUBLE_EQ(p->azimuth_bin, 127.5);
    EXPECT_NEAR(p->range_bin, 153.846, 1e-3);
}

TEST(Polar, FovEdgesMapToFirstAndLastBins) {
    RadarGeometry g;
    // theta = +45 deg exactly
    const auto edge = polar_of(g, 10.0, 10.0);
    ASSERT_TRUE(edge);
    EXPECT_NEAR(edge->azimuth_bin, 255.0, 1e-9);
    EXPECT_NEAR(polar_of(g, 10.0, -10.0)->azimuth_bin, 0.0, 1e-9);
    EXPECT_FALSE(polar_of(g, 10.0, 10.5));
}

TEST(Polar, MatchesAngleOracle) {
    RadarGeometry g;
    for (double cr : {-7.0, -1.75, 0.3, 5.0, 40.0}) {
        const double dr = 60.0;
        const double theta = std::atan2(cr, dr) * 180.0 / std::numbers::pi;
        const auto p = polar_of(g, dr, cr);
        ASSERT_TRUE(p);
        EXPECT_NEAR(p->azimuth_bin, (theta + 45.0) / 90.0 * 255.0, 1e-9);
        EXPECT_NEAR(p->range_bin, std::sqrt(dr * dr + cr * cr) / 0.65, 1e-9);
    }
    EXPECT_THROW(polar_of(g, 0.0, 1.0), Error);
}

TEST(Render, EmptySceneWithoutNoiseIsZero) {
    RadarGeometry g;
    Rng rng(1);
    const auto f = render_frame(g, {}, 10.0, quiet(), rng);
    for (float v : f.map.values()) EXPECT_EQ(v, 0.0f);
    for (auto v : f.ground_truth) EXPECT_EQ(v, 0);
}

TEST(Render, InLaneDebrisPeaksAtExpectedBin) {
    RadarGeometry g;
    Rng rng(1);
    const SceneObject obj{65.0, 0.0, 50.0, 0.5, 0.5, ObjectKind::Debris};
    const auto f = render_frame(g, {obj}, 10.0, quiet(), rng);
    const auto [j, m] = argmax(f.map);
    EXPECT_EQ(j, 100u);
    EXPECT_TRUE(m == 127 || m == 128);
    EXPECT_EQ(f.ground_truth[100], 1);
    const double amp = 50.0 * (100.0 / 65.0) * (100.0 / 65.0);
    EXPECT_LE(f.map.at(100, 127), amp);
    EXPECT_GT(f.map.at(100, 127), 0.5 * amp);
}

TEST(Render, OutOfLaneDebrisHasNoGroundTruthAndShiftsInAzimuth) {
    RadarGeometry g;
    Rng rng(1);
    const SceneObject obj{65.0, 5.0, 50.0, 0.5, 0.5, ObjectKind::Debris};
    const auto f = render_frame(g, {obj}, 10.0, quiet(), rng);
    for (auto v : f.ground_truth) EXPECT_EQ(v, 0);
    const auto [j, m] = argmax(f.map);
    const auto p = polar_of(g, 65.0, 5.0);
    EXPECT_EQ(j, static_cast<std::size_t>(std::lround(p->range_bin)));
    EXPECT_NEAR(static_cast<double>(m), p->azimuth_bin, 0.5 + 1e-9);
}

TEST(Render, ClutterNeverCreatesGroundTruth) {
    RadarGeometry g;
    Rng rng(1);
    const SceneObject rail{50.0, 0.5, 50.0, 0.5, 0.5, ObjectKind::Guardrail};
    const SceneObject sign{80.0, -0.5, 50.0, 0.5, 0.5, ObjectKind::Signpost};
    const auto f = render_frame(g, {rail, sign}, 10.0, quiet(), rng);
    for (auto v : f.ground_truth) EXPECT_EQ(v, 0);
}

TEST(Render, SkipsObjectsBehindOrBeyondRange) {
    RadarGeometry g;
    Rng rng(1);
    RenderStats stats;
    const SceneObject behind{-5.0, 0.0, 50.0, 0.5, 0.5, ObjectKind::Debris};
    const SceneObject beyond{400.0, 0.0, 50.0, 0.5, 0.5, ObjectKind::Debris};
    const SceneObject wide{5.0, 20.0, 50.0, 0.5, 0.5, ObjectKind::Debris};
    const auto f = render_frame(g, {behind, beyond, wide}, 10.0, quiet(), rng, &stats);
    EXPECT_EQ(stats.skipped, 3u);
    for (float v : f.map.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Render, CrossRangeSignDoesNotChangeGroundTruth) {
    RadarGeometry g;
    for (double cr : {0.3, 1.0, 1.75, 2.5}) {
        Rng r1(1), r2(1);
        const auto a = render_frame(g, {{120.0, cr, 50.0, 1.0, 0.5, ObjectKind::Debris}}, 10.0, quiet(), r1);
        const auto b = render_frame(g, {{120.0, -cr, 50.0, 1.0, 0.5, ObjectKind::Debris}}, 10.0, quiet(), r2);
        EXPECT_EQ(a.ground_truth, b.ground_truth) << cr;
    }
}

TEST(Render, HalvingRcsNeverIncreasesMagnitude) {
    RadarGeometry g;
    Rng r1(1), r2(1);
    const auto a = render_frame(g, {{90.0, 1.0, 80.0, 1.0, 1.0, ObjectKind::Debris}}, 10.0, quiet(), r1);
    const auto b = render_frame(g, {{90.0, 1.0, 40.0, 1.0, 1.0, ObjectKind::Debris}}, 10.0, quiet(), r2);
    for (std::size_t i = 0; i < a.map.size(); ++i) EXPECT_LE(b.map[i], a.map[i]);
}

TEST(Render, NoiseFloorIsRayleigh) {
    RadarGeometry g;
    Rng rng(3);
    const auto f = render_frame(g, {}, 10.0, SensorModel{}, rng);
    double sum = 0;
    for (float v : f.map.values()) {
        EXPECT_GE(v, 0.0f);
        sum += v;
    }
    EXPECT_NEAR(sum / static_cast<double>(f.map.size()), std::sqrt(std::numbers::pi / 2.0), 0.01);
}

TEST(Drive, ObjectsAdvanceBySpeedTimesInterval) {
    // 20 m/s at 0.065 s is 1.3 m, two bins per frame
    const auto d = generate_drive(constant_speed(20.0, {{130.0, 0.0, 80.0, 0.2, 0.5, ObjectKind::Debris}}), 5);
    for (std::size_t i = 0; i < d.frames.size(); ++i) {
        const auto [j, m] = argmax(d.frames[i].map);
        EXPECT_EQ(j, 200u - 2 * i);
        EXPECT_EQ(d.frames[i].ground_truth[200 - 2 * i], 1);
        EXPECT_NEAR(d.frames[i].timestamp, 0.065 * static_cast<double>(i), 1e-12);
    }
}

TEST(Drive, ZeroSpeedKeepsGroundTruthConstant) {
    const auto d = generate_drive(constant_speed(0.0, {{150.0, 0.5, 80.0, 1.0, 0.5, ObjectKind::Debris}}), 5);
    for (const auto& f : d.frames) EXPECT_EQ(f.ground_truth, d.frames.front().ground_truth);
}

TEST(Drive, SameSeedIsIdentical) {
    auto spec = default_drive_spec();
    spec.n_frames = 4;
    EXPECT_EQ(generate_drive(spec, 77), generate_drive(spec, 77));
    EXPECT_FALSE(generate_drive(spec, 77) == generate_drive(spec, 78));
}

TEST(Drive, DefaultSceneHasTargetNear300m) {
    auto spec = default_drive_spec();
    spec.n_frames = 1;
    spec.sensor.noise_sigma = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto d = generate_drive(spec, seed);
        const auto& gt = d.frames[0].ground_truth;
        const auto first = std::find(gt.begin(), gt.end(), 1) - gt.begin();
        EXPECT_GE(first * 0.65, 283.0) << seed;
        EXPECT_LE(first * 0.65, 301.0) << seed;
    }
}

TEST(Drive, InvalidSpecIsConfigError) {
    auto spec = default_drive_spec();
    spec.frame_interval = 0.0;
    try {
        generate_drive(spec, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    DriveSpec short_profile;
    short_profile.n_frames = 10;
    short_profile.speed_profile = {{5, 10.0}};
    EXPECT_THROW(generate_drive(short_profile, 1), Error);
    RadarGeometry g;
    g.fov_degrees = 200;
    EXPECT_THROW(g.validate(), Error);
}
