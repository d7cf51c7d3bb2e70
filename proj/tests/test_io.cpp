#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>

#include "radkd/io.hpp"

using namespace radkd;

namespace {

Drive small_drive(std::size_t frames = 3) {
    DriveSpec spec;
    spec.geometry.n_range = 32;
    spec.geometry.n_azimuth = 16;
    spec.n_frames = frames;
    spec.speed_profile = {{frames, 12.0}};
    spec.objects = {{10.0, 0.0, 50.0, 0.5, 0.5, ObjectKind::Debris}};
    return generate_drive(spec, 5);
}

FrameLabels some_labels() {
    LabelVector a(32, 0), b(32, 0);
    a[3] = 1;
    b[0] = b[31] = 1;
    return {std::nullopt, a, b, LabelVector(32, 0)};
}

TeacherParams random_teacher() {
    TeacherParams p;
    p.mlp = teacher_mlp_architecture();
    Rng rng(3);
    for (auto& l : p.mlp) init_layer(l, rng);
    p.min_speed = 4.5;
    p.cfar.offset_db = 5.0;
    return p;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::Undefined;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

/// Rewrites the trailing CRC so a header edit reaches the field checks.
void reseal(std::vector<std::uint8_t>& b) {
    put_u32(b, b.size() - 4, crc32(std::span<const std::uint8_t>(b).first(b.size() - 4)));
}

} // namespace

TEST(Crc32, KnownVector) {
    const std::string s = "123456789";
    EXPECT_EQ(crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())), 0xCBF43926u);
}

TEST(DriveFile, RoundTrip) {
    const auto d = small_drive();
    const auto bytes = encode_drive(d);
    const auto back = decode_drive(bytes);
    ASSERT_EQ(back.frames.size(), d.frames.size());
    for (std::size_t i = 0; i < d.frames.size(); ++i) EXPECT_EQ(back.frames[i], d.frames[i]) << i;
    // header reals are stored as f32
    EXPECT_EQ(back.geometry.range_resolution, static_cast<double>(static_cast<float>(d.geometry.range_resolution)));
    EXPECT_EQ(back.frame_interval, static_cast<double>(static_cast<float>(d.frame_interval)));
    EXPECT_EQ(back.seed, d.seed);
    EXPECT_EQ(encode_drive(back), bytes);
    const auto tmp = std::filesystem::temp_directory_path() / "radkd_io_roundtrip.rkd";
    write_drive(tmp, d);
    EXPECT_EQ(read_drive(tmp), back);
    std::filesystem::remove(tmp);
}

TEST(DriveFile, EmptyDriveRoundTrips) {
    auto d = small_drive();
    d.frames.clear();
    EXPECT_EQ(decode_drive(encode_drive(d)).frames.size(), 0u);
}

TEST(DriveFile, HeaderErrorsAreTyped) {
    const auto good = encode_drive(small_drive());
    auto b = good;
    b[0] = 'X';
    EXPECT_EQ(kind_of([&] { decode_drive(b); }), ErrorKind::BadMagic);
    b = good;
    put_u32(b, 8, 2);
    EXPECT_EQ(kind_of([&] { decode_drive(b); }), ErrorKind::VersionMismatch);
    b = good;
    b.resize(b.size() - 10);
    EXPECT_EQ(kind_of([&] { decode_drive(b); }), ErrorKind::Truncated);
    b = good;
    b.push_back(0);
    EXPECT_EQ(kind_of([&] { decode_drive(b); }), ErrorKind::Corrupt);
    b = good;
    b[100] ^= 0x40;
    EXPECT_EQ(kind_of([&] { decode_drive(b); }), ErrorKind::CrcMismatch);
    b = good;
    put_u32(b, 16, 0);
    reseal(b);
    EXPECT_EQ(kind_of([&] { decode_drive(b); }), ErrorKind::Corrupt);
    EXPECT_EQ(kind_of([&] { decode_drive(std::vector<std::uint8_t>(5, 0)); }), ErrorKind::Truncated);
}

TEST(DriveFile, NegativeSpeedIsCorrupt) {
    auto d = small_drive(1);
    auto b = encode_drive(d);
    // host speed follows the map of frame 0
    const std::size_t at = kDriveHeaderBytes + 32 * 16 * 4;
    const float neg = -1.0f;
    std::memcpy(&b[at], &neg, 4);
    reseal(b);
    EXPECT_EQ(kind_of([&] { decode_drive(b); }), ErrorKind::Corrupt);
}

TEST(DriveFile, MissingFileIsIoError) {
    EXPECT_EQ(kind_of([] { read_drive("/nonexistent/radkd/drive.rkd"); }), ErrorKind::Io);
}

TEST(LabelFile, RoundTripKeepsAbstentions) {
    const auto l = some_labels();
    const auto back = decode_labels(encode_labels(l, 32));
    ASSERT_EQ(back.size(), 4u);
    EXPECT_FALSE(back[0]);
    EXPECT_EQ(back, l);
}

TEST(LabelFile, ErrorsAreTyped) {
    const auto good = encode_labels(some_labels(), 32);
    auto b = good;
    b[3] = 0;
    EXPECT_EQ(kind_of([&] { decode_labels(b); }), ErrorKind::BadMagic);
    b = good;
    b.pop_back();
    EXPECT_EQ(kind_of([&] { decode_labels(b); }), ErrorKind::Truncated);
    b = good;
    // presence byte of frame 0 set to 2
    b[kLabelHeaderBytes] = 2;
    reseal(b);
    EXPECT_EQ(kind_of([&] { decode_labels(b); }), ErrorKind::Corrupt);
    b = good;
    // abstained frame with a detection bit
    b[kLabelHeaderBytes + 1] = 1;
    reseal(b);
    EXPECT_EQ(kind_of([&] { decode_labels(b); }), ErrorKind::Corrupt);
    EXPECT_THROW(encode_labels({LabelVector(31, 0)}, 32), Error);
}

TEST(LabelFile, PairingWithDriveChecksCounts) {
    const auto d = small_drive(3);
    const auto tmp = std::filesystem::temp_directory_path() / "radkd_io_pair.labels";
    write_labels(tmp, some_labels(), 32);
    EXPECT_EQ(kind_of([&] { read_labels_for(tmp, d); }), ErrorKind::CountMismatch);
    write_labels(tmp, FrameLabels(3, LabelVector(16, 0)), 16);
    EXPECT_EQ(kind_of([&] { read_labels_for(tmp, d); }), ErrorKind::CountMismatch);
    write_labels(tmp, FrameLabels(3, std::nullopt), 32);
    EXPECT_EQ(read_labels_for(tmp, d).size(), 3u);
    std::filesystem::remove(tmp);
}

TEST(WeightsFile, TeacherRoundTrip) {
    const auto p = random_teacher();
    const auto back = decode_teacher(encode_teacher(p));
    ASSERT_EQ(back.mlp.size(), p.mlp.size());
    for (std::size_t i = 0; i < p.mlp.size(); ++i) {
        EXPECT_EQ(back.mlp[i].weights, p.mlp[i].weights);
        EXPECT_EQ(back.mlp[i].bias, p.mlp[i].bias);
        EXPECT_EQ(back.mlp[i].activation, p.mlp[i].activation);
    }
    EXPECT_EQ(back.min_speed, 4.5);
    EXPECT_EQ(back.cfar.offset_db, 5.0);
    EXPECT_EQ(back.accumulation_depth, p.accumulation_depth);
}

TEST(WeightsFile, StudentRoundTrip) {
    const auto m = default_architecture(9);
    const auto back = decode_student(encode_student(m));
    EXPECT_EQ(back.crop_offset, m.crop_offset);
    for (std::size_t i = 0; i < kStudentStages; ++i) {
        EXPECT_EQ(back.layers[i].kernel, m.layers[i].kernel);
        EXPECT_EQ(back.layers[i].bias, m.layers[i].bias);
        EXPECT_EQ(back.layers[i].stride, m.layers[i].stride);
        EXPECT_EQ(back.layers[i].padding, m.layers[i].padding);
    }
}

TEST(WeightsFile, KindMismatchIsTyped) {
    const auto t = encode_teacher(random_teacher());
    const auto s = encode_student(default_architecture());
    EXPECT_EQ(kind_of([&] { decode_student(t); }), ErrorKind::ModelKindMismatch);
    EXPECT_EQ(kind_of([&] { decode_teacher(s); }), ErrorKind::ModelKindMismatch);
}

TEST(WeightsFile, NonFiniteParameterIsCorrupt) {
    auto b = encode_student(default_architecture());
    // the last parameter is the head bias, just before the CRC
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(&b[b.size() - 8], &nan, 4);
    reseal(b);
    EXPECT_EQ(kind_of([&] { decode_student(b); }), ErrorKind::Corrupt);
}

TEST(Fuzz, ByteFlipsAreAlwaysRejected) {
    const std::vector<std::vector<std::uint8_t>> files{
        encode_drive(small_drive()), encode_labels(some_labels(), 32), encode_teacher(random_teacher()),
        encode_student(default_architecture())};
    const std::vector<std::function<void(std::span<const std::uint8_t>)>> decoders{
        [](auto b) { decode_drive(b); }, [](auto b) { decode_labels(b); }, [](auto b) { decode_teacher(b); },
        [](auto b) { decode_student(b); }};
    Rng rng(2024);
    std::size_t rejected = 0, crashes = 0, accepted = 0;
    for (int it = 0; it < 1000; ++it) {
        const std::size_t which = static_cast<std::size_t>(it) % files.size();
        auto b = files[which];
        b[rng.below(b.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
        try {
            decoders[which](b);
            ++accepted;
        } catch (const Error&) {
            ++rejected;
        } catch (...) {
            ++crashes;
        }
    }
    EXPECT_EQ(crashes, 0u);
    EXPECT_EQ(accepted, 0u);
    EXPECT_EQ(rejected, 1000u);
}

TEST(Fuzz, TruncationsAndExtensionsAreRejected) {
    const std::vector<std::vector<std::uint8_t>> files{
        encode_drive(small_drive()), encode_labels(some_labels(), 32), encode_teacher(random_teacher()),
        encode_student(default_architecture())};
    const std::vector<std::function<void(std::span<const std::uint8_t>)>> decoders{
        [](auto b) { decode_drive(b); }, [](auto b) { decode_labels(b); }, [](auto b) { decode_teacher(b); },
        [](auto b) { decode_student(b); }};
    Rng rng(7);
    for (std::size_t which = 0; which < files.size(); ++which)
        for (int it = 0; it < 50; ++it) {
            auto b = files[which];
            if (it % 2) {
                b.resize(rng.below(b.size()));
            } else {
                for (std::size_t k = 1 + rng.below(16); k-- > 0;) b.push_back(static_cast<std::uint8_t>(rng.below(256)));
            }
            EXPECT_THROW(decoders[which](b), Error) << which << " " << it;
        }
}
