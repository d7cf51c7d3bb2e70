#pragma once

// Flat little-endian file formats for drives, teacher labels and model
// weights. Every file ends in a CRC32 of all preceding bytes and is checked
// for exact length before any payload is decoded.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "radkd/error.hpp"
#include "radkd/nn.hpp"
#include "radkd/sim.hpp"
#include "radkd/student.hpp"
#include "radkd/teacher.hpp"

namespace radkd {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::array<char, 8> kDriveMagic{'R', 'A', 'D', 'K', 'D', '1', '\0', '\0'};
inline constexpr std::array<char, 8> kLabelMagic{'R', 'A', 'D', 'K', 'D', 'L', '1', '\0'};
inline constexpr std::array<char, 8> kWeightsMagic{'R', 'A', 'D', 'K', 'D', 'W', '1', '\0'};

// ---------------------------------------------------------------------------
// Byte plumbing
// ---------------------------------------------------------------------------

/// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320).
inline std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t crc = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t n = 0; n < 256; ++n) {
            std::uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (auto b : bytes) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
    return ~crc;
}

class ByteWriter {
public:
    void raw(std::span<const char> s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f32s(std::span<const float> v) {
        for (float x : v) f32(x);
    }
    void bytes(std::span<const std::uint8_t> v) { buf_.insert(buf_.end(), v.begin(), v.end()); }

    /// Appends the CRC of everything written so far.
    void seal() { u32(crc32(buf_)); }

    const std::vector<std::uint8_t>& data() const { return buf_; }
    std::size_t size() const { return buf_.size(); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            fail(ErrorKind::Truncated, what_ + ": truncated at byte " + std::to_string(pos_));
    }
    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    void f32s(std::span<float> out) {
        need(out.size() * 4);
        for (float& x : out) x = f32();
    }
    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorKind::Io, "read error on " + path.string());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "write error on " + path.string());
}

namespace detail {

inline void check_magic(ByteReader& r, const std::array<char, 8>& magic, const std::string& what) {
    const auto got = r.bytes(magic.size());
    if (!std::equal(got.begin(), got.end(), magic.begin(), [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); }))
        fail(ErrorKind::BadMagic, what + ": bad magic");
}

inline void check_version(ByteReader& r, const std::string& what) {
    const auto v = r.u32();
    if (v != kFormatVersion)
        fail(ErrorKind::VersionMismatch,
             what + ": version " + std::to_string(v) + ", expected " + std::to_string(kFormatVersion));
}

/// Exact-length check followed by the trailing CRC.
inline void check_length_and_crc(std::span<const std::uint8_t> bytes, std::uint64_t expected, const std::string& what) {
    if (bytes.size() < expected)
        fail(ErrorKind::Truncated, what + ": " + std::to_string(bytes.size()) + " bytes, header declares " +
                                       std::to_string(expected));
    if (bytes.size() > expected)
        fail(ErrorKind::Corrupt, what + ": " + std::to_string(bytes.size() - expected) + " trailing bytes");
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), what);
    if (tail.u32() != crc32(body)) fail(ErrorKind::CrcMismatch, what + ": checksum mismatch");
}

inline std::size_t bitmap_bytes(std::size_t n_range) { return (n_range + 7) / 8; }

inline void pack_bits(ByteWriter& w, const LabelVector& v, std::size_t n_range) {
    std::vector<std::uint8_t> bits(bitmap_bytes(n_range), 0);
    for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j]) bits[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    w.bytes(bits);
}

inline LabelVector unpack_bits(std::span<const std::uint8_t> bits, std::size_t n_range, const std::string& what) {
    LabelVector v(n_range, 0);
    for (std::size_t j = 0; j < n_range; ++j) v[j] = (bits[j / 8] >> (j % 8)) & 1u;
    for (std::size_t j = n_range; j < bits.size() * 8; ++j)
        if ((bits[j / 8] >> (j % 8)) & 1u) fail(ErrorKind::Corrupt, what + ": padding bits set in label bitmap");
    return v;
}

// Caps keep a corrupted-but-CRC-valid header from requesting absurd allocations.
inline constexpr std::uint64_t kMaxBins = 1u << 16;
inline constexpr std::uint64_t kMaxFrames = 1u << 24;

} // namespace detail

// ---------------------------------------------------------------------------
// Drives
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDriveHeaderBytes = 48;

inline std::uint64_t drive_frame_bytes(std::size_t n_range, std::size_t n_azimuth) {
    return static_cast<std::uint64_t>(n_range) * n_azimuth * 4 + 4 + 8 + detail::bitmap_bytes(n_range);
}

inline std::vector<std::uint8_t> encode_drive(const Drive& d) {
    const auto& g = d.geometry;
    g.validate();
    ByteWriter w;
    w.raw(kDriveMagic);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(d.frames.size()));
    w.u32(static_cast<std::uint32_t>(g.n_range));
    w.u32(static_cast<std::uint32_t>(g.n_azimuth));
    w.f32(static_cast<float>(g.range_resolution));
    w.f32(static_cast<float>(g.fov_degrees));
    w.f32(static_cast<float>(g.lane_half_width));
    w.f32(static_cast<float>(d.frame_interval));
    w.u64(d.seed);
    for (const auto& f : d.frames) {
        require_shape(f.map, {g.n_range, g.n_azimuth}, "drive frame");
        require(f.ground_truth.size() == g.n_range, ErrorKind::ShapeMismatch, "drive frame: ground truth length");
        w.f32s(f.map.values());
        w.f32(f.host_speed);
        w.f64(f.timestamp);
        detail::pack_bits(w, f.ground_truth, g.n_range);
    }
    w.seal();
    return w.data();
}

inline Drive decode_drive(std::span<const std::uint8_t> bytes, const std::string& what = "drive file") {
    ByteReader r(bytes, what);
    detail::check_magic(r, kDriveMagic, what);
    detail::check_version(r, what);
    const std::uint64_t n_frames = r.u32(), n_range = r.u32(), n_azimuth = r.u32();
    if (n_range == 0 || n_azimuth < 2 || n_range > detail::kMaxBins || n_azimuth > detail::kMaxBins ||
        n_frames > detail::kMaxFrames)
        fail(ErrorKind::Corrupt, what + ": implausible extents");
    Drive d;
    d.geometry.n_range = n_range;
    d.geometry.n_azimuth = n_azimuth;
    d.geometry.range_resolution = r.f32();
    d.geometry.fov_degrees = r.f32();
    d.geometry.lane_half_width = r.f32();
    d.frame_interval = r.f32();
    d.seed = r.u64();
    detail::check_length_and_crc(bytes, kDriveHeaderBytes + n_frames * drive_frame_bytes(n_range, n_azimuth) + 4, what);
    try {
        d.geometry.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Corrupt, what + ": " + e.what());
    }
    if (!(d.frame_interval > 0.0) || !std::isfinite(d.frame_interval))
        fail(ErrorKind::Corrupt, what + ": frame interval must be finite and > 0");
    d.frames.reserve(n_frames);
    for (std::uint64_t i = 0; i < n_frames; ++i) {
        Frame f;
        f.map = Tensor({n_range, n_azimuth});
        r.f32s(f.map.values());
        f.host_speed = r.f32();
        f.timestamp = r.f64();
        f.ground_truth = detail::unpack_bits(r.bytes(detail::bitmap_bytes(n_range)), n_range, what);
        if (!f.map.all_finite() || !std::isfinite(f.host_speed) || f.host_speed < 0.0f || !std::isfinite(f.timestamp))
            fail(ErrorKind::Corrupt, what + ": frame " + std::to_string(i) + " holds non-finite or negative values");
        d.frames.push_back(std::move(f));
    }
    return d;
}

inline void write_drive(const std::filesystem::path& path, const Drive& d) { write_file(path, encode_drive(d)); }

inline Drive read_drive(const std::filesystem::path& path) { return decode_drive(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

using FrameLabels = std::vector<std::optional<LabelVector>>;

inline constexpr std::size_t kLabelHeaderBytes = 20;

/// Per frame: presence byte (0 abstained, 1 labelled) then the bitmap, which is
/// all zero for abstained frames.
inline std::vector<std::uint8_t> encode_labels(const FrameLabels& labels, std::size_t n_range) {
    ByteWriter w;
    w.raw(kLabelMagic);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(labels.size()));
    w.u32(static_cast<std::uint32_t>(n_range));
    const LabelVector empty(n_range, 0);
    for (const auto& l : labels) {
        require(!l || l->size() == n_range, ErrorKind::ShapeMismatch, "labels: vector length differs from n_range");
        w.u8(l ? 1 : 0);
        detail::pack_bits(w, l ? *l : empty, n_range);
    }
    w.seal();
    return w.data();
}

inline FrameLabels decode_labels(std::span<const std::uint8_t> bytes, const std::string& what = "label file") {
    ByteReader r(bytes, what);
    detail::check_magic(r, kLabelMagic, what);
    detail::check_version(r, what);
    const std::uint64_t n_frames = r.u32(), n_range = r.u32();
    if (n_range == 0 || n_range > detail::kMaxBins || n_frames > detail::kMaxFrames)
        fail(ErrorKind::Corrupt, what + ": implausible extents");
    const std::size_t nb = detail::bitmap_bytes(n_range);
    detail::check_length_and_crc(bytes, kLabelHeaderBytes + n_frames * (1 + nb) + 4, what);
    FrameLabels out;
    out.reserve(n_frames);
    for (std::uint64_t i = 0; i < n_frames; ++i) {
        const auto present = r.u8();
        auto v = detail::unpack_bits(r.bytes(nb), n_range, what);
        if (present > 1) fail(ErrorKind::Corrupt, what + ": bad presence flag in frame " + std::to_string(i));
        if (present) {
            out.emplace_back(std::move(v));
        } else {
            if (std::any_of(v.begin(), v.end(), [](std::uint8_t b) { return b != 0; })) fail(ErrorKind::Corrupt, what + ": abstained frame carries detections");
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

inline void write_labels(const std::filesystem::path& path, const FrameLabels& labels, std::size_t n_range) {
    write_file(path, encode_labels(labels, n_range));
}

inline FrameLabels read_labels(const std::filesystem::path& path) {
    return decode_labels(read_file(path), path.string());
}

/// Label file paired with a drive: frame count and vector length must agree.
inline FrameLabels read_labels_for(const std::filesystem::path& path, const Drive& drive) {
    auto labels = read_labels(path);
    require(labels.size() == drive.frames.size(), ErrorKind::CountMismatch,
            path.string() + ": " + std::to_string(labels.size()) + " label frames for a drive of " +
                std::to_string(drive.frames.size()));
    for (const auto& l : labels)
        require(!l || l->size() == drive.geometry.n_range, ErrorKind::CountMismatch,
                path.string() + ": label length differs from the drive's range bins");
    return labels;
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

enum class ModelKind : std::uint32_t { TeacherMlp = 1, StudentCnn = 2 };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::TeacherMlp ? "teacher-mlp" : "student-cnn"; }

namespace detail {

inline void put_tensor_shape(ByteWriter& w, const Tensor& t) {
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
}

inline Tensor get_tensor(ByteReader& r, const std::string& what) {
    const auto rank = r.u32();
    if (rank < 1 || rank > 4) fail(ErrorKind::Corrupt, what + ": tensor rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const auto d = r.u32();
        if (d == 0 || d > kMaxBins) fail(ErrorKind::Corrupt, what + ": tensor extent " + std::to_string(d));
        shape.push_back(d);
        n *= d;
    }
    if (n * 4 > r.remaining()) fail(ErrorKind::Truncated, what + ": tensor payload exceeds the file");
    Tensor t(shape);
    r.f32s(t.values());
    if (!t.all_finite()) fail(ErrorKind::Corrupt, what + ": non-finite parameter");
    return t;
}

inline Activation get_activation(ByteReader& r, const std::string& what) {
    const auto a = r.u32();
    if (a > 2) fail(ErrorKind::Corrupt, what + ": unknown activation " + std::to_string(a));
    return static_cast<Activation>(a);
}

inline std::vector<std::uint8_t> encode_weights(ModelKind kind, const nlohmann::json& meta,
                                                const std::vector<DenseLayer>* dense,
                                                std::span<const Conv2dLayer> conv) {
    ByteWriter w;
    w.raw(kWeightsMagic);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(kind));
    const std::string m = meta.dump();
    w.u32(static_cast<std::uint32_t>(m.size()));
    w.raw(m);
    if (dense) {
        w.u32(static_cast<std::uint32_t>(dense->size()));
        for (const auto& l : *dense) {
            w.u32(static_cast<std::uint32_t>(l.activation));
            put_tensor_shape(w, l.weights);
            w.f32s(l.weights.values());
            put_tensor_shape(w, l.bias);
            w.f32s(l.bias.values());
        }
    } else {
        w.u32(static_cast<std::uint32_t>(conv.size()));
        for (const auto& l : conv) {
            w.u32(static_cast<std::uint32_t>(l.activation));
            for (auto v : {l.stride[0], l.stride[1], l.padding[0], l.padding[1]}) w.u32(static_cast<std::uint32_t>(v));
            put_tensor_shape(w, l.kernel);
            w.f32s(l.kernel.values());
            put_tensor_shape(w, l.bias);
            w.f32s(l.bias.values());
        }
    }
    w.seal();
    return w.data();
}

struct WeightsPayload {
    ModelKind kind;
    nlohmann::json meta;
    ByteReader body;
    std::uint32_t layers;
};

/// Validates framing and CRC, then positions the reader at the first layer.
inline WeightsPayload open_weights(std::span<const std::uint8_t> bytes, ModelKind expected, const std::string& what) {
    ByteReader r(bytes, what);
    check_magic(r, kWeightsMagic, what);
    check_version(r, what);
    if (bytes.size() < 4 + r.position()) fail(ErrorKind::Truncated, what + ": truncated");
    if (crc32(bytes.first(bytes.size() - 4)) != ByteReader(bytes.last(4), what).u32())
        fail(ErrorKind::CrcMismatch, what + ": checksum mismatch");
    ByteReader body(bytes.first(bytes.size() - 4), what);
    body.bytes(12);
    const auto kind = body.u32();
    if (kind != 1 && kind != 2) fail(ErrorKind::Corrupt, what + ": unknown model kind " + std::to_string(kind));
    if (static_cast<ModelKind>(kind) != expected)
        fail(ErrorKind::ModelKindMismatch, what + ": holds " + std::string(to_string(static_cast<ModelKind>(kind))) +
                                               " weights, expected " + std::string(to_string(expected)));
    const auto meta_len = body.u32();
    if (meta_len > body.remaining()) fail(ErrorKind::Truncated, what + ": metadata exceeds the file");
    const auto meta_bytes = body.bytes(meta_len);
    nlohmann::json meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end(), nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) fail(ErrorKind::Corrupt, what + ": metadata is not a JSON object");
    const auto layers = body.u32();
    return {static_cast<ModelKind>(kind), std::move(meta), body, layers};
}

template <typename T>
T meta_get(const nlohmann::json& meta, const char* key, const std::string& what) {
    try {
        return meta.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::Corrupt, what + ": metadata field '" + key + "' missing or mistyped");
    }
}

inline void require_consumed(const ByteReader& r, const std::string& what) {
    if (r.remaining() != 0) fail(ErrorKind::Corrupt, what + ": " + std::to_string(r.remaining()) + " unread bytes");
}

} // namespace detail

inline std::vector<std::uint8_t> encode_teacher(const TeacherParams& p) {
    p.validate();
    const nlohmann::json meta{{"accumulation_depth", p.accumulation_depth},
                              {"min_speed", p.min_speed},
                              {"decision_threshold", p.decision_threshold},
                              {"cfar",
                               {{"guard_cells", p.cfar.guard_cells},
                                {"train_cells", p.cfar.train_cells},
                                {"offset_db", p.cfar.offset_db}}}};
    return detail::encode_weights(ModelKind::TeacherMlp, meta, &p.mlp, {});
}

inline TeacherParams decode_teacher(std::span<const std::uint8_t> bytes, const std::string& what = "weights file") {
    auto w = detail::open_weights(bytes, ModelKind::TeacherMlp, what);
    TeacherParams p;
    p.accumulation_depth = detail::meta_get<std::size_t>(w.meta, "accumulation_depth", what);
    p.min_speed = detail::meta_get<double>(w.meta, "min_speed", what);
    p.decision_threshold = detail::meta_get<double>(w.meta, "decision_threshold", what);
    const auto cfar = w.meta.contains("cfar") ? w.meta["cfar"] : nlohmann::json::object();
    p.cfar.guard_cells = detail::meta_get<std::size_t>(cfar, "guard_cells", what);
    p.cfar.train_cells = detail::meta_get<std::size_t>(cfar, "train_cells", what);
    p.cfar.offset_db = detail::meta_get<double>(cfar, "offset_db", what);
    if (w.layers > 16) fail(ErrorKind::Corrupt, what + ": implausible layer count");
    for (std::uint32_t i = 0; i < w.layers; ++i) {
        DenseLayer l;
        l.activation = detail::get_activation(w.body, what);
        l.weights = detail::get_tensor(w.body, what);
        l.bias = detail::get_tensor(w.body, what);
        p.mlp.push_back(std::move(l));
    }
    detail::require_consumed(w.body, what);
    for (const auto& l : p.mlp)
        require(l.weights.rank() == 2, ErrorKind::ShapeMismatch, what + ": dense weights must be rank 2");
    p.validate();
    return p;
}

inline std::vector<std::uint8_t> encode_student(const StudentModel& m, std::size_t n_range = 464) {
    m.validate(n_range);
    const nlohmann::json meta{{"crop_offset", m.crop_offset}, {"n_range", n_range}};
    return detail::encode_weights(ModelKind::StudentCnn, meta, nullptr, m.layers);
}

inline StudentModel decode_student(std::span<const std::uint8_t> bytes, const std::string& what = "weights file") {
    auto w = detail::open_weights(bytes, ModelKind::StudentCnn, what);
    StudentModel m;
    m.crop_offset = detail::meta_get<std::size_t>(w.meta, "crop_offset", what);
    const auto n_range = detail::meta_get<std::size_t>(w.meta, "n_range", what);
    require(w.layers == kStudentStages, ErrorKind::ShapeMismatch,
            what + ": student needs " + std::to_string(kStudentStages) + " stages, file has " + std::to_string(w.layers));
    for (auto& l : m.layers) {
        l.activation = detail::get_activation(w.body, what);
        l.stride = {w.body.u32(), w.body.u32()};
        l.padding = {w.body.u32(), w.body.u32()};
        l.kernel = detail::get_tensor(w.body, what);
        l.bias = detail::get_tensor(w.body, what);
        require(l.kernel.rank() == 4 && l.stride[0] > 0 && l.stride[1] > 0, ErrorKind::ShapeMismatch,
                what + ": malformed convolution stage");
    }
    detail::require_consumed(w.body, what);
    const auto ref = default_architecture(0);
    for (std::size_t i = 0; i < kStudentStages; ++i) {
        const auto& a = m.layers[i];
        const auto& b = ref.layers[i];
        require(a.kernel.shape() == b.kernel.shape() && a.stride == b.stride && a.padding == b.padding &&
                    a.activation == b.activation,
                ErrorKind::ShapeMismatch, what + ": stage " + std::to_string(i) + " differs from the fixed architecture");
    }
    m.validate(n_range);
    return m;
}

inline void write_teacher(const std::filesystem::path& path, const TeacherParams& p) { write_file(path, encode_teacher(p)); }
inline TeacherParams read_teacher(const std::filesystem::path& path) {
    return decode_teacher(read_file(path), path.string());
}
inline void write_student(const std::filesystem::path& path, const StudentModel& m, std::size_t n_range = 464) {
    write_file(path, encode_student(m, n_range));
}
inline StudentModel read_student(const std::filesystem::path& path) {
    return decode_student(read_file(path), path.string());
}

} // namespace radkd
