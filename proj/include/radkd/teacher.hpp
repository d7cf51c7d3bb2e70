#pragma once

// Hybrid block-by-block teacher:
//   lane mask -> ego-motion alignment of the last K frames -> accumulation
//   -> per-range-bin features -> MLP score -> threshold + run merge.
// Abstains (no label) until K frames of history exist and whenever the host
// is slower than the critical speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "radkd/error.hpp"
#include "radkd/geometry.hpp"
#include "radkd/nn.hpp"
#include "radkd/random.hpp"
#include "radkd/sim.hpp"
#include "radkd/tensor.hpp"

namespace radkd {

// ---------------------------------------------------------------------------
// Lane mask
// ---------------------------------------------------------------------------

/// Cells of the polar grid inside the ego lane: |range(j) * sin(theta(m))| <= half width,
/// range(j) = (j + 0.5) * resolution. Each row is a contiguous azimuth interval.
class LaneMask {
public:
    explicit LaneMask(const RadarGeometry& geometry) : geometry_(geometry) {
        geometry.validate();
        begin_.resize(geometry.n_range);
        end_.resize(geometry.n_range);
        for (std::size_t j = 0; j < geometry.n_range; ++j) {
            const double r = (static_cast<double>(j) + 0.5) * geometry.range_resolution;
            std::size_t b = geometry.n_azimuth, e = 0;
            for (std::size_t m = 0; m < geometry.n_azimuth; ++m) {
                if (std::abs(r * std::sin(geometry.azimuth_angle(static_cast<double>(m)))) <= geometry.lane_half_width) {
                    b = std::min(b, m);
                    e = m + 1;
                }
            }
            if (e == 0) b = 0;
            begin_[j] = b;
            end_[j] = e;
        }
    }

    const RadarGeometry& geometry() const { return geometry_; }
    bool contains(std::size_t j, std::size_t m) const { return m >= begin_[j] && m < end_[j]; }
    std::size_t begin(std::size_t j) const { return begin_[j]; }
    std::size_t end(std::size_t j) const { return end_[j]; }
    std::size_t width(std::size_t j) const { return end_[j] - begin_[j]; }

private:
    RadarGeometry geometry_;
    std::vector<std::size_t> begin_;
    std::vector<std::size_t> end_;
};

/// Shared, cached per geometry.
inline std::shared_ptr<const LaneMask> lane_mask(const RadarGeometry& geometry) {
    using Key = std::tuple<std::size_t, std::size_t, double, double, double>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const LaneMask>> cache;
    const Key key{geometry.n_range, geometry.n_azimuth, geometry.range_resolution, geometry.fov_degrees,
                  geometry.lane_half_width};
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, std::make_shared<const LaneMask>(geometry)).first;
    return it->second;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct CfarParams {
    std::size_t guard_cells = 2; // per side, along range
    std::size_t train_cells = 8; // per side, along range
    double offset_db = 6.0;      // detection threshold over the noise estimate (amplitude dB)

    double threshold_factor() const { return std::pow(10.0, offset_db / 20.0); }
};

inline constexpr std::size_t kTeacherFeatures = 5;

struct TeacherParams {
    std::size_t accumulation_depth = 8;
    double min_speed = 5.0;
    CfarParams cfar;
    double decision_threshold = 0.5;
    std::vector<DenseLayer> mlp; // 5 -> 16 -> 16 -> 1

    void validate() const {
        require(accumulation_depth >= 1, ErrorKind::Config, "teacher: accumulation depth must be >= 1");
        require(min_speed >= 0.0, ErrorKind::Config, "teacher: min_speed must be >= 0");
        require(decision_threshold > 0.0 && decision_threshold < 1.0, ErrorKind::Config,
                "teacher: decision threshold must be in (0,1)");
        require(cfar.train_cells >= 1, ErrorKind::Config, "teacher: CFAR needs at least one training cell");
        validate_mlp(mlp);
    }

    static void validate_mlp(const std::vector<DenseLayer>& mlp) {
        static constexpr std::array<std::array<std::size_t, 2>, 3> kShapes{{{16, 5}, {16, 16}, {1, 16}}};
        require(mlp.size() == kShapes.size(), ErrorKind::ShapeMismatch, "teacher: MLP must have 3 layers");
        for (std::size_t i = 0; i < kShapes.size(); ++i) {
            mlp[i].validate();
            require(mlp[i].out_features() == kShapes[i][0] && mlp[i].in_features() == kShapes[i][1],
                    ErrorKind::ShapeMismatch, "teacher: MLP layer " + std::to_string(i) + " has the wrong shape");
        }
        require(mlp.back().activation == Activation::Sigmoid, ErrorKind::ShapeMismatch,
                "teacher: final MLP layer must be sigmoid");
    }
};

inline std::vector<DenseLayer> teacher_mlp_architecture() {
    return {DenseLayer::zeros(16, kTeacherFeatures, Activation::Relu), DenseLayer::zeros(16, 16, Activation::Relu),
            DenseLayer::zeros(1, 16, Activation::Sigmoid)};
}

inline TeacherParams default_teacher_params(std::uint64_t seed = 7) {
    TeacherParams p;
    p.mlp = teacher_mlp_architecture();
    Rng rng(seed);
    for (auto& layer : p.mlp) init_layer(layer, rng);
    return p;
}

// ---------------------------------------------------------------------------
// Ego-motion interpolation
// ---------------------------------------------------------------------------

/// Resamples a past frame onto the current host position. The host has moved
/// `displacement` meters forward since the frame was taken, so a stationary
/// point now at (r, theta) sat at Cartesian (r cos theta + d, r sin theta).
/// Bilinear interpolation; samples outside the grid read as zero.
inline Tensor ego_motion_warp(const Tensor& map, const RadarGeometry& g, double displacement) {
    const std::size_t nr = g.n_range, na = g.n_azimuth;
    require_shape(map, {nr, na}, "ego_motion_warp map");
    if (displacement == 0.0) return map;
    Tensor out({nr, na});
    const double half = 0.5 * g.fov_radians();
    const double inv_step = 1.0 / g.azimuth_step();
    const double inv_res = 1.0 / g.range_resolution;
    const float* src = map.data();
    float* dst = out.data();
    std::vector<double> cos_t(na), sin_t(na);
    for (std::size_t m = 0; m < na; ++m) {
        const double t = g.azimuth_angle(static_cast<double>(m));
        cos_t[m] = std::cos(t);
        sin_t[m] = std::sin(t);
    }
    for (std::size_t j = 0; j < nr; ++j) {
        const double r = g.range_of_bin(static_cast<double>(j));
        for (std::size_t m = 0; m < na; ++m) {
            const double x = r * cos_t[m] + displacement;
            const double y = r * sin_t[m];
            const double rb = std::hypot(x, y) * inv_res;
            const double ab = (std::atan2(y, x) + half) * inv_step;
            const double fr = std::floor(rb), fa = std::floor(ab);
            const double wr = rb - fr, wa = ab - fa;
            const auto j0 = static_cast<long>(fr), m0 = static_cast<long>(fa);
            double acc = 0.0;
            for (int dj = 0; dj < 2; ++dj) {
                const long jj = j0 + dj;
                if (jj < 0 || jj >= static_cast<long>(nr)) continue;
                const double w_r = dj ? wr : 1.0 - wr;
                for (int dm = 0; dm < 2; ++dm) {
                    const long mm = m0 + dm;
                    if (mm < 0 || mm >= static_cast<long>(na)) continue;
                    const double w_a = dm ? wa : 1.0 - wa;
                    acc += w_r * w_a * src[static_cast<std::size_t>(jj) * na + static_cast<std::size_t>(mm)];
                }
            }
            dst[j * na + m] = static_cast<float>(acc);
        }
    }
    return out;
}

struct AlignedHistory {
    std::vector<Tensor> frames; // aligned to the newest frame, oldest first
    Tensor accumulated;         // mean of the aligned frames
};

/// history is ordered oldest..newest; the newest frame has age 0. A frame of
/// age a is moved by host_speed * a * frame_interval meters.
inline AlignedHistory interpolate_accumulate(std::span<const Frame> history, const RadarGeometry& geometry,
                                             double host_speed, double frame_interval, double min_speed) {
    require(!history.empty(), ErrorKind::Config, "interpolate_accumulate: empty history");
    if (host_speed < min_speed)
        fail(ErrorKind::BelowCriticalSpeed, "host speed " + std::to_string(host_speed) +
                                                " m/s is below the critical speed " + std::to_string(min_speed));
    AlignedHistory out;
    out.frames.reserve(history.size());
    out.accumulated = Tensor({geometry.n_range, geometry.n_azimuth});
    const std::size_t k = history.size();
    for (std::size_t i = 0; i < k; ++i) {
        const auto age = static_cast<double>(k - 1 - i);
        out.frames.push_back(ego_motion_warp(history[i].map, geometry, host_speed * age * frame_interval));
        const float* src = out.frames.back().data();
        float* acc = out.accumulated.data();
        for (std::size_t c = 0; c < geometry.cells(); ++c) acc[c] += src[c];
    }
    const float inv_k = 1.0f / static_cast<float>(k);
    for (float& v : out.accumulated.values()) v *= inv_k;
    return out;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

struct FeatureVector {
    float peak = 0.0f;
    float mean = 0.0f;
    float cfar_ratio = 0.0f;
    float persistence = 0.0f;
    float spread = 0.0f;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

namespace detail {

struct LanePeak {
    float value = 0.0f;
    std::size_t column = 0;
};

inline LanePeak lane_peak(const Tensor& map, const LaneMask& mask, std::size_t j) {
    LanePeak p;
    const std::size_t na = mask.geometry().n_azimuth;
    const float* row = map.data() + j * na;
    for (std::size_t m = mask.begin(j); m < mask.end(j); ++m) {
        if (m == mask.begin(j) || row[m] > p.value) p = {row[m], m};
    }
    return p;
}

/// Cell-averaging noise estimate along range in one azimuth column.
inline float cfar_noise(const Tensor& map, const RadarGeometry& g, const CfarParams& cfar, std::size_t j,
                        std::size_t column) {
    double sum = 0.0;
    std::size_t n = 0;
    const auto jl = static_cast<long>(j);
    const auto lo_gap = static_cast<long>(cfar.guard_cells + 1);
    const auto hi_gap = static_cast<long>(cfar.guard_cells + cfar.train_cells);
    for (long off = lo_gap; off <= hi_gap; ++off) {
        for (long jj : {jl - off, jl + off}) {
            if (jj < 0 || jj >= static_cast<long>(g.n_range)) continue;
            sum += map.at(static_cast<std::size_t>(jj), column);
            ++n;
        }
    }
    return n ? static_cast<float>(sum / static_cast<double>(n)) : 0.0f;
}

} // namespace detail

/// Fraction of the aligned frames whose in-lane peak at each range bin exceeds
/// its CFAR threshold.
inline std::vector<float> persistence_counts(std::span<const Tensor> aligned, const LaneMask& mask,
                                             const CfarParams& cfar) {
    const auto& g = mask.geometry();
    std::vector<float> out(g.n_range, 0.0f);
    if (aligned.empty()) return out;
    const double factor = cfar.threshold_factor();
    for (const Tensor& frame : aligned) {
        require_shape(frame, {g.n_range, g.n_azimuth}, "persistence_counts frame");
        for (std::size_t j = 0; j < g.n_range; ++j) {
            if (mask.width(j) == 0) continue;
            const auto pk = detail::lane_peak(frame, mask, j);
            const float noise = detail::cfar_noise(frame, g, cfar, j, pk.column);
            if (pk.value > 0.0f && pk.value > factor * noise) out[j] += 1.0f;
        }
    }
    const float inv = 1.0f / static_cast<float>(aligned.size());
    for (float& v : out) v *= inv;
    return out;
}

inline std::vector<FeatureVector> extract_features(const Tensor& accumulated, const LaneMask& mask,
                                                   std::span<const float> persistence, const CfarParams& cfar) {
    const auto& g = mask.geometry();
    require_shape(accumulated, {g.n_range, g.n_azimuth}, "extract_features map");
    require(persistence.size() == g.n_range, ErrorKind::ShapeMismatch, "extract_features: persistence length");
    std::vector<FeatureVector> out(g.n_range);
    const std::size_t na = g.n_azimuth;
    for (std::size_t j = 0; j < g.n_range; ++j) {
        const std::size_t width = mask.width(j);
        if (width == 0) continue;
        FeatureVector& f = out[j];
        const auto pk = detail::lane_peak(accumulated, mask, j);
        const float* row = accumulated.data() + j * na;
        double sum = 0.0;
        for (std::size_t m = mask.begin(j); m < mask.end(j); ++m) sum += row[m];
        f.peak = pk.value;
        f.mean = static_cast<float>(sum / static_cast<double>(width));
        const float noise = detail::cfar_noise(accumulated, g, cfar, j, pk.column);
        f.cfar_ratio = noise > 0.0f ? pk.value / noise : 0.0f;
        f.persistence = persistence[j];
        if (pk.value > 0.0f) {
            std::size_t above = 0;
            for (std::size_t m = mask.begin(j); m < mask.end(j); ++m)
                if (row[m] > 0.5f * pk.value) ++above;
            f.spread = static_cast<float>(above) / static_cast<float>(width);
        }
    }
    return out;
}

/// MLP input encoding: magnitudes are log-compressed, ratios in [0,1] pass through.
inline std::array<float, kTeacherFeatures> encode_features(const FeatureVector& f) {
    return {std::log1p(f.peak), std::log1p(f.mean), std::log1p(f.cfar_ratio), f.persistence, f.spread};
}

// ---------------------------------------------------------------------------
// Scoring and labeling
// ---------------------------------------------------------------------------

inline float mlp_score(const std::vector<DenseLayer>& mlp, std::span<const float> input) {
    std::array<float, 16> a{}, b{};
    std::array<float, 1> out{};
    dense_forward_into(input, mlp[0], a);
    dense_forward_into(a, mlp[1], b);
    dense_forward_into(b, mlp[2], out);
    return out[0];
}

inline std::vector<float> teacher_score(std::span<const FeatureVector> features, const std::vector<DenseLayer>& mlp) {
    TeacherParams::validate_mlp(mlp);
    std::vector<float> probs(features.size());
    for (std::size_t j = 0; j < features.size(); ++j) {
        const auto x = encode_features(features[j]);
        probs[j] = mlp_score(mlp, x);
        require(std::isfinite(probs[j]), ErrorKind::NonFinite, "teacher_score: non-finite probability");
    }
    return probs;
}

/// Thresholds scores and keeps the nearest-range bin of every run of adjacent positives.
inline LabelVector merge_detections(std::span<const float> scores, double threshold) {
    LabelVector out(scores.size(), 0);
    bool in_run = false;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        const bool hit = scores[j] >= threshold;
        if (hit && !in_run) out[j] = 1;
        in_run = hit;
    }
    return out;
}

/// Per-bin features for the newest frame of `history` (oldest first).
inline std::vector<FeatureVector> teacher_features(std::span<const Frame> history, const RadarGeometry& geometry,
                                                   double frame_interval, const TeacherParams& params) {
    const auto mask = lane_mask(geometry);
    const auto aligned = interpolate_accumulate(history, geometry, history.back().host_speed, frame_interval,
                                                params.min_speed);
    const auto pers = persistence_counts(aligned.frames, *mask, params.cfar);
    return extract_features(aligned.accumulated, *mask, pers, params.cfar);
}

/// Whether the teacher produces a label for frame `index` of a drive.
inline bool teacher_can_label(const Drive& drive, std::size_t index, const TeacherParams& params) {
    return index + 1 >= params.accumulation_depth && drive.frames[index].host_speed >= params.min_speed;
}

inline std::span<const Frame> history_window(const Drive& drive, std::size_t index, std::size_t depth) {
    return std::span<const Frame>(drive.frames).subspan(index + 1 - depth, depth);
}

/// Full teacher pipeline for one frame; empty when the teacher abstains.
inline std::optional<std::vector<float>> teacher_frame_scores(const Drive& drive, std::size_t index,
                                                              const TeacherParams& params) {
    if (!teacher_can_label(drive, index, params)) return std::nullopt;
    const auto features = teacher_features(history_window(drive, index, params.accumulation_depth), drive.geometry,
                                           drive.frame_interval, params);
    return teacher_score(features, params.mlp);
}

inline std::vector<std::optional<LabelVector>> teacher_label(const Drive& drive, const TeacherParams& params) {
    params.validate();
    std::vector<std::optional<LabelVector>> labels(drive.frames.size());
    for (std::size_t i = 0; i < drive.frames.size(); ++i) {
        if (auto scores = teacher_frame_scores(drive, i, params))
            labels[i] = merge_detections(*scores, params.decision_threshold);
    }
    return labels;
}

} // namespace radkd
