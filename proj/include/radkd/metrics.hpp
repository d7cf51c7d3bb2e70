#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "radkd/error.hpp"
#include "radkd/geometry.hpp"
#include "radkd/sim.hpp"

namespace radkd {

/// Ratio metrics are empty when their denominator is zero.
using Ratio = std::optional<double>;

struct RScores {
    Ratio r0;
    Ratio r1;
};

struct PScores {
    Ratio p0;
    Ratio p1;
};

namespace detail {

inline void check_pairs(std::span<const LabelVector> reference, std::span<const LabelVector> predicted) {
    require(reference.size() == predicted.size(), ErrorKind::ShapeMismatch, "metrics: frame counts differ");
    for (std::size_t i = 0; i < reference.size(); ++i)
        require(reference[i].size() == predicted[i].size(), ErrorKind::ShapeMismatch,
                "metrics: label lengths differ in frame " + std::to_string(i));
}

/// Max over bins j-1, j, j+1 that exist.
inline bool any_near(const LabelVector& v, std::size_t j) {
    if (v[j]) return true;
    if (j > 0 && v[j - 1]) return true;
    return j + 1 < v.size() && v[j + 1];
}

inline bool has_positive(const LabelVector& v) {
    return std::any_of(v.begin(), v.end(), [](std::uint8_t x) { return x != 0; });
}

inline Ratio ratio(double num, double den) {
    if (den == 0.0) return std::nullopt;
    return num / den;
}

} // namespace detail

/// Recall of `predicted` against `reference` positives, exact (r0) and with a
/// +/-1 range-bin allowance (r1).
inline RScores r_scores(std::span<const LabelVector> reference, std::span<const LabelVector> predicted) {
    detail::check_pairs(reference, predicted);
    double positives = 0, hit0 = 0, hit1 = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto& y = reference[i];
        const auto& p = predicted[i];
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (!y[j]) continue;
            ++positives;
            if (p[j]) ++hit0;
            if (detail::any_near(p, j)) ++hit1;
        }
    }
    return {detail::ratio(hit0, positives), detail::ratio(hit1, positives)};
}

/// Precision over frames whose reference has at least one positive. p1 accepts a
/// predicted positive when the reference is positive within +/-1 bin.
inline PScores p_scores(std::span<const LabelVector> reference, std::span<const LabelVector> predicted) {
    detail::check_pairs(reference, predicted);
    double predicted_pos = 0, tp0 = 0, tp1 = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto& y = reference[i];
        if (!detail::has_positive(y)) continue;
        const auto& p = predicted[i];
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (!p[j]) continue;
            ++predicted_pos;
            if (y[j]) ++tp0;
            if (detail::any_near(y, j)) ++tp1;
        }
    }
    return {detail::ratio(tp0, predicted_pos), detail::ratio(tp1, predicted_pos)};
}

/// tn / (tn + fp) per bin, over frames whose reference has at least one positive.
inline Ratio specificity(std::span<const LabelVector> reference, std::span<const LabelVector> predicted) {
    detail::check_pairs(reference, predicted);
    double tn = 0, fp = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto& y = reference[i];
        if (!detail::has_positive(y)) continue;
        const auto& p = predicted[i];
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[j]) continue;
            if (p[j]) ++fp;
            else ++tn;
        }
    }
    return detail::ratio(tn, tn + fp);
}

struct DetectionScores {
    Ratio r0, r1, p0, p1, specificity;
    std::size_t frames_evaluated = 0;
    std::size_t frames_skipped = 0;
};

/// All five ratios over the frames where the reference label exists.
inline DetectionScores score_detections(std::span<const std::optional<LabelVector>> reference,
                                        std::span<const LabelVector> predicted) {
    require(reference.size() == predicted.size(), ErrorKind::ShapeMismatch, "score_detections: frame counts differ");
    std::vector<LabelVector> ref, pred;
    DetectionScores s;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (!reference[i]) {
            ++s.frames_skipped;
            continue;
        }
        ref.push_back(*reference[i]);
        pred.push_back(predicted[i]);
    }
    s.frames_evaluated = ref.size();
    const auto r = r_scores(ref, pred);
    const auto p = p_scores(ref, pred);
    s.r0 = r.r0;
    s.r1 = r.r1;
    s.p0 = p.p0;
    s.p1 = p.p1;
    s.specificity = specificity(ref, pred);
    return s;
}

inline LabelVector threshold_scores(std::span<const float> probs, double threshold) {
    LabelVector out(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j) out[j] = probs[j] >= threshold ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// First-detection range
// ---------------------------------------------------------------------------

inline constexpr std::size_t kSustainFrames = 3;

/// Range (m) of the target at the start of the first run of `sustain` consecutive
/// frames in which the detector hits it (a predicted positive within +/-1 bin of a
/// ground-truth bin). 0 when the detector never sustains a detection.
inline double first_detection_range(std::span<const LabelVector> ground_truth,
                                    std::span<const std::optional<LabelVector>> predictions,
                                    const RadarGeometry& geometry, std::size_t sustain = kSustainFrames) {
    require(ground_truth.size() == predictions.size(), ErrorKind::ShapeMismatch,
            "first_detection_range: frame counts differ");
    require(sustain >= 1, ErrorKind::Config, "first_detection_range: sustain must be >= 1");
    std::size_t run = 0;
    double run_start_range = 0.0;
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        const auto& gt = ground_truth[i];
        bool hit = false;
        if (predictions[i]) {
            const auto& p = *predictions[i];
            require(p.size() == gt.size(), ErrorKind::ShapeMismatch, "first_detection_range: label lengths differ");
            for (std::size_t j = 0; j < p.size() && !hit; ++j) hit = p[j] && detail::any_near(gt, j);
        }
        if (!hit) {
            run = 0;
            continue;
        }
        if (run == 0) {
            const auto nearest = std::find(gt.begin(), gt.end(), std::uint8_t{1}) - gt.begin();
            run_start_range = static_cast<double>(nearest) * geometry.range_resolution;
        }
        if (++run >= sustain) return run_start_range;
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Latency benchmarking
// ---------------------------------------------------------------------------

struct LatencyStats {
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    std::size_t samples = 0;
};

inline LatencyStats latency_stats(std::vector<double> samples_ms) {
    require(!samples_ms.empty(), ErrorKind::Config, "latency_stats: no samples");
    LatencyStats s;
    s.samples = samples_ms.size();
    double sum = 0.0;
    for (double v : samples_ms) sum += v;
    s.mean_ms = sum / static_cast<double>(samples_ms.size());
    std::sort(samples_ms.begin(), samples_ms.end());
    const std::size_t n = samples_ms.size();
    s.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1;
    s.p95_ms = samples_ms[std::min(idx, n - 1)];
    return s;
}

/// Times `run(item)` for every item, `reps` times over, after `warmup` untimed
/// passes over the first item.
template <typename Fn>
LatencyStats bench(Fn&& run, std::size_t items, std::size_t reps, std::size_t warmup = 2) {
    require(reps > 0, ErrorKind::Config, "bench: repetitions must be > 0");
    require(items > 0, ErrorKind::Config, "bench: no frames to time");
    for (std::size_t w = 0; w < warmup; ++w) run(std::size_t{0});
    std::vector<double> samples;
    samples.reserve(items * reps);
    for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t i = 0; i < items; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            run(i);
            const auto t1 = std::chrono::steady_clock::now();
            samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
    }
    return latency_stats(std::move(samples));
}

} // namespace radkd
