#pragma once

// Student distillation: selective filtering of teacher labels, weighted MSE,
// drive-level splits and the Adam training loop with checkpoint selection.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "radkd/error.hpp"
#include "radkd/metrics.hpp"
#include "radkd/nn.hpp"
#include "radkd/random.hpp"
#include "radkd/sim.hpp"
#include "radkd/student.hpp"

namespace radkd {

enum class LrSchedule { Constant, Cosine };
enum class Selection { ValLoss, ValF1 };

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 30;
    std::size_t early_stop_patience = 0; // 0 runs every epoch
    LrSchedule lr_schedule = LrSchedule::Cosine;
    double lr_min = 1e-5;
    Selection select_on = Selection::ValF1;
    double train_fraction = 0.70;
    double val_fraction = 0.20;
    double test_fraction = 0.10;
    std::uint64_t seed = 2024;
    bool per_frame_weight = false; // |Y-|/|Y+| per frame instead of over the training set
    double decision_threshold = 0.5;

    void validate() const {
        require(lr > 0.0 && lr_min >= 0.0 && lr_min <= lr && beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0,
                ErrorKind::Config, "train config: invalid optimizer settings");
        require(batch_size >= 1, ErrorKind::Config, "train config: batch_size must be >= 1");
        require(max_epochs >= 1, ErrorKind::Config, "train config: max_epochs must be >= 1");
        require(train_fraction >= 0.0 && val_fraction >= 0.0 && test_fraction >= 0.0 &&
                    std::abs(train_fraction + val_fraction + test_fraction - 1.0) < 1e-9,
                ErrorKind::Config, "train config: split fractions must be non-negative and sum to 1");
        require(decision_threshold > 0.0 && decision_threshold < 1.0, ErrorKind::Config,
                "train config: decision threshold must be in (0,1)");
    }
};

struct LabeledSample {
    Tensor input;      // [3, n_range, 30]
    LabelVector target;
    double weight_pos = 1.0; // |Y-| / |Y+| used for this sample's positive bins
};

/// Indices of frames with a present label holding at least one positive.
inline std::vector<std::size_t> selective_filter(std::span<const std::optional<LabelVector>> labels) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] && detail::has_positive(*labels[i])) kept.push_back(i);
    return kept;
}

/// |Y-| / |Y+| over all given targets.
inline double positive_weight(std::span<const LabelVector> targets) {
    double pos = 0, total = 0;
    for (const auto& t : targets) {
        for (auto v : t) pos += v ? 1 : 0;
        total += static_cast<double>(t.size());
    }
    if (pos == 0) fail(ErrorKind::UnusableDataset, "no positive bins: the positive-class weight is undefined");
    return (total - pos) / pos;
}

namespace detail {

inline void check_loss_args(std::span<const std::vector<float>> predicted, std::span<const LabelVector> target,
                            std::span<const double> weights) {
    require(predicted.size() == target.size() && weights.size() == target.size(), ErrorKind::ShapeMismatch,
            "wmse: frame counts differ");
    for (std::size_t i = 0; i < target.size(); ++i)
        require(predicted[i].size() == target[i].size(), ErrorKind::ShapeMismatch, "wmse: bin counts differ");
}

} // namespace detail

/// Mean over every (frame, bin) of w (p - y)^2, where w = weights[frame] on
/// positive bins and 1 on negative bins.
inline double wmse(std::span<const std::vector<float>> predicted, std::span<const LabelVector> target,
                   std::span<const double> weights) {
    detail::check_loss_args(predicted, target, weights);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        for (std::size_t j = 0; j < target[i].size(); ++j) {
            const double d = static_cast<double>(predicted[i][j]) - target[i][j];
            sum += (target[i][j] ? weights[i] : 1.0) * d * d;
        }
        n += target[i].size();
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

inline double wmse(std::span<const std::vector<float>> predicted, std::span<const LabelVector> target,
                   double positive_weight) {
    const std::vector<double> w(target.size(), positive_weight);
    return wmse(predicted, target, w);
}

/// d wmse / d predicted = 2 w (p - y) / (frames * bins).
inline std::vector<std::vector<float>> wmse_gradient(std::span<const std::vector<float>> predicted,
                                                     std::span<const LabelVector> target,
                                                     std::span<const double> weights) {
    detail::check_loss_args(predicted, target, weights);
    std::size_t n = 0;
    for (const auto& t : target) n += t.size();
    std::vector<std::vector<float>> grad(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        grad[i].resize(target[i].size());
        for (std::size_t j = 0; j < target[i].size(); ++j) {
            const double w = target[i][j] ? weights[i] : 1.0;
            grad[i][j] = static_cast<float>(2.0 * w * (static_cast<double>(predicted[i][j]) - target[i][j]) /
                                            static_cast<double>(n));
        }
    }
    return grad;
}

inline std::vector<std::vector<float>> wmse_gradient(std::span<const std::vector<float>> predicted,
                                                     std::span<const LabelVector> target, double positive_weight) {
    const std::vector<double> w(target.size(), positive_weight);
    return wmse_gradient(predicted, target, w);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct Split {
    std::vector<std::size_t> train, val, test;
};

/// Whole-drive assignment: a seeded shuffle of 0..n-1 cut at the configured fractions.
inline Split split_drives(std::size_t n, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(cfg.seed ^ 0x5eed5011171ULL);
    shuffle(order, rng);
    auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    s.val.assign(order.begin() + static_cast<long>(n_train), order.begin() + static_cast<long>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<long>(n_train + n_val), order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

/// Turns a labeled drive into training samples (selective filter applied).
inline std::vector<LabeledSample> make_samples(const Drive& drive, std::span<const std::optional<LabelVector>> labels,
                                               std::size_t crop_offset) {
    require(labels.size() == drive.frames.size(), ErrorKind::CountMismatch,
            "make_samples: label count differs from frame count");
    std::vector<LabeledSample> out;
    for (std::size_t i : selective_filter(labels))
        out.push_back({make_student_input(drive.frames[i].map, crop_offset), *labels[i], 1.0});
    return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    Ratio val_r0;
    Ratio val_r1;
    Ratio val_p1;
    double lr = 0.0;
};

struct TrainResult {
    StudentModel model; // best validation checkpoint
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double positive_weight = 1.0;
};

/// Sets every sample's weight_pos per the configured weighting and returns the
/// training-set weight (the per-frame mean when per_frame_weight is on).
inline double assign_positive_weights(std::vector<LabeledSample>& samples, const TrainConfig& cfg) {
    if (cfg.per_frame_weight) {
        double sum = 0.0;
        for (auto& s : samples) {
            s.weight_pos = positive_weight(std::span<const LabelVector>(&s.target, 1));
            sum += s.weight_pos;
        }
        return samples.empty() ? 1.0 : sum / static_cast<double>(samples.size());
    }
    std::vector<LabelVector> targets;
    targets.reserve(samples.size());
    for (const auto& s : samples) targets.push_back(s.target);
    const double w = positive_weight(targets);
    for (auto& s : samples) s.weight_pos = w;
    return w;
}

struct SampleEvaluation {
    double loss = 0.0;
    Ratio r0, r1, p1;
};

/// Harmonic mean of R1 and P1; unset if either is.
inline Ratio f1_score(const Ratio& r1, const Ratio& p1) {
    if (!r1 || !p1) return std::nullopt;
    if (*r1 + *p1 == 0.0) return 0.0;
    return 2.0 * *r1 * *p1 / (*r1 + *p1);
}

/// Learning rate for a 1-based epoch.
inline double epoch_lr(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.lr_schedule == LrSchedule::Constant || cfg.max_epochs <= 1) return cfg.lr;
    const double t = static_cast<double>(epoch - 1) / static_cast<double>(cfg.max_epochs - 1);
    return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

inline SampleEvaluation evaluate_samples(const StudentModel& model, std::span<const LabeledSample> samples,
                                         double weight_pos, bool per_frame_weight, double threshold) {
    SampleEvaluation ev;
    if (samples.empty()) return ev;
    std::vector<std::vector<float>> preds;
    std::vector<LabelVector> targets, decisions;
    std::vector<double> weights;
    for (const auto& s : samples) {
        preds.push_back(student_forward(s.input, model));
        decisions.push_back(threshold_scores(preds.back(), threshold));
        targets.push_back(s.target);
        weights.push_back(per_frame_weight ? positive_weight(std::span<const LabelVector>(&s.target, 1)) : weight_pos);
    }
    ev.loss = wmse(preds, targets, weights);
    const auto r = r_scores(targets, decisions);
    ev.r0 = r.r0;
    ev.r1 = r.r1;
    ev.p1 = p_scores(targets, decisions).p1;
    return ev;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on WMSE over shuffled mini-batches. Epoch 0 in the history is the
/// untrained model. Returns the weights of the best epoch under
/// cfg.select_on (lowest val loss, or highest val F1 with val loss breaking
/// ties); with no validation set the lowest training loss wins. A nonzero
/// early_stop_patience stops after that many epochs without a new best.
inline TrainResult train_student(std::vector<LabeledSample> train, std::span<const LabeledSample> val,
                                 StudentModel model, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    model.validate(train.empty() ? 464 : train.front().input.dim(1));
    if (train.empty()) fail(ErrorKind::UnusableDataset, "train_student: no training samples after filtering");
    TrainResult result;
    result.positive_weight = assign_positive_weights(train, cfg);

    auto evaluate = [&](const StudentModel& m, std::span<const LabeledSample> set) {
        return evaluate_samples(m, set, result.positive_weight, cfg.per_frame_weight, cfg.decision_threshold);
    };

    const bool has_val = !val.empty();
    auto record_epoch = [&](std::size_t epoch, double train_loss, double lr, const StudentModel& m) {
        EpochRecord rec{epoch, train_loss, 0.0, std::nullopt, std::nullopt, std::nullopt, lr};
        if (has_val) {
            const auto ev = evaluate(m, val);
            rec.val_loss = ev.loss;
            rec.val_r0 = ev.r0;
            rec.val_r1 = ev.r1;
            rec.val_p1 = ev.p1;
        } else {
            rec.val_loss = train_loss;
        }
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
            fail(ErrorKind::NonFinite, "train_student: loss diverged at epoch " + std::to_string(epoch));
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        return rec;
    };

    auto better = [&](const EpochRecord& a, const EpochRecord& b) {
        if (cfg.select_on == Selection::ValF1 && has_val) {
            const double fa = f1_score(a.val_r1, a.val_p1).value_or(-1.0);
            const double fb = f1_score(b.val_r1, b.val_p1).value_or(-1.0);
            if (fa != fb) return fa > fb;
        }
        return a.val_loss < b.val_loss;
    };

    auto best = record_epoch(0, evaluate(model, train).loss, 0.0, model);
    result.model = model;

    AdamState adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon, 0, {}, {}};
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t n_bins = train.front().target.size();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        adam.lr = epoch_lr(cfg, epoch);
        shuffle(order, rng);
        double loss_sum = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            const double denom = static_cast<double>((b1 - b0) * n_bins);
            auto params = model.parameters();
            std::vector<Tensor> grads;
            for (std::size_t k = b0; k < b1; ++k) {
                const auto& s = train[order[k]];
                const auto trace = student_forward_trace(s.input, model);
                const auto probs = trace.activations.back().values();
                std::vector<float> g(n_bins);
                for (std::size_t j = 0; j < n_bins; ++j) {
                    const double w = s.target[j] ? s.weight_pos : 1.0;
                    const double d = static_cast<double>(probs[j]) - s.target[j];
                    loss_sum += w * d * d;
                    g[j] = static_cast<float>(2.0 * w * d / denom);
                }
                auto sample_grads = student_backward(trace, model, g);
                if (grads.empty()) {
                    grads = std::move(sample_grads);
                } else {
                    for (std::size_t p = 0; p < grads.size(); ++p) {
                        float* dst = grads[p].data();
                        const float* src = sample_grads[p].data();
                        for (std::size_t q = 0; q < grads[p].size(); ++q) dst[q] += src[q];
                    }
                }
            }
            adam_step(params, grads, adam);
        }
        const double train_loss = loss_sum / static_cast<double>(order.size() * n_bins);
        const auto rec = record_epoch(epoch, train_loss, adam.lr, model);
        if (better(rec, best)) {
            best = rec;
            result.model = model;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (cfg.early_stop_patience && ++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    return result;
}

} // namespace radkd
