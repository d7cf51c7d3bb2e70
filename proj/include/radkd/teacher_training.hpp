#pragma once

// Fits the teacher's MLP block on simulator ground truth using the same
// weighted MSE as the student.

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "radkd/metrics.hpp"
#include "radkd/nn.hpp"
#include "radkd/random.hpp"
#include "radkd/sim.hpp"
#include "radkd/teacher.hpp"
#include "radkd/train.hpp"

namespace radkd {

struct TeacherTrainConfig {
    double lr = 3e-3;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 40;
    std::size_t patience = 5;
    double val_fraction = 0.25; // whole drives held out for early stopping
    std::uint64_t seed = 11;

    void validate() const {
        require(lr > 0.0 && batch_size >= 1 && max_epochs >= 1 && patience >= 1, ErrorKind::Config,
                "teacher train config: lr, batch_size, max_epochs and patience must be positive");
        require(val_fraction >= 0.0 && val_fraction < 1.0, ErrorKind::Config,
                "teacher train config: val_fraction must be in [0,1)");
    }
};

/// Per-bin encoded features and ground truth, grouped into frames of equal length.
struct BinDataset {
    std::size_t bins_per_frame = 0;
    std::vector<std::array<float, kTeacherFeatures>> x;
    LabelVector y;

    std::size_t frames() const { return bins_per_frame ? y.size() / bins_per_frame : 0; }

    void append(const BinDataset& other) {
        require(bins_per_frame == 0 || other.bins_per_frame == 0 || bins_per_frame == other.bins_per_frame,
                ErrorKind::ShapeMismatch, "bin dataset: frame lengths differ");
        if (other.bins_per_frame) bins_per_frame = other.bins_per_frame;
        x.insert(x.end(), other.x.begin(), other.x.end());
        y.insert(y.end(), other.y.begin(), other.y.end());
    }

    std::vector<LabelVector> frame_labels(const LabelVector& v) const {
        std::vector<LabelVector> out(frames());
        for (std::size_t f = 0; f < out.size(); ++f)
            out[f].assign(v.begin() + static_cast<long>(f * bins_per_frame),
                          v.begin() + static_cast<long>((f + 1) * bins_per_frame));
        return out;
    }
};

/// Features of every frame the teacher would label, paired with ground truth.
inline BinDataset collect_teacher_bins(const Drive& drive, const TeacherParams& params) {
    BinDataset ds;
    ds.bins_per_frame = drive.geometry.n_range;
    for (std::size_t i = 0; i < drive.frames.size(); ++i) {
        if (!teacher_can_label(drive, i, params)) continue;
        const auto features = teacher_features(history_window(drive, i, params.accumulation_depth), drive.geometry,
                                               drive.frame_interval, params);
        for (const auto& f : features) ds.x.push_back(encode_features(f));
        ds.y.insert(ds.y.end(), drive.frames[i].ground_truth.begin(), drive.frames[i].ground_truth.end());
    }
    return ds;
}

struct TeacherTrainResult {
    TeacherParams params;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double positive_weight = 1.0;
};

inline std::vector<float> score_bins(const std::vector<DenseLayer>& mlp, const BinDataset& ds) {
    std::vector<float> out(ds.x.size());
    for (std::size_t i = 0; i < ds.x.size(); ++i) out[i] = mlp_score(mlp, ds.x[i]);
    return out;
}

/// Validation loss and per-bin recall of the thresholded MLP scores against ground truth.
inline SampleEvaluation evaluate_teacher_bins(const TeacherParams& params, const BinDataset& ds, double weight_pos) {
    SampleEvaluation ev;
    if (ds.x.empty()) return ev;
    const auto scores = score_bins(params.mlp, ds);
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double d = static_cast<double>(scores[i]) - ds.y[i];
        sum += (ds.y[i] ? weight_pos : 1.0) * d * d;
    }
    ev.loss = sum / static_cast<double>(scores.size());
    const auto decided = threshold_scores(scores, params.decision_threshold);
    const auto r = r_scores(ds.frame_labels(ds.y), ds.frame_labels(decided));
    ev.r0 = r.r0;
    ev.r1 = r.r1;
    return ev;
}

/// Adam on per-bin WMSE against ground truth. Training stops once validation
/// R0 has not improved for `patience` epochs; the lowest-validation-loss
/// weights are returned.
inline TeacherTrainResult train_teacher_mlp(const BinDataset& train, const BinDataset& val, TeacherParams params,
                                            const TeacherTrainConfig& cfg,
                                            const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    cfg.validate();
    params.validate();
    if (train.x.empty()) fail(ErrorKind::UnusableDataset, "train_teacher_mlp: no labelable frames");
    TeacherTrainResult result;
    result.positive_weight = positive_weight(std::span<const LabelVector>(&train.y, 1));
    const double w_pos = result.positive_weight;
    const BinDataset& monitor = val.x.empty() ? train : val;

    auto record = [&](std::size_t epoch, double train_loss) {
        const auto ev = evaluate_teacher_bins(params, monitor, w_pos);
        EpochRecord rec{epoch, train_loss, ev.loss, ev.r0, ev.r1, std::nullopt, epoch ? cfg.lr : 0.0};
        if (!std::isfinite(train_loss) || !std::isfinite(ev.loss))
            fail(ErrorKind::NonFinite, "train_teacher_mlp: loss diverged at epoch " + std::to_string(epoch));
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        return rec;
    };

    auto initial = record(0, evaluate_teacher_bins(params, train, w_pos).loss);
    double best_loss = initial.val_loss;
    double best_r0 = initial.val_r0.value_or(0.0);
    result.params = params;

    AdamState adam{cfg.lr, 0.9, 0.999, 1e-8, 0, {}, {}};
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train.x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto& mlp = params.mlp;
    std::vector<Tensor*> ptrs;
    for (auto& l : mlp) {
        ptrs.push_back(&l.weights);
        ptrs.push_back(&l.bias);
    }
    std::size_t since_r0 = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle(order, rng);
        double loss_sum = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            const auto denom = static_cast<float>(b1 - b0);
            std::vector<Tensor> grads;
            for (const auto* p : ptrs) grads.emplace_back(p->shape());
            for (std::size_t k = b0; k < b1; ++k) {
                const auto& x = train.x[order[k]];
                const float y = train.y[order[k]];
                std::array<float, 16> h1{}, h2{}, g1{}, g2{};
                std::array<float, 1> out{}, gout{};
                std::array<float, kTeacherFeatures> gx{};
                dense_forward_into(x, mlp[0], h1);
                dense_forward_into(h1, mlp[1], h2);
                dense_forward_into(h2, mlp[2], out);
                const float w = y > 0.5f ? static_cast<float>(w_pos) : 1.0f;
                const float d = out[0] - y;
                loss_sum += static_cast<double>(w) * d * d;
                gout[0] = 2.0f * w * d / denom;
                dense_backward_accumulate(h2, mlp[2], out, gout, g2, grads[4].values(), grads[5].values());
                dense_backward_accumulate(h1, mlp[1], h2, g2, g1, grads[2].values(), grads[3].values());
                dense_backward_accumulate(x, mlp[0], h1, g1, gx, grads[0].values(), grads[1].values());
            }
            adam_step(ptrs, grads, adam);
        }
        const auto rec = record(epoch, loss_sum / static_cast<double>(order.size()));
        if (rec.val_loss < best_loss) {
            best_loss = rec.val_loss;
            result.params = params;
            result.best_epoch = epoch;
        }
        if (rec.val_r0.value_or(0.0) > best_r0) {
            best_r0 = *rec.val_r0;
            since_r0 = 0;
        } else if (++since_r0 >= cfg.patience) {
            break;
        }
    }
    return result;
}

/// Whether drive i of n belongs to the held-out tail used for early stopping.
inline bool teacher_holdout(std::size_t i, std::size_t n, const TeacherTrainConfig& cfg) {
    const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
    return n_val > 0 && i + n_val >= n;
}

/// Collects bins from whole drives, holding out the last val_fraction of them.
inline TeacherTrainResult train_teacher_on_drives(std::span<const Drive> drives, const TeacherParams& params,
                                                  const TeacherTrainConfig& cfg,
                                                  const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    cfg.validate();
    BinDataset train, val;
    for (std::size_t i = 0; i < drives.size(); ++i)
        (teacher_holdout(i, drives.size(), cfg) ? val : train).append(collect_teacher_bins(drives[i], params));
    return train_teacher_mlp(train, val, params, cfg, on_epoch);
}

} // namespace radkd
