#pragma once

// Evaluation of a trained student against teacher labels and simulator ground
// truth, plus the JSON / text / CSV renderings used by the command-line tool.

#include <chrono>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radkd/metrics.hpp"
#include "radkd/sim.hpp"
#include "radkd/student.hpp"
#include "radkd/teacher.hpp"

namespace radkd {

struct DriveEval {
    std::string name;
    std::uint64_t seed = 0;
    std::size_t frames = 0;
    std::size_t teacher_abstained = 0;
    std::size_t below_min_speed = 0;          // frames under the teacher's critical speed
    std::size_t student_fired_below_min = 0;  // of those, frames with at least one student detection
    DetectionScores vs_teacher;
    DetectionScores vs_truth;
    double teacher_range_m = 0.0; // from the label file
    double student_range_m = 0.0;
    double student_ms = 0.0;
    std::optional<double> teacher_ms; // only when teacher weights are supplied
};

/// One row of the per-frame CSV.
struct FrameRecord {
    std::string drive;
    std::size_t frame = 0;
    float host_speed = 0.0f;
    std::optional<LabelVector> teacher;
    LabelVector student;
    LabelVector truth;
    float max_probability = 0.0f;
};

struct EvalReport {
    std::string split = "all";
    double threshold = 0.5;
    bool has_teacher_timing = false;
    std::vector<DriveEval> drives;
    DetectionScores vs_teacher; // pooled over every evaluated frame
    DetectionScores vs_truth;
    std::vector<FrameRecord> frames;
};

/// Accumulates drives one at a time so callers never hold more than one in memory.
class Evaluator {
public:
    Evaluator(const StudentModel& student, double threshold, const TeacherParams* teacher = nullptr)
        : student_(student), threshold_(threshold), teacher_(teacher) {
        require(threshold > 0.0 && threshold < 1.0, ErrorKind::Config, "eval: threshold must be in (0,1)");
        report_.threshold = threshold;
        report_.has_teacher_timing = teacher != nullptr;
    }

    void set_split(std::string s) { report_.split = std::move(s); }

    void add(const std::string& name, const Drive& drive, const std::vector<std::optional<LabelVector>>& labels) {
        require(labels.size() == drive.frames.size(), ErrorKind::CountMismatch, name + ": label count differs");
        DriveEval de;
        de.name = name;
        de.seed = drive.seed;
        de.frames = drive.frames.size();
        std::vector<LabelVector> predicted, truth;
        std::vector<std::optional<LabelVector>> predicted_opt, truth_opt;
        double student_total_ms = 0.0;
        const double min_speed = teacher_ ? teacher_->min_speed : TeacherParams{}.min_speed;
        for (std::size_t i = 0; i < drive.frames.size(); ++i) {
            const auto& f = drive.frames[i];
            const auto t0 = std::chrono::steady_clock::now();
            const auto probs = student_predict(f.map, student_);
            student_total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            auto decision = threshold_scores(probs, threshold_);
            if (!labels[i]) ++de.teacher_abstained;
            if (f.host_speed < min_speed) {
                ++de.below_min_speed;
                if (detail::has_positive(decision)) ++de.student_fired_below_min;
            }
            FrameRecord rec{name, i, f.host_speed, labels[i], decision, f.ground_truth,
                            probs.empty() ? 0.0f : *std::max_element(probs.begin(), probs.end())};
            report_.frames.push_back(std::move(rec));
            predicted.push_back(decision);
            predicted_opt.emplace_back(std::move(decision));
            truth.push_back(f.ground_truth);
            truth_opt.emplace_back(f.ground_truth);
        }
        de.student_ms = drive.frames.empty() ? 0.0 : student_total_ms / static_cast<double>(drive.frames.size());
        de.vs_teacher = score_detections(labels, predicted);
        de.vs_truth = score_detections(truth_opt, predicted);
        de.teacher_range_m = first_detection_range(truth, labels, drive.geometry);
        de.student_range_m = first_detection_range(truth, predicted_opt, drive.geometry);
        if (teacher_) de.teacher_ms = time_teacher(drive);

        all_labels_.insert(all_labels_.end(), labels.begin(), labels.end());
        all_truth_.insert(all_truth_.end(), truth_opt.begin(), truth_opt.end());
        all_pred_.insert(all_pred_.end(), predicted.begin(), predicted.end());
        report_.drives.push_back(std::move(de));
    }

    EvalReport finish() {
        report_.vs_teacher = score_detections(all_labels_, all_pred_);
        report_.vs_truth = score_detections(all_truth_, all_pred_);
        return std::move(report_);
    }

private:
    /// Mean teacher latency over the frames it can label; empty drive or none labelable gives 0.
    double time_teacher(const Drive& drive) const {
        double total = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < drive.frames.size(); ++i) {
            if (!teacher_can_label(drive, i, *teacher_)) continue;
            const auto t0 = std::chrono::steady_clock::now();
            (void)teacher_frame_scores(drive, i, *teacher_);
            total += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            ++n;
        }
        return n ? total / static_cast<double>(n) : 0.0;
    }

    const StudentModel& student_;
    double threshold_;
    const TeacherParams* teacher_;
    EvalReport report_;
    std::vector<std::optional<LabelVector>> all_labels_, all_truth_;
    std::vector<LabelVector> all_pred_;
};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline nlohmann::json ratio_json(const Ratio& r) { return r ? nlohmann::json(*r) : nlohmann::json(nullptr); }

inline nlohmann::json scores_json(const DetectionScores& s) {
    return {{"r0", ratio_json(s.r0)},         {"r1", ratio_json(s.r1)},
            {"p0", ratio_json(s.p0)},         {"p1", ratio_json(s.p1)},
            {"specificity", ratio_json(s.specificity)},
            {"frames_evaluated", s.frames_evaluated}, {"frames_skipped", s.frames_skipped}};
}

inline nlohmann::json report_json(const EvalReport& r) {
    nlohmann::json drives = nlohmann::json::array();
    for (const auto& d : r.drives) {
        nlohmann::json j{{"name", d.name},
                         {"seed", d.seed},
                         {"frames", d.frames},
                         {"teacher_abstained", d.teacher_abstained},
                         {"below_min_speed", d.below_min_speed},
                         {"student_fired_below_min_speed", d.student_fired_below_min},
                         {"student_first_detection_m", d.student_range_m},
                         {"teacher_first_detection_m", d.teacher_range_m},
                         {"student_ms", d.student_ms},
                         {"student_vs_teacher", scores_json(d.vs_teacher)},
                         {"student_vs_ground_truth", scores_json(d.vs_truth)}};
        if (d.teacher_ms) j["teacher_ms"] = *d.teacher_ms;
        drives.push_back(std::move(j));
    }
    double tea_range = 0, stu_range = 0, tea_ms = 0, stu_ms = 0;
    std::size_t not_shorter = 0, below = 0, fired_below = 0;
    for (const auto& d : r.drives) {
        tea_range += d.teacher_range_m;
        stu_range += d.student_range_m;
        tea_ms += d.teacher_ms.value_or(0.0);
        stu_ms += d.student_ms;
        not_shorter += d.student_range_m >= d.teacher_range_m;
        below += d.below_min_speed;
        fired_below += d.student_fired_below_min;
    }
    const double n = r.drives.empty() ? 1.0 : static_cast<double>(r.drives.size());
    nlohmann::json summary{{"mean_teacher_first_detection_m", tea_range / n},
                           {"mean_student_first_detection_m", stu_range / n},
                           {"drives_student_range_not_shorter", not_shorter},
                           {"frames_below_min_speed", below},
                           {"student_fired_below_min_speed", fired_below},
                           {"mean_student_ms", stu_ms / n}};
    if (r.has_teacher_timing) {
        summary["mean_teacher_ms"] = tea_ms / n;
        summary["speedup"] = stu_ms > 0.0 ? tea_ms / stu_ms : 0.0;
    }
    return {{"split", r.split},
            {"threshold", r.threshold},
            {"summary", std::move(summary)},
            {"drives", std::move(drives)},
            {"student_vs_teacher", scores_json(r.vs_teacher)},
            {"student_vs_ground_truth", scores_json(r.vs_truth)},
            {"ground_truth_note", "simulation only: ground truth is unavailable for real recordings"}};
}

namespace detail {

inline std::string fmt_ratio(const Ratio& r) {
    if (!r) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *r);
    return buf;
}

inline std::string fmt_num(double v, int prec) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

inline std::string bins_str(const LabelVector& v) {
    std::string s;
    for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j]) s += (s.empty() ? "" : " ") + std::to_string(j);
    return s;
}

inline void table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (width.size() <= c) width.push_back(0);
            width[c] = std::max(width[c], r[c].size());
        }
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c) out << "  ";
            if (c == 0) out << r[c] << std::string(width[c] - r[c].size(), ' ');
            else out << std::string(width[c] - r[c].size(), ' ') << r[c];
        }
        out << '\n';
    }
}

} // namespace detail

/// One row per drive plus a pooled row; teacher latency only when timed.
inline std::string report_text(const EvalReport& r) {
    using detail::fmt_num;
    using detail::fmt_ratio;
    std::ostringstream out;
    out << "split " << r.split << ", threshold " << fmt_num(r.threshold, 2) << "\n\nstudent vs teacher labels\n";
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head{"drive", "Tea range", "Stu range"};
    if (r.has_teacher_timing) head.push_back("Tea ms");
    for (const char* h : {"Stu ms", "R0", "R1", "P0", "P1", "sp"}) head.emplace_back(h);
    rows.push_back(head);
    double tea_range = 0, stu_range = 0, tea_ms = 0, stu_ms = 0;
    for (const auto& d : r.drives) {
        std::vector<std::string> row{d.name, fmt_num(d.teacher_range_m, 1), fmt_num(d.student_range_m, 1)};
        if (r.has_teacher_timing) row.push_back(fmt_num(d.teacher_ms.value_or(0.0), 2));
        row.push_back(fmt_num(d.student_ms, 2));
        for (const auto* x : {&d.vs_teacher.r0, &d.vs_teacher.r1, &d.vs_teacher.p0, &d.vs_teacher.p1,
                              &d.vs_teacher.specificity})
            row.push_back(fmt_ratio(*x));
        rows.push_back(row);
        tea_range += d.teacher_range_m;
        stu_range += d.student_range_m;
        tea_ms += d.teacher_ms.value_or(0.0);
        stu_ms += d.student_ms;
    }
    const double n = r.drives.empty() ? 1.0 : static_cast<double>(r.drives.size());
    std::vector<std::string> pooled{"pooled", fmt_num(tea_range / n, 1), fmt_num(stu_range / n, 1)};
    if (r.has_teacher_timing) pooled.push_back(fmt_num(tea_ms / n, 2));
    pooled.push_back(fmt_num(stu_ms / n, 2));
    for (const auto* x : {&r.vs_teacher.r0, &r.vs_teacher.r1, &r.vs_teacher.p0, &r.vs_teacher.p1,
                          &r.vs_teacher.specificity})
        pooled.push_back(fmt_ratio(*x));
    rows.push_back(pooled);
    detail::table(out, rows);

    out << "\nstudent vs simulator ground truth (simulation only)\n";
    rows.assign(1, {"drive", "R0", "R1", "P0", "P1", "sp"});
    auto add = [&](const std::string& name, const DetectionScores& s) {
        rows.push_back({name, fmt_ratio(s.r0), fmt_ratio(s.r1), fmt_ratio(s.p0), fmt_ratio(s.p1),
                        fmt_ratio(s.specificity)});
    };
    for (const auto& d : r.drives) add(d.name, d.vs_truth);
    add("pooled", r.vs_truth);
    detail::table(out, rows);
    return out.str();
}

/// drive,frame,host_speed,teacher,student,ground_truth,max_probability. Bin
/// lists are space separated; an abstained teacher frame reads "absent".
inline void write_frames_csv(std::ostream& out, const std::vector<FrameRecord>& frames) {
    out << "drive,frame,host_speed,teacher,student,ground_truth,max_probability\n";
    for (const auto& f : frames)
        out << f.drive << ',' << f.frame << ',' << f.host_speed << ','
            << (f.teacher ? detail::bins_str(*f.teacher) : std::string("absent")) << ','
            << detail::bins_str(f.student) << ',' << detail::bins_str(f.truth) << ',' << f.max_probability << '\n';
}

} // namespace radkd
