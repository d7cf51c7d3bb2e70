// radkd: simulate drives, train the teacher, label, train and evaluate the
// student, benchmark both pipelines and run inference.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "radkd/config.hpp"
#include "radkd/dataset.hpp"
#include "radkd/io.hpp"
#include "radkd/metrics.hpp"
#include "radkd/report.hpp"
#include "radkd/sim.hpp"
#include "radkd/student.hpp"
#include "radkd/teacher.hpp"
#include "radkd/teacher_training.hpp"
#include "radkd/train.hpp"

namespace fs = std::filesystem;
using namespace radkd;

namespace {

struct SeedRange {
    std::uint64_t first = 1;
    std::uint64_t last = 60;
};

SeedRange parse_seeds(const std::string& s) {
    const auto dots = s.find("..");
    SeedRange r;
    try {
        if (dots == std::string::npos) {
            r.first = r.last = std::stoull(s);
        } else {
            r.first = std::stoull(s.substr(0, dots));
            r.last = std::stoull(s.substr(dots + 2));
        }
    } catch (const std::exception&) {
        fail(ErrorKind::Config, "--seeds: expected a..b, got '" + s + "'");
    }
    require(r.first <= r.last, ErrorKind::Config, "--seeds: empty range " + s);
    return r;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) fail(ErrorKind::Io, "cannot create directory " + dir.string());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    return out;
}

std::string ratio_str(const Ratio& r) { return r ? detail::fmt_num(*r, 4) : std::string("-"); }

void write_history(const fs::path& path, const std::vector<EpochRecord>& history) {
    auto out = open_out(path);
    out << "epoch,train_loss,val_loss,val_r0,val_r1,val_p1,lr\n";
    for (const auto& e : history)
        out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << ratio_str(e.val_r0) << ','
            << ratio_str(e.val_r1) << ',' << ratio_str(e.val_p1) << ',' << e.lr << '\n';
}

void print_epoch(const EpochRecord& e) {
    std::printf("epoch %3zu  train %.5f  val %.5f  val R0 %s  val R1 %s  val P1 %s\n", e.epoch, e.train_loss,
                e.val_loss, ratio_str(e.val_r0).c_str(), ratio_str(e.val_r1).c_str(), ratio_str(e.val_p1).c_str());
    std::fflush(stdout);
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
    return p.parent_path() / (p.stem().string() + suffix);
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string spec, out, seeds = "1..60";
};

int run_simulate(const SimulateArgs& a) {
    const DriveSpec spec = a.spec.empty() ? default_drive_spec() : drive_spec_from_json(load_json(a.spec));
    const auto seeds = parse_seeds(a.seeds);
    ensure_dir(a.out);
    for (auto seed = seeds.first;; ++seed) {
        const Drive d = generate_drive(spec, seed);
        const auto path = fs::path(a.out) / drive_file_name(seed);
        write_drive(path, d);
        std::size_t positive_bins = 0, target_frames = 0;
        float vmin = d.frames.empty() ? 0.0f : d.frames.front().host_speed, vmax = vmin;
        for (const auto& f : d.frames) {
            std::size_t n = 0;
            for (auto v : f.ground_truth) n += v;
            positive_bins += n;
            target_frames += n > 0;
            vmin = std::min(vmin, f.host_speed);
            vmax = std::max(vmax, f.host_speed);
        }
        std::printf("%s  frames %zu  speed %.1f..%.1f m/s  target frames %zu  positive bins %zu\n",
                    path.filename().c_str(), d.frames.size(), vmin, vmax, target_frames, positive_bins);
        if (seed == seeds.last) break;
    }
    return 0;
}

struct TrainTeacherArgs {
    std::string drives, config, out, history;
};

int run_train_teacher(const TrainTeacherArgs& a) {
    const TeacherConfig cfg = a.config.empty() ? teacher_config_from_json(Json::object())
                                               : teacher_config_from_json(load_json(a.config));
    const auto drives = list_drives(a.drives);
    BinDataset train, val;
    for (std::size_t i = 0; i < drives.size(); ++i) {
        const Drive d = read_drive(drives[i]);
        (teacher_holdout(i, drives.size(), cfg.training) ? val : train).append(collect_teacher_bins(d, cfg.params));
    }
    std::printf("teacher bins: %zu train, %zu validation\n", train.x.size(), val.x.size());
    const auto result = train_teacher_mlp(train, val, cfg.params, cfg.training, print_epoch);
    write_teacher(a.out, result.params);
    write_history(a.history.empty() ? with_suffix(a.out, ".history.csv") : fs::path(a.history), result.history);
    const auto& best = result.history.at(result.best_epoch);
    std::printf("best epoch %zu  val R0 %s  val R1 %s\nwrote %s\n", result.best_epoch, ratio_str(best.val_r0).c_str(),
                ratio_str(best.val_r1).c_str(), a.out.c_str());
    return 0;
}

struct LabelArgs {
    std::string drives, teacher, out;
};

int run_label(const LabelArgs& a) {
    const TeacherParams params = read_teacher(a.teacher);
    const auto drives = list_drives(a.drives);
    ensure_dir(a.out);
    std::size_t frames = 0, abstained = 0;
    for (const auto& p : drives) {
        const Drive d = read_drive(p);
        const auto labels = teacher_label(d, params);
        const auto path = labels_path_for(a.out, p);
        write_labels(path, labels, d.geometry.n_range);
        std::size_t abst = 0, positive = 0;
        for (const auto& l : labels) {
            abst += !l;
            positive += l && detail::has_positive(*l);
        }
        frames += labels.size();
        abstained += abst;
        std::printf("%s  frames %zu  abstained %zu  positive %zu\n", path.filename().c_str(), labels.size(), abst,
                    positive);
    }
    std::printf("abstention fraction %.4f (%zu of %zu frames)\n",
                frames ? static_cast<double>(abstained) / static_cast<double>(frames) : 0.0, abstained, frames);
    return 0;
}

struct TrainStudentArgs {
    std::string drives, labels, config, out, history;
};

int run_train_student(const TrainStudentArgs& a) {
    const StudentConfig cfg = a.config.empty() ? student_config_from_json(Json::object())
                                               : student_config_from_json(load_json(a.config));
    const auto drives = list_drives(a.drives);
    const auto model = default_architecture(cfg.init_seed);
    const auto train = load_samples(select_split(drives, cfg.training, "train"), a.labels, model.crop_offset);
    const auto val = load_samples(select_split(drives, cfg.training, "val"), a.labels, model.crop_offset);
    std::printf("student samples: %zu train, %zu validation\n", train.size(), val.size());
    const auto result = train_student(train, val, model, cfg.training, print_epoch);
    write_student(a.out, result.model, train.front().input.dim(1));
    write_history(a.history.empty() ? with_suffix(a.out, ".history.csv") : fs::path(a.history), result.history);
    const auto& best = result.history.at(result.best_epoch);
    std::printf("best epoch %zu  val R1 %s  positive weight %.2f\nwrote %s\n", result.best_epoch,
                ratio_str(best.val_r1).c_str(), result.positive_weight, a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string drives, labels, student, teacher, report, split = "test", config, table, frames_csv;
    double threshold = 0.5;
};

int run_eval(const EvalArgs& a) {
    const StudentConfig cfg = a.config.empty() ? student_config_from_json(Json::object())
                                               : student_config_from_json(load_json(a.config));
    const StudentModel student = read_student(a.student);
    std::optional<TeacherParams> teacher;
    if (!a.teacher.empty()) teacher = read_teacher(a.teacher);
    const auto drives = select_split(list_drives(a.drives), cfg.training, a.split);
    require(!drives.empty(), ErrorKind::UnusableDataset, "eval: split '" + a.split + "' holds no drives");
    Evaluator ev(student, a.threshold, teacher ? &*teacher : nullptr);
    ev.set_split(a.split);
    for (const auto& p : drives) {
        const Drive d = read_drive(p);
        ev.add(p.stem().string(), d, read_labels_for(labels_path_for(a.labels, p), d));
    }
    const auto report = ev.finish();
    save_json(a.report, report_json(report));
    const auto text = report_text(report);
    auto table = open_out(a.table.empty() ? with_suffix(a.report, ".txt") : fs::path(a.table));
    table << text;
    auto csv = open_out(a.frames_csv.empty() ? with_suffix(a.report, ".frames.csv") : fs::path(a.frames_csv));
    write_frames_csv(csv, report.frames);
    std::cout << text;
    return 0;
}

struct BenchArgs {
    std::string drives, student, teacher, out;
    std::size_t reps = 3, warmup = 2, frames = 40;
    std::optional<std::size_t> accumulation;
};

int run_bench(const BenchArgs& a) {
    require(a.reps > 0, ErrorKind::Config, "bench: --reps must be > 0");
    require(a.frames > 0, ErrorKind::Config, "bench: --frames must be > 0");
    const StudentModel student = read_student(a.student);
    TeacherParams teacher = read_teacher(a.teacher);
    if (a.accumulation) teacher.accumulation_depth = *a.accumulation;
    teacher.validate();
    // Frames the teacher can label, drawn from as many drives as it takes.
    std::vector<Drive> drives;
    std::vector<std::pair<std::size_t, std::size_t>> items;
    for (const auto& p : list_drives(a.drives)) {
        if (items.size() >= a.frames) break;
        drives.push_back(read_drive(p));
        const auto& d = drives.back();
        for (std::size_t i = 0; i < d.frames.size() && items.size() < a.frames; ++i)
            if (teacher_can_label(d, i, teacher)) items.emplace_back(drives.size() - 1, i);
    }
    require(!items.empty(), ErrorKind::UnusableDataset, "bench: no frame the teacher can label");
    const auto tea = bench([&](std::size_t k) {
        (void)teacher_frame_scores(drives[items[k].first], items[k].second, teacher);
    }, items.size(), a.reps, a.warmup);
    const auto stu = bench([&](std::size_t k) {
        (void)student_predict(drives[items[k].first].frames[items[k].second].map, student);
    }, items.size(), a.reps, a.warmup);
    const double speedup = tea.mean_ms / stu.mean_ms;
    auto stats = [](const LatencyStats& s) {
        return Json{{"mean_ms", s.mean_ms}, {"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"samples", s.samples}};
    };
    const Json j{{"frames", items.size()},
                 {"reps", a.reps},
                 {"warmup", a.warmup},
                 {"accumulation_depth", teacher.accumulation_depth},
                 {"teacher", stats(tea)},
                 {"student", stats(stu)},
                 {"speedup", speedup}};
    std::printf("frames %zu  reps %zu  K %zu\n", items.size(), a.reps, teacher.accumulation_depth);
    std::printf("teacher  mean %.3f ms  median %.3f ms  p95 %.3f ms\n", tea.mean_ms, tea.median_ms, tea.p95_ms);
    std::printf("student  mean %.3f ms  median %.3f ms  p95 %.3f ms\n", stu.mean_ms, stu.median_ms, stu.p95_ms);
    std::printf("speedup  %.1fx\n", speedup);
    if (!a.out.empty()) save_json(a.out, j);
    return 0;
}

struct InferArgs {
    std::string drive, student, out;
    double threshold = 0.5;
};

int run_infer(const InferArgs& a) {
    require(a.threshold > 0.0 && a.threshold < 1.0, ErrorKind::Config, "infer: threshold must be in (0,1)");
    const StudentModel student = read_student(a.student);
    const Drive d = read_drive(a.drive);
    auto out = open_out(a.out);
    out << "frame,detections";
    for (std::size_t j = 0; j < d.geometry.n_range; ++j) out << ",p" << j;
    out << '\n';
    out.precision(9);
    for (std::size_t i = 0; i < d.frames.size(); ++i) {
        const auto probs = student_predict(d.frames[i].map, student);
        out << i << ',' << detail::bins_str(threshold_scores(probs, a.threshold));
        for (float p : probs) out << ',' << p;
        out << '\n';
    }
    if (!out) fail(ErrorKind::Io, "write error on " + a.out);
    std::printf("%zu frames -> %s\n", d.frames.size(), a.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radar teacher-student distillation for in-lane debris detection"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate synthetic drives");
    c_sim->add_option("--spec", sim.spec, "Drive spec JSON (defaults built in)");
    c_sim->add_option("--out", sim.out, "Output directory")->required();
    c_sim->add_option("--seeds", sim.seeds, "Inclusive seed range a..b")->capture_default_str();

    TrainTeacherArgs tt;
    auto* c_tt = app.add_subcommand("train-teacher", "Train the teacher MLP on simulator ground truth");
    c_tt->add_option("--drives", tt.drives, "Drive directory")->required();
    c_tt->add_option("--config", tt.config, "Teacher config JSON");
    c_tt->add_option("--out", tt.out, "Output weights file")->required();
    c_tt->add_option("--history", tt.history, "History CSV (default <out>.history.csv)");

    LabelArgs lb;
    auto* c_lb = app.add_subcommand("label", "Label drives with the teacher");
    c_lb->add_option("--drives", lb.drives, "Drive directory")->required();
    c_lb->add_option("--teacher", lb.teacher, "Teacher weights")->required();
    c_lb->add_option("--out", lb.out, "Label directory")->required();

    TrainStudentArgs ts;
    auto* c_ts = app.add_subcommand("train-student", "Train the student on teacher labels");
    c_ts->add_option("--drives", ts.drives, "Drive directory")->required();
    c_ts->add_option("--labels", ts.labels, "Label directory")->required();
    c_ts->add_option("--config", ts.config, "Student training config JSON");
    c_ts->add_option("--out", ts.out, "Output weights file")->required();
    c_ts->add_option("--history", ts.history, "History CSV (default <out>.history.csv)");

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "Score the student against teacher labels and ground truth");
    c_ev->add_option("--drives", ev.drives, "Drive directory")->required();
    c_ev->add_option("--labels", ev.labels, "Label directory")->required();
    c_ev->add_option("--student", ev.student, "Student weights")->required();
    c_ev->add_option("--teacher", ev.teacher, "Teacher weights (adds teacher latency)");
    c_ev->add_option("--report", ev.report, "Report JSON")->required();
    c_ev->add_option("--split", ev.split, "all, train, val or test")->capture_default_str();
    c_ev->add_option("--config", ev.config, "Student config JSON defining the split");
    c_ev->add_option("--threshold", ev.threshold, "Decision threshold")->capture_default_str();
    c_ev->add_option("--table", ev.table, "Text table (default <report>.txt)");
    c_ev->add_option("--frames-csv", ev.frames_csv, "Per-frame CSV (default <report>.frames.csv)");

    BenchArgs bn;
    std::size_t accumulation = 0;
    auto* c_bn = app.add_subcommand("bench", "Per-frame latency of teacher and student");
    c_bn->add_option("--drives", bn.drives, "Drive directory")->required();
    c_bn->add_option("--student", bn.student, "Student weights")->required();
    c_bn->add_option("--teacher", bn.teacher, "Teacher weights")->required();
    c_bn->add_option("--reps", bn.reps, "Timed passes over the frames")->capture_default_str();
    c_bn->add_option("--warmup", bn.warmup, "Untimed warm-up calls")->capture_default_str();
    c_bn->add_option("--frames", bn.frames, "Frames to time")->capture_default_str();
    auto* o_acc = c_bn->add_option("--accumulation", accumulation, "Override the teacher's accumulation depth K");
    c_bn->add_option("--out", bn.out, "Bench JSON");

    InferArgs in;
    auto* c_in = app.add_subcommand("infer", "Run the student over one drive");
    c_in->add_option("--drive", in.drive, "Drive file")->required();
    c_in->add_option("--student", in.student, "Student weights")->required();
    c_in->add_option("--out", in.out, "Detections CSV")->required();
    c_in->add_option("--threshold", in.threshold, "Decision threshold")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::fprintf(stderr, "error: usage: %s\n", msg.c_str());
        return 2;
    }

    try {
        if (*c_sim) return run_simulate(sim);
        if (*c_tt) return run_train_teacher(tt);
        if (*c_lb) return run_label(lb);
        if (*c_ts) return run_train_student(ts);
        if (*c_ev) return run_eval(ev);
        if (*c_bn) {
            if (*o_acc) bn.accumulation = accumulation;
            return run_bench(bn);
        }
        if (*c_in) return run_infer(in);
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.kind())).c_str(), msg.c_str());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 3;
    }
    return 2;
}
