#pragma once

// JSON configuration for drive specs, teacher training and student training.
// Every key is optional and falls back to the built-in default; unknown keys
// and mistyped values are rejected.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "radkd/error.hpp"
#include "radkd/sim.hpp"
#include "radkd/teacher.hpp"
#include "radkd/teacher_training.hpp"
#include "radkd/train.hpp"

namespace radkd {

using Json = nlohmann::json;

namespace detail {

/// Reads keys out of one JSON object and complains about the ones nobody asked for.
class Fields {
public:
    Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        require(j.is_object(), ErrorKind::Config, where_ + ": expected a JSON object");
    }
    Fields(const Fields&) = delete;

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
                const auto& v = j_.at(key);
                require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0),
                        ErrorKind::Config, where_ + "." + key + ": expected a non-negative integer");
                out = v.get<T>();
            } else if constexpr (std::is_same_v<T, bool>) {
                require(j_.at(key).is_boolean(), ErrorKind::Config, where_ + "." + key + ": expected true/false");
                out = j_.at(key).get<bool>();
            } else {
                require(j_.at(key).is_number(), ErrorKind::Config, where_ + "." + key + ": expected a number");
                out = j_.at(key).get<T>();
            }
        } catch (const Json::exception& e) {
            fail(ErrorKind::Config, where_ + "." + key + ": " + e.what());
        }
    }

    void get(const char* key, Interval& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        require(v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number(), ErrorKind::Config,
                where_ + "." + key + ": expected [lo, hi]");
        out = {v[0].get<double>(), v[1].get<double>()};
    }

    /// Marks a nested key as handled; returns it when present.
    const Json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) fail(ErrorKind::Config, where_ + ": unknown key '" + k + "'");
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline ObjectKind object_kind_from(const Json& v, const std::string& where) {
    require(v.is_string(), ErrorKind::Config, where + ": expected a string");
    const auto s = v.get<std::string>();
    if (s == "debris") return ObjectKind::Debris;
    if (s == "guardrail") return ObjectKind::Guardrail;
    if (s == "signpost") return ObjectKind::Signpost;
    fail(ErrorKind::Config, where + ": unknown object kind '" + s + "'");
}

inline const char* object_kind_name(ObjectKind k) {
    switch (k) {
    case ObjectKind::Debris: return "debris";
    case ObjectKind::Guardrail: return "guardrail";
    case ObjectKind::Signpost: return "signpost";
    }
    return "debris";
}

inline Json interval_json(const Interval& iv) { return Json::array({iv.lo, iv.hi}); }

} // namespace detail

inline Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::Config, path.string() + ": malformed JSON");
    return j;
}

inline void save_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::Io, "write error on " + path.string());
}

// ---------------------------------------------------------------------------
// Drive spec
// ---------------------------------------------------------------------------

inline void read_geometry(const Json& j, RadarGeometry& g, const std::string& where) {
    detail::Fields f(j, where);
    f.get("n_range", g.n_range);
    f.get("n_azimuth", g.n_azimuth);
    f.get("range_resolution", g.range_resolution);
    f.get("fov_degrees", g.fov_degrees);
    f.get("lane_half_width", g.lane_half_width);
    f.finish();
}

inline Json geometry_json(const RadarGeometry& g) {
    return {{"n_range", g.n_range},
            {"n_azimuth", g.n_azimuth},
            {"range_resolution", g.range_resolution},
            {"fov_degrees", g.fov_degrees},
            {"lane_half_width", g.lane_half_width}};
}

/// Starts from the default spec; `"scene": null` removes the random scene.
inline DriveSpec drive_spec_from_json(const Json& j) {
    DriveSpec spec = default_drive_spec();
    detail::Fields f(j, "spec");
    if (const auto* g = f.child("geometry")) read_geometry(*g, spec.geometry, "spec.geometry");
    if (const auto* s = f.child("sensor")) {
        detail::Fields sf(*s, "spec.sensor");
        sf.get("reference_range", spec.sensor.reference_range);
        sf.get("range_psf_bins", spec.sensor.range_psf_bins);
        sf.get("azimuth_psf_bins", spec.sensor.azimuth_psf_bins);
        sf.get("noise_sigma", spec.sensor.noise_sigma);
        sf.finish();
    }
    f.get("n_frames", spec.n_frames);
    f.get("frame_interval", spec.frame_interval);
    if (const auto* p = f.child("speed_profile")) {
        require(p->is_array(), ErrorKind::Config, "spec.speed_profile: expected an array");
        for (const auto& seg : *p) {
            SpeedSegment s;
            detail::Fields sf(seg, "spec.speed_profile[]");
            sf.get("frames", s.frames);
            sf.get("speed", s.speed);
            sf.finish();
            spec.speed_profile.push_back(s);
        }
    }
    if (const auto* o = f.child("objects")) {
        require(o->is_array(), ErrorKind::Config, "spec.objects: expected an array");
        for (const auto& obj : *o) {
            SceneObject so;
            detail::Fields of(obj, "spec.objects[]");
            of.get("down_range", so.down_range);
            of.get("cross_range", so.cross_range);
            of.get("rcs", so.rcs);
            of.get("extent_range", so.extent_range);
            of.get("extent_cross", so.extent_cross);
            if (const auto* k = of.child("kind")) so.kind = detail::object_kind_from(*k, "spec.objects[].kind");
            of.finish();
            spec.objects.push_back(so);
        }
    }
    if (const auto* s = f.child("scene")) {
        if (s->is_null()) {
            spec.scene.reset();
        } else {
            RandomScene& sc = *spec.scene;
            detail::Fields sf(*s, "spec.scene");
            sf.get("target_probability", sc.target_probability);
            sf.get("target_down_range", sc.target_down_range);
            sf.get("target_cross_range", sc.target_cross_range);
            sf.get("target_rcs", sc.target_rcs);
            sf.get("debris_extent_range", sc.debris_extent_range);
            sf.get("debris_extent_cross", sc.debris_extent_cross);
            sf.get("max_out_of_lane_debris", sc.max_out_of_lane_debris);
            sf.get("out_of_lane_cross_range", sc.out_of_lane_cross_range);
            sf.get("out_of_lane_down_range", sc.out_of_lane_down_range);
            sf.get("guardrail_probability", sc.guardrail_probability);
            sf.get("guardrail_offset", sc.guardrail_offset);
            sf.get("guardrail_spacing", sc.guardrail_spacing);
            sf.get("guardrail_rcs", sc.guardrail_rcs);
            sf.get("max_signposts", sc.max_signposts);
            sf.get("signpost_offset", sc.signpost_offset);
            sf.get("signpost_rcs", sc.signpost_rcs);
            sf.get("host_speed", sc.host_speed);
            sf.get("low_speed_probability", sc.low_speed_probability);
            sf.get("low_speed", sc.low_speed);
            sf.finish();
        }
    }
    f.finish();
    spec.validate();
    return spec;
}

inline Json drive_spec_json(const DriveSpec& spec) {
    Json j{{"geometry", geometry_json(spec.geometry)},
           {"sensor",
            {{"reference_range", spec.sensor.reference_range},
             {"range_psf_bins", spec.sensor.range_psf_bins},
             {"azimuth_psf_bins", spec.sensor.azimuth_psf_bins},
             {"noise_sigma", spec.sensor.noise_sigma}}},
           {"n_frames", spec.n_frames},
           {"frame_interval", spec.frame_interval},
           {"speed_profile", Json::array()},
           {"objects", Json::array()}};
    for (const auto& s : spec.speed_profile) j["speed_profile"].push_back({{"frames", s.frames}, {"speed", s.speed}});
    for (const auto& o : spec.objects)
        j["objects"].push_back({{"down_range", o.down_range},
                                {"cross_range", o.cross_range},
                                {"rcs", o.rcs},
                                {"extent_range", o.extent_range},
                                {"extent_cross", o.extent_cross},
                                {"kind", detail::object_kind_name(o.kind)}});
    if (!spec.scene) {
        j["scene"] = nullptr;
    } else {
        const auto& s = *spec.scene;
        using detail::interval_json;
        j["scene"] = {{"target_probability", s.target_probability},
                      {"target_down_range", interval_json(s.target_down_range)},
                      {"target_cross_range", interval_json(s.target_cross_range)},
                      {"target_rcs", interval_json(s.target_rcs)},
                      {"debris_extent_range", interval_json(s.debris_extent_range)},
                      {"debris_extent_cross", interval_json(s.debris_extent_cross)},
                      {"max_out_of_lane_debris", s.max_out_of_lane_debris},
                      {"out_of_lane_cross_range", interval_json(s.out_of_lane_cross_range)},
                      {"out_of_lane_down_range", interval_json(s.out_of_lane_down_range)},
                      {"guardrail_probability", s.guardrail_probability},
                      {"guardrail_offset", interval_json(s.guardrail_offset)},
                      {"guardrail_spacing", interval_json(s.guardrail_spacing)},
                      {"guardrail_rcs", interval_json(s.guardrail_rcs)},
                      {"max_signposts", s.max_signposts},
                      {"signpost_offset", interval_json(s.signpost_offset)},
                      {"signpost_rcs", interval_json(s.signpost_rcs)},
                      {"host_speed", interval_json(s.host_speed)},
                      {"low_speed_probability", s.low_speed_probability},
                      {"low_speed", interval_json(s.low_speed)}};
    }
    return j;
}

// ---------------------------------------------------------------------------
// Teacher
// ---------------------------------------------------------------------------

struct TeacherConfig {
    TeacherParams params = default_teacher_params();
    std::uint64_t init_seed = 7;
    TeacherTrainConfig training;
};

/// {"teacher": {...scalars, "init_seed"}, "training": {...}}
inline TeacherConfig teacher_config_from_json(const Json& j) {
    TeacherConfig c;
    detail::Fields f(j, "config");
    if (const auto* t = f.child("teacher")) {
        detail::Fields tf(*t, "config.teacher");
        tf.get("accumulation_depth", c.params.accumulation_depth);
        tf.get("min_speed", c.params.min_speed);
        tf.get("decision_threshold", c.params.decision_threshold);
        tf.get("init_seed", c.init_seed);
        if (const auto* cf = tf.child("cfar")) {
            detail::Fields ff(*cf, "config.teacher.cfar");
            ff.get("guard_cells", c.params.cfar.guard_cells);
            ff.get("train_cells", c.params.cfar.train_cells);
            ff.get("offset_db", c.params.cfar.offset_db);
            ff.finish();
        }
        tf.finish();
    }
    if (const auto* t = f.child("training")) {
        detail::Fields tf(*t, "config.training");
        tf.get("lr", c.training.lr);
        tf.get("batch_size", c.training.batch_size);
        tf.get("max_epochs", c.training.max_epochs);
        tf.get("patience", c.training.patience);
        tf.get("val_fraction", c.training.val_fraction);
        tf.get("seed", c.training.seed);
        tf.finish();
    }
    f.finish();
    c.params.mlp = default_teacher_params(c.init_seed).mlp;
    c.params.validate();
    c.training.validate();
    return c;
}

inline Json teacher_config_json(const TeacherConfig& c) {
    const auto& p = c.params;
    return {{"teacher",
             {{"accumulation_depth", p.accumulation_depth},
              {"min_speed", p.min_speed},
              {"decision_threshold", p.decision_threshold},
              {"init_seed", c.init_seed},
              {"cfar",
               {{"guard_cells", p.cfar.guard_cells},
                {"train_cells", p.cfar.train_cells},
                {"offset_db", p.cfar.offset_db}}}}},
            {"training",
             {{"lr", c.training.lr},
              {"batch_size", c.training.batch_size},
              {"max_epochs", c.training.max_epochs},
              {"patience", c.training.patience},
              {"val_fraction", c.training.val_fraction},
              {"seed", c.training.seed}}}};
}

// ---------------------------------------------------------------------------
// Student
// ---------------------------------------------------------------------------

struct StudentConfig {
    TrainConfig training;
    std::uint64_t init_seed = 1234;
};

inline StudentConfig student_config_from_json(const Json& j) {
    StudentConfig c;
    auto& t = c.training;
    detail::Fields f(j, "config");
    f.get("lr", t.lr);
    f.get("beta1", t.beta1);
    f.get("beta2", t.beta2);
    f.get("epsilon", t.epsilon);
    f.get("batch_size", t.batch_size);
    f.get("max_epochs", t.max_epochs);
    f.get("early_stop_patience", t.early_stop_patience);
    f.get("lr_min", t.lr_min);
    if (const auto* v = f.child("lr_schedule")) {
        if (*v == "constant") t.lr_schedule = LrSchedule::Constant;
        else if (*v == "cosine") t.lr_schedule = LrSchedule::Cosine;
        else fail(ErrorKind::Config, "config: lr_schedule must be \"constant\" or \"cosine\"");
    }
    if (const auto* v = f.child("select_on")) {
        if (*v == "val_loss") t.select_on = Selection::ValLoss;
        else if (*v == "val_f1") t.select_on = Selection::ValF1;
        else fail(ErrorKind::Config, "config: select_on must be \"val_loss\" or \"val_f1\"");
    }
    f.get("train_fraction", t.train_fraction);
    f.get("val_fraction", t.val_fraction);
    f.get("test_fraction", t.test_fraction);
    f.get("seed", t.seed);
    f.get("per_frame_weight", t.per_frame_weight);
    f.get("decision_threshold", t.decision_threshold);
    f.get("init_seed", c.init_seed);
    f.finish();
    t.validate();
    return c;
}

inline Json student_config_json(const StudentConfig& c) {
    const auto& t = c.training;
    return {{"lr", t.lr},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"epsilon", t.epsilon},
            {"batch_size", t.batch_size},
            {"max_epochs", t.max_epochs},
            {"early_stop_patience", t.early_stop_patience},
            {"lr_schedule", t.lr_schedule == LrSchedule::Cosine ? "cosine" : "constant"},
            {"lr_min", t.lr_min},
            {"select_on", t.select_on == Selection::ValF1 ? "val_f1" : "val_loss"},
            {"train_fraction", t.train_fraction},
            {"val_fraction", t.val_fraction},
            {"test_fraction", t.test_fraction},
            {"seed", t.seed},
            {"per_frame_weight", t.per_frame_weight},
            {"decision_threshold", t.decision_threshold},
            {"init_seed", c.init_seed}};
}

} // namespace radkd
