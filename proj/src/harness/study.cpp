#include "vlp/harness/study.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "vlp/errors.hpp"
#include "vlp/learn/model.hpp"

namespace vlp::harness {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "study", "seed", "run.threads",
        "camera.width_px", "camera.height_px", "camera.fx_px", "camera.fy_px", "camera.cx_px", "camera.cy_px",
        "camera.exposure_us", "camera.iso_gain", "camera.row_readout_us",
        "panel.side_m", "panel.flux_lm", "panel.cct_k", "panel.ies_file",
        "grid.extent_m", "grid.spacing_m", "sweep.angle_step_deg", "sweep.heights",
        "capture.heights", "capture.per_location", "capture.corner_jitter_px", "capture.pixel_sigma",
        "capture.yaw_spread_deg", "capture.tilt_max_deg", "capture.max_attempts", "capture.led_id",
        "capture.bit_rate_hz", "capture.modulated", "capture.close_radius",
        "split.test_per_location", "models",
        "train.heights", "test.heights",
        "tree.max_depth", "tree.min_leaf",
        "forest.n_trees", "forest.bootstrap", "forest.max_depth", "forest.min_leaf", "forest.feature_subset_size",
        "gbt.rounds", "gbt.learning_rate", "gbt.max_depth", "gbt.lambda", "gbt.gamma", "gbt.min_child_weight",
        "mlp.hidden", "mlp.learning_rate", "mlp.epochs", "mlp.batch_size", "mlp.l2",
    };
    return keys;
}

std::string height_label(double h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", h);
    return buf;
}

std::string file_stem(const std::string& name) {
    std::string s = name;
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.')) c = '_';
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

void record(StudyResult& result, const std::string& prefix, const Dataset& ds) {
    result.counts[prefix + ".candidates"] = ds.candidates;
    result.counts[prefix + ".rejected_fov"] = ds.rejected_fov;
    result.counts[prefix + ".vision_failures"] = ds.vision_failures;
    result.counts[prefix + ".rows"] = static_cast<long long>(ds.rows.size());
}

// Overall report plus one per height present in the test set.
void evaluate_by_height(StudyResult& result, const learn::EnsembleModel& model, const Dataset& test,
                        const std::string& name) {
    result.reports.push_back(evaluate(model, test, name));
    std::set<double> heights;
    for (const auto& r : test.rows) heights.insert(r.height_m);
    if (heights.size() < 2) return;
    for (double h : heights) result.reports.push_back(evaluate(model, test.filter_heights({h}), name + "@" + height_label(h)));
}

struct Setup {
    geom::CameraIntrinsics intr;
    geom::LedPanel panel;
    CaptureSpec capture;
    learn::ModelParams params;
    std::uint64_t seed = 0;
    int threads = 1;
    int test_per_location = 2;
};

struct CaptureSplit {
    Split noisy;
    Dataset clean_test;
};

CaptureSplit capture_split(StudyResult& result, const KeyValueConfig& cfg, const Setup& s) {
    const SweepSpec spec = sweep_from_config(cfg, "capture.heights", {1.3, 1.66});
    const Dataset captures = generate_capture_set(spec, s.intr, s.panel, s.capture);
    record(result, "capture", captures);
    const Dataset kept = drop_sparse_locations(captures, s.test_per_location + 1);
    CaptureSplit out;
    out.noisy = split(kept, s.test_per_location, derive_seed(s.seed, {3}));
    CaptureSpec clean = s.capture;
    clean.noise = {};
    const Dataset rerendered = rerender_captures(out.noisy.test, spec, s.intr, s.panel, clean);
    out.clean_test = rerendered;
    result.counts["split.train_rows"] = static_cast<long long>(out.noisy.train.rows.size());
    result.counts["split.test_rows"] = static_cast<long long>(out.noisy.test.rows.size());
    result.counts["split.clean_test_rows"] = static_cast<long long>(out.clean_test.rows.size());
    return out;
}

void run_model_selection(StudyResult& result, const KeyValueConfig& cfg, const Setup& s) {
    const auto data = capture_split(result, cfg, s);
    const auto ts = data.noisy.train.training_set();
    for (const auto& name : cfg.get_strings("models", {"forest", "gbt", "mlp"})) {
        const auto kind = learn::parse_model_kind(name);
        const auto model = learn::fit_position_model(ts, kind, s.params, derive_seed(s.seed, {4}), s.threads);
        const std::string label = learn::to_string(kind);
        evaluate_by_height(result, model, data.noisy.test, label);
        evaluate_by_height(result, model, data.clean_test, label + "/clean");
    }
}

void run_sim_vs_capture(StudyResult& result, const KeyValueConfig& cfg, const Setup& s) {
    const auto data = capture_split(result, cfg, s);
    const SweepSpec sweep_spec = sweep_from_config(cfg, "sweep.heights", {1.3, 1.66});
    const Dataset sweep = generate_sweep(sweep_spec, s.intr, s.panel);
    record(result, "sweep", sweep);
    const auto kind = learn::parse_model_kind(cfg.get_string("models", "gbt"));
    const auto from_capture =
        learn::fit_position_model(data.noisy.train.training_set(), kind, s.params, derive_seed(s.seed, {4}), s.threads);
    const auto from_sweep =
        learn::fit_position_model(sweep.training_set(), kind, s.params, derive_seed(s.seed, {5}), s.threads);
    evaluate_by_height(result, from_capture, data.noisy.test, "capture-trained");
    evaluate_by_height(result, from_capture, data.clean_test, "capture-trained/clean");
    evaluate_by_height(result, from_sweep, data.noisy.test, "sweep-trained");
    evaluate_by_height(result, from_sweep, data.clean_test, "sweep-trained/clean");
}

void run_height_generalization(StudyResult& result, const KeyValueConfig& cfg, const Setup& s) {
    const SweepSpec train_spec = sweep_from_config(cfg, "train.heights", {1.56, 1.76});
    const SweepSpec test_spec = sweep_from_config(cfg, "test.heights", {1.23, 1.6});
    for (double a : train_spec.heights_m)
        for (double b : test_spec.heights_m)
            if (std::abs(a - b) < 1e-9) throw ConfigError("test.heights: overlaps train.heights");
    const Dataset sweep = generate_sweep(train_spec, s.intr, s.panel);
    record(result, "sweep", sweep);
    const Dataset captures = generate_capture_set(test_spec, s.intr, s.panel, s.capture);
    record(result, "capture", captures);
    const auto kind = learn::parse_model_kind(cfg.get_string("models", "gbt"));
    const auto model = learn::fit_position_model(sweep.training_set(), kind, s.params, derive_seed(s.seed, {5}), s.threads);
    evaluate_by_height(result, model, captures, "sweep-trained");
}

}  // namespace

const EvalReport& StudyResult::report(const std::string& name) const {
    for (const auto& r : reports)
        if (r.name == name) return r;
    throw std::out_of_range("no report named '" + name + "'");
}

SweepSpec sweep_from_config(const KeyValueConfig& cfg, const std::string& heights_key,
                            const std::vector<double>& default_heights) {
    SweepSpec spec;
    spec.heights_m = cfg.get_doubles(heights_key, default_heights);
    if (spec.heights_m.empty()) throw ConfigError(heights_key + ": at least one height is required");
    spec.angle_step_deg = cfg.get_double("sweep.angle_step_deg", spec.angle_step_deg);
    spec.grid.extent_m = cfg.get_double("grid.extent_m", spec.grid.extent_m);
    spec.grid.spacing_m = cfg.get_double("grid.spacing_m", spec.grid.spacing_m);
    spec.seed = cfg.get_u64("seed", 0);
    try {
        spec.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(heights_key + " / grid.* / sweep.*: " + e.what());
    }
    return spec;
}

CaptureSpec capture_from_config(const KeyValueConfig& cfg, const geom::CameraIntrinsics& intr) {
    CaptureSpec c;
    c.per_location = cfg.get_int("capture.per_location", c.per_location);
    if (c.per_location < 1) throw ConfigError("capture.per_location: must be >= 1");
    c.noise.corner_jitter_px = cfg.get_double("capture.corner_jitter_px", c.noise.corner_jitter_px);
    c.noise.pixel_sigma = cfg.get_double("capture.pixel_sigma", c.noise.pixel_sigma);
    if (!(c.noise.corner_jitter_px >= 0.0)) throw ConfigError("capture.corner_jitter_px: must be >= 0");
    if (!(c.noise.pixel_sigma >= 0.0)) throw ConfigError("capture.pixel_sigma: must be >= 0");
    c.yaw_spread_deg = cfg.get_double("capture.yaw_spread_deg", c.yaw_spread_deg);
    c.tilt_max_deg = cfg.get_double("capture.tilt_max_deg", c.tilt_max_deg);
    if (!(c.yaw_spread_deg >= 0.0)) throw ConfigError("capture.yaw_spread_deg: must be >= 0");
    if (!(c.tilt_max_deg >= 0.0)) throw ConfigError("capture.tilt_max_deg: must be >= 0");
    c.max_attempts = cfg.get_int("capture.max_attempts", c.max_attempts);
    if (c.max_attempts < 1) throw ConfigError("capture.max_attempts: must be >= 1");
    const auto id = cfg.get_u64("capture.led_id", c.led_id);
    if (id > 255) throw ConfigError("capture.led_id: must fit in 8 bits");
    c.led_id = static_cast<std::uint8_t>(id);
    c.bit_rate_hz = cfg.get_double("capture.bit_rate_hz", c.bit_rate_hz);
    if (!(c.bit_rate_hz > 0.0)) throw ConfigError("capture.bit_rate_hz: must be positive");
    c.modulated = cfg.get_bool("capture.modulated", c.modulated);
    c.vision.close_radius = cfg.get_int("capture.close_radius",
                                        vision::default_close_radius(intr.row_readout_us, c.bit_rate_hz));
    if (c.vision.close_radius < 0) throw ConfigError("capture.close_radius: must be >= 0");
    c.threads = std::max(1, cfg.get_int("run.threads", 1));
    return c;
}

learn::ModelParams model_params_from_config(const KeyValueConfig& cfg) {
    learn::ModelParams p;
    p.tree.max_depth = cfg.get_int("tree.max_depth", p.tree.max_depth);
    p.tree.min_leaf = cfg.get_int("tree.min_leaf", p.tree.min_leaf);
    p.forest.n_trees = cfg.get_int("forest.n_trees", p.forest.n_trees);
    p.forest.bootstrap = cfg.get_bool("forest.bootstrap", p.forest.bootstrap);
    p.forest.tree.max_depth = cfg.get_int("forest.max_depth", p.forest.tree.max_depth);
    p.forest.tree.min_leaf = cfg.get_int("forest.min_leaf", p.forest.tree.min_leaf);
    p.forest.tree.feature_subset_size = cfg.get_int("forest.feature_subset_size", p.forest.tree.feature_subset_size);
    p.gbt.rounds = cfg.get_int("gbt.rounds", p.gbt.rounds);
    p.gbt.learning_rate = cfg.get_double("gbt.learning_rate", p.gbt.learning_rate);
    p.gbt.max_depth = cfg.get_int("gbt.max_depth", p.gbt.max_depth);
    p.gbt.lambda = cfg.get_double("gbt.lambda", p.gbt.lambda);
    p.gbt.gamma = cfg.get_double("gbt.gamma", p.gbt.gamma);
    p.gbt.min_child_weight = cfg.get_double("gbt.min_child_weight", p.gbt.min_child_weight);
    if (cfg.has("mlp.hidden")) {
        p.mlp.hidden.clear();
        for (double w : cfg.get_doubles("mlp.hidden", {})) {
            if (w < 1 || w != std::floor(w)) throw ConfigError("mlp.hidden: widths must be positive integers");
            p.mlp.hidden.push_back(static_cast<int>(w));
        }
    }
    p.mlp.learning_rate = cfg.get_double("mlp.learning_rate", p.mlp.learning_rate);
    p.mlp.epochs = cfg.get_int("mlp.epochs", p.mlp.epochs);
    p.mlp.batch_size = cfg.get_int("mlp.batch_size", p.mlp.batch_size);
    p.mlp.l2 = cfg.get_double("mlp.l2", p.mlp.l2);
    if (p.forest.n_trees < 1) throw ConfigError("forest.n_trees: must be >= 1");
    if (p.gbt.rounds < 1) throw ConfigError("gbt.rounds: must be >= 1");
    if (!(p.gbt.learning_rate > 0.0)) throw ConfigError("gbt.learning_rate: must be positive");
    if (!(p.gbt.lambda >= 0.0)) throw ConfigError("gbt.lambda: must be >= 0");
    if (p.mlp.epochs < 1) throw ConfigError("mlp.epochs: must be >= 1");
    if (p.mlp.batch_size < 1) throw ConfigError("mlp.batch_size: must be >= 1");
    if (!(p.mlp.learning_rate > 0.0)) throw ConfigError("mlp.learning_rate: must be positive");
    return p;
}

StudyResult run_experiment(const KeyValueConfig& cfg, int threads) {
    for (const auto& [key, value] : cfg.values())
        if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");

    StudyResult result;
    result.study = cfg.get_string("study", "");
    for (const auto& [key, value] : cfg.values())
        if (key != "run.threads") result.config[key] = value;

    Setup s;
    s.intr = intrinsics_from_config(cfg);
    s.panel = panel_from_config(cfg);
    s.capture = capture_from_config(cfg, s.intr);
    if (threads > 0) s.capture.threads = threads;
    s.threads = s.capture.threads;
    s.params = model_params_from_config(cfg);
    s.seed = cfg.get_u64("seed", 0);
    s.test_per_location = cfg.get_int("split.test_per_location", 2);
    if (s.test_per_location < 0) throw ConfigError("split.test_per_location: must be >= 0");

    if (result.study == "model-selection")
        run_model_selection(result, cfg, s);
    else if (result.study == "sim-vs-capture")
        run_sim_vs_capture(result, cfg, s);
    else if (result.study == "height-generalization")
        run_height_generalization(result, cfg, s);
    else
        throw ConfigError("study: expected model-selection, sim-vs-capture or height-generalization, got '" +
                          result.study + "'");

    for (auto& r : result.reports) r.config = result.config;
    return result;
}

std::string study_summary_json(const StudyResult& result) {
    nlohmann::json j;
    j["study"] = result.study;
    j["counts"] = result.counts;
    j["config"] = result.config;
    auto reports = nlohmann::json::array();
    const char* axes[] = {"x", "y", "z"};
    for (const auto& r : result.reports) {
        nlohmann::json e{{"name", r.name},
                         {"rows", r.rows},
                         {"mean_cm", r.error_3d.mean_cm},
                         {"p90_cm", r.error_3d.p90_cm},
                         {"max_cm", r.error_3d.max_cm}};
        for (int a = 0; a < 3; ++a)
            e["axis"][axes[a]] = {{"mean_cm", r.axis[a].mean_cm}, {"p90_cm", r.axis[a].p90_cm}};
        reports.push_back(e);
    }
    j["reports"] = reports;
    return j.dump(1) + "\n";
}

std::vector<std::filesystem::path> write_study_outputs(const StudyResult& result, const std::filesystem::path& dir,
                                                       const GridSpec& grid) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        const auto path = dir / name;
        write_text(path, text);
        written.push_back(path);
    };
    for (const auto& r : result.reports) {
        const std::string stem = file_stem(r.name);
        emit(stem + ".json", report_to_json(r));
        emit(stem + ".cdf.csv", cdf_to_csv(r));
        emit(stem + ".grid.csv", grid_to_csv(r));
        emit(stem + ".svg", grid_to_svg(r, grid.extent_m, grid.spacing_m));
    }
    emit("summary.json", study_summary_json(result));
    return written;
}

}  // namespace vlp::harness
