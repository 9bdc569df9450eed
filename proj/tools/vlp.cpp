#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "vlp/codec.hpp"
#include "vlp/config.hpp"
#include "vlp/errors.hpp"
#include "vlp/frame.hpp"
#include "vlp/harness/study.hpp"
#include "vlp/render.hpp"
#include "vlp/rng.hpp"
#include "vlp/vision.hpp"

namespace fs = std::filesystem;
using namespace vlp;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

KeyValueConfig load_config(const std::string& path) {
    return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

geom::Pose parse_pose(const std::string& text) {
    const auto poses = parse_pose_csv(text + "\n");
    if (poses.size() != 1) throw MalformedCsv("--pose expects x,y,z,roll,pitch,yaw");
    return poses.front();
}

std::uint8_t parse_id(const std::string& text) {
    std::size_t used = 0;
    const unsigned long v = std::stoul(text, &used, 0);
    if (used != text.size() || v > 255) throw std::invalid_argument("LED id must be 0..255: " + text);
    return static_cast<std::uint8_t>(v);
}

void print_counts(const harness::Dataset& ds) {
    std::printf("rows %zu  candidates %lld  rejected_fov %lld  vision_failures %lld\n", ds.rows.size(),
                ds.candidates, ds.rejected_fov, ds.vision_failures);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Visible-light positioning toolkit: simulation, capture synthesis, decoding and learning."};
    app.require_subcommand(1);

    std::string config_path, out, frame_path, db_path, data_path, model_path, kind = "gbt", id_text = "0x5A",
                                                                               pose_text, name;
    std::string frames_dir;
    int threads = 1;
    std::uint64_t seed = 1;
    double bit_rate = codec::kDefaultBitRateHz, phase = 0.0, jitter = 0.0, sigma = 0.0;
    bool unmodulated = false;

    auto* sim = app.add_subcommand("simulate", "Ray-cast attitude sweep to a dataset CSV");
    sim->add_option("--config", config_path, "Key-value config (camera.*, panel.*, grid.*, sweep.*)");
    sim->add_option("--out", out, "Dataset CSV")->required();
    sim->add_option("--frames-dir", frames_dir, "Also write a clean PGM frame per kept pose");

    auto* cap = app.add_subcommand("capture", "Rendered, noisy capture set through the vision pipeline");
    cap->add_option("--config", config_path, "Key-value config (capture.*, grid.*, camera.*, panel.*)");
    cap->add_option("--out", out, "Dataset CSV")->required();
    cap->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* ext = app.add_subcommand("extract", "Corner features of one frame");
    ext->add_option("--frame", frame_path, "PGM frame")->required()->check(CLI::ExistingFile);
    ext->add_option("--out", out, "Feature CSV (stdout if omitted)");

    auto* train = app.add_subcommand("train", "Fit a position model on a dataset CSV");
    train->add_option("--data", data_path, "Training dataset CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--kind", kind, "tree | forest | gbt | mlp");
    train->add_option("--config", config_path, "Hyperparameters (tree.*, forest.*, gbt.*, mlp.*)");
    train->add_option("--seed", seed, "Training seed");
    train->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    train->add_option("--out", out, "Model JSON")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a model on a dataset CSV");
    eval->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data_path, "Test dataset CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--out-dir", out, "Directory for report JSON, CDF CSV, grid CSV and SVG")->required();
    eval->add_option("--name", name, "Report name");
    eval->add_option("--config", config_path, "Grid layout for the heat map (grid.*)");

    auto* codec_cmd = app.add_subcommand("codec", "Differential Manchester LED codes");
    codec_cmd->require_subcommand(1);
    auto* enc = codec_cmd->add_subcommand("encode", "Waveform of one LED id");
    enc->add_option("--id", id_text, "LED id, decimal or 0x hex");
    enc->add_option("--bit-rate", bit_rate, "Bits per second");
    enc->add_option("--out", out, "Waveform JSON (stdout if omitted)");
    auto* dec = codec_cmd->add_subcommand("decode", "Identify the LED in a striped frame");
    dec->add_option("--frame", frame_path, "PGM frame")->required()->check(CLI::ExistingFile);
    dec->add_option("--db", db_path, "LED database CSV id,x,y,z")->required()->check(CLI::ExistingFile);
    dec->add_option("--bit-rate", bit_rate, "Bits per second");

    auto* report = app.add_subcommand("report", "Run a study config and write its reports");
    report->add_option("--config", config_path, "Study config")->required()->check(CLI::ExistingFile);
    report->add_option("--out-dir", out, "Output directory")->required();
    report->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* rend = app.add_subcommand("render", "Render one frame");
    rend->add_option("--pose", pose_text, "x,y,z,roll,pitch,yaw (metres, degrees)")->required();
    rend->add_option("--config", config_path, "camera.* and panel.* keys");
    rend->add_option("--id", id_text, "LED id, decimal or 0x hex");
    rend->add_flag("--unmodulated", unmodulated, "Steady panel, no stripes");
    rend->add_option("--phase", phase, "Waveform phase at row 0, microseconds");
    rend->add_option("--jitter", jitter, "Corner jitter sigma, pixels");
    rend->add_option("--sigma", sigma, "Pixel noise sigma, gray levels");
    rend->add_option("--seed", seed, "Noise seed");
    rend->add_option("--out", out, "PGM frame")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            const auto cfg = load_config(config_path);
            const auto intr = intrinsics_from_config(cfg);
            const auto panel = panel_from_config(cfg);
            const auto spec = harness::sweep_from_config(cfg, "sweep.heights", {1.3, 1.66});
            const auto ds = harness::generate_sweep(spec, intr, panel);
            harness::save_dataset(out, ds);
            if (!frames_dir.empty()) {
                fs::create_directories(frames_dir);
                std::size_t k = 0;
                for (const auto& r : ds.rows) {
                    const geom::Pose pose{{spec.grid.coordinate(r.grid_i), spec.grid.coordinate(r.grid_j), r.height_m},
                                          r.attitude};
                    char file[64];
                    std::snprintf(file, sizeof file, "frame_%06zu.pgm", k++);
                    render::write_pgm(fs::path(frames_dir) / file,
                              render::rasterize_panel(intr, pose, panel, render::base_brightness(pose, panel, intr)));
                }
            }
            print_counts(ds);
        } else if (*cap) {
            const auto cfg = load_config(config_path);
            const auto intr = intrinsics_from_config(cfg);
            const auto panel = panel_from_config(cfg);
            const auto spec = harness::sweep_from_config(cfg, "capture.heights", {1.3, 1.66});
            auto c = harness::capture_from_config(cfg, intr);
            if (threads > 1) c.threads = threads;
            const auto ds = harness::generate_capture_set(spec, intr, panel, c);
            harness::save_dataset(out, ds);
            print_counts(ds);
        } else if (*ext) {
            const auto frame = render::read_pgm(frame_path);
            vision::PipelineParams p;
            p.close_radius = vision::default_close_radius(frame.meta().row_readout_us, codec::kDefaultBitRateHz);
            const std::string csv = harness::features_to_csv({{vision::features(vision::extract_corners(frame, p))}});
            if (out.empty()) std::cout << csv;
            else write_text(out, csv);
        } else if (*train) {
            const auto cfg = load_config(config_path);
            const auto ds = harness::load_dataset(data_path);
            const auto model = learn::fit_position_model(ds.training_set(), learn::parse_model_kind(kind),
                                                         harness::model_params_from_config(cfg), seed, threads);
            learn::save_model(out, model);
            std::printf("trained %s on %zu rows\n", learn::to_string(model.kind).c_str(), ds.rows.size());
        } else if (*eval) {
            const auto cfg = load_config(config_path);
            const auto model = learn::load_model(model_path);
            const auto ds = harness::load_dataset(data_path);
            harness::StudyResult result;
            result.study = "eval";
            result.reports.push_back(harness::evaluate(model, ds, name.empty() ? learn::to_string(model.kind) : name));
            const auto spec = harness::sweep_from_config(cfg, "sweep.heights", {1.3, 1.66});
            harness::write_study_outputs(result, out, spec.grid);
            const auto& e = result.reports.front().error_3d;
            std::printf("rows %d  mean %.3f cm  p90 %.3f cm  max %.3f cm\n", result.reports.front().rows, e.mean_cm,
                        e.p90_cm, e.max_cm);
        } else if (*enc) {
            const auto w = codec::dm_encode(codec::LedId{parse_id(id_text)}, bit_rate);
            nlohmann::json j;
            j["id"] = static_cast<int>(parse_id(id_text));
            j["bit_rate_hz"] = bit_rate;
            j["level_duration_us"] = w.level_duration_us();
            j["invert_on_repeat"] = w.invert_on_repeat();
            std::vector<int> levels;
            for (bool b : w.levels()) levels.push_back(b ? 1 : 0);
            j["levels"] = levels;
            const std::string text = j.dump(1) + "\n";
            if (out.empty()) std::cout << text;
            else write_text(out, text);
        } else if (*dec) {
            const auto frame = render::read_pgm(frame_path);
            const auto db = codec::LedDatabase::load_csv(db_path);
            vision::PipelineParams p;
            p.close_radius = vision::default_close_radius(frame.meta().row_readout_us, bit_rate);
            const auto quad = vision::extract_corners(frame, p);
            const auto bits = codec::dm_decode(codec::extract_row_profile(frame, quad), frame.meta().row_readout_us,
                                               frame.meta().exposure_us, bit_rate);
            const auto& rec = codec::match_id(bits, db);
            std::string text;
            for (int b : bits) text += static_cast<char>('0' + b);
            std::printf("id 0x%02X  bits %s  led at (%.4f, %.4f, %.4f)\n", rec.id.value, text.c_str(),
                        rec.world_position.x, rec.world_position.y, rec.world_position.z);
        } else if (*report) {
            const auto cfg = KeyValueConfig::load(config_path);
            const auto result = harness::run_experiment(cfg, threads);
            const auto spec = harness::sweep_from_config(cfg, "sweep.heights", {1.3, 1.66});
            const auto files = harness::write_study_outputs(result, out, spec.grid);
            for (const auto& r : result.reports)
                std::printf("%-28s rows %5d  mean %8.3f cm  p90 %8.3f cm\n", r.name.c_str(), r.rows,
                            r.error_3d.mean_cm, r.error_3d.p90_cm);
            std::printf("wrote %zu files to %s\n", files.size(), out.c_str());
        } else if (*rend) {
            const auto cfg = load_config(config_path);
            const auto intr = intrinsics_from_config(cfg);
            const auto panel = panel_from_config(cfg);
            std::optional<render::Waveform> w;
            if (!unmodulated) w = codec::dm_encode(codec::LedId{parse_id(id_text)});
            const auto cap_frame =
                harness::render_capture(intr, parse_pose(pose_text), panel, w, phase, {jitter, sigma}, seed);
            render::write_pgm(out, cap_frame.frame);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
