#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posekernel/scene_io.hpp"
#include "posekernel/signals.hpp"
#include "posekernel/voxel.hpp"

namespace pk::io {

constexpr std::size_t kMaxGridVoxels = std::size_t(1) << 28;

struct TrainSpec {
    std::size_t train_samples = 200;
    std::size_t test_samples = 50;
    std::size_t epochs = 20;
    double learning_rate = 0.01;
    double sigma_m = 0.15;
    double pixel_noise_px = 0.0;
    std::vector<std::size_t> stem_channels{4, 4, 4};
    std::size_t stage_hidden_channels = 8;
    std::size_t stage_hidden_layers = 2;
    std::size_t stages = 2;
    bool use_visual = true;
    double landmark_margin_m = 0.2;
};

/// One JSON document drives every subcommand; CLI flags override the seed
/// and output directory. Units are meters, seconds, and Hz.
struct ExperimentConfig {
    std::filesystem::path scene_path;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 1;
    double sample_rate_hz = 96000.0;
    VoxelGrid grid;
    ChirpSpec chirp;
    double fdm_guard_hz = 0.0;
    std::optional<double> deconv_epsilon;
    std::optional<std::size_t> output_taps;
    std::optional<double> noise_snr_db;
    double heatmap_sigma_px = 4.0;
    bool use_envelope = true;
    std::optional<Camera> camera;
    TrainSpec train;

    SceneFile scene;  // loaded from scene_path
};

/// Deterministic per-stream seed derivation (splitmix-style) so one config
/// seed drives every random draw in a run.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& config_dir,
                                     const std::string& where) {
    ExperimentConfig cfg;
    if (!j.is_object()) throw ValidationError(where + ": config must be a JSON object");
    if (!j.contains("scene")) throw ValidationError(where + ".scene: required path to a scene file");
    cfg.scene_path = config_dir / j.at("scene").get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    cfg.seed = j.value("seed", std::uint64_t(1));
    cfg.sample_rate_hz = j.value("sample_rate_hz", 96000.0);
    if (!(cfg.sample_rate_hz > 0.0)) throw ValidationError(where + ".sample_rate_hz: must be positive");

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        cfg.grid.origin = detail::parse_vec3(g.at("origin"), where + ".grid.origin");
        cfg.grid.cell_m = g.at("cell_m").get<double>();
        if (!g.contains("dims") || !g.at("dims").is_array() || g.at("dims").size() != 3) {
            throw ValidationError(where + ".grid.dims: expected 3 positive integers");
        }
        for (std::size_t a = 0; a < 3; ++a) cfg.grid.dims[a] = g.at("dims")[a].get<std::size_t>();
    }
    if (!(cfg.grid.cell_m > 0.0)) throw ValidationError(where + ".grid.cell_m: must be positive");
    if (cfg.grid.dims[0] == 0 || cfg.grid.dims[1] == 0 || cfg.grid.dims[2] == 0) {
        throw ValidationError(where + ".grid.dims: must be positive");
    }
    if (cfg.grid.voxel_count() > kMaxGridVoxels) {
        throw ValidationError(where + ".grid.dims: voxel count exceeds the 2^28 budget");
    }

    if (j.contains("chirp")) {
        const auto& c = j.at("chirp");
        cfg.chirp.f_start_hz = c.value("f_start_hz", cfg.chirp.f_start_hz);
        cfg.chirp.f_end_hz = c.value("f_end_hz", cfg.chirp.f_end_hz);
        cfg.chirp.duration_s = c.value("duration_s", cfg.chirp.duration_s);
        cfg.chirp.amplitude = c.value("amplitude", cfg.chirp.amplitude);
    }
    cfg.fdm_guard_hz = j.value("fdm_guard_hz", 0.0);
    if (j.contains("deconv")) {
        const auto& d = j.at("deconv");
        if (d.contains("epsilon") && !d.at("epsilon").is_null()) {
            cfg.deconv_epsilon = d.at("epsilon").get<double>();
        }
        if (d.contains("output_taps") && !d.at("output_taps").is_null()) {
            cfg.output_taps = d.at("output_taps").get<std::size_t>();
        }
    }
    if (j.contains("noise_snr_db") && !j.at("noise_snr_db").is_null()) {
        cfg.noise_snr_db = j.at("noise_snr_db").get<double>();
    }
    cfg.heatmap_sigma_px = j.value("heatmap_sigma_px", 4.0);
    cfg.use_envelope = j.value("use_envelope", true);
    if (j.contains("camera") && !j.at("camera").is_null()) {
        cfg.camera = parse_camera(j.at("camera"), where + ".camera");
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        TrainSpec& ts = cfg.train;
        ts.train_samples = t.value("train_samples", ts.train_samples);
        ts.test_samples = t.value("test_samples", ts.test_samples);
        ts.epochs = t.value("epochs", ts.epochs);
        ts.learning_rate = t.value("learning_rate", ts.learning_rate);
        ts.sigma_m = t.value("sigma_m", ts.sigma_m);
        ts.pixel_noise_px = t.value("pixel_noise_px", ts.pixel_noise_px);
        if (t.contains("stem_channels")) {
            ts.stem_channels = t.at("stem_channels").get<std::vector<std::size_t>>();
        }
        ts.stage_hidden_channels = t.value("stage_hidden_channels", ts.stage_hidden_channels);
        ts.stage_hidden_layers = t.value("stage_hidden_layers", ts.stage_hidden_layers);
        ts.stages = t.value("stages", ts.stages);
        ts.use_visual = t.value("use_visual", ts.use_visual);
        ts.landmark_margin_m = t.value("landmark_margin_m", ts.landmark_margin_m);
        if (ts.train_samples == 0 || ts.epochs == 0) {
            throw ValidationError(where + ".train: train_samples and epochs must be positive");
        }
        if (!(ts.learning_rate > 0.0)) throw ValidationError(where + ".train.learning_rate: must be positive");
        if (!(ts.sigma_m > 0.0)) throw ValidationError(where + ".train.sigma_m: must be positive");
    }

    cfg.scene = load_scene(cfg.scene_path);
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("config file not found: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file " + path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path(), path.string());
}

}  // namespace pk::io
