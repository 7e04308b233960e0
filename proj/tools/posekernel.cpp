#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "posekernel/commands.hpp"
#include "posekernel/config.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

pk::io::ExperimentConfig load(const CommonArgs& args) {
    pk::io::ExperimentConfig cfg = pk::io::load_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;       // flags win over the config file
    if (args.out_dir) cfg.out_dir = *args.out_dir;
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Experiment config JSON")->required();
    cmd->add_option("--seed", args.seed, "Override the config seed");
    cmd->add_option("--out", args.out_dir, "Override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"posekernel: acoustic pose-kernel simulation, extraction, and metric localization"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string heatmap_path;
    std::string checkpoint_path;
    std::string field_path;
    std::string export_out = "export";

    CLI::App* sim = app.add_subcommand("simulate", "Render per-mic recordings and ground truth");
    add_common(sim, args);
    CLI::App* ker = app.add_subcommand("kernel", "Extract pose kernels from recordings");
    add_common(ker, args);
    CLI::App* enc = app.add_subcommand("encode", "Encode kernels onto the voxel grid (PKVX)");
    add_common(enc, args);
    CLI::App* loc = app.add_subcommand("localize", "Geometric localization from encoded kernels");
    add_common(loc, args);
    loc->add_option("--heatmap", heatmap_path, "Optional PKHM 2D landmark heatmaps");
    CLI::App* train = app.add_subcommand("train", "Train the toy multi-stage 3D CNN");
    add_common(train, args);
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on synthetic scenes");
    add_common(eval, args);
    eval->add_option("--checkpoint", checkpoint_path, "PKNN checkpoint path")->required();
    CLI::App* exp = app.add_subcommand("export", "Export a PKVX field as PGM slices + CSV");
    exp->add_option("--field", field_path, "PKVX field file")->required();
    exp->add_option("--out", export_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            const auto result = pk::cli::cmd_simulate(load(args));
            std::cout << "wrote " << result.wav_paths.size() << " recordings and "
                      << result.truth_path.string() << "\n";
        } else if (ker->parsed()) {
            const auto result = pk::cli::cmd_kernel(load(args));
            std::cout << "extracted " << result.kernels.size() << " pose kernels\n";
            if (result.no_target) std::cout << "no target: kernel energy below threshold\n";
        } else if (enc->parsed()) {
            const auto result = pk::cli::cmd_encode(load(args));
            std::cout << "wrote " << result.field_paths.size() << " voxel fields\n";
        } else if (loc->parsed()) {
            std::optional<std::filesystem::path> hm;
            if (!heatmap_path.empty()) hm = heatmap_path;
            const auto result = pk::cli::cmd_localize(load(args), hm);
            for (const std::string& w : result.warnings) std::cout << "warning: " << w << "\n";
            for (std::size_t i = 0; i < result.estimates.size(); ++i) {
                const auto& e = result.estimates[i];
                std::cout << "landmark " << i << ": (" << e.x << ", " << e.y << ", " << e.z << ") m\n";
            }
        } else if (train->parsed()) {
            const auto result = pk::cli::cmd_train(load(args));
            std::cout << "checkpoint: " << result.checkpoint_path.string() << "\n";
            if (!result.log.epoch_loss.empty()) {
                std::cout << "loss: first epoch " << result.log.epoch_loss.front() << ", final epoch "
                          << result.log.epoch_loss.back() << "\n";
            }
        } else if (eval->parsed()) {
            const auto result = pk::cli::cmd_eval(load(args), checkpoint_path);
            std::cout << "mpjpe_cm " << result.mpjpe_cm << "\n";
            for (auto [t, v] : result.pck) std::cout << "pck@" << t << "cm " << v << "\n";
        } else if (exp->parsed()) {
            const auto result = pk::cli::cmd_export(field_path, export_out);
            std::cout << "wrote " << result.slice_count << " slices\n";
        }
    } catch (const pk::io::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
