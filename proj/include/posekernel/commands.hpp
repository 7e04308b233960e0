#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "posekernel/config.hpp"
#include "posekernel/io.hpp"
#include "posekernel/kernel.hpp"
#include "posekernel/metrics.hpp"
#include "posekernel/network.hpp"
#include "posekernel/roomsim.hpp"
#include "posekernel/scene_io.hpp"
#include "posekernel/signals.hpp"
#include "posekernel/vision.hpp"
#include "posekernel/voxel.hpp"
#include "posekernel/wav.hpp"

namespace pk::cli {

namespace fs = std::filesystem;
using io::ExperimentConfig;
using io::ValidationError;

/// Ratio of extracted-kernel energy to empty-room kernel energy below which
/// a capture is reported as having no target in it.
constexpr double kNoTargetEnergyRatio = 1e-3;

namespace detail {

inline double energy(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

inline std::string pair_stem(std::size_t speaker, std::size_t mic) {
    return "s" + std::to_string(speaker) + "_m" + std::to_string(mic);
}

inline void write_meta(const fs::path& out_dir, const std::string& command, std::uint64_t seed) {
    nlohmann::json j;
    j["command"] = command;
    j["seed"] = seed;
    std::ofstream f(out_dir / (command + "_meta.json"));
    if (!f) throw std::runtime_error("cannot write meta sidecar in " + out_dir.string());
    f << j.dump(2) << "\n";
}

}  // namespace detail

/// Per-speaker chirps on disjoint FDM bands plus the deconvolution tap
/// budget shared by the whole pipeline.
struct PipelineSetup {
    FdmPlan plan;
    std::vector<Waveform> chirps;
    std::size_t output_taps = 0;
};

inline PipelineSetup make_setup(const ExperimentConfig& cfg) {
    const Scene& scene = cfg.scene.scene;
    PipelineSetup setup;
    try {
        setup.plan = fdm_partition(cfg.chirp.f_start_hz, cfg.chirp.f_end_hz,
                                   static_cast<int>(scene.speakers.size()), cfg.fdm_guard_hz);
        for (const FdmBand& band : setup.plan.bands) {
            setup.chirps.push_back(gen_chirp(
                ChirpSpec{band.lo_hz, band.hi_hz, cfg.chirp.duration_s, cfg.chirp.amplitude},
                cfg.sample_rate_hz));
        }
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }

    if (cfg.output_taps) {
        setup.output_taps = *cfg.output_taps;
        return setup;
    }
    // Default tap budget: twice the diagonal of the box spanning the room,
    // the grid, and every transducer covers all physical delays.
    Vec3 lo = scene.speakers.front();
    Vec3 hi = lo;
    auto grow = [&](Vec3 p) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    };
    for (Vec3 p : scene.speakers) grow(p);
    for (Vec3 p : scene.microphones) grow(p);
    if (scene.room) {
        grow({0, 0, 0});
        grow(*scene.room);
    }
    grow(cfg.grid.origin);
    grow(cfg.grid.origin + cfg.grid.cell_m * Vec3{static_cast<double>(cfg.grid.dims[0]),
                                                  static_cast<double>(cfg.grid.dims[1]),
                                                  static_cast<double>(cfg.grid.dims[2])});
    const double diag = distance(lo, hi);
    setup.output_taps = static_cast<std::size_t>(
                            std::ceil(2.0 * diag / scene.speed_of_sound_mps * cfg.sample_rate_hz)) +
                        4;
    return setup;
}

struct SimulateResult {
    std::vector<fs::path> wav_paths;
    fs::path truth_path;
};

/// Renders per-microphone empty and with-body recordings (all speakers play
/// their FDM chirps simultaneously) plus a ground-truth JSON with reflector
/// positions and per-pair tap lists.
inline SimulateResult cmd_simulate(const ExperimentConfig& cfg) {
    const Scene& scene = cfg.scene.scene;
    const ReflectorCloud& body = cfg.scene.reflectors;
    const PipelineSetup setup = make_setup(cfg);
    fs::create_directories(cfg.out_dir);

    SimulateResult result;
    for (std::size_t i = 0; i < scene.microphones.size(); ++i) {
        Waveform empty_sum{{}, cfg.sample_rate_hz};
        Waveform full_sum{{}, cfg.sample_rate_hz};
        auto accumulate = [](Waveform& dst, const Waveform& src) {
            if (dst.samples.size() < src.samples.size()) dst.samples.resize(src.samples.size(), 0.0);
            for (std::size_t n = 0; n < src.samples.size(); ++n) dst.samples[n] += src.samples[n];
        };
        for (std::size_t j = 0; j < scene.speakers.size(); ++j) {
            accumulate(empty_sum, simulate_received(scene, std::nullopt, setup.chirps[j], {j, i}));
            accumulate(full_sum, simulate_received(scene, body, setup.chirps[j], {j, i}));
        }
        if (cfg.noise_snr_db) {
            add_awgn(empty_sum, *cfg.noise_snr_db, io::mix_seed(cfg.seed, 2 * i));
            add_awgn(full_sum, *cfg.noise_snr_db, io::mix_seed(cfg.seed, 2 * i + 1));
        }
        const fs::path empty_path = cfg.out_dir / ("mic" + std::to_string(i) + "_empty.wav");
        const fs::path full_path = cfg.out_dir / ("mic" + std::to_string(i) + "_full.wav");
        wav::write_wav(empty_path, empty_sum);
        wav::write_wav(full_path, full_sum);
        result.wav_paths.push_back(empty_path);
        result.wav_paths.push_back(full_path);
    }

    nlohmann::json truth;
    truth["seed"] = cfg.seed;
    truth["sample_rate_hz"] = cfg.sample_rate_hz;
    truth["reflectors"] = nlohmann::json::array();
    for (const Reflector& r : body.points) {
        truth["reflectors"].push_back(
            {{"position", io::detail::vec3_json(r.position)}, {"gain", r.gain}});
    }
    truth["speakers"] = nlohmann::json::array();
    for (Vec3 s : scene.speakers) truth["speakers"].push_back(io::detail::vec3_json(s));
    truth["microphones"] = nlohmann::json::array();
    for (Vec3 m : scene.microphones) truth["microphones"].push_back(io::detail::vec3_json(m));
    truth["pairs"] = nlohmann::json::array();
    for (std::size_t j = 0; j < scene.speakers.size(); ++j) {
        for (std::size_t i = 0; i < scene.microphones.size(); ++i) {
            nlohmann::json taps = nlohmann::json::array();
            for (const Reflector& r : body.points) {
                const double d_spk = distance(scene.speakers[j], r.position);
                const double d_mic = distance(scene.microphones[i], r.position);
                const double delay =
                    (d_spk + d_mic) / scene.speed_of_sound_mps * cfg.sample_rate_hz;
                const double gain = r.gain / (std::max(d_spk, 0.1) * std::max(d_mic, 0.1));
                taps.push_back({{"delay_samples", delay}, {"gain", gain}});
            }
            truth["pairs"].push_back({{"speaker", j}, {"mic", i}, {"taps", taps}});
        }
    }
    result.truth_path = cfg.out_dir / "truth.json";
    std::ofstream tf(result.truth_path);
    tf << truth.dump(2) << "\n";
    detail::write_meta(cfg.out_dir, "simulate", cfg.seed);
    return result;
}

struct PairKernel {
    std::size_t speaker = 0;
    std::size_t mic = 0;
    ImpulseResponse kernel;
    double energy_ratio = 0.0;  // extracted energy / empty-room kernel energy
    fs::path wav_path;
    fs::path csv_path;
};

struct KernelResult {
    std::vector<PairKernel> kernels;
    bool no_target = false;
};

/// Extracts one pose kernel per (speaker, mic) pair from the multiplexed
/// recordings by band-masked deconvolution and empty-room subtraction.
inline KernelResult cmd_kernel(const ExperimentConfig& cfg) {
    const Scene& scene = cfg.scene.scene;
    const PipelineSetup setup = make_setup(cfg);

    std::vector<Waveform> empty_recs;
    std::vector<Waveform> full_recs;
    for (std::size_t i = 0; i < scene.microphones.size(); ++i) {
        const fs::path empty_path = cfg.out_dir / ("mic" + std::to_string(i) + "_empty.wav");
        const fs::path full_path = cfg.out_dir / ("mic" + std::to_string(i) + "_full.wav");
        if (!fs::exists(empty_path)) {
            throw ValidationError("missing empty-room recording " + empty_path.string() +
                                  "; capture the empty room once per session before any "
                                  "recordings with a person present");
        }
        if (!fs::exists(full_path)) {
            throw ValidationError("missing recording " + full_path.string());
        }
        empty_recs.push_back(wav::read_wav(empty_path));
        full_recs.push_back(wav::read_wav(full_path));
    }

    KernelResult result;
    double max_ratio = 0.0;
    for (std::size_t j = 0; j < scene.speakers.size(); ++j) {
        DeconvConfig dc;
        dc.epsilon = cfg.deconv_epsilon;
        dc.band_lo_hz = setup.plan.bands[j].lo_hz;
        dc.band_hi_hz = setup.plan.bands[j].hi_hz;
        dc.output_taps = setup.output_taps;
        for (std::size_t i = 0; i < scene.microphones.size(); ++i) {
            const ImpulseResponse full_k = deconvolve(full_recs[i], setup.chirps[j], dc);
            const ImpulseResponse empty_k = deconvolve(empty_recs[i], setup.chirps[j], dc);
            PairKernel pk;
            pk.speaker = j;
            pk.mic = i;
            pk.kernel = extract_pose_kernel(full_k, empty_k);
            const double empty_energy = detail::energy(empty_k.taps);
            pk.energy_ratio = empty_energy > 0.0
                                  ? detail::energy(pk.kernel.taps) / empty_energy
                                  : std::numeric_limits<double>::infinity();
            max_ratio = std::max(max_ratio, pk.energy_ratio);
            pk.wav_path = cfg.out_dir / ("kernel_" + detail::pair_stem(j, i) + ".wav");
            pk.csv_path = cfg.out_dir / ("kernel_" + detail::pair_stem(j, i) + ".csv");
            wav::write_wav(pk.wav_path, Waveform{pk.kernel.taps, pk.kernel.sample_rate_hz});
            io::write_taps_csv(pk.csv_path, pk.kernel);
            result.kernels.push_back(std::move(pk));
        }
    }
    result.no_target = max_ratio < kNoTargetEnergyRatio;
    detail::write_meta(cfg.out_dir, "kernel", cfg.seed);
    return result;
}

struct EncodeResult {
    std::vector<fs::path> field_paths;
};

/// Spatially encodes every extracted kernel onto the configured grid and
/// writes one PKVX field per pair.
inline EncodeResult cmd_encode(const ExperimentConfig& cfg) {
    const Scene& scene = cfg.scene.scene;
    EncodeResult result;
    for (std::size_t j = 0; j < scene.speakers.size(); ++j) {
        for (std::size_t i = 0; i < scene.microphones.size(); ++i) {
            const fs::path kernel_path = cfg.out_dir / ("kernel_" + detail::pair_stem(j, i) + ".wav");
            if (!fs::exists(kernel_path)) {
                throw ValidationError("missing kernel file " + kernel_path.string() +
                                      "; run the kernel command first");
            }
            const Waveform kw = wav::read_wav(kernel_path);
            ImpulseResponse k{kw.samples, kw.sample_rate_hz};
            if (cfg.use_envelope) k = envelope(k);
            VoxelField field = encode_kernel(k, scene.speakers[j], scene.microphones[i],
                                             scene.speed_of_sound_mps, cfg.grid);
            field.envelope_encoded = cfg.use_envelope;
            const fs::path out = cfg.out_dir / ("field_" + detail::pair_stem(j, i) + ".pkvx");
            io::write_pkvx(out, field);
            result.field_paths.push_back(out);
        }
    }
    detail::write_meta(cfg.out_dir, "encode", cfg.seed);
    return result;
}

struct LocalizeResult {
    std::vector<Vec3> estimates;
    std::vector<std::string> warnings;
    fs::path csv_path;
};

namespace detail {

inline bool all_collinear(const std::vector<Vec3>& points, double tol = 1e-9) {
    if (points.size() < 3) return true;
    const Vec3 p0 = points.front();
    Vec3 dir{0, 0, 0};
    for (const Vec3& p : points) {
        if (distance(p, p0) > tol) {
            dir = p - p0;
            break;
        }
    }
    if (norm(dir) <= tol) return true;
    for (const Vec3& p : points) {
        const Vec3 d = p - p0;
        const Vec3 c{dir.y * d.z - dir.z * d.y, dir.z * d.x - dir.x * d.z,
                     dir.x * d.y - dir.y * d.x};
        if (norm(c) > tol * std::max(1.0, norm(dir) * norm(d))) return false;
    }
    return true;
}

}  // namespace detail

/// Geometric localizer: envelope-encodes every extracted kernel, fuses by
/// element-wise product (together with the visual channel when heatmaps are
/// supplied), and reads out the argmax voxel center per landmark.
inline LocalizeResult cmd_localize(const ExperimentConfig& cfg,
                                   const std::optional<fs::path>& heatmap_path = std::nullopt) {
    const Scene& scene = cfg.scene.scene;
    LocalizeResult result;

    std::vector<VoxelField> fields;
    std::vector<Vec3> foci;
    for (std::size_t j = 0; j < scene.speakers.size(); ++j) {
        for (std::size_t i = 0; i < scene.microphones.size(); ++i) {
            const fs::path kernel_path = cfg.out_dir / ("kernel_" + detail::pair_stem(j, i) + ".wav");
            if (!fs::exists(kernel_path)) continue;
            const Waveform kw = wav::read_wav(kernel_path);
            const ImpulseResponse k = envelope(ImpulseResponse{kw.samples, kw.sample_rate_hz});
            VoxelField f = encode_kernel(k, scene.speakers[j], scene.microphones[i],
                                         scene.speed_of_sound_mps, cfg.grid);
            f.envelope_encoded = true;
            fields.push_back(std::move(f));
            foci.push_back(scene.speakers[j]);
            foci.push_back(scene.microphones[i]);
        }
    }
    if (fields.empty()) {
        throw ValidationError("no kernel files found in " + cfg.out_dir.string() +
                              "; run the kernel command first");
    }
    if (fields.size() < 2) {
        result.warnings.push_back(
            "single speaker/mic pair: any point on the matching ellipsoid explains the kernel; "
            "the reported position is ambiguous");
    }
    if (detail::all_collinear(foci)) {
        result.warnings.push_back(
            "degenerate geometry: all pair foci are collinear; the estimate is ambiguous around "
            "the axis");
    }

    const VoxelField audio = fuse_product(fields);
    VoxelField fused = audio;

    if (heatmap_path) {
        if (!cfg.camera) {
            throw ValidationError("a camera must be configured when heatmaps are supplied");
        }
        const Heatmap2D hm = io::read_pkhm(*heatmap_path);
        const VoxelField visual = encode_visual(hm, *cfg.camera, cfg.grid);
        for (std::size_t c = 0; c < visual.channels; ++c) {
            VoxelField channel = VoxelField::zeros(cfg.grid, 1);
            const std::size_t voxels = cfg.grid.voxel_count();
            for (std::size_t v = 0; v < voxels; ++v) channel.values[v] = visual.values[c * voxels + v];
            const std::vector<VoxelField> pairwise{audio, channel};
            const VoxelField combined = fuse_product(pairwise);
            result.estimates.push_back(grid_argmax(combined, 0).position);
            if (c == 0) fused = combined;
        }
    } else {
        result.estimates.push_back(grid_argmax(audio, 0).position);
    }

    nlohmann::json out;
    out["estimates"] = nlohmann::json::array();
    for (Vec3 e : result.estimates) out["estimates"].push_back(io::detail::vec3_json(e));
    out["warnings"] = result.warnings;
    std::ofstream jf(cfg.out_dir / "estimate.json");
    jf << out.dump(2) << "\n";

    result.csv_path = cfg.out_dir / "estimate.csv";
    std::string csv = "landmark,x_m,y_m,z_m\n";
    for (std::size_t c = 0; c < result.estimates.size(); ++c) {
        csv += std::to_string(c) + "," + io::detail::format_double(result.estimates[c].x) + "," +
               io::detail::format_double(result.estimates[c].y) + "," +
               io::detail::format_double(result.estimates[c].z) + "\n";
    }
    std::ofstream cf(result.csv_path);
    cf << csv;

    io::write_pgm_slices(cfg.out_dir / "localize_slices", fused);
    detail::write_meta(cfg.out_dir, "localize", cfg.seed);
    return result;
}

/// Synthetic toy scenes for training and evaluation: one reflector acts as
/// the landmark; the audio path runs the full simulate/deconvolve/encode
/// pipeline per diagonal (speaker i, mic i) pair.
struct ToyDataset {
    std::vector<net::TrainingSample> samples;
    std::vector<Vec3> truths;
};

inline ToyDataset make_toy_dataset(const ExperimentConfig& cfg, std::size_t count,
                                   std::uint64_t stream_base) {
    const Scene& scene = cfg.scene.scene;
    const PipelineSetup setup = make_setup(cfg);
    const std::size_t n_pairs = std::min(scene.speakers.size(), scene.microphones.size());
    if (n_pairs == 0) throw ValidationError("toy dataset: scene needs speakers and microphones");
    if (cfg.train.use_visual && !cfg.camera) {
        throw ValidationError("toy dataset: a camera must be configured when use_visual is set");
    }

    const Vec3 span{cfg.grid.cell_m * static_cast<double>(cfg.grid.dims[0]),
                    cfg.grid.cell_m * static_cast<double>(cfg.grid.dims[1]),
                    cfg.grid.cell_m * static_cast<double>(cfg.grid.dims[2])};
    const double margin = cfg.train.landmark_margin_m;

    ToyDataset ds;
    for (std::size_t n = 0; n < count; ++n) {
        std::mt19937_64 rng(io::mix_seed(cfg.seed, stream_base + n));
        std::uniform_real_distribution<double> ux(cfg.grid.origin.x + margin,
                                                  cfg.grid.origin.x + span.x - margin);
        std::uniform_real_distribution<double> uy(cfg.grid.origin.y + margin,
                                                  cfg.grid.origin.y + span.y - margin);
        std::uniform_real_distribution<double> uz(cfg.grid.origin.z + margin,
                                                  cfg.grid.origin.z + span.z - margin);
        const Vec3 landmark{ux(rng), uy(rng), uz(rng)};
        const ReflectorCloud cloud{{Reflector{landmark, 1.0}}};

        net::TrainingSample sample;
        for (std::size_t p = 0; p < n_pairs; ++p) {
            Waveform full_sum{{}, cfg.sample_rate_hz};
            Waveform empty_sum{{}, cfg.sample_rate_hz};
            auto accumulate = [](Waveform& dst, const Waveform& src) {
                if (dst.samples.size() < src.samples.size()) dst.samples.resize(src.samples.size(), 0.0);
                for (std::size_t s = 0; s < src.samples.size(); ++s) dst.samples[s] += src.samples[s];
            };
            for (std::size_t j = 0; j < scene.speakers.size(); ++j) {
                accumulate(full_sum, simulate_received(scene, cloud, setup.chirps[j], {j, p}));
                accumulate(empty_sum, simulate_received(scene, std::nullopt, setup.chirps[j], {j, p}));
            }
            if (cfg.noise_snr_db) {
                add_awgn(full_sum, *cfg.noise_snr_db, io::mix_seed(cfg.seed, stream_base + n) ^ (2 * p));
                add_awgn(empty_sum, *cfg.noise_snr_db,
                         io::mix_seed(cfg.seed, stream_base + n) ^ (2 * p + 1));
            }
            DeconvConfig dc;
            dc.epsilon = cfg.deconv_epsilon;
            dc.band_lo_hz = setup.plan.bands[p].lo_hz;
            dc.band_hi_hz = setup.plan.bands[p].hi_hz;
            dc.output_taps = setup.output_taps;
            const ImpulseResponse extracted = extract_pose_kernel(
                deconvolve(full_sum, setup.chirps[p], dc), deconvolve(empty_sum, setup.chirps[p], dc));
            ImpulseResponse k = cfg.use_envelope ? envelope(extracted) : extracted;
            VoxelField field = encode_kernel(k, scene.speakers[p], scene.microphones[p],
                                             scene.speed_of_sound_mps, cfg.grid);
            field.envelope_encoded = cfg.use_envelope;
            // Spreading loss and band-limiting leave encoded kernels orders of
            // magnitude below the visual channel; max-normalize per field so
            // the network sees comparable scales.
            double peak = 0.0;
            for (double v : field.values) peak = std::max(peak, std::abs(v));
            if (peak > 0.0) {
                for (double& v : field.values) v /= peak;
            }
            sample.audio_fields.push_back(std::move(field));
        }

        if (cfg.camera) {
            std::optional<Pixel> px = project(*cfg.camera, landmark);
            Pixel center = px.value_or(Pixel{-1e9, -1e9});
            if (cfg.train.pixel_noise_px > 0.0) {
                std::normal_distribution<double> noise(0.0, cfg.train.pixel_noise_px);
                center.x += noise(rng);
                center.y += noise(rng);
            }
            const Heatmap2D hm = gaussian_heatmap({center}, cfg.heatmap_sigma_px, cfg.camera->width,
                                                  cfg.camera->height);
            sample.visual = encode_visual(hm, *cfg.camera, cfg.grid);
        } else {
            sample.visual = VoxelField::zeros(cfg.grid, 1);
        }
        sample.target = net::make_target({landmark}, cfg.grid, cfg.train.sigma_m);
        ds.samples.push_back(std::move(sample));
        ds.truths.push_back(landmark);
    }
    return ds;
}

struct TrainResult {
    fs::path checkpoint_path;
    net::TrainLog log;
};

/// Trains the toy multi-stage net on synthetic scenes generated from the
/// config; deterministic for a fixed seed.
inline TrainResult cmd_train(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    const ToyDataset ds = make_toy_dataset(cfg, cfg.train.train_samples, 1000);

    net::PoseNetConfig nc;
    nc.stem_channels = cfg.train.stem_channels;
    nc.stage_hidden_channels = cfg.train.stage_hidden_channels;
    nc.stage_hidden_layers = cfg.train.stage_hidden_layers;
    nc.stages = cfg.train.stages;
    nc.landmarks = 1;
    nc.use_visual = cfg.train.use_visual;
    nc.rng_seed = io::mix_seed(cfg.seed, 42);
    net::PoseNet network = net::make_pose_net(nc);

    TrainResult result;
    result.log = net::train_sgd(network, ds.samples, cfg.train.epochs, cfg.train.learning_rate);
    result.checkpoint_path = cfg.out_dir / "checkpoint.pknn";
    io::write_pknn(result.checkpoint_path, network);

    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < result.log.epoch_loss.size(); ++e) {
        csv += std::to_string(e + 1) + "," + io::detail::format_double(result.log.epoch_loss[e]) + "\n";
    }
    std::ofstream f(cfg.out_dir / "train_log.csv");
    f << csv;
    detail::write_meta(cfg.out_dir, "train", cfg.seed);
    return result;
}

struct EvalResult {
    double mpjpe_cm = 0.0;
    std::vector<std::pair<double, double>> pck;  // (threshold cm, fraction)
    fs::path metrics_path;
};

/// Evaluates a checkpoint on a freshly generated synthetic test set and
/// writes mean per-landmark error plus PCK@{10,20,30,40} cm.
inline EvalResult cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint) {
    if (!fs::exists(checkpoint)) throw ValidationError("checkpoint not found: " + checkpoint.string());
    net::PoseNet network = io::read_pknn(checkpoint);
    if (network.config.use_visual != cfg.train.use_visual) {
        throw ValidationError("checkpoint/config mismatch: use_visual differs");
    }
    fs::create_directories(cfg.out_dir);
    const ToyDataset ds = make_toy_dataset(cfg, cfg.train.test_samples, 2000000);

    std::vector<LandmarkFrame> frames;
    std::string samples_csv = "sample,error_cm\n";
    for (std::size_t n = 0; n < ds.samples.size(); ++n) {
        const std::vector<net::PoseHeatmaps3D> preds =
            net::forward(network, ds.samples[n].audio_fields, ds.samples[n].visual);
        const std::vector<Vec3> estimate = net::readout(preds.back());
        frames.push_back(LandmarkFrame{estimate, {ds.truths[n]}});
        samples_csv += std::to_string(n) + "," +
                       io::detail::format_double(distance(estimate[0], ds.truths[n]) * 100.0) + "\n";
    }

    EvalResult result;
    result.mpjpe_cm = mpjpe_cm(frames);
    for (double t : {10.0, 20.0, 30.0, 40.0}) result.pck.emplace_back(t, pck_at(frames, t));

    result.metrics_path = cfg.out_dir / "metrics.csv";
    std::string csv = "metric,value\n";
    csv += "mpjpe_cm," + io::detail::format_double(result.mpjpe_cm) + "\n";
    for (auto [t, v] : result.pck) {
        csv += "pck@" + std::to_string(static_cast<int>(t)) + "cm," + io::detail::format_double(v) + "\n";
    }
    std::ofstream f(result.metrics_path);
    f << csv;
    std::ofstream sf(cfg.out_dir / "eval_samples.csv");
    sf << samples_csv;
    detail::write_meta(cfg.out_dir, "eval", cfg.seed);
    return result;
}

struct ExportResult {
    std::size_t slice_count = 0;
    io::PgmNormalization normalization;
};

/// Exports a PKVX field as min-max normalized PGM z-slices plus CSV; the
/// normalization constants land in a JSON sidecar.
inline ExportResult cmd_export(const fs::path& field_path, const fs::path& out_dir) {
    const VoxelField field = io::read_pkvx(field_path);
    fs::create_directories(out_dir);
    ExportResult result;
    result.normalization = io::write_pgm_slices(out_dir / "slices", field);
    result.slice_count = field.channels * field.grid.dims[2];
    io::write_field_csv(out_dir / "field.csv", field);
    nlohmann::json j;
    j["min"] = result.normalization.min;
    j["max"] = result.normalization.max;
    std::ofstream f(out_dir / "normalization.json");
    f << j.dump(2) << "\n";
    return result;
}

}  // namespace pk::cli
