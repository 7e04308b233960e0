#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "posekernel/io.hpp"
#include "posekernel/metrics.hpp"
#include "posekernel/network.hpp"
#include "posekernel/vision.hpp"
#include "oracles.hpp"

using namespace pk;

TEST_CASE("pkvx round trip preserves float32 values and grid metadata") {
    oracle::TempDir dir("pk_pkvx");
    std::mt19937_64 rng(3);

    VoxelGrid grid;
    grid.origin = {0.125, -2.5, 3.75};
    grid.cell_m = 0.05;
    grid.dims = {7, 5, 4};
    VoxelField field = VoxelField::zeros(grid, 3);
    field.values = oracle::random_samples(rng, field.values.size());

    const auto path = dir.path / "field.pkvx";
    io::write_pkvx(path, field);
    const VoxelField back = io::read_pkvx(path);

    REQUIRE(back.grid == grid);
    REQUIRE(back.channels == 3);
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        REQUIRE(back.values[i] == static_cast<double>(static_cast<float>(field.values[i])));
    }
}

TEST_CASE("pkvx rejects corrupt magic and version") {
    oracle::TempDir dir("pk_pkvx");
    const auto path = dir.path / "bad.pkvx";
    {
        std::ofstream f(path, std::ios::binary);
        f << "JUNKdata and more junk bytes here";
    }
    REQUIRE_THROWS_WITH(io::read_pkvx(path), Catch::Matchers::ContainsSubstring("bad magic"));

    VoxelGrid grid;
    grid.dims = {2, 2, 2};
    io::write_pkvx(path, VoxelField::zeros(grid, 1));
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(4);
        const char bad_version[4] = {9, 0, 0, 0};
        f.write(bad_version, 4);
    }
    REQUIRE_THROWS_WITH(io::read_pkvx(path), Catch::Matchers::ContainsSubstring("version"));
    REQUIRE_THROWS(io::read_pkvx(dir.path / "missing.pkvx"));
}

TEST_CASE("pkhm round trip") {
    oracle::TempDir dir("pk_pkhm");
    const Heatmap2D hm = gaussian_heatmap({Pixel{10.5, 7.25}, Pixel{3.0, 2.0}}, 2.5, 24, 16);
    const auto path = dir.path / "hm.pkhm";
    io::write_pkhm(path, hm);
    const Heatmap2D back = io::read_pkhm(path);
    REQUIRE(back.width == 24);
    REQUIRE(back.height == 16);
    REQUIRE(back.channels == 2);
    for (std::size_t i = 0; i < hm.values.size(); ++i) {
        REQUIRE(back.values[i] == static_cast<double>(static_cast<float>(hm.values[i])));
    }
}

TEST_CASE("pknn checkpoints restore the exact network") {
    oracle::TempDir dir("pk_pknn");
    net::PoseNetConfig cfg;
    cfg.stem_channels = {3, 4};
    cfg.stage_hidden_channels = 5;
    cfg.stage_hidden_layers = 2;
    cfg.stages = 3;
    cfg.landmarks = 2;
    cfg.use_visual = true;
    cfg.rng_seed = 17;
    const net::PoseNet original = net::make_pose_net(cfg);

    const auto path = dir.path / "model.pknn";
    io::write_pknn(path, original);
    const net::PoseNet restored = io::read_pknn(path);

    REQUIRE(restored.config.landmarks == 2);
    REQUIRE(restored.config.use_visual);
    REQUIRE(restored.stem.size() == original.stem.size());
    REQUIRE(restored.stages.size() == original.stages.size());
    for (std::size_t l = 0; l < original.stem.size(); ++l) {
        REQUIRE(restored.stem[l].weights == original.stem[l].weights);
        REQUIRE(restored.stem[l].bias == original.stem[l].bias);
        REQUIRE(restored.stem[l].kernel == original.stem[l].kernel);
        REQUIRE(restored.stem[l].activation == original.stem[l].activation);
    }
    for (std::size_t s = 0; s < original.stages.size(); ++s) {
        for (std::size_t l = 0; l < original.stages[s].size(); ++l) {
            REQUIRE(restored.stages[s][l].weights == original.stages[s][l].weights);
            REQUIRE(restored.stages[s][l].bias == original.stages[s][l].bias);
        }
    }

    // Behavioral equality on a random input.
    std::mt19937_64 rng(5);
    VoxelGrid grid;
    grid.cell_m = 0.1;
    grid.dims = {4, 3, 3};
    std::vector<VoxelField> audio;
    for (int m = 0; m < 2; ++m) {
        VoxelField f = VoxelField::zeros(grid, 1);
        f.values = oracle::random_samples(rng, grid.voxel_count());
        audio.push_back(f);
    }
    VoxelField visual = VoxelField::zeros(grid, 2);
    visual.values = oracle::random_samples(rng, 2 * grid.voxel_count());
    const auto out_a = net::forward(original, audio, visual);
    const auto out_b = net::forward(restored, audio, visual);
    for (std::size_t s = 0; s < out_a.size(); ++s) {
        REQUIRE(out_a[s].heatmaps.values == out_b[s].heatmaps.values);
    }
}

TEST_CASE("pgm slices carry the declared shape and normalization") {
    oracle::TempDir dir("pk_pgm");
    VoxelGrid grid;
    grid.dims = {6, 4, 3};
    grid.cell_m = 0.1;
    VoxelField field = VoxelField::zeros(grid, 1);
    field.at(0, 2, 1, 1) = 2.0;
    field.at(0, 3, 2, 2) = -1.0;

    const io::PgmNormalization norm = io::write_pgm_slices(dir.path, field);
    REQUIRE(norm.min == -1.0);
    REQUIRE(norm.max == 2.0);

    for (std::size_t k = 0; k < 3; ++k) {
        const auto slice = dir.path / ("slice_c0_z" + std::to_string(k) + ".pgm");
        REQUIRE(std::filesystem::exists(slice));
    }
    std::ifstream f(dir.path / "slice_c0_z1.pgm", std::ios::binary);
    std::string magic, dims_w, dims_h, maxval;
    f >> magic >> dims_w >> dims_h >> maxval;
    REQUIRE(magic == "P5");
    REQUIRE(dims_w == "6");
    REQUIRE(dims_h == "4");
    REQUIRE(maxval == "255");
    f.get();  // single whitespace before binary pixels
    std::vector<unsigned char> pixels(6 * 4);
    f.read(reinterpret_cast<char*>(pixels.data()), 24);
    // voxel (2,1,1): value 2.0 -> normalized 1.0 -> 255
    REQUIRE(static_cast<int>(pixels[1 * 6 + 2]) == 255);
    // zero background maps to round(255 * (0 - -1) / 3) = 85
    REQUIRE(static_cast<int>(pixels[0]) == 85);
}

TEST_CASE("field csv round trips at float32 precision") {
    oracle::TempDir dir("pk_csv");
    std::mt19937_64 rng(7);
    VoxelGrid grid;
    grid.dims = {4, 3, 2};
    grid.cell_m = 0.2;
    VoxelField field = VoxelField::zeros(grid, 2);
    field.values = oracle::random_samples(rng, field.values.size());

    const auto path = dir.path / "field.csv";
    io::write_field_csv(path, field);
    const VoxelField back = io::read_field_csv(path, grid, 2);
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        REQUIRE(static_cast<float>(back.values[i]) == static_cast<float>(field.values[i]));
    }
}

TEST_CASE("tap csv uses the documented two-column format") {
    oracle::TempDir dir("pk_csv");
    const ImpulseResponse ir{{0.5, -0.25, 0.0, 1.0}, 96000.0};
    const auto path = dir.path / "taps.csv";
    io::write_taps_csv(path, ir);

    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    REQUIRE(line == "tap_index,amplitude");
    std::getline(f, line);
    REQUIRE(line.rfind("0,0.5", 0) == 0);
    std::getline(f, line);
    REQUIRE(line.rfind("1,-0.25", 0) == 0);
}

TEST_CASE("pck is monotone and exact on oracle predictions") {
    std::mt19937_64 rng(11);
    std::vector<LandmarkFrame> frames;
    for (int n = 0; n < 10; ++n) {
        LandmarkFrame frame;
        for (int l = 0; l < 3; ++l) {
            const Vec3 truth = oracle::random_point(rng, {0, 0, 0}, {2, 2, 2});
            const Vec3 noise = oracle::random_point(rng, {-0.3, -0.3, -0.3}, {0.3, 0.3, 0.3});
            frame.truth.push_back(truth);
            frame.predicted.push_back(truth + noise);
        }
        frames.push_back(frame);
    }

    double prev = 0.0;
    for (double t : {5.0, 10.0, 20.0, 30.0, 40.0, 80.0}) {
        const double p = pck_at(frames, t);
        REQUIRE(p >= prev);
        prev = p;
    }
    REQUIRE(pck_at(frames, 100.0) == 1.0);

    std::vector<LandmarkFrame> oracle_frames = frames;
    for (auto& fr : oracle_frames) fr.predicted = fr.truth;
    REQUIRE(mpjpe_cm(oracle_frames) == 0.0);
    for (double t : {10.0, 20.0, 30.0, 40.0}) REQUIRE(pck_at(oracle_frames, t) == 1.0);

    REQUIRE(mpjpe_cm(frames) > 0.0);
    REQUIRE_THROWS_AS(mpjpe_cm({}), std::invalid_argument);
}
