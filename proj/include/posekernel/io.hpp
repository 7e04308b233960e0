#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "posekernel/network.hpp"
#include "posekernel/vision.hpp"
#include "posekernel/voxel.hpp"

namespace pk::io {

constexpr std::uint32_t kPkvxVersion = 1;
constexpr std::uint32_t kPknnVersion = 1;

namespace detail {

struct Writer {
    std::string buf;

    void u8(std::uint8_t v) { buf.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
    void magic(const char* m) { buf.append(m, 4); }

    void save(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for write: " + path.string());
        f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!f) throw std::runtime_error("short write: " + path.string());
    }
};

struct Reader {
    std::vector<unsigned char> buf;
    std::size_t pos = 0;
    std::string name;

    explicit Reader(const std::filesystem::path& path) : name(path.string()) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open: " + name);
        buf.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("truncated file: " + name);
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
    void expect_magic(const char* m) {
        need(4);
        if (std::memcmp(buf.data() + pos, m, 4) != 0) {
            throw std::runtime_error(std::string("bad magic (expected ") + m + "): " + name);
        }
        pos += 4;
    }
};

inline std::string format_double(double v) {
    char tmp[40];
    std::snprintf(tmp, sizeof(tmp), "%.17g", v);
    return tmp;
}

inline std::string format_float(float v) {
    char tmp[40];
    std::snprintf(tmp, sizeof(tmp), "%.9g", static_cast<double>(v));
    return tmp;
}

}  // namespace detail

/// PKVX voxel-field container: magic "PKVX", version u32, dims 3*u32,
/// origin 3*f64 (meters), cell f64, channel count u32, then channels *
/// nx*ny*nz float32 values in x-fastest order. Little-endian throughout.
inline void write_pkvx(const std::filesystem::path& path, const VoxelField& field) {
    detail::Writer w;
    w.magic("PKVX");
    w.u32(kPkvxVersion);
    for (std::size_t d : field.grid.dims) w.u32(static_cast<std::uint32_t>(d));
    w.f64(field.grid.origin.x);
    w.f64(field.grid.origin.y);
    w.f64(field.grid.origin.z);
    w.f64(field.grid.cell_m);
    w.u32(static_cast<std::uint32_t>(field.channels));
    for (double v : field.values) w.f32(static_cast<float>(v));
    w.save(path);
}

inline VoxelField read_pkvx(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.expect_magic("PKVX");
    const std::uint32_t version = r.u32();
    if (version != kPkvxVersion) {
        throw std::runtime_error("unsupported PKVX version " + std::to_string(version) + ": " + r.name);
    }
    VoxelField field;
    for (std::size_t a = 0; a < 3; ++a) field.grid.dims[a] = r.u32();
    field.grid.origin.x = r.f64();
    field.grid.origin.y = r.f64();
    field.grid.origin.z = r.f64();
    field.grid.cell_m = r.f64();
    field.channels = r.u32();
    if (field.channels < 1 || field.grid.voxel_count() == 0) {
        throw std::runtime_error("degenerate PKVX dimensions: " + r.name);
    }
    field.values.resize(field.channels * field.grid.voxel_count());
    for (double& v : field.values) v = static_cast<double>(r.f32());
    return field;
}

/// PKHM 2D heatmap container: magic "PKHM", width u32, height u32, channel
/// count u32, then channels * W*H float32 values, x-fastest, little-endian.
inline void write_pkhm(const std::filesystem::path& path, const Heatmap2D& hm) {
    detail::Writer w;
    w.magic("PKHM");
    w.u32(static_cast<std::uint32_t>(hm.width));
    w.u32(static_cast<std::uint32_t>(hm.height));
    w.u32(static_cast<std::uint32_t>(hm.channels));
    for (double v : hm.values) w.f32(static_cast<float>(v));
    w.save(path);
}

inline Heatmap2D read_pkhm(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.expect_magic("PKHM");
    Heatmap2D hm;
    hm.width = r.u32();
    hm.height = r.u32();
    hm.channels = r.u32();
    if (hm.width == 0 || hm.height == 0 || hm.channels == 0) {
        throw std::runtime_error("degenerate PKHM dimensions: " + r.name);
    }
    hm.values.resize(hm.width * hm.height * hm.channels);
    for (double& v : hm.values) v = static_cast<double>(r.f32());
    return hm;
}

/// PKNN checkpoint: magic "PKNN", version u32, net manifest (landmarks,
/// use_visual, stem/stage layer shapes), then float64 weights and biases in
/// layer order. Little-endian.
inline void write_pknn(const std::filesystem::path& path, const net::PoseNet& netw) {
    detail::Writer w;
    w.magic("PKNN");
    w.u32(kPknnVersion);
    w.u32(static_cast<std::uint32_t>(netw.config.landmarks));
    w.u8(netw.config.use_visual ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(netw.stem.size()));
    w.u32(static_cast<std::uint32_t>(netw.stages.size()));

    auto put_header = [&](const net::Conv3Layer& l) {
        w.u32(static_cast<std::uint32_t>(l.in_channels));
        w.u32(static_cast<std::uint32_t>(l.out_channels));
        w.u32(static_cast<std::uint32_t>(l.kernel));
        w.u8(l.activation == net::Activation::rectifier ? 1 : 0);
    };
    for (const auto& l : netw.stem) put_header(l);
    for (const auto& block : netw.stages) {
        w.u32(static_cast<std::uint32_t>(block.size()));
        for (const auto& l : block) put_header(l);
    }
    auto put_params = [&](const net::Conv3Layer& l) {
        for (double v : l.weights) w.f64(v);
        for (double v : l.bias) w.f64(v);
    };
    for (const auto& l : netw.stem) put_params(l);
    for (const auto& block : netw.stages) {
        for (const auto& l : block) put_params(l);
    }
    w.save(path);
}

inline net::PoseNet read_pknn(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.expect_magic("PKNN");
    const std::uint32_t version = r.u32();
    if (version != kPknnVersion) {
        throw std::runtime_error("unsupported PKNN version " + std::to_string(version) + ": " + r.name);
    }
    net::PoseNet netw;
    netw.config.landmarks = r.u32();
    netw.config.use_visual = r.u8() != 0;
    const std::uint32_t stem_count = r.u32();
    const std::uint32_t stage_count = r.u32();
    netw.config.stages = stage_count;

    auto get_header = [&]() {
        net::Conv3Layer l;
        l.in_channels = r.u32();
        l.out_channels = r.u32();
        l.kernel = r.u32();
        l.activation = r.u8() ? net::Activation::rectifier : net::Activation::identity;
        return l;
    };
    for (std::uint32_t i = 0; i < stem_count; ++i) netw.stem.push_back(get_header());
    for (std::uint32_t s = 0; s < stage_count; ++s) {
        const std::uint32_t layers = r.u32();
        std::vector<net::Conv3Layer> block;
        for (std::uint32_t l = 0; l < layers; ++l) block.push_back(get_header());
        netw.stages.push_back(std::move(block));
    }
    auto get_params = [&](net::Conv3Layer& l) {
        const std::size_t k3 = l.kernel * l.kernel * l.kernel;
        l.weights.resize(l.out_channels * l.in_channels * k3);
        for (double& v : l.weights) v = r.f64();
        l.bias.resize(l.out_channels);
        for (double& v : l.bias) v = r.f64();
    };
    for (auto& l : netw.stem) get_params(l);
    for (auto& block : netw.stages) {
        for (auto& l : block) get_params(l);
    }

    netw.config.stem_channels.clear();
    for (const auto& l : netw.stem) netw.config.stem_channels.push_back(l.out_channels);
    if (!netw.stages.empty()) {
        netw.config.stage_hidden_layers = netw.stages.front().size() - 1;
        netw.config.stage_hidden_channels =
            netw.stages.front().size() > 1 ? netw.stages.front().front().out_channels
                                           : netw.config.landmarks;
    }
    return netw;
}

struct PgmNormalization {
    double min = 0.0;
    double max = 0.0;
};

/// Writes one 8-bit binary PGM per z-slice of every channel, min-max
/// normalized with a single global pair of constants. Files are named
/// slice_c<channel>_z<k>.pgm under out_dir.
inline PgmNormalization write_pgm_slices(const std::filesystem::path& out_dir, const VoxelField& field) {
    std::filesystem::create_directories(out_dir);
    PgmNormalization norm;
    norm.min = *std::min_element(field.values.begin(), field.values.end());
    norm.max = *std::max_element(field.values.begin(), field.values.end());
    const double span = norm.max - norm.min;

    const std::size_t nx = field.grid.dims[0];
    const std::size_t ny = field.grid.dims[1];
    const std::size_t nz = field.grid.dims[2];
    for (std::size_t c = 0; c < field.channels; ++c) {
        for (std::size_t k = 0; k < nz; ++k) {
            std::string body = "P5\n" + std::to_string(nx) + " " + std::to_string(ny) + "\n255\n";
            for (std::size_t j = 0; j < ny; ++j) {
                for (std::size_t i = 0; i < nx; ++i) {
                    const double v = field.at(c, i, j, k);
                    const double scaled = span > 0.0 ? (v - norm.min) / span : 0.0;
                    body.push_back(static_cast<char>(
                        static_cast<unsigned char>(std::lround(255.0 * scaled))));
                }
            }
            const std::string name = "slice_c" + std::to_string(c) + "_z" + std::to_string(k) + ".pgm";
            std::ofstream f(out_dir / name, std::ios::binary);
            if (!f) throw std::runtime_error("cannot open for write: " + (out_dir / name).string());
            f.write(body.data(), static_cast<std::streamsize>(body.size()));
        }
    }
    return norm;
}

/// CSV export of a voxel field: header then one row (channel,i,j,k,value)
/// per voxel, printed with enough digits to round-trip float32 exactly.
inline void write_field_csv(const std::filesystem::path& path, const VoxelField& field) {
    std::string out = "channel,i,j,k,value\n";
    for (std::size_t c = 0; c < field.channels; ++c) {
        for (std::size_t k = 0; k < field.grid.dims[2]; ++k) {
            for (std::size_t j = 0; j < field.grid.dims[1]; ++j) {
                for (std::size_t i = 0; i < field.grid.dims[0]; ++i) {
                    out += std::to_string(c) + "," + std::to_string(i) + "," + std::to_string(j) +
                           "," + std::to_string(k) + "," +
                           detail::format_float(static_cast<float>(field.at(c, i, j, k))) + "\n";
                }
            }
        }
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path.string());
    f << out;
}

inline VoxelField read_field_csv(const std::filesystem::path& path, const VoxelGrid& grid,
                                 std::size_t channels) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    VoxelField field = VoxelField::zeros(grid, channels);
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::size_t c, i, j, k;
        double v;
        if (std::sscanf(line.c_str(), "%zu,%zu,%zu,%zu,%lf", &c, &i, &j, &k, &v) != 5) {
            throw std::runtime_error("malformed CSV row in " + path.string() + ": " + line);
        }
        field.at(c, i, j, k) = v;
    }
    return field;
}

/// Impulse-response CSV: rows of (tap_index, amplitude).
inline void write_taps_csv(const std::filesystem::path& path, const ImpulseResponse& ir) {
    std::string out = "tap_index,amplitude\n";
    for (std::size_t i = 0; i < ir.taps.size(); ++i) {
        out += std::to_string(i) + "," + detail::format_double(ir.taps[i]) + "\n";
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path.string());
    f << out;
}

}  // namespace pk::io
