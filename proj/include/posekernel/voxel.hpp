#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "posekernel/geometry.hpp"
#include "posekernel/roomsim.hpp"

namespace pk {

/// Regular metric 3D lattice. origin is the min corner; the center of voxel
/// (i,j,k) is origin + cell_m * (i+1/2, j+1/2, k+1/2).
struct VoxelGrid {
    Vec3 origin;
    double cell_m = 0.05;
    std::array<std::size_t, 3> dims{70, 70, 50};

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    Vec3 center(std::size_t i, std::size_t j, std::size_t k) const {
        return {origin.x + cell_m * (static_cast<double>(i) + 0.5),
                origin.y + cell_m * (static_cast<double>(j) + 0.5),
                origin.z + cell_m * (static_cast<double>(k) + 0.5)};
    }

    /// x-fastest linear order, shared by every serialized form.
    std::size_t linear_index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + dims[0] * (j + dims[1] * k);
    }

    double cell_diagonal_m() const { return cell_m * std::sqrt(3.0); }

    friend bool operator==(const VoxelGrid& a, const VoxelGrid& b) {
        return a.origin == b.origin && a.cell_m == b.cell_m && a.dims == b.dims;
    }
};

/// C scalar channels over a grid, stored channel-major with x-fastest order
/// inside each channel.
struct VoxelField {
    VoxelGrid grid;
    std::size_t channels = 1;
    std::vector<double> values;
    bool envelope_encoded = false;

    static VoxelField zeros(const VoxelGrid& grid, std::size_t channels) {
        if (channels < 1) throw std::invalid_argument("VoxelField: channel count must be at least 1");
        VoxelField f;
        f.grid = grid;
        f.channels = channels;
        f.values.assign(channels * grid.voxel_count(), 0.0);
        return f;
    }

    double at(std::size_t c, std::size_t i, std::size_t j, std::size_t k) const {
        return values[c * grid.voxel_count() + grid.linear_index(i, j, k)];
    }
    double& at(std::size_t c, std::size_t i, std::size_t j, std::size_t k) {
        return values[c * grid.voxel_count() + grid.linear_index(i, j, k)];
    }
};

/// Round-trip time of flight speaker -> X -> microphone in seconds.
inline double arrival_time(Vec3 x, Vec3 s_spk, Vec3 s_mic, double v) {
    if (!(v > 0.0)) throw std::invalid_argument("arrival_time: speed of sound must be positive");
    return (distance(s_spk, x) + distance(s_mic, x)) / v;
}

namespace detail {

/// Linear interpolation of an impulse response at a fractional tap position.
/// Negative positions and positions past the last tap give 0.
inline double sample_taps(const std::vector<double>& taps, double pos) {
    if (pos < 0.0) return 0.0;
    const auto i0 = static_cast<std::size_t>(pos);
    if (i0 >= taps.size()) return 0.0;
    const double frac = pos - static_cast<double>(i0);
    const double a = taps[i0];
    const double b = (i0 + 1 < taps.size()) ? taps[i0 + 1] : 0.0;
    return a * (1.0 - frac) + b * frac;
}

}  // namespace detail

/// Spatial encoding of a pose kernel: each voxel center X takes the kernel
/// value at its arrival time t_X.
inline VoxelField encode_kernel(const ImpulseResponse& k, Vec3 s_spk, Vec3 s_mic, double v,
                                const VoxelGrid& grid) {
    if (k.taps.empty()) throw std::invalid_argument("encode_kernel: empty kernel");
    if (!(v > 0.0)) throw std::invalid_argument("encode_kernel: speed of sound must be positive");

    VoxelField field = VoxelField::zeros(grid, 1);
    std::size_t idx = 0;
    for (std::size_t kk = 0; kk < grid.dims[2]; ++kk) {
        for (std::size_t jj = 0; jj < grid.dims[1]; ++jj) {
            for (std::size_t ii = 0; ii < grid.dims[0]; ++ii, ++idx) {
                const Vec3 c = grid.center(ii, jj, kk);
                const double t = (distance(s_spk, c) + distance(s_mic, c)) / v;
                field.values[idx] = detail::sample_taps(k.taps, t * k.sample_rate_hz);
            }
        }
    }
    return field;
}

namespace detail {

inline void check_fusable(std::span<const VoxelField> fields) {
    if (fields.empty()) throw std::invalid_argument("fuse: need at least one field");
    for (const VoxelField& f : fields) {
        if (f.channels != 1) throw std::invalid_argument("fuse: fields must be single-channel");
        if (!(f.grid == fields.front().grid)) throw std::invalid_argument("fuse: grid mismatch");
    }
}

}  // namespace detail

/// Element-wise maximum across single-channel fields on one grid.
inline VoxelField fuse_max(std::span<const VoxelField> fields) {
    detail::check_fusable(fields);
    VoxelField out = fields.front();
    for (std::size_t f = 1; f < fields.size(); ++f) {
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] = std::max(out.values[i], fields[f].values[i]);
        }
    }
    return out;
}

/// Element-wise product across single-channel nonnegative fields.
inline VoxelField fuse_product(std::span<const VoxelField> fields) {
    detail::check_fusable(fields);
    for (const VoxelField& f : fields) {
        for (double v : f.values) {
            if (v < 0.0) throw std::invalid_argument("fuse_product: negative input value");
        }
    }
    VoxelField out = fields.front();
    for (std::size_t f = 1; f < fields.size(); ++f) {
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            out.values[i] *= fields[f].values[i];
        }
    }
    return out;
}

struct GridArgmax {
    std::array<std::size_t, 3> index{0, 0, 0};
    Vec3 position;
    double value = 0.0;
};

/// Location of the channel maximum. Ties resolve to the lowest linear index
/// (x-fastest scan order).
inline GridArgmax grid_argmax(const VoxelField& field, std::size_t channel) {
    if (channel >= field.channels) throw std::invalid_argument("grid_argmax: channel out of range");
    const std::size_t base = channel * field.grid.voxel_count();
    std::size_t best = 0;
    double best_value = field.values[base];
    for (std::size_t i = 1; i < field.grid.voxel_count(); ++i) {
        if (field.values[base + i] > best_value) {
            best_value = field.values[base + i];
            best = i;
        }
    }
    GridArgmax out;
    const std::size_t nx = field.grid.dims[0];
    const std::size_t ny = field.grid.dims[1];
    out.index = {best % nx, (best / nx) % ny, best / (nx * ny)};
    out.position = field.grid.center(out.index[0], out.index[1], out.index[2]);
    out.value = best_value;
    return out;
}

}  // namespace pk
