#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "posekernel/geometry.hpp"
#include "posekernel/voxel.hpp"

namespace pk {

/// Pinhole camera. rotation maps world to camera coordinates; translation is
/// applied after rotation.
struct Camera {
    double fx = 500.0;
    double fy = 500.0;
    double cx = 320.0;
    double cy = 240.0;
    Mat3 rotation;
    Vec3 translation;
    std::size_t width = 640;
    std::size_t height = 480;
};

struct Pixel {
    double x = 0.0;
    double y = 0.0;
};

inline void validate_camera(const Camera& cam) {
    if (!(cam.fx > 0.0 && cam.fy > 0.0)) throw std::invalid_argument("camera: focal lengths must be positive");
    if (!is_orthonormal(cam.rotation)) throw std::invalid_argument("camera: rotation is not orthonormal");
}

/// Pinhole projection; points at or behind the camera plane map to nullopt.
inline std::optional<Pixel> project(const Camera& cam, Vec3 x) {
    const Vec3 c = cam.rotation * x + cam.translation;
    if (c.z <= 1e-6) return std::nullopt;
    return Pixel{cam.fx * c.x / c.z + cam.cx, cam.fy * c.y / c.z + cam.cy};
}

/// Per-landmark likelihood channels over a W x H image, values in [0, 1].
/// Channel-major storage, x-fastest within a channel.
struct Heatmap2D {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<double> values;

    double at(std::size_t c, std::size_t x, std::size_t y) const {
        return values[(c * height + y) * width + x];
    }
    double& at(std::size_t c, std::size_t x, std::size_t y) {
        return values[(c * height + y) * width + x];
    }
};

/// One Gaussian bump per landmark: channel i at pixel q is
/// exp(-|q - landmark_i|^2 / (2 sigma^2)). Landmarks outside the image keep
/// their truncated tail.
inline Heatmap2D gaussian_heatmap(const std::vector<Pixel>& landmarks, double sigma_px,
                                  std::size_t width, std::size_t height) {
    if (!(sigma_px > 0.0)) throw std::invalid_argument("gaussian_heatmap: sigma must be positive");
    Heatmap2D hm;
    hm.width = width;
    hm.height = height;
    hm.channels = landmarks.size();
    hm.values.assign(landmarks.size() * width * height, 0.0);
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma_px * sigma_px);
    for (std::size_t c = 0; c < landmarks.size(); ++c) {
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const double dx = static_cast<double>(x) - landmarks[c].x;
                const double dy = static_cast<double>(y) - landmarks[c].y;
                hm.at(c, x, y) = std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
            }
        }
    }
    return hm;
}

/// Bilinear sample with zero padding outside the image.
inline double bilinear_sample(const Heatmap2D& hm, std::size_t channel, double x, double y) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const auto x0 = static_cast<long long>(fx);
    const auto y0 = static_cast<long long>(fy);
    const double ax = x - fx;
    const double ay = y - fy;

    auto value = [&](long long px, long long py) -> double {
        if (px < 0 || py < 0 || px >= static_cast<long long>(hm.width) ||
            py >= static_cast<long long>(hm.height)) {
            return 0.0;
        }
        return hm.at(channel, static_cast<std::size_t>(px), static_cast<std::size_t>(py));
    };

    return (1.0 - ax) * (1.0 - ay) * value(x0, y0) + ax * (1.0 - ay) * value(x0 + 1, y0) +
           (1.0 - ax) * ay * value(x0, y0 + 1) + ax * ay * value(x0 + 1, y0 + 1);
}

/// Inverse projection of 2D landmark likelihoods: channel i at voxel center X
/// is the bilinear sample of heatmap channel i at project(X); voxels behind
/// the camera or projecting outside the image give 0.
inline VoxelField encode_visual(const Heatmap2D& hm, const Camera& cam, const VoxelGrid& grid) {
    validate_camera(cam);
    if (hm.channels < 1) throw std::invalid_argument("encode_visual: heatmap has no channels");

    VoxelField field = VoxelField::zeros(grid, hm.channels);
    const std::size_t voxels = grid.voxel_count();
    std::size_t idx = 0;
    for (std::size_t kk = 0; kk < grid.dims[2]; ++kk) {
        for (std::size_t jj = 0; jj < grid.dims[1]; ++jj) {
            for (std::size_t ii = 0; ii < grid.dims[0]; ++ii, ++idx) {
                const std::optional<Pixel> px = project(cam, grid.center(ii, jj, kk));
                if (!px) continue;
                for (std::size_t c = 0; c < hm.channels; ++c) {
                    field.values[c * voxels + idx] = bilinear_sample(hm, c, px->x, px->y);
                }
            }
        }
    }
    return field;
}

}  // namespace pk
