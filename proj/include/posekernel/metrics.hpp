#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "posekernel/geometry.hpp"

namespace pk {

/// One evaluated frame: predicted and ground-truth landmark positions.
struct LandmarkFrame {
    std::vector<Vec3> predicted;
    std::vector<Vec3> truth;
};

/// Mean per-landmark position error in centimeters.
inline double mpjpe_cm(const std::vector<LandmarkFrame>& frames) {
    if (frames.empty()) throw std::invalid_argument("mpjpe_cm: no frames");
    double acc = 0.0;
    std::size_t count = 0;
    for (const LandmarkFrame& f : frames) {
        if (f.predicted.size() != f.truth.size()) throw std::invalid_argument("mpjpe_cm: landmark count mismatch");
        for (std::size_t i = 0; i < f.predicted.size(); ++i) {
            acc += distance(f.predicted[i], f.truth[i]) * 100.0;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("mpjpe_cm: frames have no landmarks");
    return acc / static_cast<double>(count);
}

/// Fraction of landmark predictions within threshold_cm of the truth.
inline double pck_at(const std::vector<LandmarkFrame>& frames, double threshold_cm) {
    if (frames.empty()) throw std::invalid_argument("pck_at: no frames");
    std::size_t hits = 0;
    std::size_t count = 0;
    for (const LandmarkFrame& f : frames) {
        if (f.predicted.size() != f.truth.size()) throw std::invalid_argument("pck_at: landmark count mismatch");
        for (std::size_t i = 0; i < f.predicted.size(); ++i) {
            if (distance(f.predicted[i], f.truth[i]) * 100.0 <= threshold_cm) ++hits;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("pck_at: frames have no landmarks");
    return static_cast<double>(hits) / static_cast<double>(count);
}

}  // namespace pk
