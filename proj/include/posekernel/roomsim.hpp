#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "posekernel/geometry.hpp"
#include "posekernel/signals.hpp"

namespace pk {

/// Tapped delay line at a fixed sample rate. Tap n represents time n/fs.
struct ImpulseResponse {
    std::vector<double> taps;
    double sample_rate_hz = 96000.0;
};

struct Reflector {
    Vec3 position;
    double gain = 1.0;
};

/// Point-reflector stand-in for a reflective body.
struct ReflectorCloud {
    std::vector<Reflector> points;
};

/// Metric placement of speakers, microphones and an optional shoebox room.
/// The room has its min corner at the origin; all speaker and microphone
/// positions must lie strictly inside it when present.
struct Scene {
    std::optional<Vec3> room;           // extents in meters
    double beta = 0.0;                  // wall reflection coefficient
    std::vector<Vec3> speakers;
    std::vector<Vec3> microphones;
    double speed_of_sound_mps = 343.0;
    int image_order = 0;
};

struct SpeakerMicPair {
    std::size_t speaker = 0;
    std::size_t mic = 0;
};

namespace detail {

constexpr double kColocationLimitM = 1e-3;
constexpr double kSpreadingClampM = 0.1;

inline void validate_scene(const Scene& scene) {
    if (!(scene.speed_of_sound_mps > 0.0)) throw std::invalid_argument("scene: speed of sound must be positive");
    if (scene.beta < 0.0 || scene.beta > 1.0) throw std::invalid_argument("scene: beta must lie in [0, 1]");
    if (scene.image_order < 0) throw std::invalid_argument("scene: image order must be nonnegative");
    if (scene.room) {
        const Vec3 l = *scene.room;
        if (!(l.x > 0.0 && l.y > 0.0 && l.z > 0.0)) throw std::invalid_argument("scene: room extents must be positive");
        auto inside = [&](Vec3 p) {
            return p.x > 0.0 && p.x < l.x && p.y > 0.0 && p.y < l.y && p.z > 0.0 && p.z < l.z;
        };
        for (const Vec3& s : scene.speakers)
            if (!inside(s)) throw std::invalid_argument("scene: speaker outside the room");
        for (const Vec3& m : scene.microphones)
            if (!inside(m)) throw std::invalid_argument("scene: microphone outside the room");
    }
}

inline void validate_pair(const Scene& scene, SpeakerMicPair pair) {
    if (pair.speaker >= scene.speakers.size()) throw std::invalid_argument("scene: speaker index out of range");
    if (pair.mic >= scene.microphones.size()) throw std::invalid_argument("scene: microphone index out of range");
}

/// Adds gain at a fractional sample position, split linearly across the two
/// adjacent integer taps.
inline void add_tap(std::vector<double>& taps, double delay_samples, double gain) {
    const auto i0 = static_cast<std::size_t>(delay_samples);
    const double frac = delay_samples - static_cast<double>(i0);
    if (taps.size() < i0 + 2) taps.resize(i0 + 2, 0.0);
    taps[i0] += gain * (1.0 - frac);
    taps[i0 + 1] += gain * frac;
}

}  // namespace detail

/// Empty-room impulse response via the image-source method. One tap per
/// image source with total reflection count <= image_order; gain is
/// beta^count / max(path, 0.1 m); fractional delays are split linearly.
/// Without a room only the direct path is emitted.
inline ImpulseResponse simulate_empty_room(const Scene& scene, SpeakerMicPair pair, double sample_rate_hz) {
    detail::validate_scene(scene);
    detail::validate_pair(scene, pair);
    if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("simulate_empty_room: sample rate must be positive");

    const Vec3 spk = scene.speakers[pair.speaker];
    const Vec3 mic = scene.microphones[pair.mic];
    if (distance(spk, mic) < detail::kColocationLimitM) {
        throw std::invalid_argument("simulate_empty_room: speaker and microphone co-located");
    }

    const double v = scene.speed_of_sound_mps;
    ImpulseResponse ir;
    ir.sample_rate_hz = sample_rate_hz;

    if (!scene.room) {
        const double d = distance(spk, mic);
        detail::add_tap(ir.taps, d / v * sample_rate_hz, 1.0 / std::max(d, detail::kSpreadingClampM));
        return ir;
    }

    const Vec3 l = *scene.room;
    const int order = scene.image_order;
    // Reflection count along one axis for image (m, q) is |2m - q|, so
    // |m| <= (order + 1) / 2 covers every admissible image.
    const int m_max = order / 2 + 1;
    for (int mx = -m_max; mx <= m_max; ++mx) {
        for (int qx = 0; qx <= 1; ++qx) {
            const int cx = std::abs(2 * mx - qx);
            if (cx > order) continue;
            for (int my = -m_max; my <= m_max; ++my) {
                for (int qy = 0; qy <= 1; ++qy) {
                    const int cy = std::abs(2 * my - qy);
                    if (cx + cy > order) continue;
                    for (int mz = -m_max; mz <= m_max; ++mz) {
                        for (int qz = 0; qz <= 1; ++qz) {
                            const int count = cx + cy + std::abs(2 * mz - qz);
                            if (count > order) continue;
                            const Vec3 image{
                                2.0 * mx * l.x + (1 - 2 * qx) * spk.x,
                                2.0 * my * l.y + (1 - 2 * qy) * spk.y,
                                2.0 * mz * l.z + (1 - 2 * qz) * spk.z,
                            };
                            const double d = distance(image, mic);
                            const double gain =
                                std::pow(scene.beta, count) / std::max(d, detail::kSpreadingClampM);
                            if (gain == 0.0) continue;
                            detail::add_tap(ir.taps, d / v * sample_rate_hz, gain);
                        }
                    }
                }
            }
        }
    }
    return ir;
}

/// Pose kernel of a reflector cloud: sum over points of A(X) placed at the
/// round-trip arrival time, with 1/leg spreading applied per leg (clamped
/// at 0.1 m). Independent of the room by construction.
inline ImpulseResponse simulate_pose_kernel(const Scene& scene, const ReflectorCloud& body,
                                            SpeakerMicPair pair, double sample_rate_hz) {
    detail::validate_scene(scene);
    detail::validate_pair(scene, pair);
    if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("simulate_pose_kernel: sample rate must be positive");

    const Vec3 spk = scene.speakers[pair.speaker];
    const Vec3 mic = scene.microphones[pair.mic];
    const double v = scene.speed_of_sound_mps;

    ImpulseResponse ir;
    ir.sample_rate_hz = sample_rate_hz;
    for (const Reflector& p : body.points) {
        if (!is_finite(p.position) || !std::isfinite(p.gain)) {
            throw std::invalid_argument("simulate_pose_kernel: non-finite reflector");
        }
        const double d_spk = distance(spk, p.position);
        const double d_mic = distance(mic, p.position);
        if (d_spk < detail::kColocationLimitM || d_mic < detail::kColocationLimitM) {
            throw std::invalid_argument("simulate_pose_kernel: reflector within 1 mm of speaker or microphone");
        }
        const double gain = p.gain / (std::max(d_spk, detail::kSpreadingClampM) *
                                      std::max(d_mic, detail::kSpreadingClampM));
        detail::add_tap(ir.taps, (d_spk + d_mic) / v * sample_rate_hz, gain);
    }
    return ir;
}

/// Adds white Gaussian noise at the given SNR (dB, relative to the signal
/// power). Deterministic for a fixed seed.
inline void add_awgn(Waveform& w, double snr_db, std::uint64_t seed) {
    double power = 0.0;
    for (double s : w.samples) power += s * s;
    if (w.samples.empty() || power == 0.0) return;
    power /= static_cast<double>(w.samples.size());
    const double noise_std = std::sqrt(power * std::pow(10.0, -snr_db / 10.0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, noise_std);
    for (double& s : w.samples) s += dist(rng);
}

/// Received signal r = source * (empty-room response + pose kernel), with
/// optional additive white Gaussian noise.
inline Waveform simulate_received(const Scene& scene, const std::optional<ReflectorCloud>& body,
                                  const Waveform& source, SpeakerMicPair pair,
                                  std::optional<double> snr_db = std::nullopt,
                                  std::uint64_t noise_seed = 0) {
    ImpulseResponse combined = simulate_empty_room(scene, pair, source.sample_rate_hz);
    if (body) {
        const ImpulseResponse k = simulate_pose_kernel(scene, *body, pair, source.sample_rate_hz);
        if (combined.taps.size() < k.taps.size()) combined.taps.resize(k.taps.size(), 0.0);
        for (std::size_t i = 0; i < k.taps.size(); ++i) combined.taps[i] += k.taps[i];
    }
    Waveform kernel_wave{std::move(combined.taps), source.sample_rate_hz};
    Waveform received = convolve(source, kernel_wave);
    if (snr_db) add_awgn(received, *snr_db, noise_seed);
    return received;
}

}  // namespace pk
