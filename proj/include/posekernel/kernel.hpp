#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "posekernel/fft.hpp"
#include "posekernel/roomsim.hpp"
#include "posekernel/signals.hpp"

namespace pk {

/// Wiener-regularized deconvolution settings. The analysis band is half-open
/// [band_lo_hz, band_hi_hz); bins outside it (and their conjugate mirrors)
/// are zeroed. When epsilon is unset it defaults to 1e-3 * max|S(f)|^2.
struct DeconvConfig {
    std::optional<double> epsilon;
    double band_lo_hz = 0.0;
    double band_hi_hz = 48000.0;
    std::size_t output_taps = 1;
};

namespace detail {

inline bool in_band(double freq_hz, double lo_hz, double hi_hz) {
    const double f = std::abs(freq_hz);
    return f >= lo_hz && f < hi_hz;
}

}  // namespace detail

/// Recovers an impulse response from received = source * k by regularized
/// spectral division: IDFT of R * conj(S) / (|S|^2 + eps), band-masked and
/// truncated to output_taps.
inline ImpulseResponse deconvolve(const Waveform& received, const Waveform& source,
                                  const DeconvConfig& cfg) {
    if (received.sample_rate_hz != source.sample_rate_hz) {
        throw std::invalid_argument("deconvolve: sample-rate mismatch");
    }
    const double fs = source.sample_rate_hz;
    if (cfg.band_lo_hz < 0.0 || !(cfg.band_hi_hz > cfg.band_lo_hz) || cfg.band_hi_hz > fs / 2.0) {
        throw std::invalid_argument("deconvolve: analysis band must satisfy 0 <= lo < hi <= fs/2");
    }
    if (cfg.output_taps < 1) throw std::invalid_argument("deconvolve: output_taps must be at least 1");
    if (cfg.epsilon && *cfg.epsilon < 0.0) throw std::invalid_argument("deconvolve: epsilon must be nonnegative");
    if (source.samples.empty()) throw std::invalid_argument("deconvolve: empty source");

    const std::size_t n = fft::next_pow2(
        std::max({received.samples.size(), source.samples.size(), cfg.output_taps}));
    const Spectrum rs = dft(received, n);
    const Spectrum ss = dft(source, n);

    double max_s2 = 0.0;
    double band_energy = 0.0;
    std::vector<bool> mask(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double s2 = std::norm(ss.bins[k]);
        max_s2 = std::max(max_s2, s2);
        mask[k] = detail::in_band(bin_frequency_hz(k, n, fs), cfg.band_lo_hz, cfg.band_hi_hz);
        if (mask[k]) band_energy += s2;
    }
    if (band_energy < 1e-12) throw std::runtime_error("deconvolve: source is silent within the analysis band");

    const double eps = cfg.epsilon.value_or(1e-3 * max_s2);
    std::vector<std::complex<double>> quotient(n, std::complex<double>(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        if (!mask[k]) continue;
        const double denom = std::norm(ss.bins[k]) + eps;
        if (denom > 0.0) quotient[k] = rs.bins[k] * std::conj(ss.bins[k]) / denom;
    }

    const Waveform q = idft(Spectrum{std::move(quotient), fs});
    ImpulseResponse out;
    out.sample_rate_hz = fs;
    out.taps.assign(q.samples.begin(), q.samples.begin() + static_cast<std::ptrdiff_t>(cfg.output_taps));
    return out;
}

/// Tap-wise subtraction full - empty; the shorter input is zero-padded.
inline ImpulseResponse extract_pose_kernel(const ImpulseResponse& full, const ImpulseResponse& empty) {
    if (full.sample_rate_hz != empty.sample_rate_hz) {
        throw std::invalid_argument("extract_pose_kernel: sample-rate mismatch");
    }
    ImpulseResponse out;
    out.sample_rate_hz = full.sample_rate_hz;
    out.taps.resize(std::max(full.taps.size(), empty.taps.size()), 0.0);
    for (std::size_t i = 0; i < full.taps.size(); ++i) out.taps[i] += full.taps[i];
    for (std::size_t i = 0; i < empty.taps.size(); ++i) out.taps[i] -= empty.taps[i];
    return out;
}

/// Analytic-signal magnitude: negative-frequency bins zeroed, positive bins
/// doubled, inverse DFT, complex modulus. Output taps are nonnegative.
inline ImpulseResponse envelope(const ImpulseResponse& k) {
    if (k.taps.empty()) throw std::invalid_argument("envelope: empty impulse response");
    const std::size_t n = k.taps.size();
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = k.taps[i];
    fft::transform(buf, false);
    for (std::size_t i = 0; i < n; ++i) {
        const bool dc = (i == 0);
        const bool nyquist = (n % 2 == 0 && i == n / 2);
        if (dc || nyquist) continue;
        if (i < (n + 1) / 2) {
            buf[i] *= 2.0;
        } else {
            buf[i] = 0.0;
        }
    }
    fft::transform(buf, true);
    ImpulseResponse out;
    out.sample_rate_hz = k.sample_rate_hz;
    out.taps.resize(n);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out.taps[i] = std::abs(buf[i]) * scale;
    return out;
}

}  // namespace pk
