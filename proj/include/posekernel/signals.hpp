#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "posekernel/fft.hpp"

namespace pk {

/// Sampled real-valued audio signal. Amplitudes are dimensionless with a
/// nominal range of +-1.
struct Waveform {
    std::vector<double> samples;
    double sample_rate_hz = 96000.0;
};

/// Complex DFT bins of a waveform. Bin k of an N-point spectrum corresponds
/// to frequency k*fs/N for k <= N/2 and (k-N)*fs/N above.
struct Spectrum {
    std::vector<std::complex<double>> bins;
    double sample_rate_hz = 96000.0;
};

/// Linear frequency sweep parameters.
struct ChirpSpec {
    double f_start_hz = 19000.0;
    double f_end_hz = 32000.0;
    double duration_s = 0.1;
    double amplitude = 1.0;
};

struct FdmBand {
    double lo_hz = 0.0;
    double hi_hz = 0.0;
};

/// Per-speaker frequency sub-bands. Bands are half-open [lo, hi) and ordered
/// by speaker index.
struct FdmPlan {
    std::vector<FdmBand> bands;
    double guard_hz = 0.0;
};

inline double bin_frequency_hz(std::size_t bin, std::size_t size, double sample_rate_hz) {
    const double k = static_cast<double>(bin);
    const double n = static_cast<double>(size);
    if (k <= n / 2.0) return k * sample_rate_hz / n;
    return (k - n) * sample_rate_hz / n;
}

/// Linear chirp: sample n = A*sin(2*pi*(f0*t + (f1-f0)/(2*T)*t^2)), t = n/fs.
/// Length is round(duration * fs). Phase starts at zero.
inline Waveform gen_chirp(const ChirpSpec& spec, double sample_rate_hz) {
    if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("gen_chirp: sample rate must be positive");
    if (!(spec.duration_s > 0.0)) throw std::invalid_argument("gen_chirp: duration must be positive");
    if (!(spec.amplitude > 0.0)) throw std::invalid_argument("gen_chirp: amplitude must be positive");
    if (!(spec.f_start_hz > 0.0) || spec.f_end_hz < spec.f_start_hz ||
        !(spec.f_end_hz < sample_rate_hz / 2.0)) {
        throw std::invalid_argument("gen_chirp: sweep must satisfy 0 < f_start <= f_end < fs/2");
    }

    const auto length = static_cast<std::size_t>(std::llround(spec.duration_s * sample_rate_hz));
    const double sweep_rate = (spec.f_end_hz - spec.f_start_hz) / spec.duration_s;

    Waveform out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.resize(length);
    for (std::size_t n = 0; n < length; ++n) {
        const double t = static_cast<double>(n) / sample_rate_hz;
        const double phase = 2.0 * std::numbers::pi * (spec.f_start_hz * t + 0.5 * sweep_rate * t * t);
        out.samples[n] = spec.amplitude * std::sin(phase);
    }
    return out;
}

/// Splits [f_lo, f_hi] into n_speakers equal-width bands, trimming guard_hz/2
/// from each side of every band.
inline FdmPlan fdm_partition(double f_lo_hz, double f_hi_hz, int n_speakers, double guard_hz) {
    if (n_speakers < 1) throw std::invalid_argument("fdm_partition: need at least one speaker");
    if (guard_hz < 0.0) throw std::invalid_argument("fdm_partition: guard must be nonnegative");
    if (!(f_hi_hz - f_lo_hz > static_cast<double>(n_speakers) * guard_hz)) {
        throw std::invalid_argument("fdm_partition: band too narrow for requested speaker count");
    }

    const double width = (f_hi_hz - f_lo_hz) / static_cast<double>(n_speakers);
    FdmPlan plan;
    plan.guard_hz = guard_hz;
    plan.bands.reserve(static_cast<std::size_t>(n_speakers));
    for (int i = 0; i < n_speakers; ++i) {
        const double lo = f_lo_hz + static_cast<double>(i) * width + guard_hz / 2.0;
        const double hi = f_lo_hz + static_cast<double>(i + 1) * width - guard_hz / 2.0;
        plan.bands.push_back({lo, hi});
    }
    return plan;
}

/// Zero-padded DFT. size must be >= the waveform length.
inline Spectrum dft(const Waveform& w, std::size_t size) {
    if (size < w.samples.size()) throw std::invalid_argument("dft: size smaller than waveform length");
    if (size == 0) throw std::invalid_argument("dft: size must be at least 1");
    std::vector<std::complex<double>> buf(size, std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < w.samples.size(); ++i) buf[i] = w.samples[i];
    fft::transform(buf, false);
    return {std::move(buf), w.sample_rate_hz};
}

/// Inverse DFT (1/N normalized); returns the real parts of all N samples.
inline Waveform idft(const Spectrum& sp) {
    if (sp.bins.empty()) throw std::invalid_argument("idft: empty spectrum");
    std::vector<std::complex<double>> buf = sp.bins;
    fft::transform(buf, true);
    Waveform out;
    out.sample_rate_hz = sp.sample_rate_hz;
    out.samples.resize(buf.size());
    const double scale = 1.0 / static_cast<double>(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) out.samples[i] = buf[i].real() * scale;
    return out;
}

/// Full linear convolution via zero-padded DFT; length |a|+|b|-1.
inline Waveform convolve(const Waveform& a, const Waveform& b) {
    if (a.sample_rate_hz != b.sample_rate_hz) throw std::invalid_argument("convolve: sample-rate mismatch");
    Waveform out;
    out.sample_rate_hz = a.sample_rate_hz;
    if (a.samples.empty() || b.samples.empty()) return out;

    const std::size_t out_len = a.samples.size() + b.samples.size() - 1;
    const std::size_t n = fft::next_pow2(out_len);
    std::vector<std::complex<double>> fa(n, std::complex<double>(0.0, 0.0));
    std::vector<std::complex<double>> fb(n, std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < a.samples.size(); ++i) fa[i] = a.samples[i];
    for (std::size_t i = 0; i < b.samples.size(); ++i) fb[i] = b.samples[i];
    fft::radix2(fa, false);
    fft::radix2(fb, false);
    for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
    fft::radix2(fa, true);

    out.samples.resize(out_len);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < out_len; ++i) out.samples[i] = fa[i].real() * scale;
    return out;
}

}  // namespace pk
