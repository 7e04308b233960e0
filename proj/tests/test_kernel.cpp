#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "posekernel/fft.hpp"
#include "posekernel/kernel.hpp"
#include "posekernel/roomsim.hpp"
#include "posekernel/signals.hpp"
#include "oracles.hpp"

using namespace pk;

namespace {

/// Band-limits a tap sequence with the same DFT size and bin mask the
/// deconvolution uses, so recovered kernels can be compared in-band.
std::vector<double> band_limit(const std::vector<double>& taps, std::size_t dft_size, double fs,
                               double lo_hz, double hi_hz, std::size_t out_len) {
    Spectrum sp = dft(Waveform{taps, fs}, dft_size);
    for (std::size_t k = 0; k < sp.bins.size(); ++k) {
        const double f = std::abs(bin_frequency_hz(k, dft_size, fs));
        if (!(f >= lo_hz && f < hi_hz)) sp.bins[k] = 0.0;
    }
    const Waveform w = idft(sp);
    return {w.samples.begin(), w.samples.begin() + static_cast<std::ptrdiff_t>(out_len)};
}

}  // namespace

TEST_CASE("self-deconvolution concentrates at tap zero") {
    const Waveform s = gen_chirp({19000.0, 32000.0, 0.1, 1.0}, 96000.0);
    DeconvConfig cfg;
    cfg.epsilon = 0.0;
    cfg.band_lo_hz = 0.0;
    cfg.band_hi_hz = 48000.0;
    cfg.output_taps = 256;
    const ImpulseResponse k = deconvolve(s, s, cfg);
    REQUIRE(k.taps.size() == 256);
    const double peak = std::abs(k.taps[0]);
    for (std::size_t i = 1; i < k.taps.size(); ++i) {
        REQUIRE(peak >= 10.0 * std::abs(k.taps[i]));
    }
    REQUIRE(peak > 0.5);
}

TEST_CASE("deconvolution recovers random kernels in-band") {
    const Waveform s = gen_chirp({19000.0, 32000.0, 0.1, 1.0}, 96000.0);
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> pos(0, 49);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> taps(64, 0.0);
        for (int t = 0; t < 10; ++t) taps[pos(rng)] += amp(rng);

        const Waveform r = convolve(s, Waveform{taps, 96000.0});
        DeconvConfig cfg;
        cfg.band_lo_hz = 19000.0;
        cfg.band_hi_hz = 32000.0;
        cfg.output_taps = 64;
        const ImpulseResponse rec = deconvolve(r, s, cfg);

        const std::size_t n = fft::next_pow2(std::max({r.samples.size(), s.samples.size(), cfg.output_taps}));
        const std::vector<double> truth = band_limit(taps, n, 96000.0, 19000.0, 32000.0, 64);
        REQUIRE(oracle::cosine_similarity(rec.taps, truth) >= 0.99);
    }
}

TEST_CASE("deconvolution is linear and homogeneous in the received signal") {
    const Waveform s = gen_chirp({19000.0, 32000.0, 0.05, 1.0}, 96000.0);
    std::mt19937_64 rng(19);
    const Waveform a{oracle::random_samples(rng, s.samples.size() + 40), 96000.0};
    const Waveform b{oracle::random_samples(rng, s.samples.size() + 40), 96000.0};
    DeconvConfig cfg;
    cfg.band_lo_hz = 19000.0;
    cfg.band_hi_hz = 32000.0;
    cfg.output_taps = 48;

    Waveform ab = a;
    for (std::size_t i = 0; i < b.samples.size(); ++i) ab.samples[i] += b.samples[i];
    const ImpulseResponse ka = deconvolve(a, s, cfg);
    const ImpulseResponse kb = deconvolve(b, s, cfg);
    const ImpulseResponse kab = deconvolve(ab, s, cfg);
    for (std::size_t i = 0; i < kab.taps.size(); ++i) {
        REQUIRE(std::abs(kab.taps[i] - (ka.taps[i] + kb.taps[i])) < 1e-9);
    }

    Waveform doubled = a;
    for (double& v : doubled.samples) v *= 2.0;
    const ImpulseResponse k2 = deconvolve(doubled, s, cfg);
    for (std::size_t i = 0; i < k2.taps.size(); ++i) {
        REQUIRE(k2.taps[i] == Catch::Approx(2.0 * ka.taps[i]).margin(1e-12));
    }
}

TEST_CASE("silent sources and rate mismatches are rejected") {
    const Waveform silent{std::vector<double>(4096, 0.0), 96000.0};
    const Waveform r{std::vector<double>(4096, 0.1), 96000.0};
    DeconvConfig cfg;
    cfg.band_lo_hz = 19000.0;
    cfg.band_hi_hz = 32000.0;
    cfg.output_taps = 16;
    REQUIRE_THROWS_AS(deconvolve(r, silent, cfg), std::runtime_error);

    // A pure DC source spanning the whole transform has exactly zero energy
    // in the analysis band.
    const Waveform dc{std::vector<double>(4096, 1.0), 96000.0};
    REQUIRE_THROWS_AS(deconvolve(r, dc, cfg), std::runtime_error);

    const Waveform other_rate{std::vector<double>(64, 0.5), 48000.0};
    REQUIRE_THROWS_AS(deconvolve(other_rate, dc, cfg), std::invalid_argument);
    DeconvConfig bad = cfg;
    bad.band_hi_hz = 60000.0;
    REQUIRE_THROWS_AS(deconvolve(r, dc, bad), std::invalid_argument);
}

TEST_CASE("deconvolution depends on the kernel only through its in-band content") {
    const Waveform s = gen_chirp({19000.0, 32000.0, 0.1, 1.0}, 96000.0);
    std::mt19937_64 rng(23);
    std::vector<double> k1(2048, 0.0);
    std::uniform_int_distribution<std::size_t> pos(0, 400);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    for (int t = 0; t < 8; ++t) k1[pos(rng)] += amp(rng);

    // Hann-windowed 5 kHz tone: its in-band (19-32 kHz) leakage is far below
    // the comparison tolerance.
    std::vector<double> k2 = k1;
    for (std::size_t n = 0; n < 2048; ++n) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / 2047.0));
        k2[n] += 0.5 * w * std::sin(2.0 * std::numbers::pi * 5000.0 * n / 96000.0);
    }

    DeconvConfig cfg;
    cfg.band_lo_hz = 19000.0;
    cfg.band_hi_hz = 32000.0;
    cfg.output_taps = 2048;
    const ImpulseResponse out1 = deconvolve(convolve(s, Waveform{k1, 96000.0}), s, cfg);
    const ImpulseResponse out2 = deconvolve(convolve(s, Waveform{k2, 96000.0}), s, cfg);
    for (std::size_t i = 0; i < out1.taps.size(); ++i) {
        REQUIRE(std::abs(out1.taps[i] - out2.taps[i]) < 1e-6);
    }
}

TEST_CASE("extract_pose_kernel subtracts tap-wise") {
    ImpulseResponse full{{1.0, 2.0, 3.0}, 96000.0};
    ImpulseResponse empty{{0.5, 2.0}, 96000.0};
    const ImpulseResponse diff = extract_pose_kernel(full, empty);
    REQUIRE(diff.taps == std::vector<double>{0.5, 0.0, 3.0});

    const ImpulseResponse zero = extract_pose_kernel(full, full);
    for (double t : zero.taps) REQUIRE(t == 0.0);

    ImpulseResponse other_rate{{1.0}, 48000.0};
    REQUIRE_THROWS_AS(extract_pose_kernel(full, other_rate), std::invalid_argument);
}

TEST_CASE("empty-room subtraction cancels when nobody is present") {
    Scene room;
    room.room = Vec3{5.0, 4.0, 3.0};
    room.beta = 0.4;
    room.image_order = 2;
    room.speakers = {{0.7, 0.6, 1.1}};
    room.microphones = {{4.1, 3.2, 1.9}};
    const Waveform s = gen_chirp({19000.0, 32000.0, 0.1, 1.0}, 96000.0);

    const Waveform r_ref = simulate_received(room, std::nullopt, s, {0, 0});
    const Waveform r_again = simulate_received(room, ReflectorCloud{}, s, {0, 0});

    DeconvConfig cfg;
    cfg.band_lo_hz = 19000.0;
    cfg.band_hi_hz = 32000.0;
    cfg.output_taps = 4096;
    const ImpulseResponse k_ref = deconvolve(r_ref, s, cfg);
    const ImpulseResponse k_again = deconvolve(r_again, s, cfg);
    const ImpulseResponse residual = extract_pose_kernel(k_again, k_ref);

    REQUIRE(oracle::energy(residual.taps) < 1e-6 * oracle::energy(k_ref.taps));
}

TEST_CASE("extracted kernel matches the simulated ground truth in-band") {
    Scene room;
    room.room = Vec3{5.0, 4.0, 3.0};
    room.beta = 0.4;
    room.image_order = 1;
    room.speakers = {{0.7, 0.6, 1.1}};
    room.microphones = {{4.1, 3.2, 1.9}};
    const ReflectorCloud body{{Reflector{{2.5, 2.0, 1.4}, 1.0}}};
    const Waveform s = gen_chirp({19000.0, 32000.0, 0.1, 1.0}, 96000.0);

    const Waveform r_empty = simulate_received(room, std::nullopt, s, {0, 0});
    const Waveform r_full = simulate_received(room, body, s, {0, 0});

    DeconvConfig cfg;
    cfg.band_lo_hz = 19000.0;
    cfg.band_hi_hz = 32000.0;
    cfg.output_taps = 4096;
    const ImpulseResponse extracted =
        extract_pose_kernel(deconvolve(r_full, s, cfg), deconvolve(r_empty, s, cfg));

    const ImpulseResponse truth = simulate_pose_kernel(room, body, {0, 0}, 96000.0);
    const std::size_t n =
        fft::next_pow2(std::max({r_full.samples.size(), s.samples.size(), cfg.output_taps}));
    const std::vector<double> truth_band =
        band_limit(truth.taps, n, 96000.0, 19000.0, 32000.0, cfg.output_taps);
    REQUIRE(oracle::cosine_similarity(extracted.taps, truth_band) >= 0.99);
}

TEST_CASE("extraction quality is invariant to the room") {
    const Waveform s = gen_chirp({19000.0, 32000.0, 0.1, 1.0}, 96000.0);
    const Vec3 spk{0.7, 0.6, 1.1};
    const Vec3 mic{4.1, 3.2, 1.9};
    const ReflectorCloud body{{Reflector{{2.5, 2.0, 1.4}, 1.0}}};

    DeconvConfig cfg;
    cfg.band_lo_hz = 19000.0;
    cfg.band_hi_hz = 32000.0;
    cfg.output_taps = 4096;

    std::vector<double> correlations;
    for (double beta : {0.0, 0.3, 0.6}) {
        Scene room;
        room.room = Vec3{5.0, 4.0, 3.0};
        room.beta = beta;
        room.image_order = 1;
        room.speakers = {spk};
        room.microphones = {mic};

        const Waveform r_empty = simulate_received(room, std::nullopt, s, {0, 0});
        const Waveform r_full = simulate_received(room, body, s, {0, 0});
        const ImpulseResponse extracted =
            extract_pose_kernel(deconvolve(r_full, s, cfg), deconvolve(r_empty, s, cfg));

        const ImpulseResponse truth = simulate_pose_kernel(room, body, {0, 0}, 96000.0);
        const std::size_t n =
            fft::next_pow2(std::max({r_full.samples.size(), s.samples.size(), cfg.output_taps}));
        const std::vector<double> truth_band =
            band_limit(truth.taps, n, 96000.0, 19000.0, 32000.0, cfg.output_taps);
        correlations.push_back(oracle::cosine_similarity(extracted.taps, truth_band));
    }
    const auto [lo, hi] = std::minmax_element(correlations.begin(), correlations.end());
    REQUIRE(*hi - *lo < 0.02);
    REQUIRE(*lo >= 0.98);
}

TEST_CASE("envelope of an in-band cosine burst is flat inside the burst") {
    std::vector<double> taps(512, 0.0);
    for (std::size_t n = 100; n < 400; ++n) {
        taps[n] = std::cos(2.0 * std::numbers::pi * 25000.0 * n / 96000.0);
    }
    const ImpulseResponse env = envelope(ImpulseResponse{taps, 96000.0});

    double lo = 1e9, hi = -1e9;
    for (std::size_t n = 150; n < 350; ++n) {
        lo = std::min(lo, env.taps[n]);
        hi = std::max(hi, env.taps[n]);
    }
    const double mid = 0.5 * (lo + hi);
    REQUIRE((hi - lo) / mid < 0.05);

    for (std::size_t n = 0; n < taps.size(); ++n) {
        REQUIRE(env.taps[n] >= std::abs(taps[n]) - 1e-9);
        REQUIRE(env.taps[n] >= 0.0);
    }
}

TEST_CASE("envelope of silence is silence; empty input is rejected") {
    const ImpulseResponse env = envelope(ImpulseResponse{std::vector<double>(33, 0.0), 96000.0});
    for (double t : env.taps) REQUIRE(t == 0.0);
    REQUIRE_THROWS_AS(envelope(ImpulseResponse{{}, 96000.0}), std::invalid_argument);
}
