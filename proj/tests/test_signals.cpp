#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "posekernel/signals.hpp"
#include "oracles.hpp"

using namespace pk;

TEST_CASE("chirp length and amplitude bound") {
    const Waveform w = gen_chirp({19000.0, 32000.0, 0.1, 1.0}, 96000.0);
    REQUIRE(w.samples.size() == 9600);
    REQUIRE(w.sample_rate_hz == 96000.0);
    for (double s : w.samples) {
        REQUIRE(std::isfinite(s));
        REQUIRE(std::abs(s) <= 1.0 + 1e-12);
    }
}

TEST_CASE("degenerate sweep is a pure sinusoid") {
    const Waveform w = gen_chirp({1000.0, 1000.0, 0.01, 0.5}, 48000.0);
    REQUIRE(w.samples.size() == 480);
    for (std::size_t n = 0; n < w.samples.size(); ++n) {
        const double t = static_cast<double>(n) / 48000.0;
        const double expected = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * t);
        REQUIRE(w.samples[n] == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("chirp midpoint instantaneous frequency") {
    // The 19-32 kHz sweep passes 25.5 kHz at its midpoint (sample 4800);
    // located with a direct windowed-DTFT peak scan.
    const Waveform w = gen_chirp({19000.0, 32000.0, 0.1, 1.0}, 96000.0);
    const double peak =
        oracle::windowed_peak_frequency(w.samples, 4800 - 256, 512, 96000.0, 24000.0, 27000.0, 25.0);
    REQUIRE(std::abs(peak - 25500.0) < 200.0);
}

TEST_CASE("chirp rejects invalid specs") {
    REQUIRE_THROWS_AS(gen_chirp({19000.0, 50000.0, 0.1, 1.0}, 96000.0), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_chirp({19000.0, 48000.0, 0.1, 1.0}, 96000.0), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_chirp({32000.0, 19000.0, 0.1, 1.0}, 96000.0), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_chirp({19000.0, 32000.0, 0.0, 1.0}, 96000.0), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_chirp({19000.0, 32000.0, -0.1, 1.0}, 96000.0), std::invalid_argument);
}

TEST_CASE("fdm partition splits the band evenly") {
    const FdmPlan plan = fdm_partition(19000.0, 32000.0, 4, 0.0);
    REQUIRE(plan.bands.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(plan.bands[i].hi_hz - plan.bands[i].lo_hz == Catch::Approx(3250.0).margin(1e-9));
    }
    REQUIRE(plan.bands.front().lo_hz == Catch::Approx(19000.0));
    REQUIRE(plan.bands.back().hi_hz == Catch::Approx(32000.0));

    const FdmPlan single = fdm_partition(19000.0, 32000.0, 1, 0.0);
    REQUIRE(single.bands.size() == 1);
    REQUIRE(single.bands[0].lo_hz == Catch::Approx(19000.0));
    REQUIRE(single.bands[0].hi_hz == Catch::Approx(32000.0));
}

TEST_CASE("fdm bands stay disjoint and inside the master band") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lo_dist(100.0, 20000.0);
    std::uniform_real_distribution<double> width_dist(500.0, 30000.0);
    std::uniform_int_distribution<int> n_dist(1, 8);
    for (int trial = 0; trial < 200; ++trial) {
        const double lo = lo_dist(rng);
        const double hi = lo + width_dist(rng);
        const int n = n_dist(rng);
        std::uniform_real_distribution<double> guard_dist(0.0, (hi - lo) / n * 0.9);
        const double guard = guard_dist(rng);
        const FdmPlan plan = fdm_partition(lo, hi, n, guard);
        REQUIRE(plan.bands.size() == static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < plan.bands.size(); ++i) {
            REQUIRE(plan.bands[i].lo_hz >= lo - 1e-9);
            REQUIRE(plan.bands[i].hi_hz <= hi + 1e-9);
            REQUIRE(plan.bands[i].lo_hz < plan.bands[i].hi_hz);
            if (i > 0) REQUIRE(plan.bands[i - 1].hi_hz <= plan.bands[i].lo_hz + 1e-9);
        }
    }
    REQUIRE_THROWS_AS(fdm_partition(19000.0, 20000.0, 4, 300.0), std::invalid_argument);
}

TEST_CASE("convolution identity and annihilator") {
    const Waveform s = gen_chirp({19000.0, 32000.0, 0.01, 1.0}, 96000.0);
    Waveform delta{{1.0}, 96000.0};
    const Waveform conv = convolve(delta, s);
    REQUIRE(conv.samples.size() == s.samples.size());
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        REQUIRE(conv.samples[i] == Catch::Approx(s.samples[i]).margin(1e-9));
    }

    Waveform zero{std::vector<double>(64, 0.0), 96000.0};
    const Waveform zc = convolve(zero, s);
    for (double v : zc.samples) REQUIRE(v == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("convolution matches direct summation") {
    std::mt19937_64 rng(7);
    const auto a = oracle::random_samples(rng, 64);
    const auto b = oracle::random_samples(rng, 64);
    const Waveform fa{a, 96000.0};
    const Waveform fb{b, 96000.0};
    const Waveform fast = convolve(fa, fb);
    const auto slow = oracle::direct_convolve(a, b);
    REQUIRE(fast.samples.size() == slow.size());
    for (std::size_t i = 0; i < slow.size(); ++i) {
        REQUIRE(std::abs(fast.samples[i] - slow[i]) < 1e-9);
    }
}

TEST_CASE("convolution is commutative and linear") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<std::size_t> len(1, 128);
        const Waveform a{oracle::random_samples(rng, len(rng)), 96000.0};
        const Waveform b{oracle::random_samples(rng, len(rng)), 96000.0};
        Waveform c{oracle::random_samples(rng, b.samples.size()), 96000.0};

        const Waveform ab = convolve(a, b);
        const Waveform ba = convolve(b, a);
        for (std::size_t i = 0; i < ab.samples.size(); ++i) {
            REQUIRE(std::abs(ab.samples[i] - ba.samples[i]) < 1e-9);
        }

        Waveform bc = b;
        for (std::size_t i = 0; i < c.samples.size(); ++i) bc.samples[i] += c.samples[i];
        const Waveform left = convolve(a, bc);
        const Waveform right_b = convolve(a, b);
        const Waveform right_c = convolve(a, c);
        for (std::size_t i = 0; i < left.samples.size(); ++i) {
            REQUIRE(std::abs(left.samples[i] - (right_b.samples[i] + right_c.samples[i])) < 1e-9);
        }
    }
}

TEST_CASE("convolution rejects mismatched rates") {
    const Waveform a{{1.0, 2.0}, 96000.0};
    const Waveform b{{1.0}, 48000.0};
    REQUIRE_THROWS_AS(convolve(a, b), std::invalid_argument);
}

TEST_CASE("dft of a constant concentrates at DC") {
    const Waveform ones{std::vector<double>(8, 1.0), 96000.0};
    const Spectrum sp = dft(ones, 8);
    REQUIRE(sp.bins.size() == 8);
    REQUIRE(std::abs(sp.bins[0] - std::complex<double>(8.0, 0.0)) < 1e-12);
    for (std::size_t k = 1; k < 8; ++k) REQUIRE(std::abs(sp.bins[k]) < 1e-12);
}

TEST_CASE("dft round trip and Parseval") {
    std::mt19937_64 rng(29);
    const Waveform w{oracle::random_samples(rng, 1024), 96000.0};
    const Waveform rt = idft(dft(w, 1024));
    REQUIRE(rt.samples.size() == 1024);
    for (std::size_t i = 0; i < 1024; ++i) {
        REQUIRE(std::abs(rt.samples[i] - w.samples[i]) < 1e-9);
    }

    // Parseval at a non-power-of-two size exercises the general transform.
    for (std::size_t n : {1024u, 1000u, 57u}) {
        const Waveform x{oracle::random_samples(rng, n), 96000.0};
        const Spectrum sp = dft(x, n);
        double time_energy = 0.0;
        for (double v : x.samples) time_energy += v * v;
        double bin_energy = 0.0;
        for (const auto& b : sp.bins) bin_energy += std::norm(b);
        bin_energy /= static_cast<double>(n);
        REQUIRE(std::abs(time_energy - bin_energy) / time_energy < 1e-6);
    }
}

TEST_CASE("dft matches the definition sum at odd sizes") {
    std::mt19937_64 rng(31);
    const std::vector<double> x = oracle::random_samples(rng, 12);
    const Spectrum sp = dft(Waveform{x, 96000.0}, 12);
    const auto ref = oracle::naive_dft(x, 12);
    for (std::size_t k = 0; k < 12; ++k) {
        REQUIRE(std::abs(sp.bins[k] - ref[k]) < 1e-9);
    }
}

TEST_CASE("dft rejects undersized transforms") {
    const Waveform w{std::vector<double>(16, 1.0), 96000.0};
    REQUIRE_THROWS_AS(dft(w, 8), std::invalid_argument);
}

TEST_CASE("bin frequencies cover positive and negative halves") {
    REQUIRE(bin_frequency_hz(0, 16, 96000.0) == 0.0);
    REQUIRE(bin_frequency_hz(8, 16, 96000.0) == Catch::Approx(48000.0));
    REQUIRE(bin_frequency_hz(15, 16, 96000.0) == Catch::Approx(-6000.0));
}
