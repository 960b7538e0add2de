#include <catch_amalgamated.hpp>

#include "ecgnet/synth.hpp"
#include "ecgnet/wavelet.hpp"

using namespace ecgnet;

namespace {

std::vector<double> random_signal(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> x(n);
    for (double& v : x) v = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    return x;
}

double energy(const std::vector<double>& v) {
    double e = 0.0;
    for (double x : v) e += x * x;
    return e;
}

} // namespace

TEST_CASE("db4 filters satisfy the orthonormal invariants") {
    const Db4Filters f;
    const double sum_h = f.h[0] + f.h[1] + f.h[2] + f.h[3];
    const double sum_g = f.g[0] + f.g[1] + f.g[2] + f.g[3];
    double norm = 0.0;
    for (double h : f.h) norm += h * h;
    CHECK(std::abs(sum_h - std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(sum_g) < 1e-12);
    CHECK(std::abs(norm - 1.0) < 1e-12);
    for (int k = 0; k < 4; ++k)
        CHECK(f.g[k] == (k % 2 == 0 ? 1.0 : -1.0) * f.h[3 - k]);
}

TEST_CASE("morlet kernel is even, peaks at one, matches the closed form") {
    WaveletConfig cfg; // sigma 1, support 4 s
    const auto k = morlet_kernel(cfg, 250.0);
    REQUIRE(k.size() % 2 == 1);
    const std::size_t mid = k.size() / 2;
    CHECK(k[mid] == 1.0);
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == k[k.size() - 1 - i]);

    // rate chosen so t = pi/5 lands exactly on a grid point
    const double rate = 5.0 / M_PI;
    const auto k2 = morlet_kernel(cfg, rate);
    const std::size_t mid2 = k2.size() / 2;
    CHECK(std::abs(k2[mid2 + 1] - (-0.8208687174155399)) < 1e-12);
}

TEST_CASE("morlet_features is linear and flags oversized kernels") {
    WaveletConfig cfg = WaveletConfig::pipeline_default();
    std::mt19937_64 rng(11);
    const auto x = random_signal(rng, 1500);
    const auto y = random_signal(rng, 1500);
    const auto fx = morlet_features(x, cfg, 250.0);
    CHECK(fx.size() == x.size());

    std::vector<double> zero(1500, 0.0);
    for (double v : morlet_features(zero, cfg, 250.0)) CHECK(v == 0.0);

    std::vector<double> x2(1500), xy(1500);
    for (std::size_t i = 0; i < 1500; ++i) {
        x2[i] = 2.0 * x[i];
        xy[i] = x[i] + y[i];
    }
    const auto fx2 = morlet_features(x2, cfg, 250.0);
    const auto fy = morlet_features(y, cfg, 250.0);
    const auto fxy = morlet_features(xy, cfg, 250.0);
    for (std::size_t i = 0; i < 1500; ++i) {
        CHECK(std::abs(fx2[i] - 2.0 * fx[i]) < 1e-12);
        CHECK(std::abs(fxy[i] - (fx[i] + fy[i])) < 1e-12);
    }

    WaveletConfig wide; // 4 s support does not fit a 6 s window at 250 Hz? It does; use a short signal
    const auto small = random_signal(rng, 100);
    CHECK_THROWS_AS(morlet_features(small, wide, 250.0), DataError);
}

TEST_CASE("db4 analysis: constants, energy, zeros") {
    const Db4Filters f;
    SECTION("constant input: detail ~ 0, approx ~ c*sqrt(2)") {
        const std::vector<double> c(64, 0.37);
        const auto [lo, hi] = db4_analysis(c, f);
        REQUIRE(lo.size() == 32);
        for (double d : hi) CHECK(std::abs(d) < 1e-10);
        for (double a : lo) CHECK(std::abs(a - 0.37 * std::sqrt(2.0)) < 1e-10);
    }
    SECTION("energy preserved") {
        std::mt19937_64 rng(5);
        const auto x = random_signal(rng, 256);
        const auto [lo, hi] = db4_analysis(x, f);
        CHECK(std::abs(energy(lo) + energy(hi) - energy(x)) < 1e-9);
    }
    SECTION("zero signal maps to zero") {
        const std::vector<double> z(40, 0.0);
        const auto [lo, hi] = db4_analysis(z, f);
        for (double v : lo) CHECK(v == 0.0);
        for (double v : hi) CHECK(v == 0.0);
    }
    SECTION("odd length pads by repetition") {
        const auto [lo, hi] = db4_analysis(std::vector<double>(31, 1.0), f);
        CHECK(lo.size() == 16);
    }
    CHECK_THROWS_AS(db4_analysis({}, f), DataError);
}

TEST_CASE("db4 synthesis inverts analysis to 1e-9") {
    const Db4Filters f;
    std::mt19937_64 rng(17);
    for (std::size_t n : {8u, 64u, 1500u}) {
        const auto x = random_signal(rng, n);
        const auto [lo, hi] = db4_analysis(x, f);
        const auto rec = db4_synthesis(lo, hi, f);
        REQUIRE(rec.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(rec[i] - x[i]) < 1e-9);
    }
}

TEST_CASE("db4_feature multiplies bands and upsamples") {
    const std::vector<double> approx{1.0, 2.0};
    const std::vector<double> detail{3.0, 4.0};
    const auto up = db4_feature(approx, detail, 4);
    REQUIRE(up.size() == 4);
    CHECK(up.front() == 3.0);
    CHECK(up.back() == 8.0);

    const auto full = db4_feature(std::vector<double>(750, 0.5), std::vector<double>(750, 2.0), 1500);
    CHECK(full.size() == 1500);
    for (double v : full) CHECK(v == 1.0);

    const auto zero = db4_feature(std::vector<double>(10, 0.0), std::vector<double>(10, 3.0));
    CHECK(zero.size() == 20);
    for (double v : zero) CHECK(v == 0.0);

    CHECK_THROWS_AS(db4_feature({1.0}, {1.0, 2.0}), DataError);
}

TEST_CASE("denoise is deterministic, length preserving, near-identity on clean input") {
    const Db4Filters f;
    const WaveletConfig cfg = WaveletConfig::pipeline_default();
    SECTION("zero in, zero out") {
        const std::vector<double> z(1500, 0.0);
        const auto y = denoise(z, cfg, f, 250.0);
        REQUIRE(y.size() == 1500);
        for (double v : y) CHECK(std::abs(v) < 1e-12);
    }
    SECTION("clean synthetic ECG distorts by < 1% of signal energy") {
        SynthSpec spec;
        spec.seed = 21;
        const auto res = synth_ecg(spec);
        const auto& x = res.record.channels[0];
        const auto y = denoise(x, cfg, f, 250.0);
        double err = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) err += (y[i] - x[i]) * (y[i] - x[i]);
        CHECK(err < 0.01 * energy(x));
        const auto y2 = denoise(x, cfg, f, 250.0);
        CHECK(y == y2);
    }
    SECTION("baseline wander is removed") {
        SynthSpec spec;
        spec.seed = 4;
        auto res = synth_ecg(spec);
        auto drifted = res.record.channels[0];
        double wander_energy = 0.0;
        for (std::size_t i = 0; i < drifted.size(); ++i) {
            const double w = 0.5 * std::sin(2.0 * M_PI * 0.15 * static_cast<double>(i) / 250.0);
            drifted[i] += w;
            wander_energy += w * w;
        }
        const auto y = denoise(drifted, cfg, f, 250.0);
        double residual = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - res.record.channels[0][i];
            residual += d * d;
        }
        CHECK(residual < 0.15 * wander_energy);
    }
    SECTION("10 dB noisy record improves") {
        SynthSpec spec;
        spec.seed = 33;
        SynthSpec noisy = spec;
        noisy.noise_snr_db = 10.0;
        const auto clean = synth_ecg(spec).record.channels[0];
        const auto noised = synth_ecg(noisy).record.channels[0];
        const auto y = denoise(noised, cfg, f, 250.0);
        double err = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) err += (y[i] - clean[i]) * (y[i] - clean[i]);
        const double snr_after = 10.0 * std::log10(energy(clean) / err);
        CHECK(snr_after >= 13.0);
    }
}
