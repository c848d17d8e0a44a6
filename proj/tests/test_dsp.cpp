#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "leakdetect/dsp.hpp"

using namespace leakdetect;
using Catch::Approx;

namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<double> out(n);
    for (auto& v : out) v = gauss(rng);
    return out;
}

SignalRecord make_record(double fs, double duration_s) {
    SignalRecord rec;
    rec.station_id = "A";
    rec.sample_rate_hz = fs;
    const std::size_t n = std::size_t(std::llround(fs * duration_s));
    rec.channels[ChannelKind::static_pressure_bar] = std::vector<double>(n, 4.0);
    rec.channels[ChannelKind::dynamic_pressure_kpa] = white_noise(n, 1, 0.1);
    rec.channels[ChannelKind::flow_m3_h] = std::vector<double>(n, 150.0);
    return rec;
}

// direct O(N*L) normalized cross-correlation, the normative definition
struct DirectPeak {
    long long lag = 0;
    double value = 0.0;
};

DirectPeak direct_xcorr_argmax(const std::vector<double>& a, const std::vector<double>& b,
                               long long max_lag) {
    double ma = 0.0, mb = 0.0;
    for (double v : a) ma += v;
    for (double v : b) mb += v;
    ma /= double(a.size());
    mb /= double(b.size());
    double sa = 0.0, sb = 0.0;
    for (double v : a) sa += (v - ma) * (v - ma);
    for (double v : b) sb += (v - mb) * (v - mb);
    const double norm = std::sqrt(sa * sb);

    DirectPeak best{0, -2.0};
    for (long long lag = -max_lag; lag <= max_lag; ++lag) {
        double s = 0.0;
        for (long long t = 0; t < (long long)a.size(); ++t) {
            const long long u = t + lag;
            if (u < 0 || u >= (long long)b.size()) continue;
            s += (a[t] - ma) * (b[u] - mb);
        }
        const double c = s / norm;
        if (c > best.value) best = {lag, c};
    }
    return best;
}

}  // namespace

TEST_CASE("batching tiles exactly without overlap") {
    const auto rec = make_record(8192.0, 10.0);
    const auto batches = batch(rec, {1.0, 0.0});
    CHECK(batches.size() == 10);
    CHECK(batches.front().window_start_s == 0.0);
    CHECK(batches.back().window_start_s == Approx(9.0));
}

TEST_CASE("batching with 0.25 overlap gives 13 windows over 10 s") {
    const auto rec = make_record(8192.0, 10.0);
    const auto batches = batch(rec, {1.0, 0.25});
    CHECK(batches.size() == 13);  // stride 0.75 s, last full window at 9.0 s
    CHECK(batches.back().window_start_s == Approx(9.0));
}

TEST_CASE("constant channel gives zero std and max equal to the constant") {
    auto rec = make_record(8192.0, 2.0);
    const auto batches = batch(rec, {1.0, 0.0});
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].static_pressure_mean_bar == Approx(4.0));
    CHECK(batches[0].static_pressure_std_bar == 0.0);
    CHECK(batches[0].flow_mean_m3_h == Approx(150.0));
}

TEST_CASE("batch rejects records shorter than one window") {
    const auto rec = make_record(8192.0, 0.5);
    CHECK_THROWS_AS(batch(rec, {1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(batch(rec, {0.25, 1.5}), std::invalid_argument);
}

TEST_CASE("batch is deterministic") {
    const auto rec = make_record(8192.0, 4.0);
    const auto b1 = batch(rec, {1.0, 0.25});
    const auto b2 = batch(rec, {1.0, 0.25});
    REQUIRE(b1.size() == b2.size());
    for (std::size_t i = 0; i < b1.size(); ++i) {
        CHECK(b1[i].leak_band_energy_kpa2 == b2[i].leak_band_energy_kpa2);
        CHECK(b1[i].dyn_pressure_std_kpa == b2[i].dyn_pressure_std_kpa);
    }
}

TEST_CASE("band energy of a pure tone") {
    const double fs = 8192.0;
    const std::size_t n = 8192;  // integer number of 1 kHz periods
    const double amp = 0.35;
    std::vector<double> tone(n);
    for (std::size_t i = 0; i < n; ++i)
        tone[i] = amp * std::sin(2.0 * M_PI * 1000.0 * double(i) / fs);

    const double in_band = band_energy(tone, fs, 500.0, 4000.0);
    CHECK(in_band == Approx(amp * amp / 2.0).epsilon(0.01));

    const double out_band = band_energy(tone, fs, 2000.0, 4000.0);
    CHECK(out_band <= 0.01 * amp * amp / 2.0);

    const std::vector<double> zeros(n, 0.0);
    CHECK(band_energy(zeros, fs, 500.0, 4000.0) == 0.0);
}

TEST_CASE("full-band energy equals the mean square (Parseval)") {
    const double fs = 8192.0;
    const auto x = white_noise(5000, 3, 0.7);  // non power of two
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= double(x.size());
    CHECK(band_energy(x, fs, 0.0, fs / 2.0) == Approx(ms).epsilon(1e-9));
}

TEST_CASE("band energy is additive over a bin partition") {
    const double fs = 8192.0;
    const auto x = white_noise(8192, 4);
    const double e1 = band_energy(x, fs, 500.0, 2000.0);
    const double e2 = band_energy(x, fs, 2000.0, 4000.0);
    const double e = band_energy(x, fs, 500.0, 4000.0);
    CHECK(e1 + e2 == Approx(e).epsilon(1e-12));
    CHECK_THROWS_AS(band_energy(x, fs, 3000.0, 2000.0), std::invalid_argument);
    CHECK_THROWS_AS(band_energy(x, fs, 500.0, 5000.0), std::invalid_argument);
}

TEST_CASE("bandpass removes out-of-band energy only") {
    const double fs = 8192.0;
    const auto x = white_noise(8192, 5);
    const auto y = bandpass(x, fs, 500.0, 4000.0);
    const double ey = band_energy(y, fs, 0.0, fs / 2.0);
    const double ex_band = band_energy(x, fs, 500.0, 4000.0);
    CHECK(ey == Approx(ex_band).epsilon(1e-9));
}

TEST_CASE("estimate_delay finds an integer shift") {
    const double fs = 8192.0;
    const std::size_t n = 65536;
    const auto a = white_noise(n, 6);
    std::vector<double> b(n, 0.0);
    const long long shift = 37;
    for (std::size_t i = shift; i < n; ++i) b[i] = a[i - shift];

    const auto est = estimate_delay(a, b, fs, 100.0 / fs);
    CHECK(std::abs(est.delay_s - double(shift) / fs) < 0.5 / fs);
    CHECK(est.peak_correlation > 0.99);

    const auto oracle = direct_xcorr_argmax(a, b, 100);
    CHECK(oracle.lag == shift);
    CHECK(std::llround(est.delay_s * fs) == oracle.lag);
}

TEST_CASE("estimate_delay of a signal with itself") {
    const auto a = white_noise(16384, 7);
    const auto est = estimate_delay(a, a, 8192.0, 50.0 / 8192.0);
    CHECK(est.delay_s == Approx(0.0).margin(1e-6));
    CHECK(est.peak_correlation == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("independent noise has a small correlation peak") {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
        const auto a = white_noise(65536, seed);
        const auto b = white_noise(65536, seed + 1000);
        const auto est = estimate_delay(a, b, 8192.0, 200.0 / 8192.0);
        REQUIRE(std::abs(est.peak_correlation) < 0.05);
    }
}

TEST_CASE("estimate_delay antisymmetry") {
    const double fs = 8192.0;
    const auto a = white_noise(32768, 8);
    std::vector<double> b(a.size(), 0.0);
    for (std::size_t i = 13; i < a.size(); ++i) b[i] = a[i - 13] + 0.2 * b[i - 1];
    const auto ab = estimate_delay(a, b, fs, 64.0 / fs);
    const auto ba = estimate_delay(b, a, fs, 64.0 / fs);
    CHECK(std::abs(ab.delay_s + ba.delay_s) < 1e-9);
    CHECK(ab.peak_correlation == Approx(ba.peak_correlation).epsilon(1e-9));
}

TEST_CASE("estimate_delay is invariant to positive scaling") {
    const double fs = 8192.0;
    const auto a = white_noise(16384, 9);
    std::vector<double> b(a.size(), 0.0);
    for (std::size_t i = 21; i < a.size(); ++i) b[i] = a[i - 21];
    const auto base = estimate_delay(a, b, fs, 64.0 / fs);
    std::vector<double> a2 = a, b2 = b;
    for (auto& v : a2) v *= 1234.5;
    for (auto& v : b2) v *= 6.789e-3;
    const auto scaled = estimate_delay(a2, b2, fs, 64.0 / fs);
    CHECK(std::abs(scaled.delay_s - base.delay_s) < 1e-12);
    CHECK(scaled.peak_correlation == Approx(base.peak_correlation).epsilon(1e-12));
}

TEST_CASE("estimate_delay rejects degenerate input") {
    const std::vector<double> flat(1024, 3.0);
    const auto a = white_noise(1024, 10);
    CHECK_THROWS_AS(estimate_delay(flat, a, 8192.0, 16.0 / 8192.0), std::invalid_argument);
    CHECK_THROWS_AS(estimate_delay(a, a, 8192.0, 2000.0 / 8192.0), std::invalid_argument);
}
