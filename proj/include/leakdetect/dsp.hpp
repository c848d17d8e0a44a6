#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "leakdetect/fft.hpp"
#include "leakdetect/model.hpp"

namespace leakdetect {

inline constexpr double kDefaultBandLoHz = 500.0;
inline constexpr double kDefaultBandHiHz = 4000.0;

struct BatchingPolicy {
    double window_len_s = 1.0;
    double overlap_fraction = 0.25;  // in [0, 0.9]
};

inline const BatchingPolicy& validate_policy(const BatchingPolicy& p) {
    if (!(p.window_len_s > 0.0))
        throw std::invalid_argument("batching: window_len_s must be > 0");
    if (!(p.overlap_fraction >= 0.0 && p.overlap_fraction <= 0.9))
        throw std::invalid_argument("batching: overlap_fraction must be in [0, 0.9]");
    return p;
}

namespace dsp_detail {

// Bin k (center frequency k*fs/N) belongs to [f_lo, f_hi) so adjacent bands
// partition exactly; the Nyquist bin is claimed by any band reaching fs/2.
inline bool bin_in_band(std::size_t k, std::size_t n, double fs, double f_lo, double f_hi) {
    const double f = double(k) * fs / double(n);
    if (f < f_lo) return false;
    if (f < f_hi) return true;
    return f_hi >= 0.5 * fs && k == n / 2;
}

inline double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / double(x.size());
}

inline double stddev(std::span<const double> x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / double(x.size()));
}

inline double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace dsp_detail

// Mean squared value of the ideal-bandpass content of the window, via the
// periodogram. Full band [0, fs/2] recovers the signal's mean square.
inline double band_energy(std::span<const double> samples, double sample_rate_hz,
                          double f_lo_hz, double f_hi_hz) {
    if (samples.empty()) throw std::invalid_argument("band_energy: empty input");
    if (!(f_lo_hz >= 0.0 && f_lo_hz < f_hi_hz && f_hi_hz <= 0.5 * sample_rate_hz))
        throw std::invalid_argument("band_energy: need 0 <= f_lo < f_hi <= fs/2");

    const std::size_t n = samples.size();
    std::vector<cdouble> spec(n);
    for (std::size_t i = 0; i < n; ++i) spec[i] = cdouble(samples[i], 0.0);
    fft(spec);

    double energy = 0.0;
    for (std::size_t k = 0; k <= n / 2; ++k) {
        if (!dsp_detail::bin_in_band(k, n, sample_rate_hz, f_lo_hz, f_hi_hz)) continue;
        const double p = std::norm(spec[k]);
        const bool has_mirror = k != 0 && !(n % 2 == 0 && k == n / 2);
        energy += has_mirror ? 2.0 * p : p;
    }
    return energy / (double(n) * double(n));
}

// Ideal (brick-wall) bandpass, same bin-inclusion rule as band_energy.
inline std::vector<double> bandpass(std::span<const double> samples, double sample_rate_hz,
                                    double f_lo_hz, double f_hi_hz) {
    if (samples.empty()) throw std::invalid_argument("bandpass: empty input");
    if (!(f_lo_hz >= 0.0 && f_lo_hz < f_hi_hz && f_hi_hz <= 0.5 * sample_rate_hz))
        throw std::invalid_argument("bandpass: need 0 <= f_lo < f_hi <= fs/2");

    const std::size_t n = samples.size();
    std::vector<cdouble> spec(n);
    for (std::size_t i = 0; i < n; ++i) spec[i] = cdouble(samples[i], 0.0);
    fft(spec);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t kk = k <= n / 2 ? k : n - k;
        if (!dsp_detail::bin_in_band(kk, n, sample_rate_hz, f_lo_hz, f_hi_hz))
            spec[k] = cdouble{};
    }
    ifft(spec);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = spec[i].real();
    return out;
}

// Windowed per-channel statistics. Windows advance by window_len*(1-overlap);
// a trailing partial window is discarded.
inline std::vector<FeatureBatch> batch(const SignalRecord& record, const BatchingPolicy& policy,
                                       double band_lo_hz = kDefaultBandLoHz,
                                       double band_hi_hz = kDefaultBandHiHz) {
    validate_policy(policy);
    validate_record(record);
    const double fs = record.sample_rate_hz;
    const std::size_t window = std::size_t(std::llround(policy.window_len_s * fs));
    const std::size_t stride = std::max<std::size_t>(
        1, std::size_t(std::llround(policy.window_len_s * (1.0 - policy.overlap_fraction) * fs)));
    const std::size_t n = record.sample_count();
    if (window == 0 || n < window)
        throw std::invalid_argument("batch: record shorter than one window");

    const auto channel = [&](ChannelKind k) -> const std::vector<double>* {
        auto it = record.channels.find(k);
        return it == record.channels.end() ? nullptr : &it->second;
    };
    const auto* stat = channel(ChannelKind::static_pressure_bar);
    const auto* dyn = channel(ChannelKind::dynamic_pressure_kpa);
    const auto* acc = channel(ChannelKind::acceleration_m_s2);
    const auto* flow = channel(ChannelKind::flow_m3_h);

    std::vector<FeatureBatch> out;
    for (std::size_t start = 0; start + window <= n; start += stride) {
        FeatureBatch fb;
        fb.station_id = record.station_id;
        fb.window_start_s = record.start_time_s + double(start) / fs;
        fb.window_len_s = double(window) / fs;
        if (stat) {
            std::span<const double> w(stat->data() + start, window);
            fb.static_pressure_mean_bar = dsp_detail::mean(w);
            fb.static_pressure_std_bar = dsp_detail::stddev(w);
        }
        if (dyn) {
            std::span<const double> w(dyn->data() + start, window);
            fb.dyn_pressure_std_kpa = dsp_detail::stddev(w);
            fb.dyn_pressure_max_kpa = dsp_detail::max_abs(w);
            fb.leak_band_energy_kpa2 = band_energy(w, fs, band_lo_hz, band_hi_hz);
        }
        if (acc)
            fb.accel_std_m_s2 = dsp_detail::stddev(std::span<const double>(acc->data() + start, window));
        if (flow)
            fb.flow_mean_m3_h = dsp_detail::mean(std::span<const double>(flow->data() + start, window));
        out.push_back(std::move(fb));
    }
    return out;
}

struct DelayEstimate {
    double delay_s = 0.0;  // arrival of b relative to a (positive: b lags a)
    double peak_correlation = 0.0;
};

// Normalized cross-correlation over lags in [-max_lag, +max_lag], argmax
// refined by parabolic interpolation of the peak and its two neighbors.
// Computed via FFT; agrees with the direct lag-sum definition
//   r(l) = sum_t a'(t) * b'(t+l) / sqrt(sum a'^2 * sum b'^2)
// on demeaned signals to well below 1e-9 relative.
inline DelayEstimate estimate_delay(std::span<const double> a, std::span<const double> b,
                                    double sample_rate_hz, double max_lag_s) {
    if (a.empty() || b.empty()) throw std::invalid_argument("estimate_delay: empty input");
    const std::size_t max_lag = std::size_t(std::llround(max_lag_s * sample_rate_hz));
    if (max_lag >= a.size() || max_lag >= b.size())
        throw std::invalid_argument("estimate_delay: max_lag exceeds signal length");

    const double mean_a = dsp_detail::mean(a);
    const double mean_b = dsp_detail::mean(b);
    double sum_a2 = 0.0, sum_b2 = 0.0;
    for (double v : a) sum_a2 += (v - mean_a) * (v - mean_a);
    for (double v : b) sum_b2 += (v - mean_b) * (v - mean_b);
    if (!(sum_a2 > 0.0) || !(sum_b2 > 0.0))
        throw std::invalid_argument("estimate_delay: zero-variance input");
    const double norm = std::sqrt(sum_a2 * sum_b2);

    const std::size_t m = next_power_of_two(std::max(a.size(), b.size()) + max_lag + 1);
    std::vector<cdouble> fa(m, cdouble{}), fb_(m, cdouble{});
    for (std::size_t i = 0; i < a.size(); ++i) fa[i] = cdouble(a[i] - mean_a, 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) fb_[i] = cdouble(b[i] - mean_b, 0.0);
    fft(fa);
    fft(fb_);
    for (std::size_t i = 0; i < m; ++i) fa[i] = std::conj(fa[i]) * fb_[i];
    ifft(fa);

    // correlation at lag l: index l for l >= 0, index m+l for l < 0
    const auto corr_at = [&](long long lag) {
        return fa[lag >= 0 ? std::size_t(lag) : m - std::size_t(-lag)].real() / norm;
    };

    long long best_lag = -(long long)max_lag;
    double best = corr_at(best_lag);
    for (long long lag = -(long long)max_lag; lag <= (long long)max_lag; ++lag) {
        const double c = corr_at(lag);
        if (c > best) {
            best = c;
            best_lag = lag;
        }
    }

    double refined = double(best_lag);
    double peak = best;
    if (best_lag > -(long long)max_lag && best_lag < (long long)max_lag) {
        const double cm = corr_at(best_lag - 1);
        const double c0 = best;
        const double cp = corr_at(best_lag + 1);
        const double denom = cm - 2.0 * c0 + cp;
        if (denom < 0.0) {
            const double delta = 0.5 * (cm - cp) / denom;
            refined += delta;
            peak = c0 - 0.25 * (cm - cp) * delta;
        }
    }
    return {refined / sample_rate_hz, std::clamp(peak, -1.0, 1.0)};
}

}  // namespace leakdetect
