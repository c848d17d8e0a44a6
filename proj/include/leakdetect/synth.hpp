#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "leakdetect/fft.hpp"
#include "leakdetect/hydraulics.hpp"
#include "leakdetect/model.hpp"

namespace leakdetect {

enum class Condition { standstill, transferring };

inline const char* to_string(Condition c) {
    return c == Condition::standstill ? "standstill" : "transferring";
}

inline Condition condition_from_string(const std::string& s) {
    if (s == "standstill") return Condition::standstill;
    if (s == "transferring") return Condition::transferring;
    throw std::invalid_argument("unknown condition '" + s + "'");
}

struct LeakSpec {
    double position_m = 0.0;
    NozzleSpec nozzle;
    double delta_p_bar = 0.0;
    double start_s = 0.0;
    double stop_s = 0.0;
};

struct PumpSpec {
    std::string station_id;
    double amplitude_kpa = 0.0;
};

struct Disturbance {
    std::string station_id;
    double start_s = 0.0;
    double stop_s = 0.0;
    double flow_step_m3_h = 0.0;
};

struct PressureDip {
    double start_s = 0.0;
    double stop_s = 0.0;
    double depth_bar = 0.0;
};

// The only supported generator; fixed in the scenario file, not defaulted in code.
inline constexpr const char* kRngName = "mt19937_64";

struct Scenario {
    StationLayout layout;
    FluidSpec fluid;
    double duration_s = 0.0;
    double sample_rate_hz = 8192.0;
    Condition condition = Condition::transferring;
    double line_pressure_bar = 4.0;
    double standstill_pressure_bar = 0.6;
    double line_flow_m3_h = 150.0;
    std::vector<PumpSpec> pump_stations;
    std::optional<LeakSpec> leak;
    std::vector<Disturbance> disturbances;
    std::vector<PressureDip> pressure_dips;  // sporadic transferring lows, off by default
    double attenuation_np_per_m = 0.05;      // puts the detection radius at ~60 m
    double pump_attenuation_np_per_m = 0.005;
    double noise_floor_kpa = 0.01;
    double accel_leak_gain = 2.0;   // acceleration separates clusters more clearly
    double accel_pump_gain = 0.5;
    double accel_floor_m_s2 = 0.005;
    double flow_noise_m3_h = 0.2;
    double pressure_drift_bar = 0.02;
    double pressure_drop_bar_per_m3_s = 200.0;
    SplModel spl_model{1.5, 1e-3, 0.0, 0};
    std::uint64_t seed = 0;
    std::string rng_name = kRngName;
};

inline const Scenario& validate_scenario(const Scenario& sc) {
    validate_layout(sc.layout);
    validate_fluid(sc.fluid);
    validate_spl_model(sc.spl_model);
    if (!(sc.duration_s > 0.0))
        throw std::invalid_argument("scenario: duration_s must be > 0");
    if (!(sc.sample_rate_hz >= 8000.0))
        throw std::invalid_argument("scenario: sample_rate_hz must be >= 8000 "
                                    "(cannot represent 4 kHz content)");
    if (!(sc.attenuation_np_per_m >= 0.0) || !(sc.pump_attenuation_np_per_m >= 0.0))
        throw std::invalid_argument("scenario: attenuation must be >= 0");
    if (sc.rng_name != kRngName)
        throw std::invalid_argument("scenario: unsupported rng '" + sc.rng_name + "'");
    if (sc.leak) {
        validate_nozzle(sc.leak->nozzle);
        if (!(sc.leak->delta_p_bar > 0.0))
            throw std::invalid_argument("scenario: leak delta_p_bar must be > 0");
        if (!(sc.leak->start_s >= 0.0 && sc.leak->start_s < sc.leak->stop_s &&
              sc.leak->stop_s <= sc.duration_s))
            throw std::invalid_argument("scenario: need 0 <= leak start < stop <= duration");
        if (!(sc.leak->position_m >= 0.0 && sc.leak->position_m <= sc.layout.line_length_m()))
            throw std::invalid_argument("scenario: leak position outside line extent");
    }
    for (const auto& d : sc.disturbances) {
        if (!(d.start_s >= 0.0 && d.start_s < d.stop_s && d.stop_s <= sc.duration_s))
            throw std::invalid_argument("scenario: bad disturbance interval");
        if (!sc.layout.find(d.station_id))
            throw std::invalid_argument("scenario: disturbance at unknown station '" +
                                        d.station_id + "'");
    }
    for (const auto& p : sc.pump_stations)
        if (!sc.layout.find(p.station_id))
            throw std::invalid_argument("scenario: pump at unknown station '" + p.station_id +
                                        "'");
    return sc;
}

namespace synth_detail {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Independent, portable substream: mt19937_64 plus an explicit Box-Muller,
// so the byte stream is identical across platforms and standard libraries.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, const std::string& tag)
        : eng_(splitmix64(seed ^ fnv1a64(tag))) {}

    double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }  // [0, 1)

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Noise with power spectral density shape(f), unit expected RMS, length n_out.
template <typename ShapeFn>
std::vector<double> colored_noise(GaussianStream& rng, std::size_t n_out, double fs,
                                  ShapeFn shape) {
    const std::size_t m = next_power_of_two(std::max<std::size_t>(n_out, 2));
    std::vector<cdouble> spec(m, cdouble{});
    double expected_power = 0.0;
    for (std::size_t k = 1; k < m / 2; ++k) {
        const double s = shape(double(k) * fs / double(m));
        const double w = std::sqrt(0.5 * s);
        spec[k] = cdouble(w * rng.gaussian(), w * rng.gaussian());
        spec[m - k] = std::conj(spec[k]);
        expected_power += 2.0 * s;
    }
    {
        const double s = shape(0.5 * fs);
        spec[m / 2] = cdouble(std::sqrt(s) * rng.gaussian(), 0.0);
        expected_power += s;
    }
    ifft(spec);
    // E[x^2] = expected_power / m after the 1/m inverse normalization
    const double scale = std::sqrt(double(m) / expected_power);
    std::vector<double> out(n_out);
    for (std::size_t i = 0; i < n_out; ++i) out[i] = spec[i].real() * scale;
    return out;
}

inline double pump_spectrum(double f) {
    const double r = f / 150.0;  // power concentrated below a few hundred Hz
    return 1.0 / (1.0 + r * r * r * r);
}

}  // namespace synth_detail

// Leak source waveform on the extended timeline: index pad + t corresponds to
// emission time t/fs, gated to the active interval, band-limited to
// [500, 4000] Hz, with full-array RMS pinned to spl_forward(dp, A).
struct LeakSource {
    std::vector<double> samples;
    std::size_t pad = 0;  // samples of pre-roll before emission time zero
};

inline std::size_t leak_pad_samples(const Scenario& sc) {
    if (!sc.leak) return 0;
    double dmax = 0.0;
    for (const auto& st : sc.layout.stations)
        dmax = std::max(dmax, std::abs(sc.leak->position_m - st.position_m));
    return std::size_t(std::ceil(dmax / sc.fluid.sound_speed_m_s * sc.sample_rate_hz)) + 2;
}

inline LeakSource leak_source_waveform(const Scenario& sc) {
    validate_scenario(sc);
    if (!sc.leak) throw std::invalid_argument("leak_source_waveform: scenario has no leak");
    const double fs = sc.sample_rate_hz;
    const std::size_t n = std::size_t(std::llround(sc.duration_s * fs));
    const std::size_t pad = leak_pad_samples(sc);

    synth_detail::GaussianStream rng(sc.seed, "leak_source");
    auto noise = synth_detail::colored_noise(rng, n + pad, fs, [fs](double f) {
        return (f >= kDefaultBandLoHz && f <= std::min(kDefaultBandHiHz, 0.5 * fs)) ? 1.0 : 0.0;
    });

    // gate to the active interval, then pin the realized RMS exactly
    const double t0 = sc.leak->start_s, t1 = sc.leak->stop_s;
    double sumsq = 0.0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < noise.size(); ++i) {
        const double t = (double(i) - double(pad)) / fs;
        if (t >= t0 && t < t1) {
            sumsq += noise[i] * noise[i];
            ++active;
        } else {
            noise[i] = 0.0;
        }
    }
    if (active == 0) throw std::invalid_argument("leak_source_waveform: empty active interval");
    const double target =
        spl_forward(sc.leak->delta_p_bar, sc.leak->nozzle.area_mm2, sc.spl_model);
    const double scale = target / std::sqrt(sumsq / double(active));
    for (auto& v : noise) v *= scale;
    return {std::move(noise), pad};
}

// Additive leak component per station (zero arrays when the scenario has no
// leak). synthesize() composes records as leak-off baseline plus exactly this.
inline std::vector<SignalRecord> leak_contribution(const Scenario& sc) {
    validate_scenario(sc);
    const double fs = sc.sample_rate_hz;
    const std::size_t n = std::size_t(std::llround(sc.duration_s * fs));

    std::vector<SignalRecord> out;
    LeakSource src;
    double drop_bar = 0.0;
    if (sc.leak) {
        src = leak_source_waveform(sc);
        const double q = leak_flow(sc.leak->nozzle.discharge_coefficient,
                                   sc.leak->nozzle.area_mm2 * 1e-6,
                                   sc.leak->delta_p_bar * 1e5, sc.fluid.density_kg_m3);
        drop_bar = sc.pressure_drop_bar_per_m3_s * q;
    }

    for (const auto& st : sc.layout.stations) {
        SignalRecord rec;
        rec.station_id = st.id;
        rec.sample_rate_hz = fs;

        std::vector<double> dyn(n, 0.0);
        std::vector<double> stat(n, 0.0);
        if (sc.leak) {
            const double dist = std::abs(sc.leak->position_m - st.position_m);
            const double atten = std::exp(-sc.attenuation_np_per_m * dist);
            const long long delay =
                std::llround(dist / sc.fluid.sound_speed_m_s * fs);
            for (std::size_t t = 0; t < n; ++t) {
                const long long j = (long long)t + (long long)src.pad - delay;
                if (j >= 0 && j < (long long)src.samples.size())
                    dyn[t] = atten * src.samples[std::size_t(j)];
            }
            const std::size_t a0 = std::size_t(std::llround(sc.leak->start_s * fs));
            const std::size_t a1 = std::size_t(std::llround(sc.leak->stop_s * fs));
            for (std::size_t t = a0; t < std::min(a1, n); ++t) stat[t] = -drop_bar;
        }

        if (st.sensors.has(Sensor::static_pressure))
            rec.channels[ChannelKind::static_pressure_bar] = stat;
        if (st.sensors.has(Sensor::accelerometer)) {
            std::vector<double> acc(n, 0.0);
            for (std::size_t t = 0; t < n; ++t) acc[t] = sc.accel_leak_gain * dyn[t];
            rec.channels[ChannelKind::acceleration_m_s2] = std::move(acc);
        }
        if (st.sensors.has(Sensor::hydrophone))
            rec.channels[ChannelKind::dynamic_pressure_kpa] = std::move(dyn);
        if (st.sensors.has(Sensor::flowmeter))
            rec.channels[ChannelKind::flow_m3_h] = std::vector<double>(n, 0.0);
        out.push_back(std::move(rec));
    }
    return out;
}

// Deterministic multi-station generator. Identical scenarios (seed included)
// yield bit-identical records; every noise component draws from its own
// (seed, station, component) substream, so the leak-off baseline is unchanged
// by toggling the leak.
inline std::vector<SignalRecord> synthesize(const Scenario& sc) {
    validate_scenario(sc);
    const double fs = sc.sample_rate_hz;
    const std::size_t n = std::size_t(std::llround(sc.duration_s * fs));
    const bool transferring = sc.condition == Condition::transferring;
    const double base_bar = transferring ? sc.line_pressure_bar : sc.standstill_pressure_bar;

    std::vector<SignalRecord> records;
    for (const auto& st : sc.layout.stations) {
        SignalRecord rec;
        rec.station_id = st.id;
        rec.sample_rate_hz = fs;

        // pump noise: independent realization per (pump, station), colored
        // low-frequency, amplitude decaying with distance from the pump
        std::vector<double> pump(n, 0.0);
        for (const auto& p : sc.pump_stations) {
            if (p.amplitude_kpa <= 0.0) continue;
            const double dist = std::abs(sc.layout.find(p.station_id)->position_m -
                                         st.position_m);
            const double amp = p.amplitude_kpa * std::exp(-sc.pump_attenuation_np_per_m * dist);
            synth_detail::GaussianStream rng(sc.seed, "pump/" + p.station_id + "/" + st.id);
            auto noise = synth_detail::colored_noise(rng, n, fs, synth_detail::pump_spectrum);
            for (std::size_t t = 0; t < n; ++t) pump[t] += amp * noise[t];
        }

        if (st.sensors.has(Sensor::static_pressure)) {
            std::vector<double> stat(n, base_bar);
            if (sc.pressure_drift_bar > 0.0) {
                synth_detail::GaussianStream rng(sc.seed, "drift/" + st.id);
                const double p1 = 2.0 * M_PI * rng.uniform();
                const double p2 = 2.0 * M_PI * rng.uniform();
                for (std::size_t t = 0; t < n; ++t) {
                    const double ts = double(t) / fs;
                    stat[t] += sc.pressure_drift_bar *
                               (0.6 * std::sin(2.0 * M_PI * 0.013 * ts + p1) +
                                0.4 * std::sin(2.0 * M_PI * 0.031 * ts + p2));
                }
            }
            for (const auto& dip : sc.pressure_dips) {
                const std::size_t d0 = std::size_t(std::llround(dip.start_s * fs));
                const std::size_t d1 = std::size_t(std::llround(dip.stop_s * fs));
                for (std::size_t t = d0; t < std::min(d1, n); ++t) stat[t] -= dip.depth_bar;
            }
            rec.channels[ChannelKind::static_pressure_bar] = std::move(stat);
        }

        if (st.sensors.has(Sensor::hydrophone)) {
            std::vector<double> dyn(n);
            synth_detail::GaussianStream rng(sc.seed, "floor/" + st.id);
            for (std::size_t t = 0; t < n; ++t)
                dyn[t] = pump[t] + sc.noise_floor_kpa * rng.gaussian();
            rec.channels[ChannelKind::dynamic_pressure_kpa] = std::move(dyn);
        }

        if (st.sensors.has(Sensor::accelerometer)) {
            std::vector<double> acc(n);
            synth_detail::GaussianStream rng(sc.seed, "accel_floor/" + st.id);
            for (std::size_t t = 0; t < n; ++t)
                acc[t] = sc.accel_pump_gain * pump[t] + sc.accel_floor_m_s2 * rng.gaussian();
            rec.channels[ChannelKind::acceleration_m_s2] = std::move(acc);
        }

        if (st.sensors.has(Sensor::flowmeter)) {
            std::vector<double> flow(n);
            synth_detail::GaussianStream rng(sc.seed, "flow/" + st.id);
            const double base_flow = transferring ? sc.line_flow_m3_h : 0.0;
            for (std::size_t t = 0; t < n; ++t)
                flow[t] = base_flow + sc.flow_noise_m3_h * rng.gaussian();
            for (const auto& d : sc.disturbances) {
                if (d.station_id != st.id) continue;
                const std::size_t d0 = std::size_t(std::llround(d.start_s * fs));
                const std::size_t d1 = std::size_t(std::llround(d.stop_s * fs));
                for (std::size_t t = d0; t < std::min(d1, n); ++t) flow[t] += d.flow_step_m3_h;
            }
            rec.channels[ChannelKind::flow_m3_h] = std::move(flow);
        }

        records.push_back(std::move(rec));
    }

    if (sc.leak) {
        const auto contrib = leak_contribution(sc);
        for (std::size_t s = 0; s < records.size(); ++s)
            for (auto& [kind, samples] : records[s].channels) {
                const auto& add = contrib[s].channels.at(kind);
                for (std::size_t t = 0; t < samples.size(); ++t) samples[t] += add[t];
            }
    }
    return records;
}

}  // namespace leakdetect
