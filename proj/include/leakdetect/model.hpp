#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace leakdetect {

// Input-file problem (bad syntax, missing key). Carries "file:line" where known.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Cross-correlation peak below the coherence floor.
struct NoCoherentSource : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Sensor : unsigned {
    static_pressure = 1u << 0,
    hydrophone      = 1u << 1,
    accelerometer   = 1u << 2,
    flowmeter       = 1u << 3,
};

struct SensorSet {
    unsigned bits = 0;

    bool has(Sensor s) const { return (bits & static_cast<unsigned>(s)) != 0; }
    void add(Sensor s) { bits |= static_cast<unsigned>(s); }
    bool operator==(const SensorSet&) const = default;
};

struct Station {
    std::string id;
    double position_m = 0.0;
    SensorSet sensors;
};

struct StationLayout {
    std::vector<Station> stations;
    double pipe_inner_diameter_m = 0.0;

    double line_length_m() const {
        return stations.empty() ? 0.0 : stations.back().position_m;
    }

    const Station* find(const std::string& id) const {
        for (const auto& s : stations)
            if (s.id == id) return &s;
        return nullptr;
    }
};

// Throws std::invalid_argument naming the first violated invariant.
inline const StationLayout& validate_layout(const StationLayout& layout) {
    if (layout.stations.size() < 2)
        throw std::invalid_argument("layout: need at least 2 stations, got " +
                                    std::to_string(layout.stations.size()));
    if (layout.stations.front().position_m != 0.0)
        throw std::invalid_argument("layout: first station must be at position 0");
    for (std::size_t i = 1; i < layout.stations.size(); ++i) {
        if (!(layout.stations[i].position_m > layout.stations[i - 1].position_m))
            throw std::invalid_argument("layout: positions not strictly increasing at station '" +
                                        layout.stations[i].id + "'");
    }
    if (!(layout.pipe_inner_diameter_m > 0.0))
        throw std::invalid_argument("layout: pipe_inner_diameter_m must be > 0");
    return layout;
}

enum class NozzleShape { circular, slot };

struct NozzleSpec {
    double area_mm2 = 0.0;
    NozzleShape shape = NozzleShape::circular;
    std::optional<double> orifice_diameter_m;  // derived for circular when absent
    double discharge_coefficient = 0.62;       // sharp-edged orifice default
};

inline const NozzleSpec& validate_nozzle(const NozzleSpec& n) {
    if (!(n.area_mm2 > 0.0))
        throw std::invalid_argument("nozzle: area_mm2 must be > 0");
    if (!(n.discharge_coefficient > 0.0 && n.discharge_coefficient <= 1.0))
        throw std::invalid_argument("nozzle: discharge_coefficient must be in (0, 1]");
    if (n.shape == NozzleShape::circular && n.orifice_diameter_m) {
        const double d_mm = *n.orifice_diameter_m * 1000.0;
        const double area_from_d = M_PI * 0.25 * d_mm * d_mm;
        if (std::abs(area_from_d - n.area_mm2) > 0.005 * n.area_mm2)
            throw std::invalid_argument("nozzle: circular area inconsistent with diameter "
                                        "(>0.5% off)");
    }
    return n;
}

inline double circular_orifice_diameter_m(double area_mm2) {
    return 2.0 * std::sqrt(area_mm2 / M_PI) * 1e-3;
}

struct FluidSpec {
    double density_kg_m3 = 800.0;   // light fuel oil
    double sound_speed_m_s = 1200.0;
};

inline const FluidSpec& validate_fluid(const FluidSpec& f) {
    if (!(f.density_kg_m3 > 0.0))
        throw std::invalid_argument("fluid: density_kg_m3 must be > 0");
    if (!(f.sound_speed_m_s > 0.0))
        throw std::invalid_argument("fluid: sound_speed_m_s must be > 0");
    return f;
}

enum class LeakClass { none, small, medium, large };

// Calibrated nozzle areas; the three classification targets.
inline constexpr double kSmallAreaMm2 = 5.06;
inline constexpr double kMediumAreaMm2 = 12.56;
inline constexpr double kLargeAreaMm2 = 31.65;

inline double nominal_area_mm2(LeakClass c) {
    switch (c) {
        case LeakClass::small: return kSmallAreaMm2;
        case LeakClass::medium: return kMediumAreaMm2;
        case LeakClass::large: return kLargeAreaMm2;
        case LeakClass::none: break;
    }
    throw std::invalid_argument("nominal_area_mm2: class 'none' has no area");
}

inline LeakClass leak_class_for_area(double nominal_mm2) {
    for (LeakClass c : {LeakClass::small, LeakClass::medium, LeakClass::large})
        if (nominal_mm2 == nominal_area_mm2(c)) return c;
    throw std::invalid_argument("leak_class_for_area: " + std::to_string(nominal_mm2) +
                                " mm2 is not a nominal class area");
}

inline const char* to_string(LeakClass c) {
    switch (c) {
        case LeakClass::none: return "none";
        case LeakClass::small: return "small";
        case LeakClass::medium: return "medium";
        case LeakClass::large: return "large";
    }
    return "?";
}

inline LeakClass leak_class_from_string(const std::string& s) {
    if (s == "none") return LeakClass::none;
    if (s == "small") return LeakClass::small;
    if (s == "medium") return LeakClass::medium;
    if (s == "large") return LeakClass::large;
    throw std::invalid_argument("unknown leak class '" + s + "'");
}

enum class ChannelKind : std::uint8_t {
    static_pressure_bar = 1,
    dynamic_pressure_kpa = 2,
    acceleration_m_s2 = 3,
    flow_m3_h = 4,
};

inline const char* to_string(ChannelKind k) {
    switch (k) {
        case ChannelKind::static_pressure_bar: return "static_pressure_bar";
        case ChannelKind::dynamic_pressure_kpa: return "dynamic_pressure_kpa";
        case ChannelKind::acceleration_m_s2: return "acceleration_m_s2";
        case ChannelKind::flow_m3_h: return "flow_m3_h";
    }
    return "?";
}

struct SignalRecord {
    std::string station_id;
    double sample_rate_hz = 0.0;
    double start_time_s = 0.0;
    std::map<ChannelKind, std::vector<double>> channels;

    std::size_t sample_count() const {
        return channels.empty() ? 0 : channels.begin()->second.size();
    }
    double duration_s() const {
        return sample_rate_hz > 0 ? double(sample_count()) / sample_rate_hz : 0.0;
    }
};

inline const SignalRecord& validate_record(const SignalRecord& r) {
    if (!(r.sample_rate_hz >= 8000.0))
        throw std::invalid_argument("record: sample_rate_hz must be >= 8000 "
                                    "(content extends up to 4 kHz)");
    if (r.channels.empty())
        throw std::invalid_argument("record: no channels");
    const std::size_t n = r.channels.begin()->second.size();
    for (const auto& [kind, samples] : r.channels)
        if (samples.size() != n)
            throw std::invalid_argument(std::string("record: channel ") + to_string(kind) +
                                        " length mismatch");
    return r;
}

struct FeatureBatch {
    std::string station_id;
    double window_start_s = 0.0;
    double window_len_s = 0.0;
    double static_pressure_mean_bar = std::nan("");
    double static_pressure_std_bar = std::nan("");
    double dyn_pressure_std_kpa = std::nan("");
    double dyn_pressure_max_kpa = std::nan("");
    double leak_band_energy_kpa2 = std::nan("");
    std::optional<double> accel_std_m_s2;
    double flow_mean_m3_h = std::nan("");
    LeakClass label = LeakClass::none;
};

struct SplModel {
    double n = 0.0;                 // area exponent
    double k = 0.0;                 // kPa/(bar*mm^2)
    double fit_residual_rms = 0.0;  // log-domain
    std::size_t sample_count = 0;
};

inline const SplModel& validate_spl_model(const SplModel& m) {
    if (!(m.k > 0.0))
        throw std::invalid_argument("spl model: k must be > 0");
    if (!(m.n >= 1.0 && m.n <= 3.0))
        throw std::invalid_argument("spl model: n outside acceptance envelope [1, 3]");
    return m;
}

enum class Gating { ok, low_pressure, unstable_pressure, standstill_masked };

inline const char* to_string(Gating g) {
    switch (g) {
        case Gating::ok: return "ok";
        case Gating::low_pressure: return "low_pressure";
        case Gating::unstable_pressure: return "unstable_pressure";
        case Gating::standstill_masked: return "standstill_masked";
    }
    return "?";
}

struct ReportEntry {
    double window_start_s = 0.0;
    std::string station_id;
    bool leak_detected = false;
    std::optional<double> estimated_area_mm2;  // only when detected
    LeakClass leak_class = LeakClass::none;
    Gating gating = Gating::ok;
};

struct LocalizationResult {
    double position_m = 0.0;
    double delay_s = 0.0;  // arrival at first station minus arrival at second
    double peak_correlation = 0.0;
    std::string station_a;
    std::string station_b;
    bool clamped = false;
};

struct DetectionReport {
    std::vector<ReportEntry> entries;
    std::optional<LocalizationResult> localization;
};

}  // namespace leakdetect
