#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "leakdetect/detect.hpp"
#include "leakdetect/model.hpp"
#include "leakdetect/synth.hpp"

namespace leakdetect {

// ---------------------------------------------------------------------------
// text helpers
// ---------------------------------------------------------------------------

// shortest round-trip exact representation
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

// ---------------------------------------------------------------------------
// key-value files: one `key = value` per line, `#` comments, repeated keys
// allowed (station/pump/disturbance/vertex tables)
// ---------------------------------------------------------------------------

struct KvEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct KvFile {
    std::string path;
    std::vector<KvEntry> entries;

    std::optional<std::string> find(const std::string& key) const {
        for (const auto& e : entries)
            if (e.key == key) return e.value;
        return std::nullopt;
    }

    std::string require(const std::string& key) const {
        if (auto v = find(key)) return *v;
        throw ParseError(path + ": missing required key '" + key + "'");
    }

    std::vector<KvEntry> all(const std::string& key) const {
        std::vector<KvEntry> out;
        for (const auto& e : entries)
            if (e.key == key) out.push_back(e);
        return out;
    }

    double number(const std::string& key) const { return to_number(require(key), key, 0); }
    double number_or(const std::string& key, double dflt) const {
        auto v = find(key);
        return v ? to_number(*v, key, 0) : dflt;
    }

    double to_number(const std::string& v, const std::string& key, int line) const {
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing garbage");
            return d;
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line) + ": key '" + key +
                             "' is not a number: '" + v + "'");
        }
    }
};

inline KvFile parse_kv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    KvFile kv;
    kv.path = path;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        KvEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
        if (e.key.empty())
            throw ParseError(path + ":" + std::to_string(lineno) + ": empty key");
        kv.entries.push_back(std::move(e));
    }
    return kv;
}

// ---------------------------------------------------------------------------
// layout / fluid configuration
//   station = <id>,<position_m>,<sensor flags P|H|A|F>
// ---------------------------------------------------------------------------

inline std::string sensor_flags(SensorSet s) {
    std::string out;
    if (s.has(Sensor::static_pressure)) out += 'P';
    if (s.has(Sensor::hydrophone)) out += 'H';
    if (s.has(Sensor::accelerometer)) out += 'A';
    if (s.has(Sensor::flowmeter)) out += 'F';
    return out;
}

inline SensorSet parse_sensor_flags(const std::string& flags, const std::string& ctx) {
    SensorSet s;
    for (char c : flags) {
        switch (c) {
            case 'P': s.add(Sensor::static_pressure); break;
            case 'H': s.add(Sensor::hydrophone); break;
            case 'A': s.add(Sensor::accelerometer); break;
            case 'F': s.add(Sensor::flowmeter); break;
            default: throw ParseError(ctx + ": unknown sensor flag '" + std::string(1, c) + "'");
        }
    }
    return s;
}

inline StationLayout parse_layout(const KvFile& kv) {
    StationLayout layout;
    layout.pipe_inner_diameter_m = kv.number("pipe_inner_diameter_m");
    for (const auto& e : kv.all("station")) {
        const auto parts = split(e.value, ',');
        if (parts.size() != 3)
            throw ParseError(kv.path + ":" + std::to_string(e.line) +
                             ": station needs <id>,<position_m>,<flags>");
        Station st;
        st.id = parts[0];
        st.position_m = kv.to_number(parts[1], "station", e.line);
        st.sensors = parse_sensor_flags(parts[2], kv.path + ":" + std::to_string(e.line));
        layout.stations.push_back(std::move(st));
    }
    validate_layout(layout);
    return layout;
}

inline FluidSpec parse_fluid(const KvFile& kv) {
    FluidSpec f;
    f.density_kg_m3 = kv.number("fluid_density_kg_m3");
    f.sound_speed_m_s = kv.number("fluid_sound_speed_m_s");
    validate_fluid(f);
    return f;
}

inline Scenario parse_scenario(const std::string& path) {
    const KvFile kv = parse_kv(path);
    Scenario sc;
    sc.layout = parse_layout(kv);
    sc.fluid = parse_fluid(kv);
    sc.duration_s = kv.number("duration_s");
    sc.sample_rate_hz = kv.number_or("sample_rate_hz", 8192.0);
    sc.condition = condition_from_string(kv.require("condition"));
    sc.line_pressure_bar = kv.number_or("line_pressure_bar", 4.0);
    sc.standstill_pressure_bar = kv.number_or("standstill_pressure_bar", 0.6);
    sc.line_flow_m3_h = kv.number_or("line_flow_m3_h", 150.0);
    sc.attenuation_np_per_m = kv.number_or("attenuation_np_per_m", 0.05);
    sc.pump_attenuation_np_per_m = kv.number_or("pump_attenuation_np_per_m", 0.005);
    sc.noise_floor_kpa = kv.number_or("noise_floor_kpa", 0.01);
    sc.accel_leak_gain = kv.number_or("accel_leak_gain", 2.0);
    sc.accel_pump_gain = kv.number_or("accel_pump_gain", 0.5);
    sc.accel_floor_m_s2 = kv.number_or("accel_floor_m_s2", 0.005);
    sc.flow_noise_m3_h = kv.number_or("flow_noise_m3_h", 0.2);
    sc.pressure_drift_bar = kv.number_or("pressure_drift_bar", 0.02);
    sc.pressure_drop_bar_per_m3_s = kv.number_or("pressure_drop_bar_per_m3_s", 200.0);
    sc.spl_model.n = kv.number_or("spl_n", 1.5);
    sc.spl_model.k = kv.number_or("spl_k", 1e-3);
    sc.seed = std::uint64_t(kv.number("seed"));
    sc.rng_name = kv.require("rng");

    for (const auto& e : kv.all("pump")) {
        const auto parts = split(e.value, ',');
        if (parts.size() != 2)
            throw ParseError(kv.path + ":" + std::to_string(e.line) +
                             ": pump needs <station_id>,<amplitude_kpa>");
        sc.pump_stations.push_back({parts[0], kv.to_number(parts[1], "pump", e.line)});
    }
    for (const auto& e : kv.all("disturbance")) {
        const auto parts = split(e.value, ',');
        if (parts.size() != 4)
            throw ParseError(kv.path + ":" + std::to_string(e.line) +
                             ": disturbance needs <station_id>,<start_s>,<stop_s>,<flow_step>");
        sc.disturbances.push_back({parts[0], kv.to_number(parts[1], "disturbance", e.line),
                                   kv.to_number(parts[2], "disturbance", e.line),
                                   kv.to_number(parts[3], "disturbance", e.line)});
    }
    for (const auto& e : kv.all("pressure_dip")) {
        const auto parts = split(e.value, ',');
        if (parts.size() != 3)
            throw ParseError(kv.path + ":" + std::to_string(e.line) +
                             ": pressure_dip needs <start_s>,<stop_s>,<depth_bar>");
        sc.pressure_dips.push_back({kv.to_number(parts[0], "pressure_dip", e.line),
                                    kv.to_number(parts[1], "pressure_dip", e.line),
                                    kv.to_number(parts[2], "pressure_dip", e.line)});
    }
    if (kv.find("leak_position_m")) {
        LeakSpec leak;
        leak.position_m = kv.number("leak_position_m");
        leak.nozzle.area_mm2 = kv.number("leak_area_mm2");
        leak.nozzle.shape = kv.find("leak_shape").value_or("circular") == "slot"
                                ? NozzleShape::slot
                                : NozzleShape::circular;
        leak.nozzle.discharge_coefficient = kv.number_or("leak_cd", 0.62);
        leak.delta_p_bar = kv.number("leak_delta_p_bar");
        leak.start_s = kv.number("leak_start_s");
        leak.stop_s = kv.number("leak_stop_s");
        sc.leak = leak;
    }
    validate_scenario(sc);
    return sc;
}

// ---------------------------------------------------------------------------
// signal files: 64-byte header + channel-major little-endian float32 samples
// ---------------------------------------------------------------------------

inline constexpr char kSignalMagic[4] = {'E', 'V', 'P', 'M'};
inline constexpr std::uint32_t kSignalVersion = 1;

inline void write_signal_file(const std::string& path, const SignalRecord& rec) {
    validate_record(rec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");

    unsigned char header[64] = {0};
    std::memcpy(header, kSignalMagic, 4);
    const std::uint32_t version = kSignalVersion;
    std::memcpy(header + 4, &version, 4);
    std::memcpy(header + 8, &rec.sample_rate_hz, 8);
    std::memcpy(header + 16, &rec.start_time_s, 8);
    const std::uint32_t nchan = std::uint32_t(rec.channels.size());
    std::memcpy(header + 24, &nchan, 4);
    const std::uint64_t nsamp = rec.sample_count();
    std::memcpy(header + 28, &nsamp, 8);
    std::size_t ci = 0;
    for (const auto& [kind, _] : rec.channels) header[36 + ci++] = std::uint8_t(kind);
    if (rec.station_id.size() > 15)
        throw std::invalid_argument("station id too long for signal header (max 15)");
    std::memcpy(header + 44, rec.station_id.data(), rec.station_id.size());
    out.write(reinterpret_cast<const char*>(header), sizeof header);

    std::vector<float> buf(nsamp);
    for (const auto& [kind, samples] : rec.channels) {
        for (std::size_t i = 0; i < nsamp; ++i) buf[i] = float(samples[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  std::streamsize(buf.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

// human-readable sidecar repeating the header
inline void write_signal_sidecar(const std::string& path, const SignalRecord& rec) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "magic = EVPM\n"
        << "version = " << kSignalVersion << "\n"
        << "station_id = " << rec.station_id << "\n"
        << "sample_rate_hz = " << fmt_double(rec.sample_rate_hz) << "\n"
        << "start_time_s = " << fmt_double(rec.start_time_s) << "\n"
        << "channel_count = " << rec.channels.size() << "\n"
        << "sample_count = " << rec.sample_count() << "\n";
    for (const auto& [kind, _] : rec.channels)
        out << "channel = " << to_string(kind) << "\n";
}

inline SignalRecord read_signal_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    unsigned char header[64];
    in.read(reinterpret_cast<char*>(header), sizeof header);
    if (!in || std::memcmp(header, kSignalMagic, 4) != 0)
        throw ParseError(path + ": not an EVPM signal file");
    std::uint32_t version = 0;
    std::memcpy(&version, header + 4, 4);
    if (version != kSignalVersion)
        throw ParseError(path + ": unsupported signal file version " + std::to_string(version));

    SignalRecord rec;
    std::memcpy(&rec.sample_rate_hz, header + 8, 8);
    std::memcpy(&rec.start_time_s, header + 16, 8);
    std::uint32_t nchan = 0;
    std::uint64_t nsamp = 0;
    std::memcpy(&nchan, header + 24, 4);
    std::memcpy(&nsamp, header + 28, 8);
    if (nchan == 0 || nchan > 8) throw ParseError(path + ": bad channel count");
    char sid[17] = {0};
    std::memcpy(sid, header + 44, 16);
    rec.station_id = sid;

    std::vector<float> buf(nsamp);
    for (std::uint32_t c = 0; c < nchan; ++c) {
        const auto kind = ChannelKind(header[36 + c]);
        in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(nsamp * sizeof(float)));
        if (!in) throw ParseError(path + ": truncated sample data");
        std::vector<double> samples(nsamp);
        for (std::size_t i = 0; i < nsamp; ++i) samples[i] = double(buf[i]);
        rec.channels[kind] = std::move(samples);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// ground-truth manifest
// ---------------------------------------------------------------------------

struct Manifest {
    Condition condition = Condition::transferring;
    double duration_s = 0.0;
    double sample_rate_hz = 0.0;
    std::uint64_t seed = 0;
    std::optional<LeakSpec> leak;
    LeakClass leak_class = LeakClass::none;
    std::vector<std::pair<std::string, double>> station_positions;
};

inline void write_manifest(const std::string& path, const Scenario& sc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "condition = " << to_string(sc.condition) << "\n"
        << "duration_s = " << fmt_double(sc.duration_s) << "\n"
        << "sample_rate_hz = " << fmt_double(sc.sample_rate_hz) << "\n"
        << "seed = " << sc.seed << "\n";
    for (const auto& st : sc.layout.stations)
        out << "station = " << st.id << "," << fmt_double(st.position_m) << "\n";
    if (sc.leak) {
        out << "leak_position_m = " << fmt_double(sc.leak->position_m) << "\n"
            << "leak_area_mm2 = " << fmt_double(sc.leak->nozzle.area_mm2) << "\n"
            << "leak_class = " << to_string(classify_area(sc.leak->nozzle.area_mm2)) << "\n"
            << "leak_delta_p_bar = " << fmt_double(sc.leak->delta_p_bar) << "\n"
            << "leak_start_s = " << fmt_double(sc.leak->start_s) << "\n"
            << "leak_stop_s = " << fmt_double(sc.leak->stop_s) << "\n";
    }
}

inline Manifest read_manifest(const std::string& path) {
    const KvFile kv = parse_kv(path);
    Manifest m;
    m.condition = condition_from_string(kv.require("condition"));
    m.duration_s = kv.number("duration_s");
    m.sample_rate_hz = kv.number("sample_rate_hz");
    m.seed = std::uint64_t(kv.number("seed"));
    for (const auto& e : kv.all("station")) {
        const auto parts = split(e.value, ',');
        if (parts.size() != 2)
            throw ParseError(kv.path + ":" + std::to_string(e.line) +
                             ": station needs <id>,<position_m>");
        m.station_positions.emplace_back(parts[0], kv.to_number(parts[1], "station", e.line));
    }
    if (kv.find("leak_position_m")) {
        LeakSpec leak;
        leak.position_m = kv.number("leak_position_m");
        leak.nozzle.area_mm2 = kv.number("leak_area_mm2");
        leak.delta_p_bar = kv.number("leak_delta_p_bar");
        leak.start_s = kv.number("leak_start_s");
        leak.stop_s = kv.number("leak_stop_s");
        m.leak = leak;
        m.leak_class = leak_class_from_string(kv.require("leak_class"));
    }
    return m;
}

// Tag batches whose window lies fully inside the manifest leak interval.
inline void label_batches(std::vector<FeatureBatch>& batches, const Manifest& manifest) {
    if (!manifest.leak) return;
    for (auto& b : batches)
        if (b.window_start_s >= manifest.leak->start_s &&
            b.window_start_s + b.window_len_s <= manifest.leak->stop_s)
            b.label = manifest.leak_class;
}

// ---------------------------------------------------------------------------
// feature table: tab-separated, one header row, fixed column order
// ---------------------------------------------------------------------------

inline constexpr const char* kFeatureHeader =
    "station_id\twindow_start_s\twindow_len_s\tstatic_pressure_mean_bar\t"
    "static_pressure_std_bar\tdyn_pressure_std_kpa\tdyn_pressure_max_kpa\t"
    "leak_band_energy_kpa2\taccel_std_m_s2\tflow_mean_m3_h\tlabel";

inline void write_feature_table(const std::string& path,
                                const std::vector<FeatureBatch>& batches) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << kFeatureHeader << "\n";
    for (const auto& b : batches) {
        out << b.station_id << '\t' << fmt_double(b.window_start_s) << '\t'
            << fmt_double(b.window_len_s) << '\t' << fmt_double(b.static_pressure_mean_bar)
            << '\t' << fmt_double(b.static_pressure_std_bar) << '\t'
            << fmt_double(b.dyn_pressure_std_kpa) << '\t' << fmt_double(b.dyn_pressure_max_kpa)
            << '\t' << fmt_double(b.leak_band_energy_kpa2) << '\t'
            << (b.accel_std_m_s2 ? fmt_double(*b.accel_std_m_s2) : "nan") << '\t'
            << fmt_double(b.flow_mean_m3_h) << '\t' << to_string(b.label) << "\n";
    }
}

inline std::vector<FeatureBatch> read_feature_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty feature table");
    if (trim(line) != kFeatureHeader) throw ParseError(path + ": unexpected header row");
    std::vector<FeatureBatch> out;
    int lineno = 1;
    const auto num = [&](const std::string& s) {
        try {
            return std::stod(s);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
        }
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split(line, '\t');
        if (f.size() != 11)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 11 columns, got " +
                             std::to_string(f.size()));
        FeatureBatch b;
        b.station_id = f[0];
        b.window_start_s = num(f[1]);
        b.window_len_s = num(f[2]);
        b.static_pressure_mean_bar = num(f[3]);
        b.static_pressure_std_bar = num(f[4]);
        b.dyn_pressure_std_kpa = num(f[5]);
        b.dyn_pressure_max_kpa = num(f[6]);
        b.leak_band_energy_kpa2 = num(f[7]);
        if (f[8] != "nan") b.accel_std_m_s2 = num(f[8]);
        b.flow_mean_m3_h = num(f[9]);
        b.label = leak_class_from_string(f[10]);
        out.push_back(std::move(b));
    }
    return out;
}

// ---------------------------------------------------------------------------
// model / domain files
// ---------------------------------------------------------------------------

inline void write_model_file(const std::string& path, const SplModel& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "n = " << fmt_double(m.n) << "\n"
        << "k = " << fmt_double(m.k) << "\n"
        << "fit_residual_rms = " << fmt_double(m.fit_residual_rms) << "\n"
        << "sample_count = " << m.sample_count << "\n";
}

inline SplModel read_model_file(const std::string& path) {
    const KvFile kv = parse_kv(path);
    SplModel m;
    m.n = kv.number("n");
    m.k = kv.number("k");
    m.fit_residual_rms = kv.number("fit_residual_rms");
    m.sample_count = std::size_t(kv.number("sample_count"));
    validate_spl_model(m);
    return m;
}

inline void write_domain_file(const std::string& path, const DetectionDomain& d) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "feature_x = " << d.feature_x << "\n"
        << "feature_y = " << d.feature_y << "\n";
    for (const auto& v : d.polygon)
        out << "vertex = " << fmt_double(v[0]) << "," << fmt_double(v[1]) << "\n";
}

inline DetectionDomain read_domain_file(const std::string& path) {
    const KvFile kv = parse_kv(path);
    DetectionDomain d;
    d.feature_x = kv.require("feature_x");
    d.feature_y = kv.require("feature_y");
    for (const auto& e : kv.all("vertex")) {
        const auto parts = split(e.value, ',');
        if (parts.size() != 2)
            throw ParseError(kv.path + ":" + std::to_string(e.line) + ": vertex needs <x>,<y>");
        d.polygon.push_back({kv.to_number(parts[0], "vertex", e.line),
                             kv.to_number(parts[1], "vertex", e.line)});
    }
    if (d.polygon.size() < 3) throw ParseError(path + ": domain polygon needs >= 3 vertices");
    return d;
}

// ---------------------------------------------------------------------------
// detection report
// ---------------------------------------------------------------------------

struct ReportSummary {
    std::size_t leak_active_ok = 0;  // leak-active, ok-gated batches
    std::size_t detected = 0;        // of those, detected
    std::size_t false_positives = 0; // detections outside the leak interval
    std::size_t gated = 0;
};

struct ReportScore {
    ReportSummary global;
    std::vector<std::pair<std::string, ReportSummary>> per_station;
};

// Scores detection entries against manifest ground truth. A batch is
// leak-active when its window lies fully inside the leak interval.
inline ReportScore score_report(const std::vector<ReportEntry>& entries,
                                const Manifest& manifest, double window_len_s) {
    ReportScore score;
    const auto station_summary = [&](const std::string& id) -> ReportSummary& {
        for (auto& [sid, s] : score.per_station)
            if (sid == id) return s;
        score.per_station.emplace_back(id, ReportSummary{});
        return score.per_station.back().second;
    };
    for (const auto& e : entries) {
        auto& st = station_summary(e.station_id);
        const bool active = manifest.leak && e.window_start_s >= manifest.leak->start_s &&
                            e.window_start_s + window_len_s <= manifest.leak->stop_s;
        if (e.gating != Gating::ok) {
            ++score.global.gated;
            ++st.gated;
            continue;
        }
        if (active) {
            ++score.global.leak_active_ok;
            ++st.leak_active_ok;
            if (e.leak_detected) {
                ++score.global.detected;
                ++st.detected;
            }
        } else if (e.leak_detected) {
            ++score.global.false_positives;
            ++st.false_positives;
        }
    }
    return score;
}

inline void write_report(const std::string& path, const std::vector<ReportEntry>& entries,
                         const std::optional<ReportScore>& score) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "window_start_s\tstation_id\tgating\tleak\testimated_area_mm2\tclass\n";
    for (const auto& e : entries) {
        out << fmt_double(e.window_start_s) << '\t' << e.station_id << '\t'
            << to_string(e.gating) << '\t' << (e.leak_detected ? 1 : 0) << '\t'
            << (e.estimated_area_mm2 ? fmt_double(*e.estimated_area_mm2) : "nan") << '\t'
            << to_string(e.leak_class) << "\n";
    }
    if (score) {
        const auto line = [&](const std::string& scope, const ReportSummary& s) {
            out << "# summary " << scope << " leak_active_ok=" << s.leak_active_ok
                << " detected=" << s.detected << " false_positives=" << s.false_positives
                << " gated=" << s.gated << "\n";
        };
        line("all", score->global);
        for (const auto& [id, s] : score->per_station) line("station:" + id, s);
    }
}

}  // namespace leakdetect
