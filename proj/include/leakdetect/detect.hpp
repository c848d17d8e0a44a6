#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "leakdetect/dsp.hpp"
#include "leakdetect/hydraulics.hpp"
#include "leakdetect/model.hpp"

namespace leakdetect {

enum class OperatingCondition { standstill, transferring, indeterminate };

inline const char* to_string(OperatingCondition c) {
    switch (c) {
        case OperatingCondition::standstill: return "standstill";
        case OperatingCondition::transferring: return "transferring";
        case OperatingCondition::indeterminate: return "indeterminate";
    }
    return "?";
}

inline constexpr double kStandstillFlowMaxM3h = 1.0;
inline constexpr double kStandstillPressureMaxBar = 0.7;
inline constexpr double kTransferringFlowMinM3h = 100.0;
inline constexpr double kGateMinPressureBar = 3.0;
inline constexpr double kGateMaxPressureStdBar = 0.2;  // 5% of the 4 bar operating point

inline OperatingCondition classify_condition(const FeatureBatch& b) {
    if (std::isnan(b.flow_mean_m3_h) || std::isnan(b.static_pressure_mean_bar))
        throw std::invalid_argument("classify_condition: batch lacks flow or static pressure");
    if (b.flow_mean_m3_h < kStandstillFlowMaxM3h &&
        b.static_pressure_mean_bar <= kStandstillPressureMaxBar)
        return OperatingCondition::standstill;
    if (b.flow_mean_m3_h > kTransferringFlowMinM3h) return OperatingCondition::transferring;
    return OperatingCondition::indeterminate;
}

struct DetectionDomain {
    std::string feature_x;
    std::string feature_y;
    std::vector<std::array<double, 2>> polygon;  // counter-clockwise, simple
};

inline double feature_value(const FeatureBatch& b, std::string_view name) {
    if (name == "static_pressure_mean_bar") return b.static_pressure_mean_bar;
    if (name == "static_pressure_std_bar") return b.static_pressure_std_bar;
    if (name == "dyn_pressure_std_kpa") return b.dyn_pressure_std_kpa;
    if (name == "dyn_pressure_max_kpa") return b.dyn_pressure_max_kpa;
    if (name == "leak_band_energy_kpa2") return b.leak_band_energy_kpa2;
    if (name == "accel_std_m_s2")
        return b.accel_std_m_s2 ? *b.accel_std_m_s2 : std::nan("");
    if (name == "flow_mean_m3_h") return b.flow_mean_m3_h;
    throw std::invalid_argument("unknown feature '" + std::string(name) + "'");
}

namespace geom {

inline double cross(const std::array<double, 2>& o, const std::array<double, 2>& a,
                    const std::array<double, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Andrew monotone chain; returns CCW hull without collinear boundary points.
inline std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n < 3) return {};
    std::vector<std::array<double, 2>> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = n - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

inline bool on_segment(const std::array<double, 2>& a, const std::array<double, 2>& b,
                       const std::array<double, 2>& p) {
    if (cross(a, b, p) != 0.0) return false;
    return p[0] >= std::min(a[0], b[0]) && p[0] <= std::max(a[0], b[0]) &&
           p[1] >= std::min(a[1], b[1]) && p[1] <= std::max(a[1], b[1]);
}

// Ray casting; the boundary counts as inside.
inline bool point_in_polygon(const std::vector<std::array<double, 2>>& poly,
                             const std::array<double, 2>& p) {
    const std::size_t n = poly.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (on_segment(poly[j], poly[i], p)) return true;
        const bool crosses = (poly[i][1] > p[1]) != (poly[j][1] > p[1]);
        if (crosses) {
            const double x = poly[j][0] + (p[1] - poly[j][1]) * (poly[i][0] - poly[j][0]) /
                                              (poly[i][1] - poly[j][1]);
            if (p[0] < x) inside = !inside;
        }
    }
    return inside;
}

}  // namespace geom

// Convex hull of the leak-labeled points, dilated ~5% outward (uniform
// scaling about the hull centroid) so boundary training points sit strictly
// inside. Collinear or too-few leak points are an error.
inline DetectionDomain train_domain(const std::vector<FeatureBatch>& batches,
                                    const std::string& feature_x, const std::string& feature_y) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& b : batches)
        if (b.label != LeakClass::none)
            pts.push_back({feature_value(b, feature_x), feature_value(b, feature_y)});
    if (pts.size() < 3)
        throw std::invalid_argument("train_domain: need >= 3 leak-labeled batches, got " +
                                    std::to_string(pts.size()));
    auto hull = geom::convex_hull(pts);
    if (hull.size() < 3)
        throw std::invalid_argument("train_domain: leak points are collinear (degenerate hull)");

    double cx = 0.0, cy = 0.0;
    for (const auto& v : hull) {
        cx += v[0];
        cy += v[1];
    }
    cx /= double(hull.size());
    cy /= double(hull.size());
    for (auto& v : hull) {
        v[0] = cx + 1.1 * (v[0] - cx);
        v[1] = cy + 1.1 * (v[1] - cy);
    }
    return {feature_x, feature_y, std::move(hull)};
}

struct LeakVerdict {
    bool leak = false;
    Gating gating = Gating::ok;
};

// Gating dominates: no verdict is issued from features when the hydraulic
// conditions make the acoustic signature unreliable.
inline LeakVerdict detect_leak(const FeatureBatch& b, const DetectionDomain& domain) {
    if (domain.polygon.size() < 3) throw std::invalid_argument("detect_leak: invalid domain");
    if (std::isnan(b.static_pressure_mean_bar) || std::isnan(b.static_pressure_std_bar))
        throw std::invalid_argument("detect_leak: batch lacks static pressure statistics");
    if (b.static_pressure_mean_bar < kGateMinPressureBar) return {false, Gating::low_pressure};
    if (b.static_pressure_std_bar > kGateMaxPressureStdBar)
        return {false, Gating::unstable_pressure};
    const std::array<double, 2> p{feature_value(b, domain.feature_x),
                                  feature_value(b, domain.feature_y)};
    if (std::isnan(p[0]) || std::isnan(p[1]))
        throw std::invalid_argument("detect_leak: batch lacks domain features");
    return {geom::point_in_polygon(domain.polygon, p), Gating::ok};
}

struct HoleEstimate {
    double estimated_area_mm2 = 0.0;
    LeakClass leak_class = LeakClass::none;
};

// Nearest nominal area in log distance; near-ties go to the smaller class
// (the small-hole boundary is the hard one).
inline LeakClass classify_area(double area_mm2) {
    if (!(area_mm2 > 0.0)) throw std::invalid_argument("classify_area: area must be > 0");
    LeakClass best = LeakClass::small;
    double best_dist = std::abs(std::log(area_mm2) - std::log(kSmallAreaMm2));
    for (LeakClass c : {LeakClass::medium, LeakClass::large}) {
        const double d = std::abs(std::log(area_mm2) - std::log(nominal_area_mm2(c)));
        if (d < best_dist - 1e-12) {
            best_dist = d;
            best = c;
        }
    }
    return best;
}

inline HoleEstimate classify_hole(const FeatureBatch& b, double delta_p_bar,
                                  const SplModel& model) {
    if (std::isnan(b.leak_band_energy_kpa2) || !(b.leak_band_energy_kpa2 > 0.0))
        throw std::invalid_argument("classify_hole: batch lacks leak-band energy");
    const double spl = std::sqrt(b.leak_band_energy_kpa2);  // std of band-passed pressure
    const double area = spl_invert_area(spl, delta_p_bar, model);
    return {area, classify_area(area)};
}

inline constexpr double kDefaultPeakFloor = 0.1;

// Two-station cross-correlation localization. Records are band-passed to the
// leak band; the TDOA maps to position through the fluid sound speed.
inline LocalizationResult localize(const SignalRecord& rec_a, const SignalRecord& rec_b,
                                   const StationLayout& layout, const FluidSpec& fluid,
                                   double band_lo_hz = kDefaultBandLoHz,
                                   double band_hi_hz = kDefaultBandHiHz,
                                   double peak_floor = kDefaultPeakFloor) {
    validate_layout(layout);
    validate_fluid(fluid);
    const Station* sa = layout.find(rec_a.station_id);
    const Station* sb = layout.find(rec_b.station_id);
    if (!sa || !sb)
        throw std::invalid_argument("localize: record station not in layout");
    if (sa->id == sb->id) throw std::invalid_argument("localize: stations must be distinct");
    if (rec_a.sample_rate_hz != rec_b.sample_rate_hz)
        throw std::invalid_argument("localize: sample rates differ");
    const auto it_a = rec_a.channels.find(ChannelKind::dynamic_pressure_kpa);
    const auto it_b = rec_b.channels.find(ChannelKind::dynamic_pressure_kpa);
    if (it_a == rec_a.channels.end() || it_b == rec_b.channels.end())
        throw std::invalid_argument("localize: records need a dynamic pressure channel");

    const double d1 = std::min(sa->position_m, sb->position_m);
    const double d2 = std::max(sa->position_m, sb->position_m);
    const double fs = rec_a.sample_rate_hz;

    const auto fa = bandpass(it_a->second, fs, band_lo_hz, band_hi_hz);
    const auto fb = bandpass(it_b->second, fs, band_lo_hz, band_hi_hz);
    const double max_lag_s = 1.05 * (d2 - d1) / fluid.sound_speed_m_s;
    const auto est = estimate_delay(fa, fb, fs, max_lag_s);

    if (std::abs(est.peak_correlation) < peak_floor)
        throw NoCoherentSource("localize: peak correlation " +
                               std::to_string(est.peak_correlation) + " below floor " +
                               std::to_string(peak_floor));

    // est.delay is arrival at b minus arrival at a; tau is a minus b
    double tau = -est.delay_s;
    if (sa->position_m > sb->position_m) tau = -tau;  // orient along increasing position
    double pos = 0.5 * (d1 + d2) + 0.5 * fluid.sound_speed_m_s * tau;
    bool clamped = false;
    if (pos < d1) {
        pos = d1;
        clamped = true;
    } else if (pos > d2) {
        pos = d2;
        clamped = true;
    }
    return {pos, -est.delay_s, est.peak_correlation, rec_a.station_id, rec_b.station_id,
            clamped};
}

}  // namespace leakdetect
