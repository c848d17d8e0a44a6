#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "leakdetect/dsp.hpp"
#include "leakdetect/synth.hpp"

using namespace leakdetect;
using Catch::Approx;

namespace {

StationLayout two_station_layout(double second_pos = 200.0) {
    StationLayout layout;
    layout.pipe_inner_diameter_m = 0.4064;
    for (auto& [id, pos] : std::vector<std::pair<std::string, double>>{
             {"A", 0.0}, {"B", second_pos}}) {
        Station st;
        st.id = id;
        st.position_m = pos;
        st.sensors.add(Sensor::static_pressure);
        st.sensors.add(Sensor::hydrophone);
        st.sensors.add(Sensor::accelerometer);
        st.sensors.add(Sensor::flowmeter);
        layout.stations.push_back(st);
    }
    return layout;
}

Scenario base_scenario() {
    Scenario sc;
    sc.layout = two_station_layout();
    sc.duration_s = 4.0;
    sc.seed = 42;
    sc.pump_stations = {{"A", 0.2}};
    return sc;
}

}  // namespace

TEST_CASE("synthesis is deterministic given the seed") {
    const auto sc = base_scenario();
    const auto r1 = synthesize(sc);
    const auto r2 = synthesize(sc);
    REQUIRE(r1.size() == r2.size());
    for (std::size_t s = 0; s < r1.size(); ++s)
        for (const auto& [kind, samples] : r1[s].channels)
            REQUIRE(samples == r2[s].channels.at(kind));

    auto sc2 = sc;
    sc2.seed = 43;
    const auto r3 = synthesize(sc2);
    CHECK(r1[0].channels.at(ChannelKind::dynamic_pressure_kpa) !=
          r3[0].channels.at(ChannelKind::dynamic_pressure_kpa));
}

TEST_CASE("transferring without a leak: high flow, leak band near the floor") {
    auto sc = base_scenario();
    sc.condition = Condition::transferring;
    const auto recs = synthesize(sc);
    for (const auto& rec : recs) {
        const auto batches = batch(rec, {1.0, 0.0});
        for (const auto& b : batches) {
            REQUIRE(b.flow_mean_m3_h > 100.0);
            // only pump leakage and sensor floor in the leak band
            REQUIRE(std::sqrt(b.leak_band_energy_kpa2) < 3.0 * sc.noise_floor_kpa);
            REQUIRE(b.static_pressure_mean_bar == Approx(4.0).margin(0.05));
        }
    }
}

TEST_CASE("standstill with pumps off: dynamic channel is the sensor floor") {
    auto sc = base_scenario();
    sc.condition = Condition::standstill;
    sc.pump_stations.clear();
    const auto recs = synthesize(sc);
    for (const auto& rec : recs) {
        const auto& dyn = rec.channels.at(ChannelKind::dynamic_pressure_kpa);
        double ss = 0.0;
        for (double v : dyn) ss += v * v;
        const double rms = std::sqrt(ss / double(dyn.size()));
        CHECK(rms == Approx(sc.noise_floor_kpa).epsilon(0.05));
        const auto batches = batch(rec, {1.0, 0.0});
        for (const auto& b : batches) {
            CHECK(b.static_pressure_mean_bar == Approx(0.6).margin(0.05));
            CHECK(std::abs(b.flow_mean_m3_h) < 1.0);
        }
    }
}

TEST_CASE("source-level contract: band-passed std at zero distance matches spl_forward") {
    auto sc = base_scenario();
    sc.duration_s = 12.0;
    LeakSpec leak;
    leak.position_m = 100.0;
    leak.nozzle.area_mm2 = 12.56;
    leak.delta_p_bar = 4.0;
    leak.start_s = 1.0;
    leak.stop_s = 11.0;  // 10 s of active signal
    sc.leak = leak;

    const auto src = leak_source_waveform(sc);
    const std::size_t a0 = src.pad + std::size_t(std::llround(leak.start_s * sc.sample_rate_hz));
    const std::size_t a1 = src.pad + std::size_t(std::llround(leak.stop_s * sc.sample_rate_hz));
    std::vector<double> active(src.samples.begin() + a0, src.samples.begin() + a1);
    const auto filtered = bandpass(active, sc.sample_rate_hz, 500.0, 4000.0);
    double ss = 0.0;
    for (double v : filtered) ss += v * v;
    const double measured = std::sqrt(ss / double(filtered.size()));
    const double target = spl_forward(leak.delta_p_bar, leak.nozzle.area_mm2, sc.spl_model);
    CHECK(measured == Approx(target).epsilon(0.03));
}

TEST_CASE("propagation delay matches arrival-time algebra within one sample") {
    auto sc = base_scenario();
    sc.layout = two_station_layout(200.0);
    sc.duration_s = 10.0;
    sc.attenuation_np_per_m = 0.002;  // keep the far copy visible
    sc.noise_floor_kpa = 0.002;
    sc.pump_stations.clear();
    LeakSpec leak;
    leak.position_m = 60.0;
    leak.nozzle.area_mm2 = 31.65;
    leak.delta_p_bar = 4.0;
    leak.start_s = 0.5;
    leak.stop_s = 9.5;
    sc.leak = leak;

    const auto recs = synthesize(sc);
    const auto fa = bandpass(recs[0].channels.at(ChannelKind::dynamic_pressure_kpa),
                             sc.sample_rate_hz, 500.0, 4000.0);
    const auto fb = bandpass(recs[1].channels.at(ChannelKind::dynamic_pressure_kpa),
                             sc.sample_rate_hz, 500.0, 4000.0);
    const auto est = estimate_delay(fa, fb, sc.sample_rate_hz, 0.25);

    const double c = sc.fluid.sound_speed_m_s;
    const double expected = (std::abs(leak.position_m - 200.0) -
                             std::abs(leak.position_m - 0.0)) / c;
    // est.delay is arrival at B minus arrival at A
    CHECK(std::abs(est.delay_s - expected) <= 1.0 / sc.sample_rate_hz);
    CHECK(est.peak_correlation > 0.5);
}

TEST_CASE("superposition: leak-on equals leak-off plus the isolated contribution") {
    auto sc = base_scenario();
    LeakSpec leak;
    leak.position_m = 50.0;
    leak.nozzle.area_mm2 = 12.56;
    leak.delta_p_bar = 4.0;
    leak.start_s = 1.0;
    leak.stop_s = 3.0;
    sc.leak = leak;

    auto sc_off = sc;
    sc_off.leak.reset();

    const auto on = synthesize(sc);
    const auto off = synthesize(sc_off);
    const auto contrib = leak_contribution(sc);

    for (std::size_t s = 0; s < on.size(); ++s) {
        for (const auto& [kind, samples] : on[s].channels) {
            const auto& base = off[s].channels.at(kind);
            const auto& add = contrib[s].channels.at(kind);
            for (std::size_t t = 0; t < samples.size(); ++t)
                REQUIRE(samples[t] == base[t] + add[t]);  // sample-exact
        }
    }
}

TEST_CASE("static pressure steps down while the leak is active") {
    auto sc = base_scenario();
    sc.duration_s = 6.0;
    LeakSpec leak;
    leak.position_m = 50.0;
    leak.nozzle.area_mm2 = 31.65;
    leak.delta_p_bar = 4.0;
    leak.start_s = 2.0;
    leak.stop_s = 4.0;
    sc.leak = leak;

    const auto contrib = leak_contribution(sc);
    const auto& stat = contrib[0].channels.at(ChannelKind::static_pressure_bar);
    const double q = leak_flow(0.62, 31.65e-6, 4.0e5, sc.fluid.density_kg_m3);
    const double expected_drop = sc.pressure_drop_bar_per_m3_s * q;
    CHECK(stat[std::size_t(3.0 * sc.sample_rate_hz)] == Approx(-expected_drop).epsilon(1e-12));
    CHECK(stat[std::size_t(1.0 * sc.sample_rate_hz)] == 0.0);
}

TEST_CASE("scenario validation") {
    auto sc = base_scenario();
    sc.sample_rate_hz = 4096.0;
    CHECK_THROWS_AS(synthesize(sc), std::invalid_argument);

    sc = base_scenario();
    sc.duration_s = 0.0;
    CHECK_THROWS_AS(synthesize(sc), std::invalid_argument);

    sc = base_scenario();
    LeakSpec leak;
    leak.position_m = 500.0;  // beyond the line
    leak.nozzle.area_mm2 = 12.56;
    leak.delta_p_bar = 4.0;
    leak.start_s = 0.0;
    leak.stop_s = 2.0;
    sc.leak = leak;
    CHECK_THROWS_AS(synthesize(sc), std::invalid_argument);

    sc = base_scenario();
    leak.position_m = 100.0;
    leak.start_s = 3.0;
    leak.stop_s = 2.0;  // inverted interval
    sc.leak = leak;
    CHECK_THROWS_AS(synthesize(sc), std::invalid_argument);

    sc = base_scenario();
    sc.rng_name = "xoshiro256";
    CHECK_THROWS_AS(synthesize(sc), std::invalid_argument);
}

TEST_CASE("acceleration channel carries the leak with the configured gain") {
    auto sc = base_scenario();
    LeakSpec leak;
    leak.position_m = 10.0;
    leak.nozzle.area_mm2 = 31.65;
    leak.delta_p_bar = 4.0;
    leak.start_s = 1.0;
    leak.stop_s = 3.0;
    sc.leak = leak;
    sc.accel_leak_gain = 3.0;

    const auto contrib = leak_contribution(sc);
    const auto& dyn = contrib[0].channels.at(ChannelKind::dynamic_pressure_kpa);
    const auto& acc = contrib[0].channels.at(ChannelKind::acceleration_m_s2);
    for (std::size_t t = 0; t < dyn.size(); t += 997)
        REQUIRE(acc[t] == Approx(3.0 * dyn[t]).margin(1e-15));
}
