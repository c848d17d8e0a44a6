#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "leakdetect/model.hpp"

namespace leakdetect {

// v_j = sqrt(2*dP/rho)
inline double jet_velocity(double delta_p_pa, double rho_kg_m3) {
    if (!(rho_kg_m3 > 0.0))
        throw std::invalid_argument("jet_velocity: density must be > 0");
    if (delta_p_pa < 0.0)
        throw std::invalid_argument("jet_velocity: negative pressure drop");
    return std::sqrt(2.0 * delta_p_pa / rho_kg_m3);
}

struct DischargeCoefficient {
    double value = 0.0;
    bool physical = true;  // false when value > 1 (inputs inconsistent with an orifice)
};

// C_d = (Q/A_or) * sqrt(rho/(2*dP))
inline DischargeCoefficient discharge_coefficient(double flow_m3_s, double area_m2,
                                                  double rho_kg_m3, double delta_p_pa) {
    if (!(flow_m3_s > 0.0) || !(area_m2 > 0.0) || !(rho_kg_m3 > 0.0) || !(delta_p_pa > 0.0))
        throw std::invalid_argument("discharge_coefficient: all arguments must be > 0");
    const double cd = flow_m3_s / (area_m2 * jet_velocity(delta_p_pa, rho_kg_m3));
    return {cd, cd <= 1.0};
}

// Q = C_d * A_or * v_j
inline double leak_flow(double c_d, double area_m2, double delta_p_pa, double rho_kg_m3) {
    if (!(c_d > 0.0 && c_d <= 1.0))
        throw std::invalid_argument("leak_flow: C_d must be in (0, 1]");
    if (!(area_m2 > 0.0))
        throw std::invalid_argument("leak_flow: area must be > 0");
    return c_d * area_m2 * jet_velocity(delta_p_pa, rho_kg_m3);
}

// SPL = dp * A^n * k   (kPa; dp in bar, A in mm^2)
inline double spl_forward(double delta_p_bar, double area_mm2, const SplModel& model) {
    validate_spl_model(model);
    if (!(delta_p_bar > 0.0) || !(area_mm2 > 0.0))
        throw std::invalid_argument("spl_forward: inputs must be > 0");
    return delta_p_bar * std::pow(area_mm2, model.n) * model.k;
}

// A = (SPL/(dp*k))^(1/n)
inline double spl_invert_area(double spl_kpa, double delta_p_bar, const SplModel& model) {
    validate_spl_model(model);
    if (!(spl_kpa > 0.0) || !(delta_p_bar > 0.0))
        throw std::invalid_argument("spl_invert_area: inputs must be > 0");
    return std::pow(spl_kpa / (delta_p_bar * model.k), 1.0 / model.n);
}

struct SplSample {
    double delta_p_bar = 0.0;
    double area_mm2 = 0.0;
    double spl_kpa = 0.0;  // std of band-passed dynamic pressure over a batch window
};

// Ordinary least squares on log(SPL) - log(dp) = log k + n * log A.
// Rejects rank-deficient sample sets (<2 distinct areas) and fits with n
// outside [1, 3].
inline SplModel fit_spl_model(const std::vector<SplSample>& samples) {
    if (samples.size() < 2)
        throw std::invalid_argument("fit_spl_model: need at least 2 samples");
    for (const auto& s : samples)
        if (!(s.delta_p_bar > 0.0) || !(s.area_mm2 > 0.0) || !(s.spl_kpa > 0.0))
            throw std::invalid_argument("fit_spl_model: samples must be strictly positive");

    const std::size_t m = samples.size();
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& s : samples) {
        mean_x += std::log(s.area_mm2);
        mean_y += std::log(s.spl_kpa) - std::log(s.delta_p_bar);
    }
    mean_x /= double(m);
    mean_y /= double(m);

    double sxx = 0.0, sxy = 0.0;
    for (const auto& s : samples) {
        const double dx = std::log(s.area_mm2) - mean_x;
        const double dy = (std::log(s.spl_kpa) - std::log(s.delta_p_bar)) - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
    }
    if (!(sxx > 1e-20 * double(m)))
        throw std::invalid_argument("fit_spl_model: rank-deficient (need >= 2 distinct areas)");

    SplModel model;
    model.n = sxy / sxx;
    model.k = std::exp(mean_y - model.n * mean_x);
    model.sample_count = m;

    double ss = 0.0;
    const double log_k = std::log(model.k);
    for (const auto& s : samples) {
        const double r = (std::log(s.spl_kpa) - std::log(s.delta_p_bar)) -
                         (log_k + model.n * std::log(s.area_mm2));
        ss += r * r;
    }
    model.fit_residual_rms = std::sqrt(ss / double(m));

    if (!(model.n >= 1.0 && model.n <= 3.0))
        throw std::invalid_argument("fit_spl_model: fitted n = " + std::to_string(model.n) +
                                    " outside acceptance envelope [1, 3]");
    return model;
}

}  // namespace leakdetect
