#pragma once

// Shared configuration file handling. The JSON schema (documented in
// docs/config_schema.json) speaks ordinary frequencies in Hz and times in
// seconds; angular quantities are converted at this boundary.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "spinmux/errors.hpp"
#include "spinmux/expsim.hpp"
#include "spinmux/ion_model.hpp"

namespace spinmux::config {

using nlohmann::json;

inline constexpr int schema_version = 1;

struct Config {
    std::vector<ion::IonSpec> ions;
    ion::CavitySpec cavity;
    ion::MagneticFieldConfig field;
    expsim::HardwareSpec hardware;
};

namespace detail {

inline const json& require(const json& j, const std::string& key,
                           const char* context) {
    if (!j.contains(key))
        throw ConfigError(std::string(context) + ": missing field '" + key + "'");
    return j.at(key);
}

inline double require_number(const json& j, const std::string& key,
                             const char* context) {
    const json& v = require(j, key, context);
    if (!v.is_number())
        throw ConfigError(std::string(context) + ": field '" + key +
                          "' must be a number");
    return v.get<double>();
}

inline double optional_number(const json& j, const std::string& key,
                              double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number())
        throw ConfigError("field '" + key + "' must be a number");
    return j.at(key).get<double>();
}

}  // namespace detail

inline ion::IonSpec ion_from_json(const json& j) {
    ion::IonSpec spec;
    spec.label = detail::require(j, "label", "ion").get<std::string>();
    spec.f_a = detail::require_number(j, "f_a_hz", "ion");
    spec.f_b = detail::require_number(j, "f_b_hz", "ion");
    spec.gamma_eff = hz_to_angular(detail::require_number(j, "linewidth_fwhm_hz", "ion"));
    spec.gamma_rad = hz_to_angular(detail::require_number(j, "radiative_rate_hz", "ion"));
    spec.cyclicity = detail::require_number(j, "cyclicity", "ion");
    spec.purcell = detail::require_number(j, "purcell", "ion");
    spec.spin.t1 = detail::require_number(j, "t1_s", "ion");
    spec.spin.t2_star = detail::require_number(j, "t2_star_s", "ion");
    spec.spin.t2_xy8 = detail::require_number(j, "t2_xy8_s", "ion");
    spec.mw_rabi = hz_to_angular(detail::optional_number(j, "mw_rabi_hz", 5e6));
    try {
        spec.validate();
    } catch (const InputError& e) {
        throw ConfigError("ion '" + spec.label + "': " + e.what());
    }
    return spec;
}

inline json ion_to_json(const ion::IonSpec& spec) {
    return {{"label", spec.label},
            {"f_a_hz", spec.f_a},
            {"f_b_hz", spec.f_b},
            {"linewidth_fwhm_hz", angular_to_hz(spec.gamma_eff)},
            {"radiative_rate_hz", angular_to_hz(spec.gamma_rad)},
            {"cyclicity", spec.cyclicity},
            {"purcell", spec.purcell},
            {"t1_s", spec.spin.t1},
            {"t2_star_s", spec.spin.t2_star},
            {"t2_xy8_s", spec.spin.t2_xy8},
            {"mw_rabi_hz", angular_to_hz(spec.mw_rabi)}};
}

inline Config config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    const int version = j.contains("version") ? j.at("version").get<int>() : 1;
    if (version != schema_version)
        throw ConfigError("config: unsupported schema version " +
                          std::to_string(version));

    Config cfg;
    const json& ions = detail::require(j, "ions", "config");
    if (!ions.is_array() || ions.empty())
        throw ConfigError("config: 'ions' must be a non-empty array");
    for (const auto& ij : ions) cfg.ions.push_back(ion_from_json(ij));

    const json& cav = detail::require(j, "cavity", "config");
    cfg.cavity.f_cav = detail::require_number(cav, "f_cav_hz", "cavity");
    cfg.cavity.q_factor = detail::require_number(cav, "q_factor", "cavity");
    cfg.cavity.purcell_ref = detail::optional_number(cav, "purcell_ref", 330.0);
    try {
        cfg.cavity.validate();
    } catch (const InputError& e) {
        throw ConfigError(std::string("cavity: ") + e.what());
    }

    if (j.contains("field")) {
        const json& f = j.at("field");
        cfg.field.magnitude_gauss = detail::optional_number(f, "magnitude_gauss", 112.0);
        cfg.field.theta_deg = detail::optional_number(f, "theta_deg", 90.0);
        cfg.field.phi_deg = detail::optional_number(f, "phi_deg", 150.0);
        try {
            cfg.field.validate();
        } catch (const InputError& e) {
            throw ConfigError(std::string("field: ") + e.what());
        }
    }

    if (j.contains("hardware")) {
        const json& h = j.at("hardware");
        auto& hw = cfg.hardware;
        hw.detect_prob_per_cycle =
            detail::optional_number(h, "detect_prob_per_cycle", hw.detect_prob_per_cycle);
        hw.dark_mean_per_window =
            detail::optional_number(h, "dark_mean_per_window", hw.dark_mean_per_window);
        hw.excitation_prob_per_pulse = detail::optional_number(
            h, "excitation_prob_per_pulse", hw.excitation_prob_per_pulse);
        hw.crosstalk_exc_prob =
            detail::optional_number(h, "crosstalk_exc_prob", hw.crosstalk_exc_prob);
        hw.mwe_pi_fidelity =
            detail::optional_number(h, "mwe_pi_fidelity", hw.mwe_pi_fidelity);
        hw.pulse_period = detail::optional_number(h, "pulse_period_s", hw.pulse_period);
        try {
            hw.validate();
        } catch (const InputError& e) {
            throw ConfigError(std::string("hardware: ") + e.what());
        }
    }
    return cfg;
}

inline json config_to_json(const Config& cfg) {
    json ions = json::array();
    for (const auto& i : cfg.ions) ions.push_back(ion_to_json(i));
    return {{"version", schema_version},
            {"ions", ions},
            {"cavity",
             {{"f_cav_hz", cfg.cavity.f_cav},
              {"q_factor", cfg.cavity.q_factor},
              {"purcell_ref", cfg.cavity.purcell_ref}}},
            {"field",
             {{"magnitude_gauss", cfg.field.magnitude_gauss},
              {"theta_deg", cfg.field.theta_deg},
              {"phi_deg", cfg.field.phi_deg}}},
            {"hardware",
             {{"detect_prob_per_cycle", cfg.hardware.detect_prob_per_cycle},
              {"dark_mean_per_window", cfg.hardware.dark_mean_per_window},
              {"excitation_prob_per_pulse", cfg.hardware.excitation_prob_per_pulse},
              {"crosstalk_exc_prob", cfg.hardware.crosstalk_exc_prob},
              {"mwe_pi_fidelity", cfg.hardware.mwe_pi_fidelity},
              {"pulse_period_s", cfg.hardware.pulse_period}}}};
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

inline Config preset_two_ion() {
    Config cfg;
    cfg.ions = ion::presets::two_ion_array();
    cfg.cavity = ion::presets::cavity();
    cfg.field = ion::presets::field_two_ion();
    return cfg;
}

inline Config preset_four_ion() {
    Config cfg;
    cfg.ions = ion::presets::four_ion_array();
    cfg.cavity = ion::presets::cavity();
    cfg.cavity.f_cav = ion::presets::f_ref - 14.8e9;
    cfg.field = ion::presets::field_four_ion();
    return cfg;
}

// FNV-1a over the canonical (sorted-key, compact) serialization.
inline std::uint64_t config_hash(const json& j) {
    const std::string dump = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace spinmux::config
