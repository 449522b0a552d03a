#pragma once

// Parameter model of the emitters and the cavity they couple to. All
// specifications are immutable value types; frequencies are stored in Hz,
// decay/linewidth rates in angular units (rad/s).

#include <string>
#include <utility>
#include <vector>

#include "spinmux/errors.hpp"
#include "spinmux/units.hpp"

namespace spinmux::ion {

struct SpinCoherence {
    double t1 = 0.0;       // s
    double t2_star = 0.0;  // s
    double t2_xy8 = 0.0;   // s

    void validate() const {
        if (!(t1 > 0.0) || !(t2_star > 0.0) || !(t2_xy8 > 0.0))
            throw InputError("SpinCoherence: times must be positive");
        if (t2_star > t2_xy8)
            throw InputError("SpinCoherence: t2_star exceeds t2_xy8");
    }
};

// One emitter. A and B are the spin-conserving optical transitions; the
// spin-flipping ones enter only through the cyclicity (branching odds of an
// excitation-emission cycle flipping the spin).
struct IonSpec {
    std::string label;
    double f_a = 0.0;        // Hz, transition of spin-up
    double f_b = 0.0;        // Hz, transition of spin-down
    double gamma_eff = 0.0;  // rad/s, FWHM of the (broadened) optical line
    double gamma_rad = 0.0;  // rad/s, radiative rate
    double cyclicity = 1.0;  // >= 1
    double purcell = 0.0;    // enhancement at the current cavity detuning
    SpinCoherence spin;
    double mw_rabi = 0.0;  // rad/s, ground-state microwave Rabi rate

    void validate() const {
        if (f_a == f_b) throw InputError("IonSpec: f_a and f_b must differ");
        if (gamma_eff < gamma_rad)
            throw InputError("IonSpec: effective linewidth below radiative rate");
        if (cyclicity < 1.0) throw InputError("IonSpec: cyclicity < 1");
        if (!(purcell > 0.0)) throw InputError("IonSpec: purcell must be positive");
        spin.validate();
    }
};

struct CavitySpec {
    double f_cav = 0.0;      // Hz
    double q_factor = 0.0;   // dimensionless
    double purcell_ref = 0.0;  // on-resonance reference enhancement

    double linewidth_hz() const { return f_cav / q_factor; }

    void validate() const {
        if (!(q_factor > 0.0)) throw InputError("CavitySpec: q_factor must be > 0");
        if (!(f_cav > 0.0)) throw InputError("CavitySpec: f_cav must be > 0");
    }
};

// Metadata only; the cyclicity-vs-orientation physics is an input, not a model.
struct MagneticFieldConfig {
    double magnitude_gauss = 0.0;
    double theta_deg = 0.0;
    double phi_deg = 0.0;

    void validate() const {
        if (magnitude_gauss < 0.0)
            throw InputError("MagneticFieldConfig: negative field magnitude");
        if (theta_deg < 0.0 || theta_deg >= 360.0 || phi_deg < 0.0 ||
            phi_deg >= 360.0)
            throw InputError("MagneticFieldConfig: angles must lie in [0,360)");
    }
};

// Lorentzian cavity enhancement: P(delta) = P0 / (1 + (2 delta/kappa)^2).
inline double purcell_at_detuning(const CavitySpec& cavity, double p0,
                                  double delta_cav_hz) {
    if (!(p0 > 0.0)) throw InputError("purcell_at_detuning: p0 must be positive");
    const double kappa = cavity.linewidth_hz();
    const double x = 2.0 * delta_cav_hz / kappa;
    return p0 / (1.0 + x * x);
}

// Probability that one optical excitation-emission cycle flips the spin.
inline double flip_prob_per_cycle(const IonSpec& ion) {
    if (ion.cyclicity < 1.0) throw InputError("flip_prob_per_cycle: cyclicity < 1");
    return 1.0 / ion.cyclicity;
}

// ---------------------------------------------------------------------------
// Presets for the demonstration device. Published device numbers are used
// where available; the remaining entries are representative defaults and are
// marked as such in the docs.

namespace presets {

// All preset optical frequencies are offsets from this reference (the ion-2
// zero-field resonance in the telecom C band).
inline constexpr double f_ref = 194.8e12;  // Hz

inline IonSpec ion1() {
    return {.label = "ion1",
            .f_a = f_ref - 250e6,
            .f_b = f_ref - 50e6,
            .gamma_eff = hz_to_angular(24e6),
            .gamma_rad = hz_to_angular(5e3),
            .cyclicity = 500.0,
            .purcell = 330.0,
            .spin = {.t1 = 19.9, .t2_star = 88e-9, .t2_xy8 = 16.5e-6},
            .mw_rabi = hz_to_angular(5e6)};
}

inline IonSpec ion2() {
    return {.label = "ion2",
            .f_a = f_ref,
            .f_b = f_ref + 200e6,
            .gamma_eff = hz_to_angular(10e6),
            .gamma_rad = hz_to_angular(3e3),
            .cyclicity = 500.0,
            .purcell = 200.0,
            .spin = {.t1 = 23.3, .t2_star = 94e-9, .t2_xy8 = 15.3e-6},
            .mw_rabi = hz_to_angular(5e6)};
}

inline std::vector<IonSpec> two_ion_array() { return {ion1(), ion2()}; }

// Ions 3-6: cyclicities 780/840/750/850 and enhancements 130/260/360/50 at a
// cavity shifted to reach them; spectra spread over 6.4 GHz.
inline std::vector<IonSpec> four_ion_array() {
    const SpinCoherence spin{.t1 = 20.0, .t2_star = 90e-9, .t2_xy8 = 15e-6};
    std::vector<IonSpec> ions;
    const double f0 = f_ref - 14.8e9;
    const double purcells[] = {130.0, 260.0, 360.0, 50.0};
    const double cyclicities[] = {780.0, 840.0, 750.0, 850.0};
    const double offsets[] = {-3.2e9, -1.4e9, 0.9e9, 3.0e9};
    for (int i = 0; i < 4; ++i) {
        ions.push_back({.label = "ion" + std::to_string(i + 3),
                        .f_a = f0 + offsets[i],
                        .f_b = f0 + offsets[i] + 200e6,
                        .gamma_eff = hz_to_angular(15e6),
                        .gamma_rad = hz_to_angular(4e3),
                        .cyclicity = cyclicities[i],
                        .purcell = purcells[i],
                        .spin = spin,
                        .mw_rabi = hz_to_angular(5e6)});
    }
    return ions;
}

inline CavitySpec cavity() {
    return {.f_cav = f_ref, .q_factor = 4.6e4, .purcell_ref = 330.0};
}

inline MagneticFieldConfig field_two_ion() {
    return {.magnitude_gauss = 112.0, .theta_deg = 90.0, .phi_deg = 150.0};
}

inline MagneticFieldConfig field_four_ion() {
    return {.magnitude_gauss = 112.0, .theta_deg = 90.0, .phi_deg = 110.0};
}

}  // namespace presets

}  // namespace spinmux::ion
