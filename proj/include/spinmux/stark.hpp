#pragma once

// Closed-form light shift of a driven two-level transition and the resulting
// spin phase / visibility loss for an ion with two spin-conserving lines.

#include <cmath>
#include <complex>
#include <ostream>
#include <vector>

#include "spinmux/errors.hpp"
#include "spinmux/ion_model.hpp"
#include "spinmux/qcore.hpp"
#include "spinmux/units.hpp"

namespace spinmux::stark {

// A detuned optical pulse: square envelope, fixed frequency.
struct StarkPulse {
    double omega = 0.0;     // rad/s, optical Rabi frequency
    double duration = 0.0;  // s
    double laser_freq = 0.0;  // Hz

    void validate() const {
        if (omega < 0.0 || duration < 0.0)
            throw InputError("StarkPulse: omega and duration must be >= 0");
    }
};

// One optical tone characterized only by frequency and integrated drive
// energy duration*omega^2; the phase imprinted is linear in the energy.
struct LaserTone {
    double freq = 0.0;    // Hz
    double energy = 0.0;  // rad^2/s equivalent, = duration * omega^2
};

inline StarkPulse pulse_from_tone(const LaserTone& tone, double omega) {
    if (!(omega > 0.0)) throw InputError("pulse_from_tone: omega must be > 0");
    return {.omega = omega, .duration = tone.energy / (omega * omega),
            .laser_freq = tone.freq};
}

struct StarkResult {
    double phase = 0.0;            // rad
    double visibility_loss = 0.0;  // in [0,1]
    double delta_a = 0.0;          // rad/s, signed
    double delta_b = 0.0;          // rad/s, signed
};

enum class Form { Full, FarDetuned };
enum class GammaMode { Effective, Radiative };
enum class Branch { Exact, FirstOrder };

inline double gamma_of(const ion::IonSpec& ion, GammaMode mode) {
    return mode == GammaMode::Effective ? ion.gamma_eff : ion.gamma_rad;
}

inline std::pair<double, double> detunings(double laser_freq_hz,
                                           const ion::IonSpec& ion) {
    return {hz_to_angular(laser_freq_hz - ion.f_a),
            hz_to_angular(laser_freq_hz - ion.f_b)};
}

namespace detail {

// Square root branch adiabatically connected to the undriven ground state:
// sign(Delta) times the principal root, so that sqrt(d^2+Omega^2) -> +d as
// Omega -> 0 on either side of the resonance.
inline Complex adiabatic_sqrt(Complex d, double omega) {
    const double s = d.real() >= 0.0 ? 1.0 : -1.0;
    return s * std::sqrt(d * d + omega * omega);
}

}  // namespace detail

// Amplitude of |e> mixed into the driven ground state.
inline Complex excited_amplitude(double omega, double delta, double gamma,
                                 Branch branch = Branch::Exact) {
    const Complex d{delta, gamma / 2.0};
    if (branch == Branch::FirstOrder) {
        if (std::abs(d) == 0.0)
            throw InputError("excited_amplitude: first-order form needs detuning or linewidth");
        return omega / (2.0 * d);
    }
    if (std::abs(d) == 0.0 && omega == 0.0)
        throw InputError("excited_amplitude: degenerate input (omega, delta, gamma all zero)");
    if (omega == 0.0) return {0.0, 0.0};
    return (detail::adiabatic_sqrt(d, omega) - d) / omega;
}

inline qcore::Vec2 perturbed_ground_state(double omega, double delta, double gamma,
                                          Branch branch = Branch::Exact) {
    qcore::Vec2 psi;
    psi << Complex(1.0, 0.0), excited_amplitude(omega, delta, gamma, branch);
    return psi;
}

// Light shift of the ground level (hbar = 1).
inline double energy_shift(double omega, double delta, double gamma,
                           Branch branch = Branch::Exact) {
    const Complex d{delta, gamma / 2.0};
    if (std::abs(d) == 0.0 && omega == 0.0)
        throw InputError("energy_shift: degenerate input");
    if (branch == Branch::FirstOrder) {
        const double denom = delta * delta + gamma * gamma / 4.0;
        if (denom == 0.0) throw InputError("energy_shift: first-order form needs detuning or linewidth");
        return (omega * omega / 4.0) * delta / denom;
    }
    return 0.5 * (detail::adiabatic_sqrt(d, omega) - d).real();
}

// Amplitude decay rate of the driven ground state, -Im of the complex level
// shift; the visibility-loss exponent is this rate summed over transitions
// times the pulse duration.
inline double decay_rate_half(double omega, double delta, double gamma) {
    const Complex d{delta, gamma / 2.0};
    if (std::abs(d) == 0.0 && omega == 0.0)
        throw InputError("decay_rate_half: degenerate input");
    return -0.5 * (detail::adiabatic_sqrt(d, omega) - d).imag();
}

namespace detail {

inline double dispersive_term(double delta, double gamma2_over4, Form form) {
    const double denom =
        form == Form::Full ? delta * delta + gamma2_over4 : delta * delta;
    if (denom == 0.0) throw InputError("stark: pulse resonant with a transition");
    return delta / denom;
}

inline double lorentz_term(double delta, double gamma2_over4, Form form) {
    const double denom =
        form == Form::Full ? delta * delta + gamma2_over4 : delta * delta;
    if (denom == 0.0) throw InputError("stark: pulse resonant with a transition");
    return 1.0 / denom;
}

}  // namespace detail

// Net phase imprinted between the spin states by one detuned pulse:
// phi = T (Omega^2/4) [ D_B/(D_B^2+G^2/4) - D_A/(D_A^2+G^2/4) ].
inline double spin_phase(const StarkPulse& pulse, const ion::IonSpec& ion,
                         Form form = Form::Full,
                         GammaMode mode = GammaMode::Effective) {
    pulse.validate();
    if (pulse.omega == 0.0 || pulse.duration == 0.0) return 0.0;
    const auto [da, db] = detunings(pulse.laser_freq, ion);
    const double g24 = std::pow(gamma_of(ion, mode) / 2.0, 2);
    return pulse.duration * (pulse.omega * pulse.omega / 4.0) *
           (detail::dispersive_term(db, g24, form) -
            detail::dispersive_term(da, g24, form));
}

// Phase per unit drive energy (duration * omega^2) at a given frequency.
inline double phase_sensitivity(double laser_freq_hz, const ion::IonSpec& ion,
                                GammaMode mode = GammaMode::Effective) {
    const auto [da, db] = detunings(laser_freq_hz, ion);
    const double g24 = std::pow(gamma_of(ion, mode) / 2.0, 2);
    return 0.25 * (detail::dispersive_term(db, g24, Form::Full) -
                   detail::dispersive_term(da, g24, Form::Full));
}

// Exponent of the fringe-contrast loss per unit drive energy.
inline double loss_sensitivity(double laser_freq_hz, const ion::IonSpec& ion,
                               GammaMode mode = GammaMode::Effective) {
    const auto [da, db] = detunings(laser_freq_hz, ion);
    const double gamma = gamma_of(ion, mode);
    const double g24 = gamma * gamma / 4.0;
    return gamma * 0.125 * (detail::lorentz_term(da, g24, Form::Full) +
                            detail::lorentz_term(db, g24, Form::Full));
}

// Fringe contrast lost to photon scattering during the pulse:
// dV = 1 - exp[ -T G (Omega^2/4) (1/2) (L(D_A) + L(D_B)) ].
inline double visibility_loss(const StarkPulse& pulse, const ion::IonSpec& ion,
                              Form form = Form::Full,
                              GammaMode mode = GammaMode::Effective) {
    pulse.validate();
    if (pulse.omega == 0.0 || pulse.duration == 0.0) return 0.0;
    const double gamma = gamma_of(ion, mode);
    if (gamma == 0.0) return 0.0;
    const auto [da, db] = detunings(pulse.laser_freq, ion);
    const double g24 = gamma * gamma / 4.0;
    const double expo = pulse.duration * gamma * (pulse.omega * pulse.omega / 4.0) *
                        0.5 *
                        (detail::lorentz_term(da, g24, form) +
                         detail::lorentz_term(db, g24, form));
    return 1.0 - std::exp(-expo);
}

inline StarkResult evaluate(const StarkPulse& pulse, const ion::IonSpec& ion,
                            Form form = Form::Full,
                            GammaMode mode = GammaMode::Effective) {
    const auto [da, db] = detunings(pulse.laser_freq, ion);
    return {.phase = spin_phase(pulse, ion, form, mode),
            .visibility_loss = visibility_loss(pulse, ion, form, mode),
            .delta_a = da,
            .delta_b = db};
}

struct SweepPoint {
    double laser_freq = 0.0;  // Hz
    StarkResult result;
};

// Phase and visibility loss across a laser-frequency grid (full forms, so
// the grid may include the resonances except at exact zero linewidth).
inline std::vector<SweepPoint> sweep_frequency(const ion::IonSpec& ion,
                                               const StarkPulse& pulse_template,
                                               const std::vector<double>& f_grid,
                                               GammaMode mode = GammaMode::Effective) {
    std::vector<SweepPoint> out;
    out.reserve(f_grid.size());
    for (double f : f_grid) {
        StarkPulse p = pulse_template;
        p.laser_freq = f;
        out.push_back({f, evaluate(p, ion, Form::Full, mode)});
    }
    return out;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& rows) {
    os << "f_laser_hz,phase_rad,visibility_loss\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.9e,%.12e,%.12e\n", r.laser_freq,
                      r.result.phase, r.result.visibility_loss);
        os << buf;
    }
}

}  // namespace spinmux::stark
