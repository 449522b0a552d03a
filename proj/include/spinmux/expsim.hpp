#pragma once

// Pulse-sequence construction and shot-level Monte Carlo of initialization,
// single-shot readout, and decoupled optical-phase experiments.
//
// Qubit basis: index 0 = |down>, index 1 = |up>; Bloch z = P(down) - P(up).
// Transition A is the spin-conserving line of |up>, B that of |down>, so a
// detuned pulse with spin phase phi (stark module convention) acts on the
// ground spin as the gate R_z(phi) in the qcore convention.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "spinmux/errors.hpp"
#include "spinmux/ion_model.hpp"
#include "spinmux/rng.hpp"
#include "spinmux/stark.hpp"
#include "spinmux/units.hpp"

namespace spinmux::expsim {

enum class Spin { Down, Up };
enum class Transition { A, B };

inline Spin coupled_spin(Transition t) {
    return t == Transition::A ? Spin::Up : Spin::Down;
}
inline Transition coupled_transition(Spin s) {
    return s == Spin::Up ? Transition::A : Transition::B;
}
inline Spin opposite(Spin s) { return s == Spin::Up ? Spin::Down : Spin::Up; }
inline const char* to_string(Spin s) { return s == Spin::Up ? "up" : "down"; }
inline const char* to_string(Transition t) { return t == Transition::A ? "A" : "B"; }

// Engineering constants the demonstration does not publish; explicit config.
struct HardwareSpec {
    double detect_prob_per_cycle = 0.10;      // photon detected per bright cycle
    double dark_mean_per_window = 0.05;       // dark counts per readout window
    double excitation_prob_per_pulse = 0.80;  // optical pi success probability
    double crosstalk_exc_prob = 0.0;          // off-resonant excitation per pulse
    double mwe_pi_fidelity = 1.0;             // excited-state spin mixer
    double pulse_period = 10e-6;              // s per optical readout cycle

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob(detect_prob_per_cycle) || !prob(excitation_prob_per_pulse) ||
            !prob(crosstalk_exc_prob) || !prob(mwe_pi_fidelity))
            throw InputError("HardwareSpec: probabilities must lie in [0,1]");
        if (dark_mean_per_window < 0.0 || pulse_period <= 0.0)
            throw InputError("HardwareSpec: bad dark rate or pulse period");
    }
};

// ---------------------------------------------------------------------------
// Sequence ops

enum class Manifold { Ground, Excited };
enum class CoherenceIdle { Free, Decoupled };
enum class ReadoutMode { AlternatingAB, SingleTransition };
enum class Placement { Odd, Even };

struct OpticalPi {
    int ion = 0;
    Transition transition = Transition::A;
};

// Global microwave rotation; the drive phase shifts the rotation axis
// azimuthally as in control::MwRotation. Excited-manifold pulses act only
// inside initialization blocks.
struct MwPulse {
    Manifold manifold = Manifold::Ground;
    char axis = 'x';  // 'x', 'y' or 'z'
    double angle = 0.0;
    double phase = 0.0;
};

struct Wait {
    double duration = 0.0;
    CoherenceIdle idle = CoherenceIdle::Free;
};

// A detuned optical pulse imprinting per-ion z phases (all ions at once).
struct StarkPhase {
    stark::StarkPulse pulse;
};

struct ReadoutWindow {
    int ion = 0;
    ReadoutMode mode = ReadoutMode::AlternatingAB;
    Transition transition = Transition::B;  // used in single-transition mode
    int n_pulses = 250;                     // per transition
    int bin_width = 50;                     // pulses per analysis bin; 0 = none
};

struct InitBlock {
    int ion = 0;
    Spin target = Spin::Up;
    int n_reps = 50;
};

// Ideal preparation with a known error probability; ground-truth injection
// for estimator studies.
struct PrepareSpin {
    int ion = 0;
    Spin target = Spin::Up;
    double error_prob = 0.0;
};

using SeqOp = std::variant<OpticalPi, MwPulse, Wait, StarkPhase, ReadoutWindow,
                           InitBlock, PrepareSpin>;

struct PulseSequence {
    std::vector<SeqOp> ops;
    int n_ions = 1;
};

// ---------------------------------------------------------------------------
// Builders

inline PulseSequence build_init_sequence(int ion, Spin target, int n_reps,
                                         int n_ions) {
    if (n_reps < 1) throw InputError("build_init_sequence: n_reps must be >= 1");
    if (ion < 0 || ion >= n_ions) throw InputError("build_init_sequence: bad ion");
    PulseSequence seq;
    seq.n_ions = n_ions;
    seq.ops.push_back(InitBlock{.ion = ion, .target = target, .n_reps = n_reps});
    return seq;
}

inline PulseSequence build_readout_sequence(
    const std::vector<int>& ions, ReadoutMode mode, int n_pulses,
    const std::vector<Transition>& transitions = {}, int bin_width = 50,
    int n_ions = 0) {
    if (n_pulses < 1) throw InputError("build_readout_sequence: n_pulses >= 1");
    if (mode == ReadoutMode::SingleTransition && transitions.size() != ions.size())
        throw InputError(
            "build_readout_sequence: single-transition mode needs one designated "
            "transition per ion");
    PulseSequence seq;
    seq.n_ions = n_ions > 0
                     ? n_ions
                     : 1 + *std::max_element(ions.begin(), ions.end());
    for (std::size_t i = 0; i < ions.size(); ++i) {
        seq.ops.push_back(ReadoutWindow{
            .ion = ions[i],
            .mode = mode,
            .transition = mode == ReadoutMode::SingleTransition ? transitions[i]
                                                                : Transition::B,
            .n_pulses = n_pulses,
            .bin_width = bin_width});
    }
    return seq;
}

// Designated readout transition: the one with larger cavity enhancement.
inline Transition choose_readout_transition(const ion::IonSpec& ion,
                                            const ion::CavitySpec& cavity,
                                            double p0) {
    const double pa = ion::purcell_at_detuning(cavity, p0, ion.f_a - cavity.f_cav);
    const double pb = ion::purcell_at_detuning(cavity, p0, ion.f_b - cavity.f_cav);
    return pa >= pb ? Transition::A : Transition::B;
}

// XY8 train with a pi/2 bracket: pi/2 - tau - [pi - 2tau]x(8R-1) - pi - tau -
// pi/2(final_phase). Detuned optical pulses are centered in the gap after the
// odd- or even-numbered pi pulses of each block.
inline PulseSequence build_xy8_stark_sequence(
    double tau, int repetitions, std::optional<stark::StarkPulse> optical,
    Placement placement, double final_phase, int n_ions,
    double mw_pi_duration = 0.0) {
    if (repetitions < 1) throw InputError("build_xy8_stark_sequence: repetitions >= 1");
    if (!(tau > 0.0)) throw InputError("build_xy8_stark_sequence: tau must be > 0");
    static constexpr char xy8_axes[8] = {'x', 'y', 'x', 'y', 'y', 'x', 'y', 'x'};

    const double t_opt =
        optical && optical->duration > 0.0 ? optical->duration : 0.0;

    PulseSequence seq;
    seq.n_ions = n_ions;
    seq.ops.push_back(MwPulse{.axis = 'x', .angle = pi / 2.0});

    const int n_pi = 8 * repetitions;
    auto emit_gap = [&](double gap, bool with_optical) {
        if (with_optical && t_opt > 0.0) {
            const double pad = gap - t_opt - mw_pi_duration;
            if (pad < 0.0)
                throw InputError(
                    "build_xy8_stark_sequence: optical pulse does not fit in the "
                    "decoupling gap");
            seq.ops.push_back(Wait{pad / 2.0, CoherenceIdle::Decoupled});
            seq.ops.push_back(StarkPhase{*optical});
            seq.ops.push_back(Wait{pad / 2.0, CoherenceIdle::Decoupled});
        } else {
            seq.ops.push_back(Wait{gap, CoherenceIdle::Decoupled});
        }
    };

    emit_gap(tau, false);
    for (int k = 1; k <= n_pi; ++k) {
        seq.ops.push_back(MwPulse{.axis = xy8_axes[(k - 1) % 8], .angle = pi});
        const bool odd = k % 2 == 1;
        const bool slot = optical.has_value() &&
                          ((placement == Placement::Odd) ? odd : !odd);
        emit_gap(k == n_pi ? tau : 2.0 * tau, slot);
    }
    seq.ops.push_back(MwPulse{.axis = 'x', .angle = pi / 2.0, .phase = final_phase});
    return seq;
}

// ---------------------------------------------------------------------------
// Shot records and histograms

struct IonShot {
    Spin initial = Spin::Down;  // state after preparation (ground truth)
    Spin final_state = Spin::Down;
    int counts_a = 0;
    int counts_b = 0;
    Transition designated = Transition::B;
    std::vector<int> bins_a;  // per-analysis-bin counts, if bin_width > 0
    std::vector<int> bins_b;
};

struct ShotRecord {
    std::vector<IonShot> ions;
};

struct HistogramResult {
    std::vector<long> bin_counts;  // occurrences by photon number
    long shots = 0;
    int bin_width_pulses = 50;

    long total() const {
        long t = 0;
        for (long c : bin_counts) t += c;
        return t;
    }
};

enum class Channel { A, B };

// Histogram of photon counts in one analysis bin (bin_index < 0: whole window).
inline HistogramResult histogram_of_counts(const std::vector<ShotRecord>& records,
                                           int ion, Channel channel,
                                           int bin_index = -1,
                                           int bin_width_pulses = 50) {
    HistogramResult hist;
    hist.bin_width_pulses = bin_width_pulses;
    for (const auto& rec : records) {
        const auto& shot = rec.ions.at(ion);
        int value = 0;
        if (bin_index < 0) {
            value = channel == Channel::A ? shot.counts_a : shot.counts_b;
        } else {
            const auto& bins = channel == Channel::A ? shot.bins_a : shot.bins_b;
            value = bins.at(bin_index);
        }
        if (static_cast<std::size_t>(value) >= hist.bin_counts.size())
            hist.bin_counts.resize(value + 1, 0);
        ++hist.bin_counts[value];
        ++hist.shots;
    }
    return hist;
}

// ---------------------------------------------------------------------------
// Simulation engine

namespace detail {

struct BlochState {
    double x = 0.0, y = 0.0, z = 1.0;  // z = +1 is |down>
    bool classical = true;

    Spin spin() const { return z >= 0.0 ? Spin::Down : Spin::Up; }
    void set(Spin s) {
        x = y = 0.0;
        z = s == Spin::Down ? 1.0 : -1.0;
        classical = true;
    }
    double prob_down() const { return 0.5 * (1.0 + z); }
};

inline double z_of(Spin s) { return s == Spin::Down ? 1.0 : -1.0; }

// Axis/angle/phase microwave rotation acting on the Bloch vector.
inline void apply_mw(BlochState& st, char axis, double angle, double phase) {
    if (axis == 'z') {
        // R_z(a): rho_{down,up} *= e^{-ia}; Bloch (x,y) rotates by +a... the
        // sign convention is fixed by qcore::rot_z; see test_expsim.
        const double c = std::cos(angle), s = std::sin(angle);
        const double x = st.x * c - st.y * s;
        st.y = st.x * s + st.y * c;
        st.x = x;
        st.classical = st.classical && angle == 0.0;
        return;
    }
    // Equatorial axis at azimuth (phase + offset): x -> 0, y -> pi/2.
    const double az = phase + (axis == 'y' ? pi / 2.0 : 0.0);
    const double nx = std::cos(az), ny = std::sin(az);
    // Rodrigues rotation of the Bloch vector about (nx, ny, 0) by +angle,
    // matching the sense of qcore::rot (checked against it in the tests).
    const double c = std::cos(angle), s = std::sin(angle);
    const double dot = nx * st.x + ny * st.y;
    const double cx = ny * st.z, cy = -nx * st.z, cz = nx * st.y - ny * st.x;
    const double x = st.x * c + cx * s + nx * dot * (1.0 - c);
    const double y = st.y * c + cy * s + ny * dot * (1.0 - c);
    const double z = st.z * c + cz * s;
    st.x = x;
    st.y = y;
    st.z = z;
    st.classical = false;
}

}  // namespace detail

class ShotSimulator {
  public:
    ShotSimulator(const PulseSequence& seq, const std::vector<ion::IonSpec>& ions,
                  const HardwareSpec& hw)
        : seq_(seq), ions_(ions), hw_(hw) {
        hw.validate();
        if (static_cast<int>(ions.size()) != seq.n_ions)
            throw InputError("ShotSimulator: ion list does not match sequence");
        for (const auto& ion : ions_) ion.validate();
    }

    // One stochastic shot, reproducible from (seed, shot_index) alone.
    ShotRecord run_shot(std::uint64_t seed, std::uint64_t shot_index) const {
        std::mt19937_64 dyn = rng::shot_stream(seed, shot_index, 0);
        std::mt19937_64 dark = rng::shot_stream(seed, shot_index, 1);
        return execute(&dyn, &dark);
    }

    // Deterministic expectation-value walk (no sampling, no readout).
    std::vector<double> final_populations_up() const {
        const ShotRecord rec = execute(nullptr, nullptr);
        std::vector<double> out;
        out.reserve(states_.size());
        for (const auto& st : states_) out.push_back(0.5 * (1.0 - st.z));
        return out;
    }

  private:
    using BlochState = detail::BlochState;

    ShotRecord execute(std::mt19937_64* dyn, std::mt19937_64* dark) const {
        const int n = seq_.n_ions;
        states_.assign(n, BlochState{});
        ShotRecord rec;
        rec.ions.resize(n);

        for (int i = 0; i < n; ++i) {
            if (dyn) {
                states_[i].set(rng::uniform(*dyn) < 0.5 ? Spin::Down : Spin::Up);
            } else {
                states_[i].x = states_[i].y = states_[i].z = 0.0;  // thermal
            }
            rec.ions[i].initial = states_[i].spin();
        }
        dd_time_.assign(n, 0.0);

        for (const auto& op : seq_.ops) {
            std::visit([&](const auto& o) { apply(o, rec, dyn, dark); }, op);
        }
        for (int i = 0; i < n; ++i) rec.ions[i].final_state = states_[i].spin();
        return rec;
    }

    // --- op handlers ------------------------------------------------------

    void apply(const InitBlock& op, ShotRecord& rec, std::mt19937_64* dyn,
               std::mt19937_64*) const {
        const auto& ion = ions_[op.ion];
        const double flip = ion::flip_prob_per_cycle(ion);
        const double p_exc = hw_.excitation_prob_per_pulse;
        if (!dyn) {
            // Expectation: each repetition transfers out of the wrong state
            // with probability p_exc (f (1-1/C) + (1-f)/C).
            const double f = hw_.mwe_pi_fidelity;
            const double p_t = p_exc * (f * (1.0 - flip) + (1.0 - f) * flip);
            auto& st = states_[op.ion];
            const double ztgt = detail::z_of(op.target);
            const double wrong = 0.5 * (1.0 - ztgt * st.z);
            st.x = st.y = 0.0;
            st.z = ztgt * (1.0 - 2.0 * wrong * std::pow(1.0 - p_t, op.n_reps));
            rec.ions[op.ion].initial = st.z * ztgt >= 0.0 ? op.target
                                                          : opposite(op.target);
            return;
        }
        auto& st = states_[op.ion];
        if (!st.classical) st.set(rng::uniform(*dyn) < st.prob_down()
                                      ? Spin::Down : Spin::Up);
        for (int r = 0; r < op.n_reps; ++r) {
            const double u1 = rng::uniform(*dyn);
            const double u2 = rng::uniform(*dyn);
            const double u3 = rng::uniform(*dyn);
            if (st.spin() != op.target && u1 < p_exc) {
                const bool mixed = u2 < hw_.mwe_pi_fidelity;
                if (mixed) {
                    st.set(u3 < 1.0 - flip ? op.target : opposite(op.target));
                } else {
                    st.set(u3 < 1.0 - flip ? opposite(op.target) : op.target);
                }
            }
            crosstalk_kick(op.ion, nullptr, Channel::A, rec, dyn, 0);
        }
        rec.ions[op.ion].initial = st.spin();
    }

    void apply(const PrepareSpin& op, ShotRecord& rec, std::mt19937_64* dyn,
               std::mt19937_64*) const {
        auto& st = states_[op.ion];
        if (!dyn) {
            st.x = st.y = 0.0;
            st.z = detail::z_of(op.target) * (1.0 - 2.0 * op.error_prob);
            rec.ions[op.ion].initial = op.target;
            return;
        }
        const double u = rng::uniform(*dyn);
        st.set(u < op.error_prob ? opposite(op.target) : op.target);
        rec.ions[op.ion].initial = st.spin();
    }

    void apply(const OpticalPi& op, ShotRecord& rec, std::mt19937_64* dyn,
               std::mt19937_64*) const {
        const auto& ion = ions_[op.ion];
        auto& st = states_[op.ion];
        const double flip = ion::flip_prob_per_cycle(ion);
        if (!dyn) {
            // Expectation: the addressed population cycles and leaks by 1/C.
            const double p_addr =
                op.transition == Transition::B ? st.prob_down() : 1.0 - st.prob_down();
            const double moved = p_addr * hw_.excitation_prob_per_pulse * flip;
            st.x = st.y = 0.0;
            st.z += (op.transition == Transition::B ? -2.0 : 2.0) * moved;
            return;
        }
        if (!st.classical) st.set(rng::uniform(*dyn) < st.prob_down()
                                      ? Spin::Down : Spin::Up);
        const double u1 = rng::uniform(*dyn);
        const double u2 = rng::uniform(*dyn);
        if (st.spin() == coupled_spin(op.transition) &&
            u1 < hw_.excitation_prob_per_pulse && u2 < flip) {
            st.set(opposite(st.spin()));
        }
        crosstalk_kick(op.ion, nullptr, Channel::A, rec, dyn, 0);
    }

    void apply(const MwPulse& op, ShotRecord&, std::mt19937_64*,
               std::mt19937_64*) const {
        if (op.manifold == Manifold::Excited) return;  // ground population only
        for (auto& st : states_) detail::apply_mw(st, op.axis, op.angle, op.phase);
    }

    void apply(const Wait& op, ShotRecord&, std::mt19937_64*,
               std::mt19937_64*) const {
        for (int i = 0; i < seq_.n_ions; ++i) relax(i, op.duration, op.idle);
    }

    void apply(const StarkPhase& op, ShotRecord&, std::mt19937_64*,
               std::mt19937_64*) const {
        for (int i = 0; i < seq_.n_ions; ++i) {
            const double phi = stark::spin_phase(op.pulse, ions_[i]);
            const double dv = stark::visibility_loss(op.pulse, ions_[i]);
            auto& st = states_[i];
            detail::apply_mw(st, 'z', phi, 0.0);
            st.x *= 1.0 - dv;
            st.y *= 1.0 - dv;
        }
    }

    void apply(const ReadoutWindow& op, ShotRecord& rec, std::mt19937_64* dyn,
               std::mt19937_64* dark) const {
        if (!dyn) return;  // expectation walk stops short of measurement
        auto& st = states_[op.ion];
        if (!st.classical) st.set(rng::uniform(*dyn) < st.prob_down()
                                      ? Spin::Down : Spin::Up);
        auto& shot = rec.ions[op.ion];
        shot.designated = op.transition;

        const bool alternating = op.mode == ReadoutMode::AlternatingAB;
        const int per_channel = op.n_pulses;
        const int total = alternating ? 2 * per_channel : per_channel;
        const int n_bins =
            op.bin_width > 0 ? (per_channel + op.bin_width - 1) / op.bin_width : 0;
        if (n_bins > 0) {
            shot.bins_a.assign(alternating ? n_bins : 0, 0);
            shot.bins_b.assign(n_bins, 0);
            if (!alternating && op.transition == Transition::A) {
                shot.bins_a.assign(n_bins, 0);
                shot.bins_b.clear();
            }
        }

        const auto& ion = ions_[op.ion];
        const double flip = ion::flip_prob_per_cycle(ion);
        for (int k = 0; k < total; ++k) {
            const Transition tr = alternating
                                      ? (k % 2 == 0 ? Transition::A : Transition::B)
                                      : op.transition;
            const int channel_index = alternating ? k / 2 : k;
            const double u1 = rng::uniform(*dyn);
            const double u2 = rng::uniform(*dyn);
            const double u3 = rng::uniform(*dyn);
            if (st.spin() == coupled_spin(tr) &&
                u1 < hw_.excitation_prob_per_pulse) {
                if (u2 < hw_.detect_prob_per_cycle)
                    record_count(shot, tr, channel_index, op.bin_width);
                if (u3 < flip) st.set(opposite(st.spin()));
            }
            crosstalk_kick(op.ion, &shot, tr == Transition::A ? Channel::A
                                                              : Channel::B,
                           rec, dyn, channel_index, op.bin_width);
        }

        // Idle ions relax toward the thermal mixture during the window.
        const double window = total * hw_.pulse_period;
        for (int i = 0; i < seq_.n_ions; ++i) {
            if (i != op.ion) relax(i, window, CoherenceIdle::Free);
        }

        // Dark counts, drawn from a separate stream so the pulse-loop draws
        // stay aligned across hardware-parameter scans.
        auto add_darks = [&](Channel ch) {
            if (n_bins > 0) {
                for (int b = 0; b < n_bins; ++b) {
                    const int width =
                        std::min(op.bin_width, per_channel - b * op.bin_width);
                    const int darks = rng::poisson(
                        *dark, hw_.dark_mean_per_window * width / per_channel);
                    for (int d = 0; d < darks; ++d)
                        record_count(shot,
                                     ch == Channel::A ? Transition::A : Transition::B,
                                     b * op.bin_width, op.bin_width);
                }
            } else {
                const int darks = rng::poisson(*dark, hw_.dark_mean_per_window);
                if (ch == Channel::A) shot.counts_a += darks;
                else shot.counts_b += darks;
            }
        };
        if (alternating) {
            add_darks(Channel::A);
            add_darks(Channel::B);
        } else {
            add_darks(op.transition == Transition::A ? Channel::A : Channel::B);
        }
    }

    // --- helpers ----------------------------------------------------------

    static void record_count(IonShot& shot, Transition tr, int pulse_index,
                             int bin_width) {
        if (tr == Transition::A) ++shot.counts_a;
        else ++shot.counts_b;
        if (bin_width > 0) {
            auto& bins = tr == Transition::A ? shot.bins_a : shot.bins_b;
            if (!bins.empty()) ++bins[std::min<std::size_t>(
                pulse_index / bin_width, bins.size() - 1)];
        }
    }

    // Off-resonant excitation of non-addressed ions by one optical pulse.
    void crosstalk_kick(int addressed, IonShot* open_window, Channel channel,
                        ShotRecord& rec, std::mt19937_64* dyn, int pulse_index,
                        int bin_width = 0) const {
        if (hw_.crosstalk_exc_prob <= 0.0 || !dyn) return;
        for (int i = 0; i < seq_.n_ions; ++i) {
            if (i == addressed) continue;
            const double u_ct = rng::uniform(*dyn);
            const double u_pr = rng::uniform(*dyn);
            const double u_d = rng::uniform(*dyn);
            const double u_f = rng::uniform(*dyn);
            if (u_ct >= hw_.crosstalk_exc_prob) continue;
            auto& st = states_[i];
            if (!st.classical)
                st.set(u_pr < st.prob_down() ? Spin::Down : Spin::Up);
            if (open_window && u_d < hw_.detect_prob_per_cycle) {
                record_count(*open_window,
                             channel == Channel::A ? Transition::A : Transition::B,
                             pulse_index, bin_width);
            }
            if (u_f < ion::flip_prob_per_cycle(ions_[i]))
                st.set(opposite(st.spin()));
        }
        (void)rec;
    }

    void relax(int i, double dt, CoherenceIdle idle) const {
        if (dt <= 0.0) return;
        auto& st = states_[i];
        const auto& spin = ions_[i].spin;
        st.z *= std::exp(-dt / spin.t1);
        double transverse = std::exp(-dt / (2.0 * spin.t1));
        if (idle == CoherenceIdle::Free) {
            transverse *= std::exp(-dt / spin.t2_star);
        } else {
            const double t0 = dd_time_[i];
            const double t1 = t0 + dt;
            transverse *= std::exp(-(t1 * t1 - t0 * t0) /
                                   (spin.t2_xy8 * spin.t2_xy8));
            dd_time_[i] = t1;
        }
        st.x *= transverse;
        st.y *= transverse;
        if (st.classical && st.z != detail::z_of(st.spin())) st.classical = false;
    }

    const PulseSequence& seq_;
    const std::vector<ion::IonSpec>& ions_;
    HardwareSpec hw_;
    mutable std::vector<BlochState> states_;
    mutable std::vector<double> dd_time_;
};

inline std::vector<ShotRecord> run_shots(const PulseSequence& seq,
                                         const std::vector<ion::IonSpec>& ions,
                                         const HardwareSpec& hw, long n_shots,
                                         std::uint64_t seed) {
    ShotSimulator sim(seq, ions, hw);
    std::vector<ShotRecord> records;
    records.reserve(n_shots);
    for (long s = 0; s < n_shots; ++s) records.push_back(sim.run_shot(seed, s));
    return records;
}

inline std::vector<double> final_populations_up(
    const PulseSequence& seq, const std::vector<ion::IonSpec>& ions,
    const HardwareSpec& hw) {
    return ShotSimulator(seq, ions, hw).final_populations_up();
}

// Net z phase an XY8 train with the given optical slots imprints on one ion.
// Each slot after the k-th pi pulse is conjugated by the 8R-k remaining pi
// pulses, so odd-slot and even-slot placements acquire opposite signs.
inline double xy8_net_phase(const stark::StarkPulse& optical,
                            const ion::IonSpec& ion, Placement placement,
                            int repetitions) {
    const double per_slot = stark::spin_phase(optical, ion);
    const double sign = placement == Placement::Odd ? -1.0 : 1.0;
    return sign * 4.0 * repetitions * per_slot;
}

// ---------------------------------------------------------------------------
// Discrimination

struct DifferenceRule {};  // assign |down> iff N_B > N_A

struct CountThresholdRule {
    std::vector<int> thresholds;  // one per ion; counts >= t assign bright spin
};

using DiscriminationRule = std::variant<DifferenceRule, CountThresholdRule>;

inline Spin assign_spin(const IonShot& shot, const DiscriminationRule& rule,
                        int ion) {
    if (std::holds_alternative<DifferenceRule>(rule)) {
        return shot.counts_b > shot.counts_a ? Spin::Down : Spin::Up;
    }
    const auto& counts = std::get<CountThresholdRule>(rule);
    const int c = shot.designated == Transition::A ? shot.counts_a : shot.counts_b;
    const Spin bright = coupled_spin(shot.designated);
    return c >= counts.thresholds.at(ion) ? bright : opposite(bright);
}

struct DiscriminationResult {
    std::vector<double> per_ion_fidelity;
    double joint_correct_prob = 0.0;
};

// Fidelity per ion: mean of the correct-assignment probabilities over the two
// prepared states; joint: probability that every ion is assigned correctly.
inline DiscriminationResult discriminate(const std::vector<ShotRecord>& records,
                                         const DiscriminationRule& rule) {
    if (records.empty()) throw InputError("discriminate: no records");
    const int n = static_cast<int>(records[0].ions.size());
    DiscriminationResult res;
    res.per_ion_fidelity.resize(n, 0.0);
    long joint_ok = 0;
    std::vector<std::array<long, 2>> totals(n, {0, 0}), correct(n, {0, 0});
    for (const auto& rec : records) {
        bool all_ok = true;
        for (int i = 0; i < n; ++i) {
            const int truth = rec.ions[i].initial == Spin::Down ? 0 : 1;
            const bool ok = assign_spin(rec.ions[i], rule, i) == rec.ions[i].initial;
            ++totals[i][truth];
            correct[i][truth] += ok;
            all_ok = all_ok && ok;
        }
        joint_ok += all_ok;
    }
    for (int i = 0; i < n; ++i) {
        double f = 0.0;
        int present = 0;
        for (int t = 0; t < 2; ++t) {
            if (totals[i][t] > 0) {
                f += static_cast<double>(correct[i][t]) / totals[i][t];
                ++present;
            }
        }
        res.per_ion_fidelity[i] = present > 0 ? f / present : 0.0;
    }
    res.joint_correct_prob = static_cast<double>(joint_ok) / records.size();
    return res;
}

// Exhaustive scan over integer thresholds for one ion.
inline int optimal_count_threshold(const std::vector<ShotRecord>& records,
                                   int ion) {
    int max_count = 0;
    for (const auto& rec : records) {
        const auto& s = rec.ions.at(ion);
        max_count = std::max(
            max_count, s.designated == Transition::A ? s.counts_a : s.counts_b);
    }
    int best_t = 0;
    double best_f = -1.0;
    const int n = static_cast<int>(records[0].ions.size());
    for (int t = 0; t <= max_count + 1; ++t) {
        CountThresholdRule rule{std::vector<int>(n, t)};
        // Only this ion's fidelity matters for its threshold.
        std::array<long, 2> totals{0, 0}, correct{0, 0};
        for (const auto& rec : records) {
            const int truth = rec.ions[ion].initial == Spin::Down ? 0 : 1;
            ++totals[truth];
            correct[truth] +=
                assign_spin(rec.ions[ion], rule, ion) == rec.ions[ion].initial;
        }
        double f = 0.0;
        int present = 0;
        for (int tt = 0; tt < 2; ++tt) {
            if (totals[tt] > 0) {
                f += static_cast<double>(correct[tt]) / totals[tt];
                ++present;
            }
        }
        f = present ? f / present : 0.0;
        if (f > best_f + 1e-15) {
            best_f = f;
            best_t = t;
        }
    }
    return best_t;
}

// ---------------------------------------------------------------------------
// CSV export

inline void write_shots_csv(std::ostream& os, const std::vector<ShotRecord>& records,
                            std::uint64_t seed, const std::string& config_note) {
    os << "# seed=" << seed << "\n";
    if (!config_note.empty()) os << "# " << config_note << "\n";
    os << "shot,ion,initial,final,n_a,n_b\n";
    for (std::size_t s = 0; s < records.size(); ++s) {
        for (std::size_t i = 0; i < records[s].ions.size(); ++i) {
            const auto& shot = records[s].ions[i];
            os << s << "," << i << "," << to_string(shot.initial) << ","
               << to_string(shot.final_state) << "," << shot.counts_a << ","
               << shot.counts_b << "\n";
        }
    }
}

inline void write_histogram_csv(std::ostream& os, const HistogramResult& hist,
                                std::uint64_t seed) {
    os << "# seed=" << seed << "\n";
    os << "photon_count,occurrences\n";
    for (std::size_t k = 0; k < hist.bin_counts.size(); ++k)
        os << k << "," << hist.bin_counts[k] << "\n";
}

}  // namespace spinmux::expsim
