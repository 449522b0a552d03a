#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "spinmux/control.hpp"
#include "spinmux/expsim.hpp"

using namespace spinmux;
using namespace spinmux::expsim;

namespace {

std::vector<ion::IonSpec> one_ion(double cyclicity = 850.0) {
    auto ion = ion::presets::ion2();
    ion.cyclicity = cyclicity;
    return {ion};
}

HardwareSpec quiet_hw() {
    HardwareSpec hw;
    hw.dark_mean_per_window = 0.0;
    hw.crosstalk_exc_prob = 0.0;
    return hw;
}

// Independent closed form: mean detected photons from a bright state over n
// pulses with per-cycle flip probability p_exc/C.
double geometric_mean_counts(double c, double p_exc, double p_det, int n) {
    double sum = 0.0;
    for (int k = 1; k <= n; ++k)
        sum += p_det * std::pow(1.0 - p_exc / c, k - 1) * p_exc;
    return sum;
}

}  // namespace

TEST_CASE("builders validate their inputs") {
    REQUIRE_THROWS_AS(build_init_sequence(0, Spin::Up, 0, 1), InputError);
    REQUIRE_THROWS_AS(build_readout_sequence({0}, ReadoutMode::SingleTransition, 10),
                      InputError);
    REQUIRE_THROWS_AS(
        build_xy8_stark_sequence(1e-6, 0, std::nullopt, Placement::Odd, 0.0, 1),
        InputError);
}

TEST_CASE("microwave pulses act on the Bloch vector like qcore rotations") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> ang(-two_pi, two_pi);
    const auto ions = one_ion();
    for (int i = 0; i < 40; ++i) {
        const char axis = i % 3 == 0 ? 'x' : (i % 3 == 1 ? 'y' : 'z');
        const double angle = ang(gen), phase = ang(gen);
        PulseSequence seq;
        seq.n_ions = 1;
        seq.ops = {PrepareSpin{0, Spin::Down},
                   MwPulse{.axis = axis, .angle = angle, .phase = phase}};
        const double p_up = final_populations_up(seq, ions, quiet_hw())[0];

        control::MwRotation mw;
        mw.axis = axis == 'x' ? control::Axis::X
                              : (axis == 'y' ? control::Axis::Y : control::Axis::Z);
        mw.angle = angle;
        mw.phase = phase;
        const qcore::Mat2 u = control::gate_matrix(mw);
        REQUIRE(p_up == Catch::Approx(std::norm(u(1, 0))).margin(1e-12));
    }
}

TEST_CASE("initialization approaches the pumping steady state") {
    const auto ions = one_ion(850.0);
    auto hw = quiet_hw();

    SECTION("ideal hardware exceeds 0.999 at 50 repetitions") {
        hw.excitation_prob_per_pulse = 1.0;
        const auto seq = build_init_sequence(0, Spin::Up, 50, 1);
        const auto recs = run_shots(seq, ions, hw, 20000, 7);
        long ok = 0;
        for (const auto& r : recs) ok += r.ions[0].initial == Spin::Up;
        REQUIRE(static_cast<double>(ok) / recs.size() > 0.999);
    }

    SECTION("stochastic runs match the Markov chain at low excitation") {
        hw.excitation_prob_per_pulse = 0.06;
        const auto seq = build_init_sequence(0, Spin::Down, 50, 1);
        const long shots = 40000;
        const auto recs = run_shots(seq, ions, hw, shots, 11);
        long ok = 0;
        for (const auto& r : recs) ok += r.ions[0].initial == Spin::Down;
        const double f = static_cast<double>(ok) / shots;

        // Markov oracle: per repetition the wrong state transfers with
        // probability p_exc (1 - 1/C); start is an even mixture.
        const double p_t = 0.06 * (1.0 - 1.0 / 850.0);
        const double expected = 1.0 - 0.5 * std::pow(1.0 - p_t, 50);
        REQUIRE(expected >= 0.95);
        const double sigma = std::sqrt(expected * (1.0 - expected) / shots);
        REQUIRE(std::abs(f - expected) < 4.0 * sigma);

        // The deterministic expectation walk reproduces the same number.
        PulseSequence seq2 = seq;
        const double p_up = final_populations_up(seq2, ions, hw)[0];
        REQUIRE(1.0 - p_up == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("bright-state readout counts follow the geometric-sum oracle") {
    const double c = 850.0, p_exc = 0.8, p_det = 0.1;
    const int n_r = 250;
    const auto ions = one_ion(c);
    auto hw = quiet_hw();
    hw.excitation_prob_per_pulse = p_exc;
    hw.detect_prob_per_cycle = p_det;

    PulseSequence seq;
    seq.n_ions = 1;
    seq.ops = {PrepareSpin{0, Spin::Down},
               ReadoutWindow{.ion = 0, .mode = ReadoutMode::SingleTransition,
                             .transition = Transition::B, .n_pulses = n_r,
                             .bin_width = 50}};
    const long shots = 20000;
    const auto recs = run_shots(seq, ions, hw, shots, 3);
    double mean = 0.0;
    for (const auto& r : recs) {
        mean += r.ions[0].counts_b;
        REQUIRE(r.ions[0].counts_a == 0);
        REQUIRE(static_cast<int>(r.ions[0].bins_b.size()) == 5);
        int sum = 0;
        for (int b : r.ions[0].bins_b) sum += b;
        REQUIRE(sum == r.ions[0].counts_b);
    }
    mean /= shots;
    REQUIRE(mean == Catch::Approx(geometric_mean_counts(c, p_exc, p_det, n_r))
                        .epsilon(0.01));
}

TEST_CASE("dark state sees only dark counts, Poisson distributed") {
    const auto ions = one_ion();
    auto hw = quiet_hw();
    hw.dark_mean_per_window = 0.05;
    PulseSequence seq;
    seq.n_ions = 1;
    seq.ops = {PrepareSpin{0, Spin::Up},
               ReadoutWindow{.ion = 0, .mode = ReadoutMode::SingleTransition,
                             .transition = Transition::B, .n_pulses = 250,
                             .bin_width = 0}};
    const long shots = 40000;
    const auto recs = run_shots(seq, ions, hw, shots, 5);
    double mean = 0.0, m2 = 0.0;
    for (const auto& r : recs) {
        mean += r.ions[0].counts_b;
        m2 += static_cast<double>(r.ions[0].counts_b) * r.ions[0].counts_b;
    }
    mean /= shots;
    m2 /= shots;
    const double var = m2 - mean * mean;
    REQUIRE(mean == Catch::Approx(0.05).margin(4.0 * std::sqrt(0.05 / shots)));
    REQUIRE(var == Catch::Approx(0.05).margin(0.01));
}

TEST_CASE("single pulse window yields at most one photon without darks") {
    const auto ions = one_ion();
    auto hw = quiet_hw();
    hw.detect_prob_per_cycle = 1.0;
    hw.excitation_prob_per_pulse = 1.0;
    PulseSequence seq;
    seq.n_ions = 1;
    seq.ops = {PrepareSpin{0, Spin::Down},
               ReadoutWindow{.ion = 0, .mode = ReadoutMode::SingleTransition,
                             .transition = Transition::B, .n_pulses = 1,
                             .bin_width = 0}};
    for (const auto& r : run_shots(seq, ions, quiet_hw(), 200, 1))
        REQUIRE(r.ions[0].counts_b <= 1);
    for (const auto& r : run_shots(seq, ions, hw, 200, 1))
        REQUIRE(r.ions[0].counts_b == 1);
}

TEST_CASE("noiseless alternating readout separates the states every shot") {
    auto ions = one_ion(1e7);
    auto hw = quiet_hw();
    hw.excitation_prob_per_pulse = 1.0;
    hw.detect_prob_per_cycle = 0.2;
    PulseSequence seq;
    seq.n_ions = 1;
    seq.ops = {PrepareSpin{0, Spin::Down},
               ReadoutWindow{.ion = 0, .mode = ReadoutMode::AlternatingAB,
                             .n_pulses = 100, .bin_width = 0}};
    for (const auto& r : run_shots(seq, ions, hw, 500, 13)) {
        REQUIRE(r.ions[0].counts_b - r.ions[0].counts_a > 0);
        REQUIRE(r.ions[0].counts_a == 0);
    }
    const auto result =
        discriminate(run_shots(seq, ions, hw, 500, 13), DifferenceRule{});
    REQUIRE(result.per_ion_fidelity[0] == 1.0);
}

TEST_CASE("count-threshold discrimination and the exhaustive optimum") {
    const auto ions = one_ion(850.0);
    auto hw = quiet_hw();
    hw.dark_mean_per_window = 0.3;
    hw.detect_prob_per_cycle = 0.08;
    PulseSequence seq;
    seq.n_ions = 1;
    // Mixture of prepared states: thermal start, no init.
    seq.ops = {ReadoutWindow{.ion = 0, .mode = ReadoutMode::SingleTransition,
                             .transition = Transition::B, .n_pulses = 250,
                             .bin_width = 0}};
    const auto recs = run_shots(seq, ions, hw, 20000, 17);
    const int t = optimal_count_threshold(recs, 0);

    // Exhaustive re-check.
    auto fidelity_at = [&](int thr) {
        CountThresholdRule rule{{thr}};
        return discriminate(recs, rule).per_ion_fidelity[0];
    };
    double best = -1.0;
    int best_t = 0;
    for (int cand = 0; cand <= 40; ++cand) {
        const double f = fidelity_at(cand);
        if (f > best + 1e-15) {
            best = f;
            best_t = cand;
        }
    }
    REQUIRE(t == best_t);
    REQUIRE(fidelity_at(t) == Catch::Approx(best));
    REQUIRE(best > 0.9);
}

TEST_CASE("plain XY8 contrast follows the Gaussian envelope exactly") {
    const auto ions = one_ion();
    const double tau = 521e-9;
    for (int reps : {1, 2, 4}) {
        const double t_total = 16.0 * tau * reps;
        const double t2 = ions[0].spin.t2_xy8;
        for (double theta : {0.0, 0.9, 2.2}) {
            auto seq = build_xy8_stark_sequence(tau, reps, std::nullopt,
                                                Placement::Odd, theta, 1);
            seq.ops.insert(seq.ops.begin(), PrepareSpin{0, Spin::Down});
            const double p_up = final_populations_up(seq, ions, quiet_hw())[0];
            const double v = std::exp(-std::pow(t_total / t2, 2)) *
                             std::exp(-t_total / (2.0 * ions[0].spin.t1));
            REQUIRE(p_up ==
                    Catch::Approx(0.5 * (1.0 + v * std::cos(theta))).margin(1e-9));
        }
    }
}

TEST_CASE("optical slots imprint opposite phases for odd and even placement") {
    const auto ion_list = std::vector<ion::IonSpec>{ion::presets::ion1(),
                                                    ion::presets::ion2()};
    // Fits the trailing tau gap that hosts the last even-placement slot.
    const double tau = 521e-9;
    const stark::StarkPulse tone{.omega = two_pi * 12e6, .duration = 0.4e-6,
                                 .laser_freq = ion::presets::f_ref + 275e6};

    // Independent expectation for the per-slot phase of ion 2 (far detuned).
    const auto [da, db] = stark::detunings(tone.laser_freq, ion_list[1]);
    const double g24 = std::pow(ion_list[1].gamma_eff / 2.0, 2);
    const double phi_slot = tone.duration * tone.omega * tone.omega / 4.0 *
                            (db / (db * db + g24) - da / (da * da + g24));

    auto populations = [&](Placement placement, double theta) {
        auto seq = build_xy8_stark_sequence(tau, 1, tone, placement, theta, 2);
        seq.ops.insert(seq.ops.begin(), PrepareSpin{1, Spin::Down});
        seq.ops.insert(seq.ops.begin(), PrepareSpin{0, Spin::Down});
        return final_populations_up(seq, ion_list, quiet_hw());
    };

    // Fringe maximum sits at theta = net phase; scan to locate it coarsely.
    auto extract_phase = [&](Placement placement) {
        double best_theta = 0.0, best_p = -1.0;
        for (double theta = -pi; theta < pi; theta += 0.002) {
            const double p = populations(placement, theta)[1];
            if (p > best_p) {
                best_p = p;
                best_theta = theta;
            }
        }
        return best_theta;
    };

    const double phase_odd = extract_phase(Placement::Odd);
    const double phase_even = extract_phase(Placement::Even);
    REQUIRE(std::remainder(phase_odd + 4.0 * phi_slot, two_pi) ==
            Catch::Approx(0.0).margin(0.004));
    REQUIRE(std::remainder(phase_even - 4.0 * phi_slot, two_pi) ==
            Catch::Approx(0.0).margin(0.004));
    REQUIRE(std::remainder(phase_odd + phase_even, two_pi) ==
            Catch::Approx(0.0).margin(0.004));

    REQUIRE(xy8_net_phase(tone, ion_list[1], Placement::Odd, 1) ==
            Catch::Approx(-4.0 * phi_slot).epsilon(1e-12));

    // Zero-duration pulse: no fringe displacement.
    const stark::StarkPulse null_tone{.omega = tone.omega, .duration = 0.0,
                                      .laser_freq = tone.laser_freq};
    auto seq0 = build_xy8_stark_sequence(tau, 1, null_tone, Placement::Odd, 0.0, 2);
    seq0.ops.insert(seq0.ops.begin(), PrepareSpin{1, Spin::Down});
    seq0.ops.insert(seq0.ops.begin(), PrepareSpin{0, Spin::Down});
    auto seq_plain =
        build_xy8_stark_sequence(tau, 1, std::nullopt, Placement::Odd, 0.0, 2);
    seq_plain.ops.insert(seq_plain.ops.begin(), PrepareSpin{1, Spin::Down});
    seq_plain.ops.insert(seq_plain.ops.begin(), PrepareSpin{0, Spin::Down});
    REQUIRE(final_populations_up(seq0, ion_list, quiet_hw())[1] ==
            Catch::Approx(final_populations_up(seq_plain, ion_list, quiet_hw())[1])
                .margin(1e-12));
}

TEST_CASE("oversized optical pulses are rejected by the scheduler") {
    const stark::StarkPulse tone{.omega = 1e6, .duration = 1.2e-6,
                                 .laser_freq = ion::presets::f_ref + 275e6};
    REQUIRE_THROWS_AS(
        build_xy8_stark_sequence(521e-9, 1, tone, Placement::Odd, 0.0, 1),
        InputError);
}

TEST_CASE("same seed reproduces byte-identical shot records") {
    const auto ions = one_ion();
    HardwareSpec hw;  // darks on
    const auto seq = build_readout_sequence({0}, ReadoutMode::AlternatingAB, 50);
    std::ostringstream a, b;
    write_shots_csv(a, run_shots(seq, ions, hw, 300, 99), 99, "");
    write_shots_csv(b, run_shots(seq, ions, hw, 300, 99), 99, "");
    REQUIRE(a.str() == b.str());
    std::ostringstream c;
    write_shots_csv(c, run_shots(seq, ions, hw, 300, 98), 98, "");
    REQUIRE(a.str() != c.str());
}

TEST_CASE("common random numbers make counts monotone in p_det and cyclicity") {
    const int shots = 400;
    auto run_counts = [&](double c, double p_det) {
        auto ions = one_ion(c);
        auto hw = quiet_hw();
        hw.detect_prob_per_cycle = p_det;
        PulseSequence seq;
        seq.n_ions = 1;
        seq.ops = {PrepareSpin{0, Spin::Down},
                   ReadoutWindow{.ion = 0, .mode = ReadoutMode::SingleTransition,
                                 .transition = Transition::B, .n_pulses = 250,
                                 .bin_width = 0}};
        std::vector<int> counts;
        for (const auto& r : run_shots(seq, ions, hw, shots, 21))
            counts.push_back(r.ions[0].counts_b);
        return counts;
    };
    const auto lo = run_counts(850.0, 0.05);
    const auto hi = run_counts(850.0, 0.15);
    const auto lo_c = run_counts(750.0, 0.05);
    for (int s = 0; s < shots; ++s) {
        REQUIRE(hi[s] >= lo[s]);
        REQUIRE(lo[s] >= lo_c[s]);
    }
}

TEST_CASE("without crosstalk, a spectator's counts ignore the other ion") {
    std::vector<ion::IonSpec> ions{ion::presets::ion1(), ion::presets::ion2()};
    auto hw = quiet_hw();
    hw.dark_mean_per_window = 0.05;
    auto mean_counts = [&](Spin other) {
        PulseSequence seq;
        seq.n_ions = 2;
        seq.ops = {PrepareSpin{0, Spin::Down}, PrepareSpin{1, other},
                   ReadoutWindow{.ion = 0, .mode = ReadoutMode::SingleTransition,
                                 .transition = Transition::B, .n_pulses = 250,
                                 .bin_width = 0},
                   ReadoutWindow{.ion = 1, .mode = ReadoutMode::SingleTransition,
                                 .transition = Transition::B, .n_pulses = 250,
                                 .bin_width = 0}};
        double m = 0.0;
        const auto recs = run_shots(seq, ions, hw, 4000, 31);
        for (const auto& r : recs) m += r.ions[0].counts_b;
        return m / recs.size();
    };
    // Identical dynamics stream per shot: the spectator's counts are exactly
    // equal, not merely statistically indistinguishable.
    REQUIRE(mean_counts(Spin::Down) == mean_counts(Spin::Up));
}

TEST_CASE("crosstalk pollutes spectator statistics when enabled") {
    std::vector<ion::IonSpec> ions{ion::presets::ion1(), ion::presets::ion2()};
    auto hw = quiet_hw();
    hw.crosstalk_exc_prob = 0.05;
    PulseSequence seq;
    seq.n_ions = 2;
    seq.ops = {PrepareSpin{0, Spin::Up}, PrepareSpin{1, Spin::Down},
               ReadoutWindow{.ion = 0, .mode = ReadoutMode::SingleTransition,
                             .transition = Transition::B, .n_pulses = 250,
                             .bin_width = 0}};
    double m = 0.0;
    const auto recs = run_shots(seq, ions, hw, 4000, 37);
    for (const auto& r : recs) m += r.ions[0].counts_b;
    // Ion 0 is dark; photons can only come from crosstalk cycles of ion 1.
    REQUIRE(m / recs.size() > 0.5);
}
