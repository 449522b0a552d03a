#include <catch2/catch_amalgamated.hpp>

#include "spinmux/ion_model.hpp"

using namespace spinmux;
using namespace spinmux::ion;

TEST_CASE("purcell_at_detuning: on resonance returns p0") {
    CavitySpec cav{.f_cav = 4.2e9 * 4.6e4, .q_factor = 4.6e4, .purcell_ref = 330.0};
    REQUIRE(cav.linewidth_hz() == Catch::Approx(4.2e9));
    REQUIRE(purcell_at_detuning(cav, 330.0, 0.0) == Catch::Approx(330.0));
}

TEST_CASE("purcell_at_detuning: half-width point halves the enhancement") {
    CavitySpec cav{.f_cav = 194.8e12, .q_factor = 4.6e4, .purcell_ref = 200.0};
    const double kappa = cav.linewidth_hz();
    REQUIRE(purcell_at_detuning(cav, 123.0, kappa / 2.0) ==
            Catch::Approx(61.5).epsilon(1e-12));
}

TEST_CASE("purcell_at_detuning: one full linewidth off resonance") {
    CavitySpec cav{.f_cav = 4.2e9 * 4.6e4, .q_factor = 4.6e4, .purcell_ref = 330.0};
    REQUIRE(purcell_at_detuning(cav, 330.0, 4.2e9) == Catch::Approx(66.0).epsilon(1e-9));
}

TEST_CASE("purcell_at_detuning: even and decreasing in |detuning|") {
    CavitySpec cav = presets::cavity();
    double prev = purcell_at_detuning(cav, 330.0, 0.0);
    for (double d = 1e8; d < 2e10; d *= 2.0) {
        const double p = purcell_at_detuning(cav, 330.0, d);
        REQUIRE(p == Catch::Approx(purcell_at_detuning(cav, 330.0, -d)));
        REQUIRE(p < prev);
        prev = p;
    }
}

TEST_CASE("flip_prob_per_cycle from cyclicity") {
    IonSpec ion = presets::ion1();
    ion.cyclicity = 850.0;
    REQUIRE(flip_prob_per_cycle(ion) == Catch::Approx(1.0 / 850.0));
    REQUIRE(flip_prob_per_cycle(ion) == Catch::Approx(1.18e-3).epsilon(1e-2));
    ion.cyclicity = 1.0;
    REQUIRE(flip_prob_per_cycle(ion) == 1.0);
    ion.cyclicity = 780.0;
    REQUIRE(flip_prob_per_cycle(ion) == Catch::Approx(1.28e-3).epsilon(1e-2));
    REQUIRE(flip_prob_per_cycle(ion) > 0.0);
    REQUIRE(flip_prob_per_cycle(ion) <= 1.0);
}

TEST_CASE("IonSpec validation enforces the documented invariants") {
    IonSpec ion = presets::ion2();
    REQUIRE_NOTHROW(ion.validate());

    IonSpec same_freq = ion;
    same_freq.f_b = same_freq.f_a;
    REQUIRE_THROWS_AS(same_freq.validate(), InputError);

    IonSpec narrow = ion;
    narrow.gamma_eff = narrow.gamma_rad / 2.0;
    REQUIRE_THROWS_AS(narrow.validate(), InputError);

    IonSpec bad_c = ion;
    bad_c.cyclicity = 0.5;
    REQUIRE_THROWS_AS(bad_c.validate(), InputError);

    IonSpec bad_spin = ion;
    bad_spin.spin.t2_star = 1.0;  // exceeds t2_xy8
    REQUIRE_THROWS_AS(bad_spin.validate(), InputError);
}

TEST_CASE("presets carry the demonstration device values") {
    const auto ions = presets::four_ion_array();
    REQUIRE(ions.size() == 4);
    REQUIRE(ions[0].cyclicity == 780.0);
    REQUIRE(ions[1].cyclicity == 840.0);
    REQUIRE(ions[2].cyclicity == 750.0);
    REQUIRE(ions[3].cyclicity == 850.0);
    REQUIRE(ions[0].purcell == 130.0);
    REQUIRE(ions[3].purcell == 50.0);
    for (const auto& i : ions) REQUIRE_NOTHROW(i.validate());

    REQUIRE(presets::ion1().purcell == 330.0);
    REQUIRE(presets::ion2().purcell == 200.0);
    REQUIRE(presets::ion1().spin.t1 == Catch::Approx(19.9));
    REQUIRE(presets::ion2().spin.t1 == Catch::Approx(23.3));
    // Two-ion spectral separation of about 250 MHz.
    REQUIRE(presets::ion2().f_a - presets::ion1().f_a == Catch::Approx(250e6));
}
