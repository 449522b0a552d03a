#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>

#include "spinmux/qcore.hpp"

using namespace spinmux;
using namespace spinmux::qcore;

namespace {

// Rotation matrix written out entry by entry, independent of rot().
Mat2 axis_angle_matrix(double theta, double beta, double alpha) {
    const double c = std::cos(alpha / 2), s = std::sin(alpha / 2);
    Mat2 u;
    u(0, 0) = Complex(c, 0) - imag_unit * s * std::cos(theta);
    u(0, 1) = -imag_unit * std::exp(-imag_unit * beta) * s * std::sin(theta);
    u(1, 0) = -imag_unit * std::exp(imag_unit * beta) * s * std::sin(theta);
    u(1, 1) = Complex(c, 0) + imag_unit * s * std::cos(theta);
    return u;
}

Eigen::Vector3d axis_from_angles(double theta, double beta) {
    return {std::sin(theta) * std::cos(beta), std::sin(theta) * std::sin(beta),
            std::cos(theta)};
}

}  // namespace

TEST_CASE("rot: zero angle about z is identity") {
    REQUIRE((rot({0, 0, 1}, 0.0) - Mat2::Identity()).norm() < 1e-15);
}

TEST_CASE("rot: pi about x gives -i sigma_x") {
    const Mat2 expected = -imag_unit * sigma_x();
    const Mat2 u = rot(axis_from_angles(pi / 2, 0.0), pi);
    REQUIRE((u - expected).norm() < 1e-14);
}

TEST_CASE("rot: 2pi about x gives -identity (spinor phase)") {
    REQUIRE((rot({1, 0, 0}, 2 * pi) + Mat2::Identity()).norm() < 1e-14);
}

TEST_CASE("rot matches the explicit axis-angle matrix") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> ang(0.0, 2 * pi);
    for (int i = 0; i < 200; ++i) {
        const double theta = 0.5 * ang(gen);
        const double beta = ang(gen), alpha = ang(gen);
        const Mat2 u = rot(axis_from_angles(theta, beta), alpha);
        REQUIRE((u - axis_angle_matrix(theta, beta, alpha)).norm() < 1e-13);
        REQUIRE(is_unitary(u, 1e-12));
        REQUIRE(std::abs(std::abs(u.determinant()) - 1.0) < 1e-12);
    }
}

TEST_CASE("rot: non-unit axis rejected") {
    REQUIRE_THROWS_AS(rot({0.5, 0, 0}, 1.0), InputError);
}

TEST_CASE("rot composition about a fixed axis adds angles") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> ang(-2 * pi, 2 * pi);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double theta = std::acos(2 * u01(gen) - 1), beta = ang(gen);
        const auto n = axis_from_angles(theta, beta);
        const double a = ang(gen), b = ang(gen);
        REQUIRE((rot(n, a) * rot(n, b) - rot(n, a + b)).norm() < 1e-12);
    }
}

TEST_CASE("rot_z is diagonal with entries exp(-+ i a/2)") {
    const double a = 0.7341;
    const Mat2 u = rot_z(a);
    REQUIRE(std::abs(u(0, 1)) == 0.0);
    REQUIRE(std::abs(u(1, 0)) == 0.0);
    REQUIRE(std::abs(u(0, 0) - std::exp(-imag_unit * (a / 2))) < 1e-15);
    REQUIRE(std::abs(u(1, 1) - std::exp(imag_unit * (a / 2))) < 1e-15);
}

TEST_CASE("propagate: H=0 returns the initial state") {
    Vec2 psi(Complex(0.6, 0.0), Complex(0.0, 0.8));
    const Vec2 out = propagate(Mat2::Zero().eval(), psi, 3.7);
    REQUIRE((out - psi).norm() < 1e-12);
}

TEST_CASE("propagate: pure excited-state detuning is a phase") {
    // H = -Delta |e><e| with Delta = 1, t = pi: |e> -> e^{i pi} |e>.
    Mat2 h = Mat2::Zero();
    h(1, 1) = -1.0;
    Vec2 psi(Complex(0, 0), Complex(1, 0));
    const Vec2 out = propagate(h, psi, pi);
    REQUIRE(std::abs(out(1) - std::exp(imag_unit * pi)) < 1e-8);
    REQUIRE(std::abs(out(0)) < 1e-12);
}

TEST_CASE("propagate: ground phase advances at the light-shift rate") {
    // Driven two-level system, Omega=0.1, Delta=10, Gamma=0. The ground
    // amplitude rotates at (sqrt(100.01)-10)/2.
    const double omega = 0.1, delta = 10.0;
    Mat2 h;
    h << 0.0, omega / 2, omega / 2, -delta;
    Vec2 psi(Complex(1, 0), Complex(0, 0));
    // Long enough that the residual Rabi beating (relative ~ (Omega/2Delta)^2)
    // is negligible against the accumulated phase, short enough not to wrap.
    const double t = 2000.0;
    const Vec2 out = propagate(h, psi, t, {.rel_tol = 1e-9, .abs_tol = 1e-9});
    const double rate = -std::arg(out(0)) / t;
    const double expected = (std::sqrt(100.01) - 10.0) / 2.0;
    REQUIRE(expected == Catch::Approx(0.000250).margin(2e-7));
    REQUIRE(rate == Catch::Approx(expected).epsilon(1e-4));
}

TEST_CASE("propagate agrees with the matrix exponential") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        Mat2 a;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) a(r, c) = Complex(nd(gen), nd(gen));
        const Mat2 h = a + a.adjoint();  // Hermitian
        Vec2 psi(Complex(nd(gen), nd(gen)), Complex(nd(gen), nd(gen)));
        psi.normalize();
        const double t = 0.5 + std::abs(nd(gen));
        REQUIRE((propagate(h, psi, t) - propagate_expm(h, psi, t)).norm() < 1e-8);
    }
}

TEST_CASE("propagate: Hermitian H conserves norm, lossy H never gains") {
    const double omega = 0.4, delta = 2.0, gamma = 0.3;
    Mat2 h;
    h << 0.0, omega / 2, omega / 2, Complex(-delta, -gamma / 2);
    Vec2 psi(Complex(std::sqrt(0.5), 0), Complex(std::sqrt(0.5), 0));

    double prev = psi.norm();
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double n = propagate(h, psi, t).norm();
        REQUIRE(n <= prev + 1e-12);
        prev = n;
    }

    Mat2 herm = h;
    herm(1, 1) = Complex(-delta, 0.0);
    REQUIRE(propagate(herm, psi, 7.0).norm() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("distance_up_to_global_phase basics") {
    const Mat2 u = rot({0, 1, 0}, 1.234);
    REQUIRE(distance_up_to_global_phase(u, u) < 1e-14);
    REQUIRE(distance_up_to_global_phase(u, Mat2(-u)) < 1e-14);
    // min_gamma ||I - e^{i gamma} sigma_x||_F = sqrt(4 - 2|tr sigma_x|) = 2.
    REQUIRE(distance_up_to_global_phase(Mat2::Identity().eval(), sigma_x()) ==
            Catch::Approx(2.0).margin(1e-14));
}

TEST_CASE("is_density_matrix accepts valid and rejects invalid states") {
    Mat2 rho;
    rho << 0.75, Complex(0.1, 0.2), Complex(0.1, -0.2), 0.25;
    REQUIRE(is_density_matrix(rho));
    Mat2 bad = rho;
    bad(0, 0) = 0.9;  // trace 1.15
    REQUIRE(!is_density_matrix(bad));
    Mat2 nonpos;
    nonpos << 1.2, 0.0, 0.0, -0.2;
    REQUIRE(!is_density_matrix(nonpos));
}
