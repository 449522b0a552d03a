#pragma once

// Dense complex linear algebra for the 2x2 and 4x4 systems used everywhere
// else: rotations, propagators, state/operator validity checks and a
// phase-insensitive distance.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>

#include "spinmux/errors.hpp"
#include "spinmux/ode.hpp"
#include "spinmux/units.hpp"

namespace spinmux::qcore {

using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using VecX = Eigen::VectorXcd;
using MatX = Eigen::MatrixXcd;

inline Mat2 identity2() { return Mat2::Identity(); }

inline Mat2 sigma_x() {
    Mat2 m;
    m << 0, 1, 1, 0;
    return m;
}

inline Mat2 sigma_y() {
    Mat2 m;
    m << 0, -imag_unit, imag_unit, 0;
    return m;
}

inline Mat2 sigma_z() {
    Mat2 m;
    m << 1, 0, 0, -1;
    return m;
}

// exp(-i*angle*(axis.sigma)/2) = cos(a/2) I - i sin(a/2) axis.sigma.
inline Mat2 rot(const Eigen::Vector3d& axis, double angle) {
    if (std::abs(axis.norm() - 1.0) > 1e-9)
        throw InputError("rot: axis must be a unit vector");
    const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
    Mat2 u;
    u << Complex(c, -s * axis.z()),
        Complex(-s * axis.y(), -s * axis.x()),
        Complex(s * axis.y(), -s * axis.x()),
        Complex(c, s * axis.z());
    return u;
}

inline Mat2 rot_x(double angle) { return rot({1, 0, 0}, angle); }
inline Mat2 rot_y(double angle) { return rot({0, 1, 0}, angle); }

// R_z(a) = diag(e^{-ia/2}, e^{+ia/2}); every other module inherits this sign.
inline Mat2 rot_z(double angle) {
    Mat2 u = Mat2::Zero();
    u(0, 0) = std::exp(-0.5 * imag_unit * angle);
    u(1, 1) = std::exp(0.5 * imag_unit * angle);
    return u;
}

template <typename Mat>
bool is_unitary(const Mat& u, double tol = 1e-12) {
    return (u.adjoint() * u - Mat::Identity(u.rows(), u.cols())).norm() <= tol;
}

template <typename Mat>
bool is_density_matrix(const Mat& rho, double herm_tol = 1e-12,
                       double eig_floor = -1e-10, double trace_tol = 1e-9) {
    if ((rho - rho.adjoint()).norm() > herm_tol) return false;
    if (std::abs(rho.trace().real() - 1.0) > trace_tol ||
        std::abs(rho.trace().imag()) > trace_tol)
        return false;
    Eigen::SelfAdjointEigenSolver<MatX> es(
        MatX(0.5 * (rho + rho.adjoint())), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= eig_floor;
}

struct PropagateOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
};

// Solves i dpsi/dt = H psi (hbar = 1) for constant, possibly non-Hermitian H.
template <typename Vec, typename Mat>
Vec propagate(const Mat& h, const Vec& psi0, double t,
              const PropagateOptions& opt = {}) {
    if (h.rows() != psi0.size() || h.cols() != psi0.size())
        throw InputError("propagate: dimension mismatch between H and state");
    if (t < 0.0) throw InputError("propagate: negative time");
    if (t == 0.0) return psi0;
    auto rhs = [&h](double, const Vec& psi) -> Vec {
        return (-imag_unit) * (h * psi);
    };
    return ode::integrate(rhs, psi0, 0.0, t,
                          {.rel_tol = opt.rel_tol, .abs_tol = opt.abs_tol});
}

// Closed-form propagator exp(-i H t); valid for constant H only.
template <typename Mat>
Mat propagator_expm(const Mat& h, double t) {
    return Mat((-imag_unit * t * h).exp());
}

template <typename Vec, typename Mat>
Vec propagate_expm(const Mat& h, const Vec& psi0, double t) {
    if (h.rows() != psi0.size()) throw InputError("propagate_expm: dimension mismatch");
    return propagator_expm(h, t) * psi0;
}

// min over gamma of ||U - e^{i gamma} W||_F; zero iff equal up to phase.
// Evaluated by subtraction at the optimal phase gamma = arg tr(U^dag W), which
// stays accurate near zero where the closed form cancels catastrophically.
template <typename MatA, typename MatB>
double distance_up_to_global_phase(const MatA& u, const MatB& w) {
    const Complex overlap = (u.adjoint() * w).trace();
    const Complex phase = std::abs(overlap) > 0.0
                              ? std::conj(overlap) / std::abs(overlap)
                              : Complex(1.0, 0.0);
    return (u - phase * w).norm();
}

}  // namespace spinmux::qcore
