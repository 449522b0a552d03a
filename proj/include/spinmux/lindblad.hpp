#pragma once

// Master-equation evolution of a driven two-level optical transition with
// radiative decay, pure dephasing and slow spectral diffusion, and the
// extraction of the spin-coherence phase and visibility it predicts.
//
// The two spin-conserving transitions are treated as independent two-level
// systems. Embedding both branches in one four-level density matrix, the
// ground-ground coherence evolves as rho_01(t) = a_A(t) conj(a_B(t)) rho_01(0)
// where a_X is the ground amplitude under the non-Hermitian Hamiltonian of
// branch X with Gamma = gamma_rad + gamma_d. The solvers below integrate the
// full Lindblad generator and read that coherence off the result.
//
// A square pulse also loses O((Omega/2 Delta)^2) of contrast to the sudden
// projection onto dressed states, a term absent from the dispersive-form
// loss; agreement with that form requires duration * Gamma >> 1.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <ostream>
#include <vector>

#include "spinmux/errors.hpp"
#include "spinmux/ode.hpp"
#include "spinmux/qcore.hpp"
#include "spinmux/quadrature.hpp"
#include "spinmux/units.hpp"

namespace spinmux::lindblad {

using qcore::Mat2;
using qcore::Mat4;
using qcore::MatX;

enum class Solver { AdaptiveRk, SuperoperatorExp };

struct LindbladConfig {
    double omega = 0.0;      // rad/s
    double delta = 0.0;      // rad/s, laser minus transition
    double gamma_rad = 0.0;  // rad/s
    double gamma_d = 0.0;    // rad/s, pure dephasing channel rate
    double duration = 0.0;   // s
    double integrator_tol = 1e-10;
    Solver solver = Solver::AdaptiveRk;

    void validate() const {
        if (gamma_rad < 0.0 || gamma_d < 0.0)
            throw InputError("LindbladConfig: negative rate");
        if (duration < 0.0) throw InputError("LindbladConfig: negative duration");
        if (!(integrator_tol > 0.0) || integrator_tol > 1e-6)
            throw InputError("LindbladConfig: integrator_tol must lie in (0, 1e-6]");
    }
};

enum class ProfileKind { None, Gaussian, Lorentzian };

struct DiffusionProfile {
    ProfileKind kind = ProfileKind::None;
    double fwhm = 0.0;  // rad/s
    int quadrature_points = 201;
    // Lorentzian support truncation. The default is adequate once the
    // diffusion contribution to the loss exponent exceeds ~0.3; the
    // convergence guard in diffusion_average flags it otherwise.
    double cutoff_fwhms = 20.0;

    void validate() const {
        if (fwhm < 0.0) throw InputError("DiffusionProfile: negative fwhm");
        if (kind != ProfileKind::None &&
            (quadrature_points < 11 || quadrature_points % 2 == 0))
            throw InputError("DiffusionProfile: quadrature_points must be odd and >= 11");
        if (cutoff_fwhms <= 0.0)
            throw InputError("DiffusionProfile: cutoff_fwhms must be positive");
    }
};

struct MasterSystem {
    MatX h;
    std::vector<MatX> collapse;
};

inline MatX lindblad_rhs(const MasterSystem& sys,
                         const std::vector<MatX>& cdagc, const MatX& rho) {
    MatX drho = -imag_unit * (sys.h * rho - rho * sys.h);
    for (std::size_t k = 0; k < sys.collapse.size(); ++k) {
        drho += sys.collapse[k] * rho * sys.collapse[k].adjoint() -
                0.5 * (cdagc[k] * rho + rho * cdagc[k]);
    }
    return drho;
}

inline MatX liouvillian(const MasterSystem& sys) {
    const long d = sys.h.rows();
    const MatX id = MatX::Identity(d, d);
    MatX l = -imag_unit * (Eigen::kroneckerProduct(id, sys.h).eval() -
                           Eigen::kroneckerProduct(sys.h.transpose(), id).eval());
    for (const auto& c : sys.collapse) {
        const MatX cdc = c.adjoint() * c;
        l += Eigen::kroneckerProduct(c.conjugate(), c).eval();
        l -= 0.5 * Eigen::kroneckerProduct(id, cdc).eval();
        l -= 0.5 * Eigen::kroneckerProduct(cdc.transpose(), id).eval();
    }
    return l;
}

inline MatX evolve_system(const MasterSystem& sys, const MatX& rho0, double t,
                          double tol, Solver solver) {
    if (t == 0.0) return rho0;
    if (solver == Solver::SuperoperatorExp) {
        const long d = rho0.rows();
        MatX vec = rho0.reshaped(d * d, 1);
        const MatX prop = MatX(liouvillian(sys) * t).exp();
        return MatX((prop * vec).reshaped(d, d));
    }
    std::vector<MatX> cdagc;
    cdagc.reserve(sys.collapse.size());
    for (const auto& c : sys.collapse) cdagc.push_back(c.adjoint() * c);
    auto rhs = [&sys, &cdagc](double, const MatX& rho) {
        return lindblad_rhs(sys, cdagc, rho);
    };
    return ode::integrate(rhs, rho0, 0.0, t, {.rel_tol = tol, .abs_tol = tol * 1e-3});
}

// H = (Omega/2)(|g><e| + |e><g|) - Delta |e><e| on {|g>, |e>}.
inline Mat2 drive_hamiltonian(double omega, double delta) {
    Mat2 h;
    h << 0.0, omega / 2.0, omega / 2.0, -delta;
    return h;
}

inline MasterSystem two_level_system(const LindbladConfig& cfg) {
    MasterSystem sys;
    sys.h = drive_hamiltonian(cfg.omega, cfg.delta);
    if (cfg.gamma_rad > 0.0) {
        MatX c = MatX::Zero(2, 2);
        c(0, 1) = std::sqrt(cfg.gamma_rad);
        sys.collapse.push_back(c);
    }
    if (cfg.gamma_d > 0.0) {
        MatX c = MatX::Zero(2, 2);
        c(1, 1) = std::sqrt(cfg.gamma_d);
        sys.collapse.push_back(c);
    }
    return sys;
}

inline MatX evolve(const LindbladConfig& cfg, const MatX& rho0) {
    cfg.validate();
    if (rho0.rows() != 2 || rho0.cols() != 2)
        throw InputError("evolve: expected a 2x2 density matrix");
    if (!qcore::is_density_matrix(rho0, 1e-9, -1e-9, 1e-9))
        throw InputError("evolve: rho0 is not a valid density matrix");
    return evolve_system(two_level_system(cfg), rho0, cfg.duration,
                         cfg.integrator_tol, cfg.solver);
}

// Both optical branches of one ion under a common drive amplitude.
struct TwoBranchConfig {
    double omega_a = 0.0;
    double delta_a = 0.0;
    double omega_b = 0.0;
    double delta_b = 0.0;
    double gamma_rad = 0.0;
    double gamma_d = 0.0;
    double duration = 0.0;
    double integrator_tol = 1e-10;
    Solver solver = Solver::AdaptiveRk;
};

// Coherence factor between the two spin ground levels after the pulse,
// normalized to 1 at t=0. Basis {up-g, up-e, down-g, down-e}; branch A drives
// the spin-up transition.
inline Complex spin_contrast(const TwoBranchConfig& cfg) {
    Mat4 h = Mat4::Zero();
    h.block<2, 2>(0, 0) = drive_hamiltonian(cfg.omega_a, cfg.delta_a);
    h.block<2, 2>(2, 2) = drive_hamiltonian(cfg.omega_b, cfg.delta_b);

    MasterSystem sys;
    sys.h = h;
    auto add_channel = [&sys](int row, int col, double rate) {
        if (rate <= 0.0) return;
        MatX c = MatX::Zero(4, 4);
        c(row, col) = std::sqrt(rate);
        sys.collapse.push_back(c);
    };
    add_channel(0, 1, cfg.gamma_rad);
    add_channel(2, 3, cfg.gamma_rad);
    add_channel(1, 1, cfg.gamma_d);
    add_channel(3, 3, cfg.gamma_d);

    Mat4 rho0 = Mat4::Zero();
    rho0(0, 0) = rho0(0, 2) = rho0(2, 0) = rho0(2, 2) = 0.5;

    const MatX rho =
        evolve_system(sys, rho0, cfg.duration, cfg.integrator_tol, cfg.solver);
    return 2.0 * rho(0, 2);
}

// Ground-amplitude factor of a single driven transition, obtained from the
// four-level master equation with the other branch idle.
inline Complex branch_amplitude(const LindbladConfig& cfg) {
    cfg.validate();
    return spin_contrast({.omega_a = cfg.omega,
                          .delta_a = cfg.delta,
                          .omega_b = 0.0,
                          .delta_b = 0.0,
                          .gamma_rad = cfg.gamma_rad,
                          .gamma_d = cfg.gamma_d,
                          .duration = cfg.duration,
                          .integrator_tol = cfg.integrator_tol,
                          .solver = cfg.solver});
}

struct RamseyExtract {
    double phase = 0.0;
    double visibility = 0.0;
    bool phase_defined = true;
};

// Composes per-branch coherence factors: phase difference (branch A minus
// branch B, the sign of the net spin phase) and contrast product.
inline RamseyExtract ramsey_extract(Complex branch_a, Complex branch_b) {
    if (std::abs(branch_a) > 1.0 + 1e-9 || std::abs(branch_b) > 1.0 + 1e-9)
        throw InputError("ramsey_extract: coherence magnitudes exceed 1");
    const Complex prod = branch_a * std::conj(branch_b);
    if (std::abs(prod) == 0.0) return {.phase = 0.0, .visibility = 0.0,
                                       .phase_defined = false};
    return {.phase = std::arg(prod), .visibility = std::abs(prod),
            .phase_defined = true};
}

struct DiffusionResult {
    double phase = 0.0;
    double visibility_loss = 0.0;
    Complex contrast{1.0, 0.0};
};

namespace detail {

inline std::vector<quadrature::Node> profile_nodes(const DiffusionProfile& profile) {
    if (profile.kind == ProfileKind::Gaussian) {
        const double sigma = profile.fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        return quadrature::gaussian_pdf_nodes(profile.quadrature_points, sigma);
    }
    return quadrature::lorentzian_pdf_nodes(profile.quadrature_points, profile.fwhm,
                                            profile.cutoff_fwhms);
}

// Diffusion-averaged spin contrast of a single driven transition. The driven
// line is taken to be the spin-down one, so the reported phase is +dE*T for
// blue detuning. Frozen-disorder model: one static detuning offset per
// realization.
inline Complex averaged_contrast(const DiffusionProfile& profile,
                                 const LindbladConfig& inner, int points,
                                 double cutoff_scale = 1.0) {
    DiffusionProfile p = profile;
    p.quadrature_points = points;
    p.cutoff_fwhms *= cutoff_scale;
    const auto nodes = profile_nodes(p);
    std::vector<Complex> terms(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        LindbladConfig cfg = inner;
        cfg.delta = inner.delta + nodes[i].x;
        terms[i] = nodes[i].weight * std::conj(branch_amplitude(cfg));
    }
    return quadrature::pairwise_sum(std::move(terms));
}

}  // namespace detail

// Averages the complex contrast over the diffusion profile (never phase and
// visibility separately). Throws NumericalError if doubling the node count
// moves the result by more than 1%.
inline DiffusionResult diffusion_average(const DiffusionProfile& profile,
                                         const LindbladConfig& inner,
                                         bool check_convergence = true) {
    profile.validate();
    inner.validate();

    Complex contrast;
    if (profile.kind == ProfileKind::None || profile.fwhm == 0.0) {
        contrast = std::conj(branch_amplitude(inner));
    } else {
        contrast =
            detail::averaged_contrast(profile, inner, profile.quadrature_points);
        if (check_convergence) {
            const Complex finer = detail::averaged_contrast(
                profile, inner, 2 * profile.quadrature_points + 1);
            const Complex dev = Complex(1.0, 0.0) - finer;
            if (std::abs(contrast - finer) > 0.01 * std::abs(dev) + 1e-12)
                throw NumericalError(
                    "diffusion_average: quadrature not converged (doubling the "
                    "node count moved the contrast by more than 1%)");
        }
    }
    return {.phase = std::arg(contrast),
            .visibility_loss = 1.0 - std::abs(contrast),
            .contrast = contrast};
}

struct SweepRow {
    double delta = 0.0;  // rad/s, center detuning
    DiffusionResult result;
};

inline std::vector<SweepRow> sweep_delta(const DiffusionProfile& profile,
                                         const LindbladConfig& tmpl,
                                         const std::vector<double>& deltas,
                                         bool check_convergence = false) {
    std::vector<SweepRow> rows;
    rows.reserve(deltas.size());
    for (double d : deltas) {
        LindbladConfig cfg = tmpl;
        cfg.delta = d;
        rows.push_back({d, diffusion_average(profile, cfg, check_convergence)});
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "delta_hz,phase_rad,visibility_loss\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.9e,%.12e,%.12e\n",
                      angular_to_hz(r.delta), r.result.phase,
                      r.result.visibility_loss);
        os << buf;
    }
}

}  // namespace spinmux::lindblad
