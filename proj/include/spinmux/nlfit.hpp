#pragma once

// Small dense Levenberg-Marquardt with a numeric Jacobian, for the handful of
// low-dimensional curve fits in this package.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>

#include "spinmux/errors.hpp"

namespace spinmux::nlfit {

struct Options {
    int max_iterations = 400;
    double ftol = 1e-14;   // relative chi2 improvement
    double gtol = 1e-12;   // gradient max-norm
    double xtol = 1e-14;   // relative step size
    double lambda0 = 1e-3;
};

struct Result {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  // (J^T J)^-1 at the optimum
    double chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

template <typename F>
Eigen::MatrixXd numeric_jacobian(F&& residuals, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0) {
    const int n = static_cast<int>(p.size());
    Eigen::MatrixXd jac(r0.size(), n);
    for (int j = 0; j < n; ++j) {
        const double h = 1e-7 * std::max(std::abs(p(j)), 1e-7);
        Eigen::VectorXd pp = p;
        pp(j) += h;
        jac.col(j) = (residuals(pp) - r0) / h;
    }
    return jac;
}

}  // namespace detail

// Minimizes |residuals(p)|^2. Residuals should already carry 1/sigma weights
// so the returned covariance is the parameter covariance.
template <typename F>
Result levenberg_marquardt(F&& residuals, Eigen::VectorXd p,
                           const Options& opt = {}) {
    Eigen::VectorXd r = residuals(p);
    double chi2 = r.squaredNorm();
    double lambda = opt.lambda0;
    Result out;

    for (int it = 0; it < opt.max_iterations; ++it) {
        out.iterations = it + 1;
        const Eigen::MatrixXd jac = detail::numeric_jacobian(residuals, p, r);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;
        if (grad.cwiseAbs().maxCoeff() < opt.gtol) {
            out.converged = true;
            break;
        }

        bool stepped = false;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() +=
                lambda * jtj.diagonal().cwiseMax(1e-12 * jtj.diagonal().maxCoeff() +
                                                 std::numeric_limits<double>::min());
            const Eigen::VectorXd step = damped.ldlt().solve(-grad);
            const Eigen::VectorXd p_new = p + step;
            const Eigen::VectorXd r_new = residuals(p_new);
            const double chi2_new = r_new.squaredNorm();
            if (std::isfinite(chi2_new) && chi2_new <= chi2) {
                const double rel_step =
                    step.cwiseAbs().maxCoeff() /
                    std::max(p.cwiseAbs().maxCoeff(), 1e-12);
                const double improvement = chi2 - chi2_new;
                p = p_new;
                r = r_new;
                chi2 = chi2_new;
                lambda = std::max(lambda / 3.0, 1e-14);
                stepped = true;
                if (improvement <= opt.ftol * (chi2 + 1e-300) ||
                    rel_step < opt.xtol) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 5.0;
        }
        if (!stepped || out.converged) {
            out.converged = out.converged || !stepped;
            break;
        }
    }

    out.params = p;
    out.chi2 = chi2;
    const Eigen::MatrixXd jac = detail::numeric_jacobian(residuals, p, r);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (lu.isInvertible()) {
        out.covariance = lu.inverse();
    } else {
        out.covariance = Eigen::MatrixXd::Constant(
            p.size(), p.size(), std::numeric_limits<double>::infinity());
    }
    return out;
}

}  // namespace spinmux::nlfit
