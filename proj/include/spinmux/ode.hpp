#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "spinmux/errors.hpp"

namespace spinmux::ode {

struct Options {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    std::size_t max_steps = 2'000'000;
};

namespace detail {

// Cash-Karp 5(4) embedded pair.
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 3.0 / 10.0, a42 = -9.0 / 10.0, a43 = 6.0 / 5.0;
inline constexpr double a51 = -11.0 / 54.0, a52 = 5.0 / 2.0, a53 = -70.0 / 27.0,
                        a54 = 35.0 / 27.0;
inline constexpr double a61 = 1631.0 / 55296.0, a62 = 175.0 / 512.0,
                        a63 = 575.0 / 13824.0, a64 = 44275.0 / 110592.0,
                        a65 = 253.0 / 4096.0;
inline constexpr double b1 = 37.0 / 378.0, b3 = 250.0 / 621.0, b4 = 125.0 / 594.0,
                        b6 = 512.0 / 1771.0;
inline constexpr double e1 = 37.0 / 378.0 - 2825.0 / 27648.0;
inline constexpr double e3 = 250.0 / 621.0 - 18575.0 / 48384.0;
inline constexpr double e4 = 125.0 / 594.0 - 13525.0 / 55296.0;
inline constexpr double e5 = -277.0 / 14336.0;
inline constexpr double e6 = 512.0 / 1771.0 - 1.0 / 4.0;

}  // namespace detail

// Integrates dy/dt = f(t, y) from t0 to t1 with adaptive Cash-Karp steps.
// State must be an Eigen vector/matrix of complex or real scalars.
template <typename State, typename Deriv>
State integrate(Deriv&& f, State y, double t0, double t1, const Options& opt = {}) {
    using namespace detail;
    if (t1 < t0) throw InputError("ode: end time precedes start time");
    if (t1 == t0) return y;

    const double span = t1 - t0;
    double t = t0;
    double h = span / 64.0;
    std::size_t steps = 0, rejects = 0;

    State k1 = f(t, y);
    for (;;) {
        if (t >= t1) return y;
        if (steps++ > opt.max_steps) {
            throw NumericalError("ode: no convergence after " +
                                 std::to_string(opt.max_steps) + " steps (t=" +
                                 std::to_string(t) + ", h=" + std::to_string(h) +
                                 ", rejected=" + std::to_string(rejects) + ")");
        }
        h = std::min(h, t1 - t);

        State k2 = f(t + a21 * h, (y + h * (a21 * k1)).eval());
        State k3 = f(t + 0.3 * h, (y + h * (a31 * k1 + a32 * k2)).eval());
        State k4 = f(t + 0.6 * h, (y + h * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
        State k5 =
            f(t + h, (y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
        State k6 = f(t + 0.875 * h,
                     (y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5))
                         .eval());

        State y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b6 * k6);
        State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6);

        // Weighted max-norm error estimate.
        double scale_err = 0.0;
        for (long i = 0; i < err.size(); ++i) {
            const double sc = opt.abs_tol +
                              opt.rel_tol * std::max(std::abs(*(y.data() + i)),
                                                     std::abs(*(y5.data() + i)));
            scale_err = std::max(scale_err, std::abs(*(err.data() + i)) / sc);
        }

        if (scale_err <= 1.0) {
            t += h;
            y = std::move(y5);
            k1 = f(t, y);
            const double grow =
                scale_err > 0.0 ? 0.9 * std::pow(scale_err, -0.2) : 5.0;
            h *= std::clamp(grow, 0.2, 5.0);
        } else {
            ++rejects;
            h *= std::clamp(0.9 * std::pow(scale_err, -0.25), 0.1, 1.0);
            if (!(h > 0.0) || t + h == t) {
                throw NumericalError(
                    "ode: step size underflow at t=" + std::to_string(t) +
                    " (h=" + std::to_string(h) +
                    ", rejected=" + std::to_string(rejects) + ")");
            }
        }
    }
}

}  // namespace spinmux::ode
