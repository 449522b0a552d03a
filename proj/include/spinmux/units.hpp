#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace spinmux {

using Complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr Complex imag_unit{0.0, 1.0};

// All internal rates and Rabi/detuning variables are angular (rad/s).
// User-facing interfaces (config files, CSV, CLI) speak ordinary Hz and
// convert at the boundary.
constexpr double hz_to_angular(double f_hz) { return two_pi * f_hz; }
constexpr double angular_to_hz(double w) { return w / two_pi; }

}  // namespace spinmux
