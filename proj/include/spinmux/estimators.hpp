#pragma once

// Estimators for the photon-statistics and coherence analyses: the
// two-component Poisson mixture fit, the binned linear extrapolation of the
// preparation infidelity, and the decay/fringe curve fits.

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "spinmux/errors.hpp"
#include "spinmux/expsim.hpp"
#include "spinmux/nlfit.hpp"

namespace spinmux::estimators {

struct IdentifiabilityError : NumericalError {
    using NumericalError::NumericalError;
};

// ---------------------------------------------------------------------------
// Bimodal Poisson mixture

struct BimodalFit {
    double a_d = 0.0;  // dark-component amplitude (expected shots)
    double a_b = 0.0;  // bright-component amplitude
    double mu_d = 0.0;
    double mu_b = 0.0;
    Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // (a_d, a_b, mu_d, mu_b)
    double wrong_state_prob = 0.0;  // a_b / (a_b + a_d)
    double wrong_state_stderr = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool low_counts_warning = false;
    // False when the two-component fit does not beat a single Poisson by a
    // significant likelihood margin; the boundary solution a_b = 0 is then
    // reported, with a one-sided curvature standard error.
    bool bright_resolved = true;
};

struct BimodalOptions {
    std::optional<std::array<double, 4>> init;  // (a_d, a_b, mu_d, mu_b)
    std::optional<std::pair<double, double>> fixed_means;  // (mu_d, mu_b)
    bool least_squares = false;  // comparison mode; likelihood is the default
    int max_iterations = 20000;
    double tol = 1e-12;
};

namespace detail {

inline double log_poisson(int x, double mu) {
    if (mu <= 0.0) return x == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return x * std::log(mu) - mu - std::lgamma(x + 1.0);
}

inline double mixture_loglik(const std::vector<long>& hist, double a_d, double a_b,
                             double mu_d, double mu_b) {
    // Poisson likelihood per histogram bin, n_x ~ Pois(m(x)); the -m terms
    // summed over all x give exactly a_d + a_b.
    double ll = -(a_d + a_b);
    for (std::size_t x = 0; x < hist.size(); ++x) {
        if (hist[x] == 0) continue;
        const double m = a_d * std::exp(log_poisson(static_cast<int>(x), mu_d)) +
                         a_b * std::exp(log_poisson(static_cast<int>(x), mu_b));
        ll += hist[x] * std::log(std::max(m, 1e-300));
    }
    return ll;
}

}  // namespace detail

namespace detail {

struct EmOutcome {
    double a_d = 0.0, a_b = 0.0, mu_d = 0.0, mu_b = 0.0;
    double loglik = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

inline EmOutcome em_run(const std::vector<long>& n, double a_d, double a_b,
                        double mu_d, double mu_b, bool fixed_means, double tol,
                        int max_iterations) {
    double ll = mixture_loglik(n, a_d, a_b, mu_d, mu_b);
    EmOutcome out;
    int it = 0;
    for (; it < max_iterations; ++it) {
        const double prev[4] = {a_d, a_b, mu_d, mu_b};
        double s_d = 0.0, s_b = 0.0, sx_d = 0.0, sx_b = 0.0;
        for (std::size_t x = 0; x < n.size(); ++x) {
            if (n[x] == 0) continue;
            const double pd = a_d * std::exp(log_poisson(static_cast<int>(x), mu_d));
            const double pb = a_b * std::exp(log_poisson(static_cast<int>(x), mu_b));
            const double denom = std::max(pd + pb, 1e-300);
            const double rb = pb / denom;
            s_b += n[x] * rb;
            s_d += n[x] * (1.0 - rb);
            sx_b += n[x] * rb * x;
            sx_d += n[x] * (1.0 - rb) * x;
        }
        a_d = s_d;
        a_b = s_b;
        if (!fixed_means) {
            mu_d = s_d > 0.0 ? sx_d / s_d : 0.0;
            mu_b = s_b > 0.0 ? sx_b / s_b : 0.0;
        }
        const double ll_new = mixture_loglik(n, a_d, a_b, mu_d, mu_b);
        double dp = 0.0;
        const double cur[4] = {a_d, a_b, mu_d, mu_b};
        for (int k = 0; k < 4; ++k)
            dp = std::max(dp, std::abs(cur[k] - prev[k]) /
                                  (1.0 + std::abs(cur[k])));
        const bool done =
            std::abs(ll_new - ll) <= tol * (1.0 + std::abs(ll_new)) || dp < 1e-11;
        ll = ll_new;
        if (done) {
            out.converged = true;
            break;
        }
    }
    out.a_d = a_d;
    out.a_b = a_b;
    out.mu_d = mu_d;
    out.mu_b = mu_b;
    out.loglik = ll;
    out.iterations = it + 1;
    return out;
}

}  // namespace detail

inline BimodalFit fit_bimodal_poisson(const expsim::HistogramResult& hist,
                                      const BimodalOptions& opt = {}) {
    const auto& n = hist.bin_counts;
    if (n.empty()) throw InputError("fit_bimodal_poisson: empty histogram");
    double total = 0.0, mean = 0.0;
    for (std::size_t x = 0; x < n.size(); ++x) {
        if (n[x] < 0) throw InputError("fit_bimodal_poisson: negative count");
        total += n[x];
        mean += x * static_cast<double>(n[x]);
    }
    if (total <= 0.0) throw InputError("fit_bimodal_poisson: no occurrences");
    mean /= total;

    BimodalFit fit;
    fit.low_counts_warning = total < 100;

    if (opt.fixed_means && opt.fixed_means->second <= opt.fixed_means->first) {
        throw IdentifiabilityError(
            "fit_bimodal_poisson: fixed means do not satisfy mu_b > mu_d");
    }

    double a_d = 0.0, a_b = 0.0, mu_d = 0.0, mu_b = 0.0;

    if (opt.least_squares || opt.init) {
        if (opt.init) {
            a_d = (*opt.init)[0];
            a_b = (*opt.init)[1];
            mu_d = (*opt.init)[2];
            mu_b = (*opt.init)[3];
        } else {
            a_d = 0.8 * total;
            a_b = 0.2 * total;
            mu_d = 0.25 * mean;
            mu_b = std::max(2.0 * mean, mu_d + 1.0);
        }
        if (opt.fixed_means) {
            mu_d = opt.fixed_means->first;
            mu_b = opt.fixed_means->second;
        }
    }

    if (opt.least_squares) {
        auto residuals = [&](const Eigen::VectorXd& p) {
            Eigen::VectorXd r(n.size());
            for (std::size_t x = 0; x < n.size(); ++x) {
                const double m =
                    std::abs(p(0)) * std::exp(detail::log_poisson(x, std::abs(p(2)))) +
                    std::abs(p(1)) * std::exp(detail::log_poisson(x, std::abs(p(3))));
                r(x) = n[x] - m;
            }
            return r;
        };
        Eigen::VectorXd p0(4);
        p0 << a_d, a_b, mu_d, mu_b;
        const auto res = nlfit::levenberg_marquardt(residuals, p0);
        a_d = std::abs(res.params(0));
        a_b = std::abs(res.params(1));
        mu_d = std::abs(res.params(2));
        mu_b = std::abs(res.params(3));
        fit.iterations = res.iterations;
    } else {
        // EM, deterministically self-initialized. The likelihood has a
        // spurious mu_d = 0 basin when the dark mean is small, so several
        // moment-based starts are tried and the best final likelihood wins.
        std::vector<std::array<double, 4>> starts;
        if (opt.init) {
            starts.push_back(*opt.init);
        } else {
            starts.push_back({0.8 * total, 0.2 * total, 0.25 * mean,
                              std::max(2.0 * mean, 1.0)});
            starts.push_back({0.9 * total, 0.1 * total, 0.1 * mean,
                              std::max(4.0 * mean, 2.0)});
            starts.push_back({0.5 * total, 0.5 * total, 0.5 * mean,
                              std::max(1.5 * mean, 0.5 * mean + 1.0)});
        }
        detail::EmOutcome best;
        for (auto s : starts) {
            if (opt.fixed_means) {
                s[2] = opt.fixed_means->first;
                s[3] = opt.fixed_means->second;
            }
            const auto run =
                detail::em_run(n, s[0], s[1], s[2], s[3],
                               opt.fixed_means.has_value(), opt.tol,
                               opt.max_iterations);
            if (run.loglik > best.loglik) best = run;
        }
        if (!best.converged) {
            throw NumericalError(
                "fit_bimodal_poisson: EM did not converge within " +
                std::to_string(opt.max_iterations) + " iterations");
        }
        a_d = best.a_d;
        a_b = best.a_b;
        mu_d = best.mu_d;
        mu_b = best.mu_b;
        fit.iterations = best.iterations;

        // Likelihood-ratio gate against the one-component fit. Without a
        // significant improvement the mixture weight runs along a flat ridge
        // and the bright fraction is not identified; report the boundary.
        if (!opt.fixed_means) {
            const double ll_single =
                detail::mixture_loglik(n, total, 0.0, mean, mean + 1.0);
            if (2.0 * (best.loglik - ll_single) < 9.0) {
                fit.bright_resolved = false;
                a_d = total;
                a_b = 0.0;
                mu_d = mean;
                mu_b = std::max(4.0 * mean, 1.0);

                // One-sided curvature of -loglik in a_b at the boundary,
                // holding a_d + a_b = total and the reference mu_b.
                auto nll_b = [&](double ab) {
                    return -detail::mixture_loglik(n, total - ab, ab, mu_d, mu_b);
                };
                const double h = std::max(1e-3 * total, 1.0);
                const double curve =
                    (nll_b(0.0) - 2.0 * nll_b(h) + nll_b(2.0 * h)) / (h * h);
                fit.a_d = a_d;
                fit.a_b = a_b;
                fit.mu_d = mu_d;
                fit.mu_b = mu_b;
                fit.log_likelihood = ll_single;
                fit.wrong_state_prob = 0.0;
                fit.wrong_state_stderr =
                    curve > 0.0 ? 1.0 / (std::sqrt(curve) * total)
                                : std::numeric_limits<double>::infinity();
                fit.covariance.setZero();
                return fit;
            }
        }
    }

    if (mu_b < mu_d) {  // enforce the component-ordering convention
        std::swap(mu_b, mu_d);
        std::swap(a_b, a_d);
    }
    if (!opt.fixed_means && a_b > 0.5 &&
        std::abs(mu_b - mu_d) < 1e-3 * (1.0 + mu_b)) {
        throw IdentifiabilityError(
            "fit_bimodal_poisson: mixture components collapsed (mu_b ~ mu_d)");
    }

    fit.a_d = a_d;
    fit.a_b = a_b;
    fit.mu_d = mu_d;
    fit.mu_b = mu_b;
    fit.log_likelihood = detail::mixture_loglik(n, a_d, a_b, mu_d, mu_b);
    fit.wrong_state_prob = a_b / (a_b + a_d);

    // Observed-information covariance: numeric Hessian of -loglik in scaled
    // coordinates q_i = p_i / s_i, inverted there for conditioning, then
    // transformed back.
    const Eigen::Vector4d p{a_d, a_b, mu_d, mu_b};
    Eigen::Vector4d scale;
    for (int i = 0; i < 4; ++i) scale(i) = std::max(std::abs(p(i)), 1e-6);
    auto nll = [&](const Eigen::Vector4d& q) {
        return -detail::mixture_loglik(n, q(0) * scale(0), q(1) * scale(1),
                                       q(2) * scale(2), q(3) * scale(3));
    };
    const Eigen::Vector4d q0 = p.cwiseQuotient(scale);
    Eigen::Matrix4d hess = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 4; ++i) {
        for (int j = i; j < 4; ++j) {
            const double h = 1e-4;
            Eigen::Vector4d pp = q0, pm = q0, mp = q0, mm = q0;
            pp(i) += h; pp(j) += h;
            pm(i) += h; pm(j) -= h;
            mp(i) -= h; mp(j) += h;
            mm(i) -= h; mm(j) -= h;
            hess(i, j) = hess(j, i) =
                (nll(pp) - nll(pm) - nll(mp) + nll(mm)) / (4.0 * h * h);
        }
    }
    const Eigen::FullPivLU<Eigen::Matrix4d> lu(hess);
    if (lu.isInvertible()) {
        const Eigen::Matrix4d cov_q = lu.inverse();
        fit.covariance = scale.asDiagonal() * cov_q * scale.asDiagonal();
        // Delta method for w = a_b/(a_b+a_d).
        const double s = a_b + a_d;
        Eigen::Vector4d grad{-a_b / (s * s), a_d / (s * s), 0.0, 0.0};
        fit.wrong_state_stderr =
            std::sqrt(std::max(0.0, grad.dot(fit.covariance * grad)));
    } else {
        fit.covariance.setConstant(std::numeric_limits<double>::infinity());
        fit.wrong_state_stderr = std::numeric_limits<double>::infinity();
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Binned linear extrapolation

struct BinProbability {
    double bin_index = 0.0;
    double wrong_state_prob = 0.0;
    double stderr_prob = 0.0;
};

struct InfidelityExtrapolation {
    double slope = 0.0;
    double intercept = 0.0;
    double intercept_stderr = 0.0;
    bool negative_slope_flag = false;
};

inline InfidelityExtrapolation infidelity_extrapolate(
    const std::vector<BinProbability>& bins) {
    if (bins.size() < 2)
        throw InputError("infidelity_extrapolate: need at least two bins");
    double s = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& b : bins) {
        if (!(b.stderr_prob > 0.0)) continue;
        const double w = 1.0 / (b.stderr_prob * b.stderr_prob);
        s += w;
        sx += w * b.bin_index;
        sy += w * b.wrong_state_prob;
        sxx += w * b.bin_index * b.bin_index;
        sxy += w * b.bin_index * b.wrong_state_prob;
    }
    if (s == 0.0)
        throw InputError("infidelity_extrapolate: all weights are zero");
    const double delta = s * sxx - sx * sx;
    if (delta <= 0.0)
        throw InputError("infidelity_extrapolate: degenerate bin indices");
    InfidelityExtrapolation out;
    out.slope = (s * sxy - sx * sy) / delta;
    out.intercept = (sxx * sy - sx * sxy) / delta;
    out.intercept_stderr = std::sqrt(sxx / delta);
    out.negative_slope_flag = out.slope < 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Decay and fringe fits

struct CurvePoint {
    double t = 0.0;
    double value = 0.0;
    double stderr_value = 1.0;
};

struct DecayFit {
    double time_constant = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    double stderr_time = 0.0;
    double chi2 = 0.0;
    bool converged = false;
    bool unbounded_flag = false;  // data do not constrain the decay time
};

namespace detail {

inline void check_points(const std::vector<CurvePoint>& pts, std::size_t minimum,
                         const char* who) {
    if (pts.size() < minimum)
        throw InputError(std::string(who) + ": too few points");
    for (const auto& p : pts) {
        if (!(p.stderr_value > 0.0))
            throw InputError(std::string(who) + ": nonpositive stderr");
    }
}

inline double span_of(const std::vector<CurvePoint>& pts) {
    double lo = pts[0].t, hi = pts[0].t;
    for (const auto& p : pts) {
        lo = std::min(lo, p.t);
        hi = std::max(hi, p.t);
    }
    return hi - lo;
}

}  // namespace detail

// y = A exp(-t/T) + B
inline DecayFit fit_exp_decay(const std::vector<CurvePoint>& pts) {
    detail::check_points(pts, 4, "fit_exp_decay");
    const double span = detail::span_of(pts);
    if (!(span > 0.0)) throw InputError("fit_exp_decay: zero time span");

    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double model = p(0) * std::exp(-pts[i].t / std::abs(p(2))) + p(1);
            r(i) = (pts[i].value - model) / pts[i].stderr_value;
        }
        return r;
    };
    Eigen::VectorXd p0(3);
    p0 << pts.front().value - pts.back().value, pts.back().value, span / 2.0;
    if (p0(0) == 0.0) p0(0) = 1e-3;
    const auto res = nlfit::levenberg_marquardt(residuals, p0);
    if (!res.converged)
        throw NumericalError("fit_exp_decay: no convergence");
    DecayFit fit;
    fit.amplitude = res.params(0);
    fit.offset = res.params(1);
    fit.time_constant = std::abs(res.params(2));
    fit.stderr_time = std::sqrt(std::max(0.0, res.covariance(2, 2)));
    fit.chi2 = res.chi2;
    fit.converged = res.converged;
    fit.unbounded_flag = fit.time_constant > 100.0 * span ||
                         !std::isfinite(fit.stderr_time) ||
                         fit.stderr_time > 10.0 * fit.time_constant;
    return fit;
}

// y = A exp(-(t/T)^2)
inline DecayFit fit_gaussian_decay(const std::vector<CurvePoint>& pts) {
    detail::check_points(pts, 3, "fit_gaussian_decay");
    const double span = detail::span_of(pts);
    if (!(span > 0.0)) throw InputError("fit_gaussian_decay: zero time span");

    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double x = pts[i].t / std::abs(p(1));
            r(i) = (pts[i].value - p(0) * std::exp(-x * x)) / pts[i].stderr_value;
        }
        return r;
    };
    Eigen::VectorXd p0(2);
    p0 << pts.front().value, span / 2.0;
    if (p0(0) == 0.0) p0(0) = 1e-3;
    const auto res = nlfit::levenberg_marquardt(residuals, p0);
    if (!res.converged)
        throw NumericalError("fit_gaussian_decay: no convergence");
    DecayFit fit;
    fit.amplitude = res.params(0);
    fit.time_constant = std::abs(res.params(1));
    fit.stderr_time = std::sqrt(std::max(0.0, res.covariance(1, 1)));
    fit.chi2 = res.chi2;
    fit.converged = res.converged;
    fit.unbounded_flag = fit.time_constant > 100.0 * span ||
                         !std::isfinite(fit.stderr_time) ||
                         fit.stderr_time > 10.0 * fit.time_constant;
    return fit;
}

struct FringeFit {
    double phase = 0.0;
    double visibility = 0.0;
    double offset = 0.0;
    double stderr_phase = 0.0;
    double stderr_visibility = 0.0;
    double chi2 = 0.0;
    bool phase_defined = true;
};

// y = offset + (V/2) cos(theta - phase); linear least squares in
// (offset, a, b) with a = (V/2)cos(phase), b = (V/2)sin(phase).
inline FringeFit fit_fringe(const std::vector<double>& phases,
                            const std::vector<double>& populations,
                            const std::vector<double>& stderrs = {}) {
    if (phases.size() != populations.size())
        throw InputError("fit_fringe: size mismatch");
    if (phases.size() < 5) throw InputError("fit_fringe: need at least 5 points");
    const auto [lo, hi] = std::minmax_element(phases.begin(), phases.end());
    if (*hi - *lo < 0.9 * two_pi)
        throw InputError("fit_fringe: phases must span at least 2 pi");
    if (!stderrs.empty() && stderrs.size() != phases.size())
        throw InputError("fit_fringe: stderr size mismatch");

    const std::size_t m = phases.size();
    Eigen::MatrixXd design(m, 3);
    Eigen::VectorXd y(m), w(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double sigma = stderrs.empty() ? 1.0 : stderrs[i];
        if (!(sigma > 0.0)) throw InputError("fit_fringe: nonpositive stderr");
        w(i) = 1.0 / sigma;
        design(i, 0) = w(i);
        design(i, 1) = w(i) * std::cos(phases[i]);
        design(i, 2) = w(i) * std::sin(phases[i]);
        y(i) = w(i) * populations[i];
    }
    const Eigen::Matrix3d normal = design.transpose() * design;
    const Eigen::Vector3d beta =
        normal.ldlt().solve(design.transpose() * y);
    Eigen::Matrix3d cov = normal.inverse();
    const double chi2 = (y - design * beta).squaredNorm();
    if (stderrs.empty()) {
        // Scale by the residual variance when no uncertainties were given.
        cov *= chi2 / std::max<double>(1.0, static_cast<double>(m) - 3.0);
    }

    FringeFit fit;
    fit.offset = beta(0);
    const double a = beta(1), b = beta(2);
    fit.visibility = 2.0 * std::hypot(a, b);
    fit.chi2 = chi2;
    const double var_a = cov(1, 1), var_b = cov(2, 2);
    fit.stderr_visibility = 2.0 * std::sqrt(std::max(0.0, var_a + var_b) / 2.0);
    if (fit.visibility <= 2.0 * fit.stderr_visibility || fit.visibility < 1e-12) {
        fit.phase_defined = false;
        return fit;
    }
    fit.phase = std::atan2(b, a);
    // Propagate to the angle: var(phase) ~ (a^2 var_b + b^2 var_a)/(a^2+b^2)^2.
    const double r2 = a * a + b * b;
    fit.stderr_phase = std::sqrt(
        std::max(0.0, (a * a * var_b + b * b * var_a -
                       2.0 * a * b * cov(1, 2)) / (r2 * r2)));
    return fit;
}

// ---------------------------------------------------------------------------
// Structured fit reports

inline nlohmann::json to_json(const BimodalFit& fit) {
    return {{"a_d", fit.a_d},
            {"a_b", fit.a_b},
            {"mu_d", fit.mu_d},
            {"mu_b", fit.mu_b},
            {"wrong_state_prob", fit.wrong_state_prob},
            {"wrong_state_stderr", fit.wrong_state_stderr},
            {"log_likelihood", fit.log_likelihood},
            {"iterations", fit.iterations},
            {"low_counts_warning", fit.low_counts_warning}};
}

inline nlohmann::json to_json(const InfidelityExtrapolation& ex) {
    return {{"slope", ex.slope},
            {"intercept", ex.intercept},
            {"intercept_stderr", ex.intercept_stderr},
            {"negative_slope_flag", ex.negative_slope_flag}};
}

inline nlohmann::json to_json(const DecayFit& fit) {
    return {{"time_constant", fit.time_constant},
            {"amplitude", fit.amplitude},
            {"offset", fit.offset},
            {"stderr_time", fit.stderr_time},
            {"chi2", fit.chi2},
            {"converged", fit.converged},
            {"unbounded_flag", fit.unbounded_flag}};
}

inline nlohmann::json to_json(const FringeFit& fit) {
    return {{"phase", fit.phase},
            {"visibility", fit.visibility},
            {"offset", fit.offset},
            {"stderr_phase", fit.stderr_phase},
            {"stderr_visibility", fit.stderr_visibility},
            {"chi2", fit.chi2},
            {"phase_defined", fit.phase_defined}};
}

}  // namespace spinmux::estimators
