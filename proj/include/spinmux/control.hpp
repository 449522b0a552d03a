#pragma once

// Synthesis of ion-selective rotations from global microwave rotations plus
// per-ion optical z phases, and planning of the N-1 laser tones that realize
// a target phase vector.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "spinmux/errors.hpp"
#include "spinmux/ion_model.hpp"
#include "spinmux/qcore.hpp"
#include "spinmux/stark.hpp"
#include "spinmux/units.hpp"

namespace spinmux::control {

using qcore::Mat2;

// ---------------------------------------------------------------------------
// Circuit representation

enum class Axis { X, Y, Z, General };

// A global microwave rotation. The drive phase shifts the rotation axis
// azimuthally: U = R_z(phase) R_axis(angle) R_z(-phase).
struct MwRotation {
    Axis axis = Axis::X;
    double beta = 0.0;   // azimuth of a General axis
    double theta = 0.0;  // polar angle of a General axis
    double angle = 0.0;
    double phase = 0.0;
};

// Ion-selective optical z rotations, one phase per ion.
struct OpticalZ {
    std::vector<double> phis;
};

using GateOp = std::variant<MwRotation, OpticalZ>;

struct Circuit {
    std::vector<GateOp> ops;
    int n_ions = 0;
};

inline Eigen::Vector3d axis_vector(const MwRotation& op) {
    double beta = op.phase, theta = pi / 2.0;
    switch (op.axis) {
        case Axis::X: break;
        case Axis::Y: beta += pi / 2.0; break;
        case Axis::Z: return {0.0, 0.0, 1.0};
        case Axis::General:
            beta = op.beta + op.phase;
            theta = op.theta;
            break;
    }
    return {std::sin(theta) * std::cos(beta), std::sin(theta) * std::sin(beta),
            std::cos(theta)};
}

inline Mat2 gate_matrix(const MwRotation& op) {
    if (op.axis == Axis::Z) return qcore::rot_z(op.angle);
    return qcore::rot(axis_vector(op), op.angle);
}

// Net unitary applied to each ion by the circuit.
inline std::vector<Mat2> simulate_circuit(const Circuit& circuit) {
    if (circuit.n_ions <= 0) throw InputError("simulate_circuit: n_ions must be positive");
    std::vector<Mat2> acc(circuit.n_ions, Mat2::Identity());
    for (const auto& op : circuit.ops) {
        if (const auto* mw = std::get_if<MwRotation>(&op)) {
            const Mat2 u = gate_matrix(*mw);
            for (auto& a : acc) a = u * a;
        } else {
            const auto& oz = std::get<OpticalZ>(op);
            if (static_cast<int>(oz.phis.size()) != circuit.n_ions)
                throw InputError("simulate_circuit: optical phase count != n_ions");
            for (int i = 0; i < circuit.n_ions; ++i)
                acc[i] = qcore::rot_z(oz.phis[i]) * acc[i];
        }
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Rotation synthesis: U = V R_z(alpha) V^-1 with V = R_z(beta) R_y(theta) R_z(-beta)

struct SynthesisResult {
    double beta = 0.0;
    double theta = 0.0;
    double alpha = 0.0;
    double residual = 0.0;
};

inline Mat2 v_matrix(double beta, double theta) {
    return qcore::rot_z(beta) * qcore::rot_y(theta) * qcore::rot_z(-beta);
}

inline SynthesisResult synthesize_v(const Mat2& u_in) {
    if (!qcore::is_unitary(u_in, 1e-9))
        throw InputError("synthesize_v: input is not unitary");

    // Strip the global phase to land in SU(2).
    const Complex det = u_in.determinant();
    const Mat2 u = u_in / std::sqrt(det);

    // U = cos(a/2) I - i sin(a/2) n.sigma: read the components back off.
    const double c = 0.5 * u.trace().real();
    Eigen::Vector3d v;
    v.x() = 0.5 * (imag_unit * (u * qcore::sigma_x()).trace()).real();
    v.y() = 0.5 * (imag_unit * (u * qcore::sigma_y()).trace()).real();
    v.z() = 0.5 * (imag_unit * (u * qcore::sigma_z()).trace()).real();

    SynthesisResult res;
    const double s = v.norm();
    res.alpha = 2.0 * std::atan2(s, c);
    if (s > 1e-12) {
        res.theta = std::atan2(std::hypot(v.x(), v.y()), v.z());
        res.beta = (std::hypot(v.x(), v.y()) > 1e-12) ? std::atan2(v.y(), v.x()) : 0.0;
    }
    const Mat2 vm = v_matrix(res.beta, res.theta);
    res.residual = qcore::distance_up_to_global_phase(
        Mat2(vm * qcore::rot_z(res.alpha) * vm.adjoint()), u_in);
    return res;
}

// ---------------------------------------------------------------------------
// Circuit for a single-ion unitary given achievable optical phases

namespace detail {

inline double principal_angle(double a) {
    return std::remainder(a, two_pi);
}

}  // namespace detail

// Builds [V^-1, OpticalZ(phis), R_z(-phi_spectator), V]. All spectators must
// share one optical phase (mod 2pi) and the target's compensated phase must
// equal alpha of the synthesized rotation.
inline Circuit single_ion_unitary_circuit(int target, const Mat2& u,
                                          const std::vector<double>& phis,
                                          double tol = 1e-9) {
    const int n = static_cast<int>(phis.size());
    if (n < 1 || target < 0 || target >= n)
        throw InputError("single_ion_unitary_circuit: target out of range");

    std::optional<double> spectator;
    for (int i = 0; i < n; ++i) {
        if (i == target) continue;
        if (!spectator) {
            spectator = phis[i];
        } else if (std::abs(detail::principal_angle(phis[i] - *spectator)) > tol) {
            throw InfeasibleError(
                "single_ion_unitary_circuit: spectator optical phases differ; one "
                "global z rotation cannot cancel them all (re-plan the tones)");
        }
    }
    const double comp = spectator.value_or(0.0);

    const SynthesisResult synth = synthesize_v(u);
    const double net = detail::principal_angle(phis[target] - comp - synth.alpha);
    if (std::abs(net) > tol) {
        throw InfeasibleError(
            "single_ion_unitary_circuit: target phase after compensation does not "
            "match the synthesized rotation angle (re-plan the tones)");
    }

    Circuit circuit;
    circuit.n_ions = n;
    circuit.ops = {
        MwRotation{.axis = Axis::Y, .theta = 0.0, .angle = -synth.theta,
                   .phase = synth.beta},
        OpticalZ{phis},
        MwRotation{.axis = Axis::Z, .angle = -comp},
        MwRotation{.axis = Axis::Y, .theta = 0.0, .angle = synth.theta,
                   .phase = synth.beta},
    };
    return circuit;
}

// ---------------------------------------------------------------------------
// Tone planning

struct PlanConstraints {
    double f_min = 0.0;  // Hz
    double f_max = 0.0;  // Hz
    double coarse_step = 1e6;  // Hz
    double max_loss = 1.0;     // per-ion visibility loss cap
    int refine_rounds = 2;
    stark::GammaMode gamma_mode = stark::GammaMode::Effective;
};

struct TonePlan {
    std::vector<stark::LaserTone> tones;
    std::vector<double> per_ion_phase;  // achieved, before global compensation
    std::vector<double> per_ion_loss;
    double residual = 0.0;   // max |phase system mismatch|, rad
    double objective = 0.0;  // worst-case per-ion loss
};

struct PlanInfeasibleError : InfeasibleError {
    PlanInfeasibleError(const std::string& what, std::optional<TonePlan> best_plan)
        : InfeasibleError(what), best(std::move(best_plan)) {}
    std::optional<TonePlan> best;
};

namespace detail {

struct FreqSample {
    double freq = 0.0;
    std::vector<double> s;  // phase per unit energy, per ion
    std::vector<double> d;  // loss exponent per unit energy, per ion
};

inline std::optional<FreqSample> sample_frequency(
    double f, const std::vector<ion::IonSpec>& ions, stark::GammaMode mode) {
    FreqSample out;
    out.freq = f;
    out.s.reserve(ions.size());
    out.d.reserve(ions.size());
    try {
        for (const auto& ion : ions) {
            out.s.push_back(stark::phase_sensitivity(f, ion, mode));
            out.d.push_back(stark::loss_sensitivity(f, ion, mode));
        }
    } catch (const InputError&) {
        return std::nullopt;  // exact resonance of a zero-width line
    }
    return out;
}

// Solves the phase-difference system for one candidate frequency tuple and
// returns the best feasible plan (non-negative energies, best worst-case
// loss) over the searched 2pi offsets.
inline std::optional<TonePlan> solve_candidate(
    const std::vector<FreqSample>& samples, const std::vector<double>& targets) {
    const int n = static_cast<int>(targets.size());
    const int k = n - 1;
    Eigen::MatrixXd m(k, k);
    Eigen::VectorXd d(k);
    for (int i = 0; i < k; ++i) {
        d(i) = principal_angle(targets[i] - targets[n - 1]);
        for (int j = 0; j < k; ++j)
            m(i, j) = samples[j].s[i] - samples[j].s[n - 1];
    }

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (!lu.isInvertible()) return std::nullopt;

    std::optional<TonePlan> best;
    std::vector<int> offsets(k, -1);
    for (;;) {
        Eigen::VectorXd rhs = d;
        for (int i = 0; i < k; ++i) rhs(i) += two_pi * offsets[i];
        const Eigen::VectorXd e = lu.solve(rhs);
        if ((e.array() >= -1e-12).all()) {
            TonePlan plan;
            plan.tones.reserve(k);
            for (int j = 0; j < k; ++j)
                plan.tones.push_back({samples[j].freq, std::max(0.0, e(j))});
            plan.per_ion_phase.assign(n, 0.0);
            plan.per_ion_loss.assign(n, 0.0);
            for (int i = 0; i < n; ++i) {
                double phase = 0.0, lam = 0.0;
                for (int j = 0; j < k; ++j) {
                    phase += plan.tones[j].energy * samples[j].s[i];
                    lam += plan.tones[j].energy * samples[j].d[i];
                }
                plan.per_ion_phase[i] = phase;
                plan.per_ion_loss[i] = 1.0 - std::exp(-lam);
            }
            plan.objective =
                *std::max_element(plan.per_ion_loss.begin(), plan.per_ion_loss.end());
            plan.residual = (m * e - rhs).cwiseAbs().maxCoeff();
            if (!best || plan.objective < best->objective) best = plan;
        }
        int j = 0;
        while (j < k && offsets[j] == 1) offsets[j++] = -1;
        if (j == k) break;
        ++offsets[j];
    }
    return best;
}

inline bool better(const TonePlan& a, const TonePlan& b) {
    if (a.objective != b.objective) return a.objective < b.objective;
    // Deterministic tie-break: lexicographically lowest frequencies.
    for (std::size_t i = 0; i < a.tones.size(); ++i) {
        if (a.tones[i].freq != b.tones[i].freq)
            return a.tones[i].freq < b.tones[i].freq;
    }
    return false;
}

}  // namespace detail

// Finds N-1 tone frequencies and energies realizing the target per-ion phase
// differences while minimizing the worst-case per-ion visibility loss.
// Coarse grid scan (coordinate-wise beyond two tones) plus local refinement.
inline TonePlan plan_tones(const std::vector<ion::IonSpec>& ions,
                           const std::vector<double>& targets,
                           const PlanConstraints& cons) {
    const int n = static_cast<int>(ions.size());
    if (n < 2) throw InputError("plan_tones: need at least two ions");
    if (static_cast<int>(targets.size()) != n)
        throw InputError("plan_tones: one target phase per ion required");
    if (!(cons.f_max > cons.f_min) || !(cons.coarse_step > 0.0))
        throw InputError("plan_tones: invalid frequency band");

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(ions[i].f_a - ions[j].f_a) < 1.0 &&
                std::abs(ions[i].f_b - ions[j].f_b) < 1.0) {
                throw InfeasibleError("plan_tones: ions " + ions[i].label + " and " +
                                      ions[j].label +
                                      " are spectrally degenerate; their phases "
                                      "cannot be controlled independently");
            }
        }
    }
    const int k = n - 1;

    std::vector<detail::FreqSample> grid;
    for (double f = cons.f_min; f <= cons.f_max + 1e-9; f += cons.coarse_step) {
        if (auto s = detail::sample_frequency(f, ions, cons.gamma_mode)) {
            grid.push_back(std::move(*s));
        }
    }
    if (grid.empty()) throw InfeasibleError("plan_tones: empty frequency grid");

    auto evaluate = [&](const std::vector<detail::FreqSample>& samples) {
        return detail::solve_candidate(samples, targets);
    };

    std::optional<TonePlan> best;
    std::vector<detail::FreqSample> best_samples;

    auto consider = [&](const std::vector<detail::FreqSample>& samples) {
        if (auto plan = evaluate(samples)) {
            if (!best || detail::better(*plan, *best)) {
                best = *plan;
                best_samples = samples;
            }
        }
    };

    if (k == 1) {
        for (const auto& s : grid) consider({s});
    } else if (k == 2) {
        for (std::size_t a = 0; a < grid.size(); ++a)
            for (std::size_t b = a + 1; b < grid.size(); ++b)
                consider({grid[a], grid[b]});
    } else {
        // Coordinate-wise descent from an evenly spread start.
        std::vector<std::size_t> idx(k);
        for (int j = 0; j < k; ++j)
            idx[j] = (grid.size() - 1) * (j + 1) / (k + 1);
        auto tuple_of = [&](const std::vector<std::size_t>& ix) {
            std::vector<detail::FreqSample> t;
            t.reserve(k);
            for (auto i : ix) t.push_back(grid[i]);
            return t;
        };
        consider(tuple_of(idx));
        for (int sweep = 0; sweep < 3; ++sweep) {
            for (int j = 0; j < k; ++j) {
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    auto trial = idx;
                    trial[j] = g;
                    consider(tuple_of(trial));
                }
                if (best) {
                    // Track the best tuple's index for this coordinate.
                    for (std::size_t g = 0; g < grid.size(); ++g)
                        if (grid[g].freq == best->tones[j].freq) idx[j] = g;
                }
            }
        }
    }

    if (!best)
        throw InfeasibleError(
            "plan_tones: no frequency tuple in the band yields a solvable phase "
            "system with non-negative energies");

    // Local refinement around the best coarse tuple.
    double step = cons.coarse_step;
    for (int round = 0; round < cons.refine_rounds; ++round) {
        step /= 10.0;
        for (int j = 0; j < k; ++j) {
            for (int off = -9; off <= 9; ++off) {
                auto samples = best_samples;
                const double f = samples[j].freq + off * step;
                if (f < cons.f_min || f > cons.f_max) continue;
                if (auto s = detail::sample_frequency(f, ions, cons.gamma_mode)) {
                    samples[j] = std::move(*s);
                    if (auto plan = evaluate(samples)) {
                        if (detail::better(*plan, *best)) {
                            best = *plan;
                            best_samples = samples;
                        }
                    }
                }
            }
        }
    }

    if (best->objective > cons.max_loss) {
        throw PlanInfeasibleError(
            "plan_tones: visibility-loss cap exceeded by the best plan found",
            best);
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Line-oriented circuit serialization

inline void write_circuit(std::ostream& os, const Circuit& circuit) {
    char buf[64];
    auto num = [&buf](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    os << "# ions=" << circuit.n_ions << "\n";
    for (const auto& op : circuit.ops) {
        if (const auto* mw = std::get_if<MwRotation>(&op)) {
            os << "MW axis=";
            switch (mw->axis) {
                case Axis::X: os << "x"; break;
                case Axis::Y: os << "y"; break;
                case Axis::Z: os << "z"; break;
                case Axis::General:
                    os << "n(" << num(mw->beta) << "," << num(mw->theta) << ")";
                    break;
            }
            os << " angle=" << num(mw->angle) << " phase=" << num(mw->phase) << "\n";
        } else {
            const auto& oz = std::get<OpticalZ>(op);
            os << "OPTZ phis=";
            for (std::size_t i = 0; i < oz.phis.size(); ++i)
                os << (i ? "," : "") << num(oz.phis[i]);
            os << "\n";
        }
    }
}

inline Circuit read_circuit(std::istream& is) {
    Circuit circuit;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (const auto pos = line.find("ions="); pos != std::string::npos)
                circuit.n_ions = std::stoi(line.substr(pos + 5));
            continue;
        }
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "MW") {
            MwRotation mw;
            std::string field;
            while (ls >> field) {
                if (field.rfind("axis=", 0) == 0) {
                    const std::string v = field.substr(5);
                    if (v == "x") mw.axis = Axis::X;
                    else if (v == "y") mw.axis = Axis::Y;
                    else if (v == "z") mw.axis = Axis::Z;
                    else if (v.rfind("n(", 0) == 0 && v.back() == ')') {
                        mw.axis = Axis::General;
                        const auto comma = v.find(',');
                        mw.beta = std::stod(v.substr(2, comma - 2));
                        mw.theta = std::stod(v.substr(comma + 1,
                                                      v.size() - comma - 2));
                    } else {
                        throw ConfigError("circuit: bad axis token '" + v + "'");
                    }
                } else if (field.rfind("angle=", 0) == 0) {
                    mw.angle = std::stod(field.substr(6));
                } else if (field.rfind("phase=", 0) == 0) {
                    mw.phase = std::stod(field.substr(6));
                } else {
                    throw ConfigError("circuit: unknown MW field '" + field + "'");
                }
            }
            circuit.ops.emplace_back(mw);
        } else if (kind == "OPTZ") {
            std::string field;
            ls >> field;
            if (field.rfind("phis=", 0) != 0)
                throw ConfigError("circuit: OPTZ line lacks phis=");
            OpticalZ oz;
            std::istringstream ps(field.substr(5));
            std::string tok;
            while (std::getline(ps, tok, ',')) oz.phis.push_back(std::stod(tok));
            circuit.ops.emplace_back(std::move(oz));
        } else {
            throw ConfigError("circuit: unknown op '" + kind + "'");
        }
    }
    if (circuit.n_ions == 0) {
        for (const auto& op : circuit.ops)
            if (const auto* oz = std::get_if<OpticalZ>(&op))
                circuit.n_ions = std::max(circuit.n_ions,
                                          static_cast<int>(oz->phis.size()));
    }
    return circuit;
}

}  // namespace spinmux::control
