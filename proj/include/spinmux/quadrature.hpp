#pragma once

// Quadrature rules for averaging over slow spectral-diffusion profiles, plus
// a fixed-order pairwise reduction so sums are independent of any future
// parallel split.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "spinmux/errors.hpp"
#include "spinmux/units.hpp"

namespace spinmux::quadrature {

struct Node {
    double x = 0.0;
    double weight = 0.0;
};

// Gauss-Hermite nodes/weights via the Golub-Welsch eigenproblem, rescaled to
// integrate against a unit-mass Gaussian pdf of the given standard deviation.
inline std::vector<Node> gaussian_pdf_nodes(int n, double sigma) {
    if (n < 1) throw InputError("gaussian_pdf_nodes: n must be >= 1");
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(k / 2.0);
        j(k - 1, k) = b;
        j(k, k - 1) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    std::vector<Node> nodes(n);
    for (int k = 0; k < n; ++k) {
        const double v0 = es.eigenvectors()(0, k);
        // Hermite weight w_k = sqrt(pi) v0^2; dividing by sqrt(pi) converts
        // the e^{-x^2} weight into the N(0, 1/2) pdf, then x -> sigma*sqrt(2)x.
        nodes[k].x = es.eigenvalues()(k) * sigma * std::sqrt(2.0);
        nodes[k].weight = v0 * v0;
    }
    return nodes;
}

// Lorentzian pdf nodes via the substitution x = (fwhm/2) tan(u), truncated at
// +-cutoff_fwhm line widths and renormalized to unit mass.
inline std::vector<Node> lorentzian_pdf_nodes(int n, double fwhm,
                                              double cutoff_fwhm = 20.0) {
    if (n < 1) throw InputError("lorentzian_pdf_nodes: n must be >= 1");
    const double half = fwhm / 2.0;
    const double u_max = std::atan(cutoff_fwhm * fwhm / half);
    std::vector<Node> nodes(n);
    double mass = 0.0;
    for (int k = 0; k < n; ++k) {
        // Midpoint rule in u; the substitution makes the pdf factor exactly 1/pi.
        const double u = -u_max + (2.0 * u_max) * (k + 0.5) / n;
        nodes[k].x = half * std::tan(u);
        nodes[k].weight = (2.0 * u_max / n) / pi;
        mass += nodes[k].weight;
    }
    for (auto& node : nodes) node.weight /= mass;
    return nodes;
}

// Deterministic pairwise reduction (fixed association order).
template <typename T>
T pairwise_sum(std::vector<T> values) {
    if (values.empty()) return T{};
    while (values.size() > 1) {
        std::size_t half = (values.size() + 1) / 2;
        for (std::size_t i = 0; i + half < values.size(); ++i)
            values[i] += values[i + half];
        values.resize(half);
        if (half == 1) break;
    }
    return values[0];
}

}  // namespace spinmux::quadrature
