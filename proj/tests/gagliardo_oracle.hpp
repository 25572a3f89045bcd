#pragma once

#include <cmath>
#include <vector>

#include "musolve/assembly.hpp"
#include "musolve/quadrature.hpp"

// Test-only oracle for the fractional stiffness entries, deliberately
// independent of the production closed form. It evaluates
//
//   a_s(phi_i, phi_j) = c_s [ I_Omega + 2 int_Omega phi_i phi_j rho ]
//
// where I_Omega is the double integral of the Gagliardo difference quotient
// over Omega x Omega and rho(x) = ((x-a)^{-2s} + (b-x)^{-2s}) / (2s) collects
// the interaction with the exterior, where the hats vanish. Element pairs are
// integrated with tensor Gauss rules; pairs touching the diagonal and the
// boundary-singular rho factor use geometrically graded subdivisions toward
// the singularity. Slow but trustworthy at small mesh sizes.

namespace musolve::oracles {

namespace detail {

inline double hat(const DomainMesh &mesh, int i, double x) {
    const double h = mesh.h();
    const double xi = mesh.node(i);
    const double d = std::abs(x - xi);
    return d >= h ? 0.0 : 1.0 - d / h;
}

// Geometrically graded panels of [lo, hi] refined toward `toward`; stops
// subdividing once panel widths reach rounding scale at the endpoints.
inline std::vector<std::pair<double, double>> graded_panels(double lo, double hi, double toward,
                                                            int levels) {
    std::vector<std::pair<double, double>> panels;
    const double floor_width = 1e-14 * (std::abs(lo) + std::abs(hi) + (hi - lo));
    if (toward <= lo + 1e-300 || toward < 0.5 * (lo + hi)) {
        double right = hi;
        for (int l = 0; l < levels && (right - lo) > floor_width; ++l) {
            double left = lo + (right - lo) * 0.5;
            panels.push_back({left, right});
            right = left;
        }
        panels.push_back({lo, right});
    } else {
        double left = lo;
        for (int l = 0; l < levels && (hi - left) > floor_width; ++l) {
            double right = hi - (hi - left) * 0.5;
            panels.push_back({left, right});
            left = right;
        }
        panels.push_back({left, hi});
    }
    return panels;
}

} // namespace detail

inline double oracle_entry(const DomainMesh &mesh, double s, int i, int j) {
    const double a = mesh.a, b = mesh.b, h = mesh.h();
    const int elements = mesh.n_interior + 1;
    const GaussRule unit = gauss_legendre(12);

    auto phi_i = [&](double x) { return detail::hat(mesh, i, x); };
    auto phi_j = [&](double x) { return detail::hat(mesh, j, x); };
    auto kernel_num = [&](double x, double y) {
        return (phi_i(x) - phi_i(y)) * (phi_j(x) - phi_j(y));
    };

    auto integrate_cell = [&](double x0, double x1, double y0, double y1) {
        double sum = 0.0;
        for (std::size_t p = 0; p < unit.nodes.size(); ++p) {
            const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * unit.nodes[p];
            const double wx = 0.5 * (x1 - x0) * unit.weights[p];
            for (std::size_t q = 0; q < unit.nodes.size(); ++q) {
                const double y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * unit.nodes[q];
                const double wy = 0.5 * (y1 - y0) * unit.weights[q];
                const double d = std::abs(x - y);
                if (d == 0.0) continue; // integrand extends by 0 on the diagonal
                sum += wx * wy * kernel_num(x, y) * std::pow(d, -1.0 - 2.0 * s);
            }
        }
        return sum;
    };

    double interior = 0.0;
    for (int ke = 0; ke < elements; ++ke) {
        const double kx0 = a + ke * h, kx1 = kx0 + h;
        for (int le = 0; le < elements; ++le) {
            const double ly0 = a + le * h, ly1 = ly0 + h;
            if (ke == le) {
                // Both hats are linear on a single element, so the integrand
                // is slope_i slope_j (x-y)^2 |x-y|^{-1-2s} and the element
                // self-interaction integrates in closed form:
                //   2 slope_i slope_j h^{3-2s} / ((2-2s)(3-2s)).
                auto slope = [&](int node, int elem) {
                    if (elem == node) return 1.0 / h;
                    if (elem == node + 1) return -1.0 / h;
                    return 0.0;
                };
                interior += 2.0 * slope(i, ke) * slope(j, ke) *
                            std::pow(h, 3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
            } else if (std::abs(ke - le) == 1) {
                // Corner singularity at the shared vertex: grade both factors
                // toward it.
                const double vx = ke < le ? kx1 : kx0;
                double cell = 0.0;
                for (auto [x0, x1] : detail::graded_panels(kx0, kx1, vx, 40))
                    for (auto [y0, y1] : detail::graded_panels(ly0, ly1, vx, 40))
                        cell += integrate_cell(x0, x1, y0, y1);
                interior += cell;
            } else {
                interior += integrate_cell(kx0, kx1, ly0, ly1);
            }
        }
    }

    // Exterior interaction: 2 int phi_i phi_j rho, with rho singular at the
    // boundary; graded panels toward both endpoints.
    auto rho = [&](double x) {
        return (std::pow(x - a, -2.0 * s) + std::pow(b - x, -2.0 * s)) / (2.0 * s);
    };
    // phi_i phi_j is polynomial per element; integrate element by element so
    // no panel straddles a hat kink. The first and last elements carry the
    // boundary singularity of rho; there the integral runs in the offset
    // xi = distance to the boundary, which keeps xi exact near zero where
    // x = a + xi would round onto the boundary itself.
    double exterior = 0.0;
    for (int e = 0; e < elements; ++e) {
        const double x0 = a + e * h, x1 = x0 + h;
        if (phi_i(0.5 * (x0 + x1)) == 0.0 && phi_j(0.5 * (x0 + x1)) == 0.0) continue;
        if (e == 0 || e == elements - 1) {
            const bool left = (e == 0);
            for (auto [p0, p1] : detail::graded_panels(0.0, h, 0.0, 48)) {
                for (std::size_t p = 0; p < unit.nodes.size(); ++p) {
                    const double xi = 0.5 * (p0 + p1) + 0.5 * (p1 - p0) * unit.nodes[p];
                    const double w = 0.5 * (p1 - p0) * unit.weights[p];
                    const double x = left ? a + xi : b - xi;
                    const double rho_xi = (std::pow(xi, -2.0 * s) +
                                           std::pow((b - a) - xi, -2.0 * s)) /
                                          (2.0 * s);
                    exterior += w * phi_i(x) * phi_j(x) * rho_xi;
                }
            }
        } else {
            for (std::size_t p = 0; p < unit.nodes.size(); ++p) {
                const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * unit.nodes[p];
                const double w = 0.5 * (x1 - x0) * unit.weights[p];
                exterior += w * phi_i(x) * phi_j(x) * rho(x);
            }
        }
    }

    return gagliardo_normalization(s) * (interior + 2.0 * exterior);
}

} // namespace musolve::oracles
