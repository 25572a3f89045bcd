#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>

#include "musolve/assembly.hpp"
#include "musolve/errors.hpp"
#include "musolve/nonlinearity.hpp"
#include "musolve/rng.hpp"
#include "musolve/spectral.hpp"

// Multiplicity search for the asymptotically linear problem
//
//   K u - lambda_bar M u = N(u),    N_i(u) = m_i f(u_i),
//
// the critical-point equation of the discrete energy
//
//   J(u) = 1/2 u'Ku - (lambda_bar/2) u'Mu - sum_i m_i F(u_i),
//
// with lumped masses m_i (row sums of M), so the gradient is exact for the
// discrete energy and finite differences close to machine precision.
//
// The eigenvalue window locates indices h <= k with
//   standard (lambda0 < 0):  lambda0 + lambda_bar < lambda_h <= lambda_k < lambda_bar
//   mirrored (lambda0 > 0):  lambda_bar < lambda_h <= lambda_k < lambda0 + lambda_bar
// predicting k - h + 1 pairs (u, -u) of nontrivial solutions.
//
// The predicted critical points are saddles, so descent runs on a deflated
// residual merit (the gradient of J lifted through an operator preconditioner
// and measured in the M-norm) whose global minima are the critical points of
// J of any Morse index; converged iterates are polished by damped Newton on
// the deflated residual. Deflation multiplies the residual by
// prod (1 + sigma^2/|u -+ u_j|_M^2) over previously accepted solutions (both
// signs) and the trivial solution, which repels iterates from known roots.
// Seeds follow the window geometry: scaled eigenvectors e_h..e_k, random
// points on the sphere S_rho in the high complement, and mixtures in the low
// subspace below its energy ceiling.

namespace musolve {

inline Vector lumped_masses(const AssembledOperator &op) {
    return op.M.rowwise().sum();
}

inline double energy(const AssembledOperator &op, const Nonlinearity &nl, const Vector &u) {
    const Vector lumped = lumped_masses(op);
    double nonlinear = 0.0;
    for (int i = 0; i < u.size(); ++i) nonlinear += lumped[i] * nl.F(u[i]);
    return 0.5 * u.dot(op.K * u) - 0.5 * nl.lambda_bar * u.dot(op.M * u) - nonlinear;
}

inline Vector gradient(const AssembledOperator &op, const Nonlinearity &nl, const Vector &u) {
    const Vector lumped = lumped_masses(op);
    Vector g = op.K * u - nl.lambda_bar * (op.M * u);
    for (int i = 0; i < u.size(); ++i) g[i] -= lumped[i] * nl.f(u[i]);
    return g;
}

inline Matrix hessian(const AssembledOperator &op, const Nonlinearity &nl, const Vector &u) {
    const Vector lumped = lumped_masses(op);
    Matrix h = op.K - nl.lambda_bar * op.M;
    for (int i = 0; i < u.size(); ++i) h(i, i) -= lumped[i] * nl.fprime(u[i]);
    return h;
}

enum class WindowVariant { standard, mirrored };

struct WindowReport {
    bool present = false;
    int h = 0; // 1-based eigenvalue indices
    int k = 0;
    WindowVariant variant = WindowVariant::standard;
    double margin_low = 0.0;  // distance from the window floor to lambda_h
    double margin_high = 0.0; // distance from lambda_k to the window ceiling
    bool lambda_bar_in_spectrum = false;
    double lambda_bar_distance = 0.0;

    int pairs_predicted() const { return present ? k - h + 1 : 0; }
};

inline WindowReport lambda_window(const Spectrum &spectrum, const Nonlinearity &nl) {
    if (nl.lambda0 == 0.0)
        throw ConfigError("lambda_window: lambda0 = 0 is outside the admissible class");
    WindowReport rep;
    rep.variant = nl.lambda0 < 0.0 ? WindowVariant::standard : WindowVariant::mirrored;
    const double lo = rep.variant == WindowVariant::standard ? nl.lambda_bar + nl.lambda0
                                                             : nl.lambda_bar;
    const double hi = rep.variant == WindowVariant::standard ? nl.lambda_bar
                                                             : nl.lambda_bar + nl.lambda0;

    const Vector &lambda = spectrum.eigenvalues;
    const int m = spectrum.count();
    if (!(lambda[m - 1] > hi))
        throw RequestError("lambda_window: computed spectrum does not bracket the window; "
                           "request more eigenpairs");

    rep.lambda_bar_distance = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j)
        rep.lambda_bar_distance =
            std::min(rep.lambda_bar_distance, std::abs(lambda[j] - nl.lambda_bar));
    rep.lambda_bar_in_spectrum =
        rep.lambda_bar_distance <= 1e-6 * std::max(1.0, std::abs(nl.lambda_bar));

    int h = -1, k = -1;
    for (int j = 0; j < m; ++j) {
        if (lambda[j] > lo && lambda[j] < hi) {
            if (h < 0) h = j + 1;
            k = j + 1;
        }
    }
    if (h > 0) {
        rep.present = true;
        rep.h = h;
        rep.k = k;
        rep.margin_low = lambda[h - 1] - lo;
        rep.margin_high = hi - lambda[k - 1];
    }
    return rep;
}

// Estimated critical-value band from the window geometry. Standard variant:
// on the complement of e_1..e_{h-1}, J(u) >= kq |u|^2 - kc |u|^3 near zero;
// rho maximizes that lower bound and c0 is its value. On the low subspace
// span(e_1..e_k), J is bounded above; c_inf is a sampled maximum with
// headroom. In the mirrored variant the well flips below zero and the origin
// level is the ceiling. Both are estimates, not certified constants.
struct EnergyBand {
    double c0 = 0.0;
    double c_inf = 0.0;
    double rho = 0.0;
    double quad_coef = 0.0;  // fitted kq
    double cubic_coef = 0.0; // fitted kc
};

namespace detail {

// Basis of the K-orthogonal complement of the first (h-1) eigenvectors.
inline Matrix high_complement_basis(const AssembledOperator &op, const Spectrum &spectrum,
                                    int h) {
    const int n = op.size();
    const int constraints = h - 1;
    if (constraints == 0) return Matrix::Identity(n, n);
    Matrix c = op.K * spectrum.eigenvectors.leftCols(constraints);
    Eigen::HouseholderQR<Matrix> qr(c);
    Matrix q = qr.householderQ();
    return q.rightCols(n - constraints);
}

inline Vector random_direction(const Matrix &basis, Rng &rng) {
    Vector coeff(basis.cols());
    for (int i = 0; i < coeff.size(); ++i) coeff[i] = rng.gaussian();
    Vector u = basis * coeff;
    return u;
}

inline double knorm(const AssembledOperator &op, const Vector &u) {
    return std::sqrt(std::max(0.0, u.dot(op.K * u)));
}

inline double mnorm(const AssembledOperator &op, const Vector &u) {
    return std::sqrt(std::max(0.0, u.dot(op.M * u)));
}

// Maximum of J along the ray r -> J(r u), u K-normalized; coarse doubling
// scan followed by local refinement.
inline double ray_maximum(const AssembledOperator &op, const Nonlinearity &nl, const Vector &u) {
    double best = 0.0, best_r = 0.0;
    double r_hi = 1.0;
    double j_hi = energy(op, nl, r_hi * u);
    while (j_hi > -10.0 - std::abs(best) && r_hi < 1e6) {
        if (j_hi > best) { best = j_hi; best_r = r_hi; }
        r_hi *= 2.0;
        j_hi = energy(op, nl, r_hi * u);
    }
    const double lo = best_r / 2.0, hi = std::min(r_hi, best_r * 2.0 + 1.0);
    for (int i = 0; i <= 160; ++i) {
        const double r = lo + (hi - lo) * i / 160.0;
        best = std::max(best, energy(op, nl, r * u));
    }
    return best;
}

} // namespace detail

inline EnergyBand estimate_energy_band(const AssembledOperator &op, const Nonlinearity &nl,
                                       const Spectrum &spectrum, const WindowReport &window,
                                       std::uint64_t seed = 11u) {
    if (!window.present)
        throw RequestError("estimate_energy_band: no eigenvalue window present");
    Rng rng(seed);
    EnergyBand band;
    const int h = window.h, k = window.k;
    const double lambda_h = spectrum.eigenvalues[h - 1];
    const double lambda_k = spectrum.eigenvalues[k - 1];
    const Matrix low = spectrum.eigenvectors.leftCols(k);

    const std::vector<double> radii{0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4, 12.8};

    if (window.variant == WindowVariant::standard) {
        band.quad_coef = window.margin_low / (4.0 * lambda_h);
        const Matrix basis = detail::high_complement_basis(op, spectrum, h);
        // Fit the cubic defect along concentrated directions (eigenvectors of
        // the window, which lie in the high complement) and diffuse random
        // ones; random directions alone spread mass too thin to see it.
        std::vector<Vector> dirs;
        for (int j = h; j <= std::min(k + 2, spectrum.count()); ++j)
            dirs.push_back(spectrum.eigenvectors.col(j - 1));
        for (int d = 0; d < 40; ++d) dirs.push_back(detail::random_direction(basis, rng));
        double kc = 1e-9;
        for (auto &dir : dirs) {
            const double kn = detail::knorm(op, dir);
            if (kn == 0.0) continue;
            dir /= kn;
            for (double r : radii) {
                const double j = energy(op, nl, r * dir);
                kc = std::max(kc, (band.quad_coef * r * r - j) / (r * r * r));
            }
        }
        band.cubic_coef = kc;
        band.rho = std::min(2.0 * band.quad_coef / (3.0 * kc), radii.back());
        band.c0 = band.quad_coef * band.rho * band.rho - kc * std::pow(band.rho, 3);

        double ceiling = 0.0;
        for (int j = 0; j < k; ++j) {
            Vector dir = spectrum.eigenvectors.col(j);
            dir /= detail::knorm(op, dir);
            ceiling = std::max(ceiling, detail::ray_maximum(op, nl, dir));
        }
        for (int d = 0; d < 60; ++d) {
            Vector dir = detail::random_direction(low, rng);
            const double kn = detail::knorm(op, dir);
            if (kn == 0.0) continue;
            ceiling = std::max(ceiling, detail::ray_maximum(op, nl, dir / kn));
        }
        band.c_inf = ceiling * 1.02 + 1e-9;
    } else {
        // Mirrored: the well sits below zero on the low subspace; the origin
        // level bounds the critical values from above.
        band.quad_coef = window.margin_high / (4.0 * lambda_k);
        std::vector<Vector> dirs;
        for (int j = 1; j <= k; ++j) dirs.push_back(spectrum.eigenvectors.col(j - 1));
        for (int d = 0; d < 40; ++d) dirs.push_back(detail::random_direction(low, rng));
        double kc = 1e-9;
        for (auto &dir : dirs) {
            const double kn = detail::knorm(op, dir);
            if (kn == 0.0) continue;
            dir /= kn;
            for (double r : radii) {
                const double j = energy(op, nl, r * dir);
                kc = std::max(kc, (j + band.quad_coef * r * r) / (r * r * r));
            }
        }
        band.cubic_coef = kc;
        band.rho = std::min(2.0 * band.quad_coef / (3.0 * kc), radii.back());
        double depth = -(band.quad_coef * band.rho * band.rho - kc * std::pow(band.rho, 3));
        for (int d = 0; d < 200; ++d) {
            Vector dir = detail::random_direction(low, rng);
            const double kn = detail::knorm(op, dir);
            if (kn == 0.0) continue;
            depth = std::min(depth, energy(op, nl, band.rho * dir / kn));
        }
        band.c0 = depth * 1.02 - 1e-9;
        band.c_inf = 1e-9;
    }
    return band;
}

struct MinimaxOptions {
    long long budget = 10000;      // total descent+Newton iterations across seeds
    double residual_tol = 1e-8;    // accept when |grad| <= tol (1 + |Ku|)
    double nontrivial_tol = 0.0;   // M-norm floor; 0 -> 1e-6 sqrt(b-a)
    double distinct_tol = 1e-3;    // pairwise M-distance between distinct solutions
    double deflation_radius = 0.05; // M-distance inside which the penalty dominates
    std::uint64_t seed = 42;
    int max_newton = 60;
    int per_seed_iterations = 600;
};

struct SolutionEntry {
    Vector u;
    double energy = 0.0;
    double residual = 0.0;
    int pair_id = 0;
    int sign = +1; // the stored negation has sign -1
    bool in_band = true;
};

struct RunDiagnostics {
    std::string seed_label;
    int iterations = 0;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    double max_norm = 0.0; // K-norm bound along the trajectory
    std::string outcome;   // accepted | merged | trivial | no_convergence | diverged
    std::vector<double> residual_trace;
};

struct MinimaxReport {
    std::vector<SolutionEntry> solutions; // both signs of every pair
    int pairs_found = 0;
    int pairs_predicted = 0;
    EnergyBand band;
    double band_tolerance = 0.0;
    std::vector<RunDiagnostics> diagnostics;
    long long iterations_used = 0;
    int worker_count = 1;
};

namespace detail {

// Shifted multiplicative deflation m(u) = prod (1 + sigma^2 / |u - root|_M^2)
// over known roots (both signs, plus the trivial solution). The residual
// m(u) grad J(u) blows up at deflated roots and tends to grad J away from
// them; sigma sets the radius inside which the penalty dominates.
struct Deflator {
    const AssembledOperator *op;
    std::vector<Vector> roots;
    double sigma2 = 2.5e-3;
    bool deflate_trivial = true;

    double factor(const Vector &u) const {
        double m = 1.0;
        if (deflate_trivial) {
            const double q = std::max(u.dot(op->M * u), 1e-300);
            m *= 1.0 + sigma2 / q;
        }
        for (const auto &r : roots) {
            for (double sgn : {1.0, -1.0}) {
                const Vector d = u - sgn * r;
                const double q = std::max(d.dot(op->M * d), 1e-300);
                m *= 1.0 + sigma2 / q;
            }
        }
        return m;
    }

    // gradient of the deflation factor
    Vector grad(const Vector &u) const {
        Vector g = Vector::Zero(u.size());
        const double m = factor(u);
        if (deflate_trivial) {
            const double q = std::max(u.dot(op->M * u), 1e-300);
            g += (m / (1.0 + sigma2 / q)) * (-2.0 * sigma2 / (q * q)) * (op->M * u);
        }
        for (const auto &r : roots) {
            for (double sgn : {1.0, -1.0}) {
                const Vector d = u - sgn * r;
                const double q = std::max(d.dot(op->M * d), 1e-300);
                g += (m / (1.0 + sigma2 / q)) * (-2.0 * sigma2 / (q * q)) * (op->M * d);
            }
        }
        return g;
    }
};

} // namespace detail

inline MinimaxReport find_pairs(const AssembledOperator &op, const Nonlinearity &nl,
                                const Spectrum &spectrum, const WindowReport &window,
                                const MinimaxOptions &options = {}) {
    if (!window.present)
        throw RequestError("find_pairs: no eigenvalue window; nothing to search for");

    MinimaxReport report;
    report.pairs_predicted = window.pairs_predicted();
    report.band = estimate_energy_band(op, nl, spectrum, window, options.seed ^ 0x9e3779b9u);
    report.band_tolerance =
        0.05 * std::max({1.0, std::abs(report.band.c0), std::abs(report.band.c_inf)});

    const int n = op.size();
    const double domain_length = op.mesh.b - op.mesh.a;
    const double nontrivial =
        options.nontrivial_tol > 0.0 ? options.nontrivial_tol : 1e-6 * std::sqrt(domain_length);

    Rng rng(options.seed);
    detail::Deflator deflator{&op, {}, options.deflation_radius * options.deflation_radius, true};
    const Vector lumped = lumped_masses(op);

    auto grad_j_at = [&](const Vector &v) {
        Vector g = op.K * v - nl.lambda_bar * (op.M * v);
        for (int i = 0; i < v.size(); ++i) g[i] -= lumped[i] * nl.f(v[i]);
        return g;
    };

    // The raw residual lives at the mesh-dependent dual scale, which makes
    // |F|^2 hopelessly ill conditioned for first-order descent. The merit
    // measures the lifted residual C F, C = (K_plus + M)^{-1}, in the M-norm;
    // the effective spectrum ((lambda - shift)/(lambda + 1))^2 of its Hessian
    // is then bounded above and below at mesh-independent scale.
    Eigen::LLT<Matrix> precond(op.K_plus + op.M);
    if (precond.info() != Eigen::Success)
        throw NumericalError("find_pairs: preconditioner factorization failed");

    // Seed schedule per the window geometry.
    struct Seed {
        Vector u;
        std::string label;
    };
    std::vector<Seed> seeds;
    for (int j = window.h; j <= window.k; ++j) {
        for (double amp : {0.2, 0.5, 1.0, 2.0, 4.0, 8.0}) {
            seeds.push_back({amp * spectrum.eigenvectors.col(j - 1),
                             "eig_" + std::to_string(j) + "_amp_" + std::to_string(amp)});
        }
    }
    {
        const Matrix high = detail::high_complement_basis(op, spectrum, window.h);
        for (int d = 0; d < 8; ++d) {
            Vector dir = detail::random_direction(high, rng);
            const double kn = detail::knorm(op, dir);
            if (kn == 0.0) continue;
            seeds.push_back({(report.band.rho / kn) * dir, "sphere_" + std::to_string(d)});
        }
        const Matrix low = spectrum.eigenvectors.leftCols(window.k);
        for (int d = 0; d < 8; ++d) {
            Vector dir = detail::random_direction(low, rng);
            const double mn = detail::mnorm(op, dir);
            if (mn == 0.0) continue;
            const double amp = 0.5 * std::pow(2.0, d % 4);
            seeds.push_back({(amp / mn) * dir, "mix_" + std::to_string(d)});
        }
    }

    const double norm_guard = 1e6 * std::max(1.0, std::sqrt(domain_length));
    long long used = 0;

    for (const auto &seed : seeds) {
        if (used >= options.budget) break;
        Vector u = seed.u;
        RunDiagnostics diag;
        diag.seed_label = seed.label;

        auto residual_scale = [&](const Vector &v) { return 1.0 + (op.K * v).norm(); };
        Vector grad_j = grad_j_at(u);
        diag.initial_residual = grad_j.norm();
        diag.residual_trace.push_back(diag.initial_residual);
        diag.max_norm = detail::knorm(op, u);

        // Phase 1: Barzilai-Borwein descent on 1/2 m(u)^2 (CF)'M(CF), F = grad J.
        auto merit_grad = [&](const Vector &v, const Vector &gj, double &lifted_norm) {
            const double m = deflator.factor(v);
            const Vector t1 = precond.solve(gj);
            const Vector t2 = op.M * t1;
            lifted_norm = std::sqrt(std::max(0.0, t1.dot(t2)));
            const Vector t3 = precond.solve(t2);
            Vector ht3 = op.K * t3 - nl.lambda_bar * (op.M * t3);
            for (int i = 0; i < n; ++i) ht3[i] -= lumped[i] * nl.fprime(v[i]) * t3[i];
            return Vector(m * m * ht3 + (m * lifted_norm * lifted_norm) * deflator.grad(v));
        };

        double lifted = 0.0;
        Vector g_merit = merit_grad(u, grad_j, lifted);
        double step = 1e-2 / (1.0 + g_merit.norm());
        Vector prev_u = u, prev_g = g_merit;
        Vector best_u = u;
        double best_lifted = lifted;
        bool newton_ready = false, abandoned = false, captured = false;
        int iters = 0;

        while (iters < options.per_seed_iterations && used < options.budget) {
            ++iters;
            ++used;
            u -= step * g_merit;
            grad_j = grad_j_at(u);
            g_merit = merit_grad(u, grad_j, lifted);
            if (lifted < best_lifted) { best_lifted = lifted; best_u = u; }
            const Vector s = u - prev_u;
            const Vector y = g_merit - prev_g;
            const double sy = s.dot(y);
            // BB1 step when the local curvature is positive; otherwise a
            // Cauchy-like re-estimate instead of shrinking into a stall.
            if (sy > 1e-300)
                step = std::clamp(s.squaredNorm() / sy, 1e-14, 1e2);
            else
                step = std::clamp(s.norm() / (y.norm() + 1e-300), 1e-14, 1.0);
            prev_u = u;
            prev_g = g_merit;
            diag.max_norm = std::max(diag.max_norm, detail::knorm(op, u));
            if (iters % 25 == 0) diag.residual_trace.push_back(grad_j.norm());
            if (detail::knorm(op, u) > norm_guard) { abandoned = true; break; }
            if (lifted <= 1e-3 * (1.0 + detail::mnorm(op, u))) { newton_ready = true; break; }
            if (iters % 10 == 0) {
                // Iterates parked next to an already-found root cannot push the
                // deflated residual further down; release the budget.
                const double capture = std::max(options.distinct_tol, options.deflation_radius);
                for (const auto &r : deflator.roots) {
                    if (std::min(detail::mnorm(op, u - r), detail::mnorm(op, u + r)) < capture) {
                        captured = true;
                        break;
                    }
                }
                if (captured) break;
            }
        }
        if (!newton_ready && !captured && best_lifted < lifted) {
            u = best_u;
            grad_j = grad_j_at(u);
            newton_ready = best_lifted <= 1e-2 * (1.0 + detail::mnorm(op, u));
        }

        // Phase 2: damped Newton on the deflated residual m(u) grad J(u).
        bool converged = false;
        if (newton_ready) {
            for (int it = 0; it < options.max_newton && used < options.budget; ++it) {
                ++used;
                ++iters;
                grad_j = grad_j_at(u);
                if (grad_j.norm() <= options.residual_tol * residual_scale(u)) {
                    converged = true;
                    break;
                }
                const double m = deflator.factor(u);
                Matrix jac = m * hessian(op, nl, u);
                jac.noalias() += grad_j * deflator.grad(u).transpose();
                Eigen::PartialPivLU<Matrix> lu(jac);
                Vector delta = lu.solve(-m * grad_j);
                if (!delta.allFinite()) break;
                double t = 1.0;
                const double base = deflator.factor(u) * grad_j.norm();
                for (int half = 0; half < 25; ++half) {
                    Vector cand = u + t * delta;
                    const double cand_res = deflator.factor(cand) * grad_j_at(cand).norm();
                    if (cand_res < base || half == 24) {
                        u = cand;
                        break;
                    }
                    t *= 0.5;
                }
                diag.max_norm = std::max(diag.max_norm, detail::knorm(op, u));
            }
            grad_j = grad_j_at(u);
            if (grad_j.norm() <= options.residual_tol * residual_scale(u)) converged = true;
        }

        diag.iterations = iters;
        diag.final_residual = grad_j.norm();
        diag.residual_trace.push_back(diag.final_residual);

        if (abandoned) {
            diag.outcome = "diverged";
        } else if (captured) {
            diag.outcome = "merged";
        } else if (!converged) {
            diag.outcome = "no_convergence";
        } else if (detail::mnorm(op, u) < nontrivial) {
            diag.outcome = "trivial";
        } else {
            bool duplicate = false;
            for (const auto &r : deflator.roots) {
                const double d = std::min(detail::mnorm(op, u - r), detail::mnorm(op, u + r));
                if (d < options.distinct_tol) { duplicate = true; break; }
            }
            if (duplicate) {
                diag.outcome = "merged";
            } else {
                diag.outcome = "accepted";
                const int pair_id = report.pairs_found++;
                deflator.roots.push_back(u);
                const double j_u = energy(op, nl, u);
                const double res = diag.final_residual;
                const bool in_band = j_u >= report.band.c0 - report.band_tolerance &&
                                     j_u <= report.band.c_inf + report.band_tolerance;
                report.solutions.push_back({u, j_u, res, pair_id, +1, in_band});
                Vector neg = -u;
                const double j_neg = energy(op, nl, neg);
                const double res_neg = gradient(op, nl, neg).norm();
                report.solutions.push_back({neg, j_neg, res_neg, pair_id, -1, in_band});
            }
        }
        report.diagnostics.push_back(std::move(diag));
    }

    report.iterations_used = used;
    return report;
}

} // namespace musolve
