#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "musolve/assembly.hpp"
#include "musolve/errors.hpp"
#include "musolve/rng.hpp"

// Dirichlet spectrum of the superposed operator: the pencil K e = lambda M e
// on interior degrees of freedom, solved densely by Cholesky reduction of M.
// Eigenvectors are M-orthonormal and K-orthogonal; eigenvalues ascend and are
// positive whenever the coercivity certificate passes.
//
// The certificate measures how much of the high-exponent positive form is
// needed to reabsorb the negative part:
//
//   c0_gamma = max eigenvalue of (K_minus, K_high)
//
// so u'K_minus u <= c0_gamma u'K_high u <= c0_gamma u'K_plus u, and for
// c0_gamma < 1 the sandwich (1-c0_gamma) u'K_plus u <= u'K u <= u'K_plus u
// holds, making the energy form an equivalent inner product.

namespace musolve {

struct Spectrum {
    Vector eigenvalues;          // ascending, size m
    Matrix eigenvectors;         // n x m, columns M-orthonormal
    Vector residuals;            // |K e_k - lambda_k M e_k|_2
    std::vector<int> cluster_id; // multiplicity clusters at 1e-8 relative
    bool coercive = true;        // certificate passed (or no negative part)

    int count() const { return static_cast<int>(eigenvalues.size()); }
};

struct CoercivityCertificate {
    double c0_gamma = 0.0;
    bool passes = false;
    double lower_equivalence = 1.0; // (1 - c0_gamma) when passing
    double upper_equivalence = 1.0;
};

inline CoercivityCertificate coercivity_certificate(const AssembledOperator &op) {
    CoercivityCertificate cert;
    if (op.K_minus.norm() == 0.0) {
        cert.c0_gamma = 0.0;
        cert.passes = true;
        cert.lower_equivalence = 1.0;
        return cert;
    }
    cert.c0_gamma = domination_constant(op.K_minus, op.K_high);
    cert.passes = cert.c0_gamma < 1.0;
    cert.lower_equivalence = 1.0 - cert.c0_gamma;
    return cert;
}

namespace detail {

// Sign convention: first coordinate that is nonzero relative to the largest
// one is made positive, so repeated runs report identical eigenvectors.
inline void normalize_sign(Eigen::Ref<Vector> v) {
    const double scale = v.cwiseAbs().maxCoeff();
    if (scale == 0.0) return;
    for (int i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > 1e-12 * scale) {
            if (v[i] < 0.0) v = -v;
            return;
        }
    }
}

inline std::vector<int> cluster_eigenvalues(const Vector &lambda, double rel_tol = 1e-8) {
    std::vector<int> ids(lambda.size());
    int id = 0;
    for (int k = 0; k < lambda.size(); ++k) {
        if (k > 0 && std::abs(lambda[k] - lambda[k - 1]) >
                         rel_tol * std::max(1.0, std::abs(lambda[k])))
            ++id;
        ids[k] = id;
    }
    return ids;
}

} // namespace detail

inline Spectrum solve_spectrum(const AssembledOperator &op, int m) {
    const int n = op.size();
    if (m < 1 || m > n)
        throw RequestError("solve_spectrum: requested " + std::to_string(m) +
                           " eigenpairs on " + std::to_string(n) + " degrees of freedom");
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(op.K, op.M);
    if (solver.info() != Eigen::Success)
        throw NumericalError("solve_spectrum: dense pencil eigensolve did not converge");

    Spectrum sp;
    sp.eigenvalues = solver.eigenvalues().head(m);
    sp.eigenvectors = solver.eigenvectors().leftCols(m);
    for (int k = 0; k < m; ++k) detail::normalize_sign(sp.eigenvectors.col(k));
    sp.residuals.resize(m);
    for (int k = 0; k < m; ++k)
        sp.residuals[k] =
            (op.K * sp.eigenvectors.col(k) - sp.eigenvalues[k] * op.M * sp.eigenvectors.col(k))
                .norm();
    sp.cluster_id = detail::cluster_eigenvalues(sp.eigenvalues);
    sp.coercive = coercivity_certificate(op).passes;
    return sp;
}

struct RayleighCheck {
    double deviation = 0.0;              // |min - lambda_{k+1}| / lambda_{k+1}
    std::optional<double> vector_error;  // M-distance to e_{k+1} up to sign
    bool vector_check_skipped = false;   // degenerate cluster at k+1
};

// Verifies the variational characterization: the Rayleigh quotient of the
// energy form, minimized over the K-orthogonal complement of e_1..e_k, is an
// independent re-solve on that complement and must reproduce lambda_{k+1}.
inline RayleighCheck rayleigh_verify(const Spectrum &spectrum, const AssembledOperator &op,
                                     int k) {
    const int n = op.size();
    if (k < 0 || k + 1 > spectrum.count())
        throw RequestError("rayleigh_verify: index k+1 exceeds computed eigenpairs");

    Matrix basis;
    if (k == 0) {
        basis = Matrix::Identity(n, n);
    } else {
        // Null space of (K E_k)^T via full QR: the last n-k Householder columns.
        Matrix constraints = op.K * spectrum.eigenvectors.leftCols(k); // n x k
        Eigen::HouseholderQR<Matrix> qr(constraints);
        Matrix q = qr.householderQ();
        basis = q.rightCols(n - k);
    }

    Matrix kp = basis.transpose() * op.K * basis;
    Matrix mp = basis.transpose() * op.M * basis;
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(kp, mp);
    if (solver.info() != Eigen::Success)
        throw NumericalError("rayleigh_verify: projected eigensolve failed");

    const double minimum = solver.eigenvalues()[0];
    const double lambda = spectrum.eigenvalues[k];
    RayleighCheck check;
    check.deviation = std::abs(minimum - lambda) / std::abs(lambda);

    const bool degenerate =
        (k + 1 < spectrum.count()) &&
        std::abs(spectrum.eigenvalues[k + 1] - lambda) <= 1e-8 * std::max(1.0, std::abs(lambda));
    if (degenerate) {
        check.vector_check_skipped = true;
        return check;
    }

    Vector minimizer = basis * solver.eigenvectors().col(0);
    minimizer /= std::sqrt(minimizer.dot(op.M * minimizer));
    const Vector &ek = spectrum.eigenvectors.col(k);
    const Vector dplus = minimizer - ek;
    const Vector dminus = minimizer + ek;
    check.vector_error = std::min(std::sqrt(dplus.dot(op.M * dplus)),
                                  std::sqrt(dminus.dot(op.M * dminus)));
    return check;
}

// Samples the span of the first k eigenvectors and returns the worst ratio
// u'Ku / (lambda_k u'Mu); on that subspace the energy form is dominated by
// lambda_k times the mass form, so the result must not exceed 1.
inline double subspace_norm_bound(const Spectrum &spectrum, const AssembledOperator &op, int k,
                                  int draws = 100, std::uint64_t seed = 7u) {
    if (k < 1 || k > spectrum.count())
        throw RequestError("subspace_norm_bound: index k out of range");
    Rng rng(seed);
    const Matrix basis = spectrum.eigenvectors.leftCols(k);
    const double lambda_k = spectrum.eigenvalues[k - 1];
    double worst = 0.0;
    for (int d = 0; d < draws; ++d) {
        Vector coeff(k);
        for (int i = 0; i < k; ++i) coeff[i] = rng.gaussian();
        if (coeff.norm() == 0.0) continue;
        Vector u = basis * coeff;
        const double ratio = u.dot(op.K * u) / (lambda_k * u.dot(op.M * u));
        worst = std::max(worst, ratio);
    }
    return worst;
}

} // namespace musolve
