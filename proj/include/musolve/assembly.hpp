#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "musolve/errors.hpp"
#include "musolve/measure.hpp"

// Finite element assembly on a uniform interval mesh for the family of
// bilinear forms
//
//   a_s(u, v) = c_s \iint_{R x R} (u(x)-u(y))(v(x)-v(y)) / |x-y|^{1+2s} dx dy,
//
// over piecewise-linear hat functions extended by zero outside (a, b), i.e.
// with the homogeneous exterior condition. The normalization
//
//   c_s = 4^s s Gamma(s + 1/2) / (2 sqrt(pi) Gamma(1 - s))
//
// makes a_s the quadratic form of the operator with Fourier symbol |xi|^{2s},
// so a_1 is the gradient form and a_0 the L2 form.
//
// On a uniform mesh every interior hat is a translate of the same shape and
// the full-line form is translation invariant, so A_s is exactly Toeplitz.
// Writing both factors as integrals of the (piecewise constant) derivatives
// reduces each entry to a centered fourth difference of the second
// antiderivative of |t|^{1-2s}:
//
//   A_s[i][j] = c_s h^{1-2s} D4[phi_s](|i-j|) / (s (2-2s) (3-2s)),
//   phi_s(t)  = t^2 (t^{1-2s} - 1) / (1 - 2s),  phi_{1/2}(t) = t^2 ln t,
//
// where D4[f](m) = f(m+2) - 4 f(m+1) + 6 f(m) - 4 f(m-1) + f(m-2) on |t|.
// The s -> 1 limit of these entries is the exact tridiagonal gradient
// stiffness [2/h, -1/h] and the s -> 0 limit is the exact mass matrix
// [2h/3, h/6]; both endpoints are special-cased to local assembly.

namespace musolve {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Recorded in run metadata so spectra are reproducible under this choice.
inline constexpr const char *kNormalizationId =
    "c_{N,s} = 2^{2s} s Gamma(s + N/2) / (2 pi^{N/2} Gamma(1 - s)), N = 1 "
    "(quadratic-form constant; [u]_1 = |grad u|_L2, [u]_0 = |u|_L2)";

// Quadratic-form normalization constant for N = 1, s in (0, 1).
inline double gagliardo_normalization(double s) {
    if (!(s > 0.0 && s < 1.0))
        throw std::domain_error("gagliardo_normalization: s must lie in (0, 1)");
    const double log_c = 2.0 * s * std::log(2.0) + std::log(s) + std::lgamma(s + 0.5) -
                         0.5 * std::log(M_PI) - std::log(2.0) - std::lgamma(1.0 - s);
    return std::exp(log_c);
}

struct DomainMesh {
    double a = 0.0;
    double b = 1.0;
    int n_interior = 0;

    DomainMesh(double a_, double b_, int n) : a(a_), b(b_), n_interior(n) {
        if (!(a < b)) throw ConfigError("mesh: endpoints must satisfy a < b");
        if (n < 1) throw ConfigError("mesh: need at least one interior node");
    }

    double h() const { return (b - a) / (n_interior + 1); }
    double node(int i) const { return a + (i + 1) * h(); } // i = 0 .. n_interior-1

    std::vector<double> nodes() const {
        std::vector<double> xs(n_interior);
        for (int i = 0; i < n_interior; ++i) xs[i] = node(i);
        return xs;
    }
};

namespace detail {

// phi_s(t) = t^2 expm1((1-2s) ln t) / (1-2s), continuous through s = 1/2
// where it becomes t^2 ln t. Long double keeps the fourth difference
// accurate for large offsets, where five nearly equal values cancel.
inline long double toeplitz_phi(long double t, long double one_minus_2s) {
    if (t <= 0.0L) return 0.0L;
    const long double lt = logl(t);
    const long double w = one_minus_2s * lt;
    const long double em1_over = (w == 0.0L) ? 1.0L : expm1l(w) / w;
    return t * t * lt * em1_over;
}

inline double toeplitz_entry(double s, double h, long long m) {
    const long double oms = 1.0L - 2.0L * static_cast<long double>(s);
    auto phi = [&](long long t) {
        return toeplitz_phi(static_cast<long double>(t < 0 ? -t : t), oms);
    };
    const long double d4 =
        phi(m + 2) - 4.0L * phi(m + 1) + 6.0L * phi(m) - 4.0L * phi(m - 1) + phi(m - 2);
    const long double denom = static_cast<long double>(s) * (2.0L - 2.0L * s) * (3.0L - 2.0L * s);
    const double scale = gagliardo_normalization(s) * std::pow(h, 1.0 - 2.0 * s);
    return scale * static_cast<double>(d4 / denom);
}

} // namespace detail

// Mass matrix of the interior hat functions: tridiagonal [2h/3, h/6].
inline Matrix assemble_mass(const DomainMesh &mesh) {
    const int n = mesh.n_interior;
    const double h = mesh.h();
    Matrix m = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = 2.0 * h / 3.0;
        if (i + 1 < n) {
            m(i, i + 1) = h / 6.0;
            m(i + 1, i) = h / 6.0;
        }
    }
    return m;
}

// Stiffness matrix of a_s for exponent s in [0, 1]. Endpoints are assembled
// locally; fractional exponents use the exact Toeplitz entries above.
inline Matrix assemble_fractional_stiffness(const DomainMesh &mesh, double s) {
    if (!(s >= 0.0 && s <= 1.0))
        throw std::domain_error("assemble_fractional_stiffness: exponent outside [0, 1]");
    const int n = mesh.n_interior;
    const double h = mesh.h();

    if (s == 0.0) return assemble_mass(mesh);
    if (s == 1.0) {
        Matrix k = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            k(i, i) = 2.0 / h;
            if (i + 1 < n) {
                k(i, i + 1) = -1.0 / h;
                k(i + 1, i) = -1.0 / h;
            }
        }
        return k;
    }

    std::vector<double> first_row(n);
    for (int m = 0; m < n; ++m) first_row[m] = detail::toeplitz_entry(s, h, m);
    Matrix k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) k(i, j) = first_row[std::abs(i - j)];
    return k;
}

// Cache of stiffness matrices per exponent over one mesh.
class StiffnessFamily {
  public:
    explicit StiffnessFamily(const DomainMesh &mesh)
        : mesh_(mesh), mass_(assemble_mass(mesh)) {}

    const DomainMesh &mesh() const { return mesh_; }
    const Matrix &mass() const { return mass_; }

    const Matrix &matrix(double s) {
        auto it = cache_.find(s);
        if (it == cache_.end())
            it = cache_.emplace(s, assemble_fractional_stiffness(mesh_, s)).first;
        return it->second;
    }

    double normalization(double s) const {
        if (s == 0.0 || s == 1.0) return 1.0; // local assembly, no kernel constant
        return gagliardo_normalization(s);
    }

  private:
    DomainMesh mesh_;
    Matrix mass_;
    std::map<double, Matrix> cache_;
};

// Superposed operator on interior degrees of freedom:
//   K_plus  = sum of positive-weight stiffness terms   (inner product <.,.>)
//   K_minus = sum of negative-weight terms in abs value (form (.,.))
//   K       = K_plus - K_minus                          (energy form |.|^2)
//   K_high  = positive terms with exponent >= s_bar (dominating part)
struct AssembledOperator {
    Matrix K_plus;
    Matrix K_minus;
    Matrix K;
    Matrix K_high;
    Matrix M;
    std::vector<ExponentAtom> atoms; // provenance
    double s_bar = 1.0;
    DomainMesh mesh;

    int size() const { return static_cast<int>(M.rows()); }
};

inline AssembledOperator assemble_operator(const DomainMesh &mesh,
                                           const std::vector<ExponentAtom> &atoms,
                                           double s_bar) {
    const int n = mesh.n_interior;
    StiffnessFamily family(mesh);
    AssembledOperator op{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n),
                         Matrix::Zero(n, n), family.mass(),      atoms,
                         s_bar,              mesh};
    for (const auto &atom : atoms) {
        if (!(atom.s >= 0.0 && atom.s <= 1.0))
            throw std::domain_error("assemble_operator: atom exponent outside [0, 1]");
        const Matrix &a_s = family.matrix(atom.s);
        if (atom.c > 0.0) {
            op.K_plus += atom.c * a_s;
            if (atom.s >= s_bar) op.K_high += atom.c * a_s;
        } else {
            op.K_minus += (-atom.c) * a_s;
        }
    }
    op.K = op.K_plus - op.K_minus;

    Eigen::LLT<Matrix> llt_plus(op.K_plus);
    if (llt_plus.info() != Eigen::Success)
        throw HypothesisError("assemble_operator: K_plus is not positive definite "
                              "(no positive mass in the measure?)");
    Eigen::LLT<Matrix> llt_high(op.K_high);
    if (llt_high.info() != Eigen::Success)
        throw HypothesisError("assemble_operator: high-exponent part is not positive definite "
                              "(no positive mass at exponents >= s_bar)");
    return op;
}

// Smallest constant c with u'A1u <= c u'A2u for all u: the largest eigenvalue
// of the pencil (A1, A2). A2 must be positive definite.
inline double domination_constant(const Matrix &a1, const Matrix &a2) {
    Eigen::LLT<Matrix> llt(a2);
    if (llt.info() != Eigen::Success)
        throw HypothesisError("domination_constant: right matrix is not positive definite");
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(a1, a2, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericalError("domination_constant: pencil eigensolve failed");
    return solver.eigenvalues().maxCoeff();
}

} // namespace musolve
