#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "musolve/errors.hpp"
#include "musolve/quadrature.hpp"

// Signed Borel measures on the exponent interval [0, 1], written as a finite
// list of atoms c_i * delta(s_i) plus an optional piecewise-polynomial density.
// The structural hypotheses relative to a split point s_bar in (0, 1] are:
//
//   (H1)  mu+([s_bar, 1]) > 0                 (positive mass on high exponents)
//   (H2)  mu-|[s_bar, 1]  = 0                 (negative part confined below s_bar)
//   (H3)  gamma := mu-([0, s_bar]) / mu+([s_bar, 1]) finite
//
// gamma is reported as the smallest constant for which the negative mass is
// dominated; s_sharp is the upper endpoint of the support of mu+ restricted
// to [s_bar, 1] (the largest positive atom for purely atomic measures).

namespace musolve {

struct ExponentAtom {
    double s = 0.0; // exponent in [0, 1]
    double c = 0.0; // signed weight, nonzero

    bool operator==(const ExponentAtom &) const = default;
};

// One polynomial density piece p(s) = sum_j coeffs[j] s^j on [lo, hi].
struct DensityPiece {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> coeffs;

    bool operator==(const DensityPiece &) const = default;

    double eval(double s) const {
        double v = 0.0;
        for (std::size_t j = coeffs.size(); j-- > 0;) v = v * s + coeffs[j];
        return v;
    }

    // Exact integral of p over [x, y] via the antiderivative.
    double integral(double x, double y) const {
        auto anti = [&](double t) {
            double v = 0.0;
            for (std::size_t j = coeffs.size(); j-- > 0;)
                v = v * t + coeffs[j] / static_cast<double>(j + 1);
            return v * t;
        };
        return anti(y) - anti(x);
    }
};

namespace detail {

// Sign-change roots of a piece polynomial inside [lo, hi]; grid scan plus
// bisection. Tangential (even-order) roots do not flip the sign and are
// irrelevant for the Jordan split.
inline std::vector<double> sign_change_roots(const DensityPiece &p, double lo, double hi) {
    std::vector<double> roots;
    const int grid = 512;
    double prev_x = lo, prev_v = p.eval(lo);
    for (int i = 1; i <= grid; ++i) {
        double x = lo + (hi - lo) * i / grid;
        double v = p.eval(x);
        if (prev_v == 0.0) {
            roots.push_back(prev_x);
        } else if (v != 0.0 && std::signbit(v) != std::signbit(prev_v)) {
            double a = prev_x, b = x, fa = prev_v;
            for (int it = 0; it < 90; ++it) {
                double m = 0.5 * (a + b), fm = p.eval(m);
                if (fm == 0.0) { a = b = m; break; }
                if (std::signbit(fm) == std::signbit(fa)) { a = m; fa = fm; }
                else b = m;
            }
            roots.push_back(0.5 * (a + b));
        }
        prev_x = x;
        prev_v = v;
    }
    if (prev_v == 0.0 && (roots.empty() || roots.back() != prev_x)) roots.push_back(prev_x);
    return roots;
}

struct SignSegment {
    double lo, hi;
    int sign; // -1, 0, +1 of the piece polynomial on (lo, hi)
};

inline std::vector<SignSegment> sign_segments(const DensityPiece &p, double lo, double hi) {
    std::vector<double> cuts{lo};
    for (double r : sign_change_roots(p, lo, hi))
        if (r > cuts.back() && r < hi) cuts.push_back(r);
    cuts.push_back(hi);
    std::vector<SignSegment> segs;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        double v = p.eval(mid);
        int sign = (v > 0.0) ? 1 : (v < 0.0 ? -1 : 0);
        segs.push_back({cuts[i], cuts[i + 1], sign});
    }
    return segs;
}

} // namespace detail

class SpectralMeasure {
  public:
    SpectralMeasure(std::vector<ExponentAtom> atoms,
                    std::vector<DensityPiece> density,
                    double split_point)
        : atoms_(std::move(atoms)), density_(std::move(density)), s_bar_(split_point) {
        if (!(s_bar_ > 0.0 && s_bar_ <= 1.0))
            throw ConfigError("measure: split point s_bar must lie in (0, 1]");
        for (const auto &a : atoms_) {
            if (!(a.s >= 0.0 && a.s <= 1.0))
                throw ConfigError("measure: atom exponent outside [0, 1]");
            if (a.c == 0.0)
                throw ConfigError("measure: zero-weight atoms are rejected");
            if (!std::isfinite(a.c) || !std::isfinite(a.s))
                throw ConfigError("measure: non-finite atom");
        }
        std::vector<double> exps;
        for (const auto &a : atoms_) exps.push_back(a.s);
        std::sort(exps.begin(), exps.end());
        if (std::adjacent_find(exps.begin(), exps.end()) != exps.end())
            throw ConfigError("measure: duplicate atom exponents");
        double prev_hi = -1.0;
        auto sorted = density_;
        std::sort(sorted.begin(), sorted.end(),
                  [](const DensityPiece &l, const DensityPiece &r) { return l.lo < r.lo; });
        for (const auto &p : sorted) {
            if (!(p.lo >= 0.0 && p.hi <= 1.0 && p.lo < p.hi))
                throw ConfigError("measure: density piece interval must satisfy 0 <= lo < hi <= 1");
            if (p.lo < prev_hi)
                throw ConfigError("measure: overlapping density pieces");
            prev_hi = p.hi;
            if (p.coeffs.empty())
                throw ConfigError("measure: density piece without coefficients");
            for (double c : p.coeffs)
                if (!std::isfinite(c))
                    throw ConfigError("measure: non-finite density coefficient");
        }
        density_ = std::move(sorted);
    }

    static SpectralMeasure single_atom(double s, double c, double s_bar) {
        return SpectralMeasure({{s, c}}, {}, s_bar);
    }

    const std::vector<ExponentAtom> &atoms() const { return atoms_; }
    const std::vector<DensityPiece> &density() const { return density_; }
    double split_point() const { return s_bar_; }

    double density_value(double s) const {
        for (const auto &p : density_)
            if (s >= p.lo && s <= p.hi) return p.eval(s);
        return 0.0;
    }

    bool has_density() const { return !density_.empty(); }

  private:
    std::vector<ExponentAtom> atoms_;
    std::vector<DensityPiece> density_;
    double s_bar_;
};

// One nonnegative half of a Jordan decomposition. Densities are stored as
// clipped views of the original pieces so that (positive - negative)
// reproduces the input density pointwise and exactly.
struct JordanPart {
    std::vector<ExponentAtom> atoms;        // all weights > 0
    std::vector<DensityPiece> base_pieces;  // original piece polynomials
    int clip_sign = +1;                     // evaluates max(clip_sign * p, 0)

    double density_value(double s) const {
        for (const auto &p : base_pieces)
            if (s >= p.lo && s <= p.hi)
                return std::max(clip_sign * p.eval(s), 0.0);
        return 0.0;
    }

    // Exact mass of the clipped density on [x, y].
    double density_mass(double x, double y) const {
        double total = 0.0;
        for (const auto &p : base_pieces) {
            double lo = std::max(x, p.lo), hi = std::min(y, p.hi);
            if (lo >= hi) continue;
            for (const auto &seg : detail::sign_segments(p, lo, hi))
                if (seg.sign == clip_sign)
                    total += clip_sign * p.integral(seg.lo, seg.hi);
        }
        return total;
    }

    // Atom mass on the closed interval [x, y].
    double atom_mass(double x, double y) const {
        double total = 0.0;
        for (const auto &a : atoms)
            if (a.s >= x && a.s <= y) total += a.c;
        return total;
    }

    double mass(double x, double y) const { return atom_mass(x, y) + density_mass(x, y); }
};

struct JordanDecomposition {
    JordanPart positive;
    JordanPart negative;
};

inline JordanDecomposition decompose(const SpectralMeasure &measure) {
    JordanDecomposition jd;
    jd.positive.clip_sign = +1;
    jd.negative.clip_sign = -1;
    for (const auto &a : measure.atoms()) {
        if (a.c > 0.0) jd.positive.atoms.push_back(a);
        else jd.negative.atoms.push_back({a.s, -a.c});
    }
    jd.positive.base_pieces = measure.density();
    jd.negative.base_pieces = measure.density();
    return jd;
}

struct MeasureReport {
    double gamma = 0.0;          // mu-([0, s_bar]) / mu+([s_bar, 1]), minimal
    double s_sharp = 0.0;        // upper endpoint of supp mu+|[s_bar, 1]
    double mass_plus_high = 0.0; // mu+([s_bar, 1])
    double mass_minus_low = 0.0; // mu-([0, s_bar])
    double mass_from_s_sharp = 0.0;
    bool positive_high_mass = false;   // (H1)
    bool negative_part_confined = false; // (H2)
    bool negative_mass_controlled = false; // (H3)

    bool all_pass() const {
        return positive_high_mass && negative_part_confined && negative_mass_controlled;
    }
};

inline MeasureReport validate_hypotheses(const SpectralMeasure &measure) {
    const JordanDecomposition jd = decompose(measure);
    const double s_bar = measure.split_point();

    MeasureReport rep;
    rep.mass_plus_high = jd.positive.mass(s_bar, 1.0);
    rep.mass_minus_low = jd.negative.mass(0.0, s_bar);
    rep.positive_high_mass = rep.mass_plus_high > 0.0;

    const double high_neg = jd.negative.mass(s_bar, 1.0);
    rep.negative_part_confined = high_neg <= 1e-14 * std::max(1.0, rep.mass_minus_low);

    if (rep.positive_high_mass) {
        rep.gamma = rep.mass_minus_low / rep.mass_plus_high;
        rep.negative_mass_controlled = std::isfinite(rep.gamma) && rep.gamma >= 0.0;
    } else {
        rep.gamma = rep.mass_minus_low > 0.0
                        ? std::numeric_limits<double>::infinity()
                        : 0.0;
        rep.negative_mass_controlled = rep.mass_minus_low == 0.0;
    }

    // s_sharp: largest positive atom in [s_bar, 1], or the supremum of the
    // positive-density support there when the density reaches further.
    double cand = s_bar;
    bool found = false;
    for (const auto &a : jd.positive.atoms)
        if (a.s >= s_bar && (!found || a.s > cand)) { cand = a.s; found = true; }
    for (const auto &p : measure.density()) {
        double lo = std::max(s_bar, p.lo), hi = std::min(1.0, p.hi);
        if (lo >= hi) continue;
        for (const auto &seg : detail::sign_segments(p, lo, hi))
            if (seg.sign == +1 && (!found || seg.hi > cand)) { cand = seg.hi; found = true; }
    }
    rep.s_sharp = found ? cand : s_bar;
    rep.mass_from_s_sharp = jd.positive.mass(rep.s_sharp, 1.0);
    return rep;
}

// Finite atom list for assembly: input atoms pass through; each density piece
// is replaced by Gauss-Legendre nodes with signed weights w = gauss_w * p(node),
// exact for polynomial pieces of degree <= 2 * order - 1.
inline std::vector<ExponentAtom> to_atoms(const SpectralMeasure &measure, int quadrature_order) {
    if (quadrature_order < 1)
        throw std::invalid_argument("to_atoms: quadrature order must be >= 1");
    std::vector<ExponentAtom> out = measure.atoms();
    for (const auto &p : measure.density()) {
        GaussRule rule = gauss_legendre(quadrature_order, p.lo, p.hi);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            double w = rule.weights[i] * p.eval(rule.nodes[i]);
            if (w != 0.0) out.push_back({rule.nodes[i], w});
        }
    }
    return out;
}

struct SeriesResult {
    SpectralMeasure measure;
    double dropped_tail = 0.0; // estimated absolute mass of unsupplied terms
    MeasureReport report;
    int zero_terms_dropped = 0;
};

// Truncated atomic measure for a coefficient series sum_k c_k at strictly
// decreasing exponents. The unsupplied tail is estimated from the trailing
// geometric ratio of |c_k| and must stay below tail_tolerance.
inline SeriesResult series_measure(const std::vector<double> &coefficients,
                                   const std::vector<double> &exponents,
                                   double tail_tolerance,
                                   double s_bar) {
    if (coefficients.size() != exponents.size())
        throw ConfigError("series_measure: coefficient/exponent length mismatch");
    if (coefficients.empty())
        throw ConfigError("series_measure: empty series");
    if (!(tail_tolerance > 0.0))
        throw ConfigError("series_measure: tail tolerance must be positive");
    for (std::size_t i = 0; i + 1 < exponents.size(); ++i)
        if (!(exponents[i] > exponents[i + 1]))
            throw ConfigError("series_measure: exponents must be strictly decreasing");

    std::vector<ExponentAtom> atoms;
    int dropped_zeros = 0;
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
        if (coefficients[i] == 0.0) { ++dropped_zeros; continue; }
        atoms.push_back({exponents[i], coefficients[i]});
    }
    if (atoms.empty())
        throw ConfigError("series_measure: all coefficients are zero");

    double tail = 0.0;
    if (atoms.size() >= 2) {
        double ratio = 0.0;
        std::size_t pairs = std::min<std::size_t>(5, atoms.size() - 1);
        for (std::size_t i = atoms.size() - pairs; i < atoms.size(); ++i)
            ratio = std::max(ratio, std::abs(atoms[i].c) / std::abs(atoms[i - 1].c));
        if (ratio >= 1.0)
            throw NumericalError("series_measure: trailing coefficients are not contractive; "
                                 "cannot bound the dropped tail");
        tail = std::abs(atoms.back().c) * ratio / (1.0 - ratio);
    }
    if (tail > tail_tolerance)
        throw NumericalError("series_measure: estimated dropped tail " + std::to_string(tail) +
                             " exceeds tolerance");

    SeriesResult res{SpectralMeasure(std::move(atoms), {}, s_bar), tail, {}, dropped_zeros};
    res.report = validate_hypotheses(res.measure);
    return res;
}

} // namespace musolve
