#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "musolve/errors.hpp"

// Asymptotically linear nonlinearities f(t): odd, with
//
//   f(t)/t -> lambda0 != 0   as t -> 0
//   f(t)/t -> 0              as |t| -> infinity
//
// Built-in kinds:
//   rational_decay : f(t) = lambda0 t / (1 + t^2),   F(t) = (lambda0/2) ln(1+t^2)
//   gaussian_decay : f(t) = lambda0 t exp(-t^2),     F(t) = (lambda0/2)(1 - exp(-t^2))
//   table          : odd piecewise-linear interpolant of user samples on [0, t_max],
//                    clamped (or linearly extrapolated) beyond the last knot
//
// check_growth certifies the sublinear bound |f(t)| <= eps |t| + a_eps on a
// log-spaced grid and flags nonlinearities whose excess is still growing at
// the far end of the grid (linear-at-infinity behavior).

namespace musolve {

enum class NonlinearityKind { rational_decay, gaussian_decay, table };

enum class TableExtension { clamp, linear };

struct Nonlinearity {
    NonlinearityKind kind = NonlinearityKind::rational_decay;
    double lambda0 = -1.0;   // slope at the origin, nonzero
    double lambda_bar = 0.0; // linear shift of the problem
    bool odd = true;

    // table kind only
    std::vector<double> knots;  // 0 < t_1 < ... < t_K
    std::vector<double> values; // f(t_i), with f(0) = 0 implied
    TableExtension extension = TableExtension::clamp;

    static Nonlinearity rational(double lambda0, double lambda_bar) {
        require_lambda0(lambda0);
        Nonlinearity nl;
        nl.kind = NonlinearityKind::rational_decay;
        nl.lambda0 = lambda0;
        nl.lambda_bar = lambda_bar;
        return nl;
    }

    static Nonlinearity gaussian(double lambda0, double lambda_bar) {
        require_lambda0(lambda0);
        Nonlinearity nl;
        nl.kind = NonlinearityKind::gaussian_decay;
        nl.lambda0 = lambda0;
        nl.lambda_bar = lambda_bar;
        return nl;
    }

    static Nonlinearity tabulated(std::vector<double> knots, std::vector<double> values,
                                  double lambda0, double lambda_bar,
                                  TableExtension ext = TableExtension::clamp) {
        require_lambda0(lambda0);
        if (knots.empty() || knots.size() != values.size())
            throw ConfigError("nonlinearity: table needs matching, nonempty knots/values");
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (!(knots[i] > (i == 0 ? 0.0 : knots[i - 1])))
                throw ConfigError("nonlinearity: table knots must be positive and increasing");
            if (!std::isfinite(values[i]))
                throw ConfigError("nonlinearity: non-finite table value");
        }
        Nonlinearity nl;
        nl.kind = NonlinearityKind::table;
        nl.lambda0 = lambda0;
        nl.lambda_bar = lambda_bar;
        nl.knots = std::move(knots);
        nl.values = std::move(values);
        nl.extension = ext;
        return nl;
    }

    double f(double t) const {
        switch (kind) {
        case NonlinearityKind::rational_decay:
            return lambda0 * t / (1.0 + t * t);
        case NonlinearityKind::gaussian_decay:
            return lambda0 * t * std::exp(-t * t);
        case NonlinearityKind::table:
            return table_f(t);
        }
        return 0.0;
    }

    double fprime(double t) const {
        switch (kind) {
        case NonlinearityKind::rational_decay: {
            const double d = 1.0 + t * t;
            return lambda0 * (1.0 - t * t) / (d * d);
        }
        case NonlinearityKind::gaussian_decay:
            return lambda0 * (1.0 - 2.0 * t * t) * std::exp(-t * t);
        case NonlinearityKind::table:
            return table_slope(std::abs(t));
        }
        return 0.0;
    }

    // Primitive F(t) = int_0^t f; even for odd f.
    double F(double t) const {
        switch (kind) {
        case NonlinearityKind::rational_decay:
            return 0.5 * lambda0 * std::log1p(t * t);
        case NonlinearityKind::gaussian_decay:
            return 0.5 * lambda0 * (1.0 - std::exp(-t * t));
        case NonlinearityKind::table:
            return table_F(std::abs(t));
        }
        return 0.0;
    }

  private:
    static void require_lambda0(double lambda0) {
        if (lambda0 == 0.0 || !std::isfinite(lambda0))
            throw ConfigError("nonlinearity: lambda0 must be finite and nonzero");
    }

    double table_f(double t) const {
        const double sign = t < 0.0 ? -1.0 : 1.0;
        const double x = std::abs(t);
        double prev_t = 0.0, prev_v = 0.0;
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (x <= knots[i]) {
                const double w = (x - prev_t) / (knots[i] - prev_t);
                return sign * (prev_v + w * (values[i] - prev_v));
            }
            prev_t = knots[i];
            prev_v = values[i];
        }
        if (extension == TableExtension::clamp) return sign * values.back();
        return sign * (values.back() + table_last_slope() * (x - knots.back()));
    }

    double table_slope(double x) const {
        double prev_t = 0.0, prev_v = 0.0;
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (x <= knots[i]) return (values[i] - prev_v) / (knots[i] - prev_t);
            prev_t = knots[i];
            prev_v = values[i];
        }
        return extension == TableExtension::clamp ? 0.0 : table_last_slope();
    }

    double table_last_slope() const {
        if (knots.size() == 1) return values[0] / knots[0];
        const std::size_t k = knots.size() - 1;
        return (values[k] - values[k - 1]) / (knots[k] - knots[k - 1]);
    }

    double table_F(double x) const {
        double acc = 0.0, prev_t = 0.0, prev_v = 0.0;
        for (std::size_t i = 0; i < knots.size(); ++i) {
            const double t1 = std::min(x, knots[i]);
            if (t1 > prev_t) {
                const double w = (t1 - prev_t) / (knots[i] - prev_t);
                const double v1 = prev_v + w * (values[i] - prev_v);
                acc += 0.5 * (prev_v + v1) * (t1 - prev_t);
            }
            if (x <= knots[i]) return acc;
            prev_t = knots[i];
            prev_v = values[i];
        }
        const double dx = x - prev_t;
        if (extension == TableExtension::clamp) return acc + prev_v * dx;
        const double vx = prev_v + table_last_slope() * dx;
        return acc + 0.5 * (prev_v + vx) * dx;
    }
};

struct GrowthBound {
    double a_epsilon = 0.0;
    bool sublinear_violated = false; // excess still growing at the grid edge
    double argmax = 0.0;
};

// Empirical constant for |f(t)| <= eps |t| + a_eps over a log-spaced grid up
// to |t| = 1e6. If the excess |f| - eps|t| keeps increasing at the far end,
// the decay hypothesis fails and the bound is flagged.
inline GrowthBound check_growth(const Nonlinearity &nl, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("check_growth: epsilon must be positive");
    const int samples = 4000;
    GrowthBound bound;
    double last_excess = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const double t = (i == 0) ? 0.0 : std::pow(10.0, -8.0 + 14.0 * (i - 1.0) / (samples - 1.0));
        const double excess = std::abs(nl.f(t)) - epsilon * t;
        if (excess > bound.a_epsilon) {
            bound.a_epsilon = excess;
            bound.argmax = t;
        }
        last_excess = excess;
    }
    bound.a_epsilon = std::max(bound.a_epsilon, 0.0);
    if (last_excess > 0.0 && last_excess >= bound.a_epsilon * (1.0 - 1e-12))
        bound.sublinear_violated = true;
    return bound;
}

struct AsymptoticCertificates {
    double sup_small = 0.0;       // sup |f| on |t| <= tau_max (local boundedness)
    double decay_threshold = 0.0; // |f(t)/t| <= tol for |t| >= this (inf if never)
    double origin_slope_dev = 0.0; // max |f(t)/t - lambda0| on 0 < |t| <= t_check
    bool bounded_on_compacts = false;
    bool decays_at_infinity = false;
    bool slope_matches_at_zero = false;
};

inline AsymptoticCertificates certify_asymptotics(const Nonlinearity &nl, double tol = 1e-2,
                                                  double tau_max = 1e3, double t_check = 1e-4) {
    AsymptoticCertificates cert;
    const int samples = 2000;
    for (int i = 1; i <= samples; ++i) {
        const double t = tau_max * i / samples;
        cert.sup_small = std::max(cert.sup_small, std::abs(nl.f(t)));
    }
    cert.bounded_on_compacts = std::isfinite(cert.sup_small);

    cert.decay_threshold = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= samples; ++i) {
        const double t = std::pow(10.0, -2.0 + 10.0 * i / samples); // 1e-2 .. 1e8
        if (std::abs(nl.f(t) / t) <= tol) {
            bool holds_beyond = true;
            for (int j = i; j <= samples; ++j) {
                const double u = std::pow(10.0, -2.0 + 10.0 * j / samples);
                if (std::abs(nl.f(u) / u) > tol) { holds_beyond = false; break; }
            }
            if (holds_beyond) { cert.decay_threshold = t; break; }
        }
    }
    cert.decays_at_infinity = std::isfinite(cert.decay_threshold);

    for (int i = 1; i <= 100; ++i) {
        const double t = t_check * i / 100.0;
        cert.origin_slope_dev = std::max(cert.origin_slope_dev, std::abs(nl.f(t) / t - nl.lambda0));
    }
    cert.slope_matches_at_zero = cert.origin_slope_dev <= tol * std::max(1.0, std::abs(nl.lambda0));
    return cert;
}

} // namespace musolve
