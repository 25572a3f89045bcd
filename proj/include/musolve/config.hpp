#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "musolve/assembly.hpp"
#include "musolve/errors.hpp"
#include "musolve/measure.hpp"
#include "musolve/nonlinearity.hpp"

// Run configuration: a JSON file with explicit sections
//
//   domain        { a, b, n_interior }
//   measure       { atoms: [{s, c}...], density: [{interval: [lo,hi],
//                   poly_coeffs: [...]}, ...], s_bar, quadrature_order }
//   nonlinearity  { kind, lambda0, lambda_bar, table?, extension? }   (optional)
//   solver        { m, budget, tolerance, seed, distinct_tol,
//                   nontrivial_tol, deflation_radius, n_cap }
//   pipeline      "spectrum" | "certify" | "window" | "solve" | "convergence"
//   output_dir    path
//
// Unknown keys anywhere are rejected; defaults are filled in and echoed back
// by render(), and parse(render(c)) reproduces c exactly.

namespace musolve {

struct RunConfig {
    double a = 0.0;
    double b = 1.0;
    int n_interior = 128;

    std::vector<ExponentAtom> atoms;
    std::vector<DensityPiece> density;
    double s_bar = 1.0;
    int quadrature_order = 6;

    bool has_nonlinearity = false;
    std::string nl_kind = "rational_decay";
    double lambda0 = -1.0;
    double lambda_bar = 0.0;
    std::vector<double> table_knots;
    std::vector<double> table_values;
    std::string table_extension = "clamp";

    int m = 10;
    long long budget = 10000;
    double tolerance = 1e-8;
    std::uint64_t seed = 42;
    double distinct_tol = 1e-3;
    double nontrivial_tol = 0.0; // 0 -> derived from the domain length
    double deflation_radius = 0.05;
    int n_cap = 1024;

    std::string pipeline = "spectrum";
    std::string output_dir = "out";

    bool operator==(const RunConfig &) const = default;

    SpectralMeasure measure() const { return SpectralMeasure(atoms, density, s_bar); }
    DomainMesh mesh() const { return DomainMesh(a, b, n_interior); }

    Nonlinearity nonlinearity() const {
        if (!has_nonlinearity)
            throw ConfigError("config: pipeline requires a nonlinearity section");
        if (nl_kind == "rational_decay") return Nonlinearity::rational(lambda0, lambda_bar);
        if (nl_kind == "gaussian_decay") return Nonlinearity::gaussian(lambda0, lambda_bar);
        if (nl_kind == "table")
            return Nonlinearity::tabulated(table_knots, table_values, lambda0, lambda_bar,
                                           table_extension == "linear" ? TableExtension::linear
                                                                       : TableExtension::clamp);
        throw ConfigError("config: unknown nonlinearity kind '" + nl_kind + "'");
    }
};

namespace detail {

inline void check_keys(const nlohmann::json &j, const std::set<std::string> &allowed,
                       const std::string &context) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + context);
}

template <typename T>
T get_field(const nlohmann::json &j, const std::string &key, const std::string &context) {
    if (!j.contains(key))
        throw ConfigError("config: missing required key '" + key + "' in " + context);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config: bad value for '" + key + "' in " + context + ": " + e.what());
    }
}

template <typename T>
T get_or(const nlohmann::json &j, const std::string &key, const std::string &context, T fallback) {
    if (!j.contains(key)) return fallback;
    return get_field<T>(j, key, context);
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json &root) {
    using detail::check_keys;
    using detail::get_field;
    using detail::get_or;

    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(root, {"domain", "measure", "nonlinearity", "solver", "pipeline", "output_dir"},
               "top level");

    RunConfig cfg;

    const auto &dom = root.contains("domain")
                          ? root.at("domain")
                          : throw ConfigError("config: missing 'domain' section");
    check_keys(dom, {"a", "b", "n_interior"}, "domain");
    cfg.a = get_field<double>(dom, "a", "domain");
    cfg.b = get_field<double>(dom, "b", "domain");
    cfg.n_interior = get_field<int>(dom, "n_interior", "domain");
    if (!(cfg.a < cfg.b)) throw ConfigError("config: domain endpoints must satisfy a < b");

    const auto &meas = root.contains("measure")
                           ? root.at("measure")
                           : throw ConfigError("config: missing 'measure' section");
    check_keys(meas, {"atoms", "density", "s_bar", "quadrature_order"}, "measure");
    cfg.s_bar = get_field<double>(meas, "s_bar", "measure");
    cfg.quadrature_order = get_or<int>(meas, "quadrature_order", "measure", 6);
    if (cfg.quadrature_order < 1 || cfg.quadrature_order > 64)
        throw ConfigError("config: quadrature_order must be in [1, 64]");
    if (meas.contains("atoms")) {
        for (const auto &a : meas.at("atoms")) {
            check_keys(a, {"s", "c"}, "measure.atoms[]");
            const double s = get_field<double>(a, "s", "measure.atoms[]");
            const double c = get_field<double>(a, "c", "measure.atoms[]");
            if (!(s >= 0.0 && s <= 1.0))
                throw ConfigError("config: atom exponent outside [0,1]: s = " + std::to_string(s));
            if (c == 0.0) throw ConfigError("config: atom with zero weight");
            cfg.atoms.push_back({s, c});
        }
    }
    if (meas.contains("density")) {
        for (const auto &p : meas.at("density")) {
            check_keys(p, {"interval", "poly_coeffs"}, "measure.density[]");
            const auto interval =
                get_field<std::vector<double>>(p, "interval", "measure.density[]");
            if (interval.size() != 2)
                throw ConfigError("config: density interval must be [lo, hi]");
            DensityPiece piece;
            piece.lo = interval[0];
            piece.hi = interval[1];
            piece.coeffs = get_field<std::vector<double>>(p, "poly_coeffs", "measure.density[]");
            cfg.density.push_back(std::move(piece));
        }
    }
    if (cfg.atoms.empty() && cfg.density.empty())
        throw ConfigError("config: measure needs at least one atom or density piece");

    if (root.contains("nonlinearity")) {
        const auto &nl = root.at("nonlinearity");
        check_keys(nl, {"kind", "lambda0", "lambda_bar", "table", "extension"}, "nonlinearity");
        cfg.has_nonlinearity = true;
        cfg.nl_kind = get_field<std::string>(nl, "kind", "nonlinearity");
        cfg.lambda0 = get_field<double>(nl, "lambda0", "nonlinearity");
        cfg.lambda_bar = get_field<double>(nl, "lambda_bar", "nonlinearity");
        cfg.table_extension = get_or<std::string>(nl, "extension", "nonlinearity", "clamp");
        if (cfg.table_extension != "clamp" && cfg.table_extension != "linear")
            throw ConfigError("config: nonlinearity extension must be 'clamp' or 'linear'");
        if (nl.contains("table")) {
            const auto &tab = nl.at("table");
            check_keys(tab, {"knots", "values"}, "nonlinearity.table");
            cfg.table_knots = get_field<std::vector<double>>(tab, "knots", "nonlinearity.table");
            cfg.table_values = get_field<std::vector<double>>(tab, "values", "nonlinearity.table");
        }
        cfg.nonlinearity(); // constructor performs the semantic checks
    }

    if (root.contains("solver")) {
        const auto &sol = root.at("solver");
        check_keys(sol,
                   {"m", "budget", "tolerance", "seed", "distinct_tol", "nontrivial_tol",
                    "deflation_radius", "n_cap"},
                   "solver");
        cfg.m = get_or<int>(sol, "m", "solver", cfg.m);
        cfg.budget = get_or<long long>(sol, "budget", "solver", cfg.budget);
        cfg.tolerance = get_or<double>(sol, "tolerance", "solver", cfg.tolerance);
        cfg.seed = get_or<std::uint64_t>(sol, "seed", "solver", cfg.seed);
        cfg.distinct_tol = get_or<double>(sol, "distinct_tol", "solver", cfg.distinct_tol);
        cfg.nontrivial_tol = get_or<double>(sol, "nontrivial_tol", "solver", cfg.nontrivial_tol);
        cfg.deflation_radius =
            get_or<double>(sol, "deflation_radius", "solver", cfg.deflation_radius);
        cfg.n_cap = get_or<int>(sol, "n_cap", "solver", cfg.n_cap);
    }
    if (cfg.m < 1) throw ConfigError("config: solver.m must be >= 1");
    if (cfg.budget < 1) throw ConfigError("config: solver.budget must be >= 1");
    if (!(cfg.tolerance > 0.0)) throw ConfigError("config: solver.tolerance must be positive");
    if (!(cfg.distinct_tol > 0.0)) throw ConfigError("config: solver.distinct_tol must be positive");
    if (cfg.nontrivial_tol < 0.0)
        throw ConfigError("config: solver.nontrivial_tol must be nonnegative");
    if (!(cfg.deflation_radius > 0.0))
        throw ConfigError("config: solver.deflation_radius must be positive");
    if (cfg.n_cap < 1) throw ConfigError("config: solver.n_cap must be >= 1");
    if (cfg.n_interior < 1 || cfg.n_interior > cfg.n_cap)
        throw ConfigError("config: n_interior must lie in [1, " + std::to_string(cfg.n_cap) + "]");

    cfg.pipeline = get_or<std::string>(root, "pipeline", "top level", cfg.pipeline);
    static const std::set<std::string> pipelines{"spectrum", "certify", "window", "solve",
                                                 "convergence"};
    if (!pipelines.count(cfg.pipeline))
        throw ConfigError("config: unknown pipeline '" + cfg.pipeline + "'");
    if ((cfg.pipeline == "window" || cfg.pipeline == "solve") && !cfg.has_nonlinearity)
        throw ConfigError("config: pipeline '" + cfg.pipeline + "' requires a nonlinearity");

    cfg.output_dir = get_or<std::string>(root, "output_dir", "top level", cfg.output_dir);

    cfg.measure(); // triggers the remaining measure invariant checks
    return cfg;
}

inline nlohmann::json render(const RunConfig &cfg) {
    nlohmann::json j;
    j["domain"] = {{"a", cfg.a}, {"b", cfg.b}, {"n_interior", cfg.n_interior}};
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto &a : cfg.atoms) atoms.push_back({{"s", a.s}, {"c", a.c}});
    nlohmann::json density = nlohmann::json::array();
    for (const auto &p : cfg.density)
        density.push_back(
            {{"interval", {p.lo, p.hi}}, {"poly_coeffs", p.coeffs}});
    j["measure"] = {{"atoms", atoms},
                    {"density", density},
                    {"s_bar", cfg.s_bar},
                    {"quadrature_order", cfg.quadrature_order}};
    if (cfg.has_nonlinearity) {
        nlohmann::json nl = {{"kind", cfg.nl_kind},
                             {"lambda0", cfg.lambda0},
                             {"lambda_bar", cfg.lambda_bar},
                             {"extension", cfg.table_extension}};
        if (!cfg.table_knots.empty())
            nl["table"] = {{"knots", cfg.table_knots}, {"values", cfg.table_values}};
        j["nonlinearity"] = nl;
    }
    j["solver"] = {{"m", cfg.m},
                   {"budget", cfg.budget},
                   {"tolerance", cfg.tolerance},
                   {"seed", cfg.seed},
                   {"distinct_tol", cfg.distinct_tol},
                   {"nontrivial_tol", cfg.nontrivial_tol},
                   {"deflation_radius", cfg.deflation_radius},
                   {"n_cap", cfg.n_cap}};
    j["pipeline"] = cfg.pipeline;
    j["output_dir"] = cfg.output_dir;
    return j;
}

inline RunConfig parse_config_text(const std::string &text, const std::string &origin) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return config_from_json(root);
}

inline RunConfig parse_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, path.string());
}

} // namespace musolve
