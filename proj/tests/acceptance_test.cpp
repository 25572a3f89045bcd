// Acceptance suite: one test per shipped criterion, each printing a
// [ACCEPTANCE] line with the measured quantities. Tolerances are fixed here,
// not tuned at runtime.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "musolve/pipeline.hpp"
#include "musolve/rng.hpp"

using namespace musolve;
namespace fs = std::filesystem;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point &t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunConfig load_config(const std::string &name) {
    return parse_config(fs::path(MUSOLVE_CONFIG_DIR) / name);
}

fs::path fresh_dir(const std::string &tag) {
    const fs::path dir = fs::temp_directory_path() / ("musolve_acceptance_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void announce(int criterion, const std::string &name, bool pass, const std::string &detail) {
    std::printf("[ACCEPTANCE] criterion %2d (%s): %s -- %s\n", criterion, name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

} // namespace

TEST(Acceptance, Criterion01ClassicalLimit) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = load_config("laplace_0_pi.json");
    ASSERT_EQ(cfg.n_interior, 512);
    const fs::path dir = fresh_dir("classical");
    run_pipeline(cfg, dir); // full pipeline; read the eigenvalues back from the CSV
    std::istringstream csv(slurp(dir / "spectrum.csv"));
    std::string line;
    std::getline(csv, line); // header
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
        ASSERT_TRUE(std::getline(csv, line));
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        int idx, cluster;
        double lambda, residual;
        row >> idx >> lambda >> residual >> cluster;
        const double exact = (k + 1.0) * (k + 1.0);
        worst = std::max(worst, std::abs(lambda - exact) / exact);
    }
    const double elapsed = seconds_since(t0);
    const bool pass = worst <= 0.01 && elapsed < 30.0;
    announce(1, "classical limit", pass,
             "worst relative eigenvalue error " + format_g17(worst) + ", " +
                 std::to_string(elapsed) + " s");
    EXPECT_LE(worst, 0.01);
    EXPECT_LT(elapsed, 30.0);
}

TEST(Acceptance, Criterion02GetoorConvergence) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    for (double s : {0.25, 0.5, 0.75}) {
        std::vector<double> errors;
        for (int n : {64, 128, 256, 512}) {
            DomainMesh mesh(-1.0, 1.0, n);
            const Matrix k = assemble_fractional_stiffness(mesh, s);
            const Matrix m = assemble_mass(mesh);
            const Vector u = k.ldlt().solve(Vector(m * Vector::Ones(n)));
            Vector exact(n);
            for (int i = 0; i < n; ++i) {
                const double x = mesh.node(i);
                exact[i] = std::pow(std::max(0.0, 1.0 - x * x), s) / std::tgamma(2.0 * s + 1.0);
            }
            const Vector diff = u - exact;
            errors.push_back(std::sqrt(diff.dot(m * diff)));
        }
        bool monotone = errors[1] < errors[0] && errors[2] < errors[1] && errors[3] < errors[2];
        const double ratio = errors[2] / errors[0];
        pass = pass && monotone && ratio <= 0.5;
        detail += "s=" + std::to_string(s) + " ratio256/64=" + std::to_string(ratio) + " ";
        EXPECT_TRUE(monotone) << "s = " << s;
        EXPECT_LE(ratio, 0.5) << "s = " << s;
    }
    const double elapsed = seconds_since(t0);
    pass = pass && elapsed < 120.0;
    announce(2, "getoor convergence", pass, detail + std::to_string(elapsed) + " s");
    EXPECT_LT(elapsed, 120.0);
}

TEST(Acceptance, Criterion03SuperpositionLinearity) {
    DomainMesh mesh(0.0, M_PI, 128);
    auto op = assemble_operator(mesh, {{0.3, 1.0}, {0.7, 1.0}}, 0.25);
    const Matrix expected =
        assemble_fractional_stiffness(mesh, 0.3) + assemble_fractional_stiffness(mesh, 0.7);
    const double rel =
        (op.K - expected).cwiseAbs().maxCoeff() / expected.cwiseAbs().maxCoeff();
    const bool pass = rel <= 1e-12;
    announce(3, "superposition linearity", pass, "entrywise relative error " + format_g17(rel));
    EXPECT_LE(rel, 1e-12);
}

TEST(Acceptance, Criterion04ReabsorptionCertificate) {
    DomainMesh mesh(0.0, M_PI, 256);
    auto op_at = [&](double alpha) {
        return assemble_operator(mesh, {{1.0, 1.0}, {0.25, -alpha}}, 0.5);
    };
    auto op = op_at(0.1);
    const CoercivityCertificate cert = coercivity_certificate(op);
    ASSERT_TRUE(cert.passes);

    bool sandwich = true;
    Rng rng(73);
    for (int draw = 0; draw < 1000; ++draw) {
        Vector u(op.size());
        for (int i = 0; i < op.size(); ++i) u[i] = rng.gaussian();
        const double plus = u.dot(op.K_plus * u);
        const double mid = u.dot(op.K * u);
        sandwich = sandwich && mid >= (1.0 - cert.c0_gamma) * plus - 1e-10 * plus &&
                   mid <= plus + 1e-10 * plus;
    }
    const double ratio =
        coercivity_certificate(op_at(0.2)).c0_gamma / cert.c0_gamma;
    const bool linear = std::abs(ratio - 2.0) <= 1e-10;
    Spectrum sp = solve_spectrum(op, 1);
    const bool positive = sp.eigenvalues[0] > 0.0;

    const bool pass = sandwich && linear && positive;
    announce(4, "reabsorption certificate", pass,
             "c0_gamma = " + format_g17(cert.c0_gamma) + ", alpha-linearity ratio " +
                 format_g17(ratio) + ", lambda_1 = " + format_g17(sp.eigenvalues[0]));
    EXPECT_TRUE(sandwich);
    EXPECT_NEAR(ratio, 2.0, 1e-10);
    EXPECT_GT(sp.eigenvalues[0], 0.0);
}

TEST(Acceptance, Criterion05RayleighCharacterization) {
    const std::vector<std::vector<ExponentAtom>> measures = {
        {{1.0, 1.0}}, {{1.0, 1.0}, {0.25, -0.1}}};
    double worst_dev = 0.0, worst_vec = 0.0;
    for (const auto &atoms : measures) {
        DomainMesh mesh(0.0, M_PI, 512);
        auto op = assemble_operator(mesh, atoms, 0.5);
        Spectrum sp = solve_spectrum(op, 12);
        for (int k = 0; k < 10; ++k) {
            const RayleighCheck chk = rayleigh_verify(sp, op, k);
            worst_dev = std::max(worst_dev, chk.deviation);
            if (chk.vector_error) worst_vec = std::max(worst_vec, *chk.vector_error);
            EXPECT_LE(chk.deviation, 1e-8) << "k = " << k;
            if (chk.vector_error) EXPECT_LE(*chk.vector_error, 1e-6) << "k = " << k;
        }
    }
    const bool pass = worst_dev <= 1e-8 && worst_vec <= 1e-6;
    announce(5, "rayleigh characterization", pass,
             "worst deviation " + format_g17(worst_dev) + ", worst eigenvector mismatch " +
                 format_g17(worst_vec));
}

TEST(Acceptance, Criterion06DominationStability) {
    const std::vector<double> exps{0.0, 0.25, 0.5, 0.75, 1.0};
    bool pass = true;
    double worst_drift = 0.0;
    for (std::size_t i = 0; i < exps.size(); ++i)
        for (std::size_t j = i; j < exps.size(); ++j) {
            double c64 = 0.0, c128 = 0.0;
            for (int n : {64, 128}) {
                DomainMesh mesh(0.0, M_PI, n);
                const double c = domination_constant(
                    assemble_fractional_stiffness(mesh, exps[i]),
                    assemble_fractional_stiffness(mesh, exps[j]));
                pass = pass && std::isfinite(c);
                EXPECT_TRUE(std::isfinite(c));
                (n == 64 ? c64 : c128) = c;
            }
            const double drift = std::abs(c128 - c64) / c64;
            worst_drift = std::max(worst_drift, drift);
            pass = pass && drift < 0.10;
            EXPECT_LT(drift, 0.10) << exps[i] << " vs " << exps[j];
        }
    announce(6, "domination stability", pass, "worst refinement drift " + format_g17(worst_drift));
}

TEST(Acceptance, Criterion07GradientEnergyConsistency) {
    DomainMesh mesh(0.0, M_PI, 64);
    auto op = assemble_operator(mesh, {{1.0, 1.0}}, 0.5);
    Nonlinearity nl = Nonlinearity::rational(-7.0, 10.0);
    Rng rng(17);
    double worst_fd = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const double scale = std::pow(10.0, -2.0 + 4.0 * rng.uniform());
        Vector u(64), v(64);
        for (int i = 0; i < 64; ++i) {
            u[i] = scale * rng.gaussian();
            v[i] = rng.gaussian();
        }
        v /= v.norm();
        const double eps = 1e-6 * std::max(1.0, scale);
        const double fd =
            (energy(op, nl, Vector(u + eps * v)) - energy(op, nl, Vector(u - eps * v))) /
            (2.0 * eps);
        const double directional = v.dot(gradient(op, nl, u));
        worst_fd = std::max(worst_fd,
                            std::abs(fd - directional) / (1.0 + std::abs(directional)));
    }
    double worst_even = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Vector u(64);
        for (int i = 0; i < 64; ++i) u[i] = 3.0 * rng.gaussian();
        const double jp = energy(op, nl, u), jm = energy(op, nl, Vector(-u));
        worst_even = std::max(worst_even, std::abs(jp - jm) / (1.0 + std::abs(jp)));
        const Vector gp = gradient(op, nl, u), gm = gradient(op, nl, Vector(-u));
        worst_even = std::max(worst_even, (gp + gm).norm() / (1.0 + gp.norm()));
    }
    const bool pass = worst_fd <= 1e-5 && worst_even <= 1e-12;
    announce(7, "gradient/energy consistency", pass,
             "worst finite-difference error " + format_g17(worst_fd) + ", worst parity defect " +
                 format_g17(worst_even));
    EXPECT_LE(worst_fd, 1e-5);
    EXPECT_LE(worst_even, 1e-12);
}

TEST(Acceptance, Criterion08Multiplicity) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = load_config("multiplicity_sample.json");
    ASSERT_EQ(cfg.pipeline, "solve");
    ASSERT_EQ(cfg.budget, 10000);
    auto op = assemble_operator(cfg.mesh(), to_atoms(cfg.measure(), cfg.quadrature_order),
                                cfg.s_bar);
    Spectrum sp = solve_spectrum(op, cfg.m);
    Nonlinearity nl = cfg.nonlinearity();
    WindowReport window = lambda_window(sp, nl);
    EXPECT_TRUE(window.present);
    EXPECT_EQ(window.h, 2);
    EXPECT_EQ(window.k, 3);
    EXPECT_EQ(window.pairs_predicted(), 2);

    MinimaxOptions opts;
    opts.budget = cfg.budget;
    opts.residual_tol = cfg.tolerance;
    opts.distinct_tol = cfg.distinct_tol;
    opts.deflation_radius = cfg.deflation_radius;
    opts.seed = cfg.seed;
    MinimaxReport rep = find_pairs(op, nl, sp, window, opts);

    bool residuals_ok = true, band_ok = true, pairing_ok = true;
    for (const auto &sol : rep.solutions) {
        const double scale = 1.0 + (op.K * sol.u).norm();
        residuals_ok =
            residuals_ok && gradient(op, nl, sol.u).norm() <= 1e-8 * scale;
        band_ok = band_ok && sol.in_band;
    }
    for (int pair = 0; pair < rep.pairs_found; ++pair) {
        const Vector &up = rep.solutions[2 * pair].u;
        const Vector &um = rep.solutions[2 * pair + 1].u;
        pairing_ok = pairing_ok && (up + um).norm() == 0.0;
    }
    const double elapsed = seconds_since(t0);
    const bool pass = window.pairs_predicted() == 2 && rep.pairs_found >= 2 && residuals_ok &&
                      band_ok && pairing_ok && elapsed < 300.0;
    announce(8, "multiplicity", pass,
             "pairs " + std::to_string(rep.pairs_found) + "/" +
                 std::to_string(rep.pairs_predicted) + ", band [" + format_g17(rep.band.c0) +
                 ", " + format_g17(rep.band.c_inf) + "], " + std::to_string(elapsed) + " s");
    EXPECT_GE(rep.pairs_found, 2);
    EXPECT_TRUE(residuals_ok);
    EXPECT_TRUE(band_ok);
    EXPECT_TRUE(pairing_ok);
    EXPECT_LT(elapsed, 300.0);
}

TEST(Acceptance, Criterion09MirroredWindow) {
    RunConfig cfg = load_config("mirrored_window.json");
    auto op = assemble_operator(cfg.mesh(), to_atoms(cfg.measure(), cfg.quadrature_order),
                                cfg.s_bar);
    Spectrum sp = solve_spectrum(op, cfg.m);
    WindowReport window = lambda_window(sp, cfg.nonlinearity());
    const bool pass = window.present && window.variant == WindowVariant::mirrored &&
                      window.h == 2 && window.k == 2;
    announce(9, "mirrored window", pass,
             std::string("variant ") +
                 (window.variant == WindowVariant::mirrored ? "mirrored" : "standard") +
                 ", h = " + std::to_string(window.h) + ", k = " + std::to_string(window.k));
    EXPECT_TRUE(window.present);
    EXPECT_EQ(window.variant, WindowVariant::mirrored);
    EXPECT_EQ(window.h, 2);
    EXPECT_EQ(window.k, 2);
}

TEST(Acceptance, Criterion10Determinism) {
    RunConfig cfg = load_config("multiplicity_sample.json");
    cfg.n_interior = 96; // keep the double run quick; determinism is size-independent
    cfg.budget = 4000;
    const fs::path d1 = fresh_dir("det1");
    const fs::path d2 = fresh_dir("det2");
    RunRecord r1 = run_pipeline(cfg, d1);
    RunRecord r2 = run_pipeline(cfg, d2);
    bool pass = r1.manifest.size() == r2.manifest.size();
    ASSERT_EQ(r1.manifest.size(), r2.manifest.size());
    for (std::size_t i = 0; i < r1.manifest.size(); ++i) {
        const bool same_name = r1.manifest[i].path == r2.manifest[i].path;
        const bool same_hash = r1.manifest[i].hash == r2.manifest[i].hash;
        const bool same_bytes =
            slurp(d1 / r1.manifest[i].path) == slurp(d2 / r2.manifest[i].path);
        pass = pass && same_name && same_hash && same_bytes;
        EXPECT_TRUE(same_name && same_hash && same_bytes) << r1.manifest[i].path;
    }
    announce(10, "determinism", pass,
             std::to_string(r1.manifest.size()) + " files byte-identical across two runs");
}
