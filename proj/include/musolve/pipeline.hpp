#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "musolve/assembly.hpp"
#include "musolve/config.hpp"
#include "musolve/matrix_io.hpp"
#include "musolve/measure.hpp"
#include "musolve/minimax.hpp"
#include "musolve/spectral.hpp"

// Pipeline orchestration. Five pipelines share the front of the chain
// (measure validation, quadrature reduction, assembly):
//
//   spectrum     solve the pencil, verify the Rayleigh characterization
//   certify      coercivity certificate + domination constants
//   window       spectrum + eigenvalue window for the nonlinearity
//   solve        full chain through the multiplicity search
//   convergence  forced-problem benchmark over the mesh ladder 64..512
//
// Every run writes a RunRecord (config snapshot, version, normalization id,
// timestamps, manifest of produced files with content hashes). Timestamps
// live only in run_record.json; all other outputs are deterministic for a
// fixed config and seed. A failing module still gets a partial RunRecord
// with status "error:<module>" before the error propagates.

namespace musolve {

inline constexpr const char *kArtifactVersion = "musolve 1.0.0";

struct ManifestEntry {
    std::string path; // relative to the output directory
    std::string hash; // fnv1a64 hex
    std::uint64_t bytes = 0;
};

struct RunRecord {
    nlohmann::json config_snapshot;
    std::string artifact_version = kArtifactVersion;
    std::string normalization_id = kNormalizationId;
    std::string started_utc;
    std::string finished_utc;
    std::string pipeline;
    std::string status = "ok";
    std::string config_hash;
    nlohmann::json metadata;
    std::vector<ManifestEntry> manifest;
    std::filesystem::path output_dir;
};

namespace detail {

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline int log_level() {
    const char *env = std::getenv("MUSOLVE_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
}

inline void log_info(const std::string &msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[musolve] %s\n", msg.c_str());
}

} // namespace detail

class RunWriter {
  public:
    RunWriter(const RunConfig &cfg, std::filesystem::path outdir) : outdir_(std::move(outdir)) {
        record_.config_snapshot = render(cfg);
        record_.config_hash = fnv1a64_hex(record_.config_snapshot.dump());
        record_.pipeline = cfg.pipeline;
        record_.started_utc = detail::utc_now();
        record_.output_dir = outdir_;
        std::filesystem::create_directories(outdir_);
    }

    const std::filesystem::path &dir() const { return outdir_; }
    std::string config_hash8() const { return record_.config_hash.substr(0, 8); }
    nlohmann::json &metadata() { return record_.metadata; }

    void add_text(const std::string &relative, const std::string &content) {
        atomic_write(outdir_ / relative, content);
        record_.manifest.push_back({relative, fnv1a64_hex(content),
                                    static_cast<std::uint64_t>(content.size())});
    }

    void add_matrix(const std::string &relative, const Matrix &m) {
        write_matrix(outdir_ / relative, m);
        record_.manifest.push_back({relative, hash_file(outdir_ / relative),
                                    std::filesystem::file_size(outdir_ / relative)});
    }

    RunRecord finish(const std::string &status = "ok") {
        record_.status = status;
        record_.finished_utc = detail::utc_now();
        nlohmann::json j;
        j["config"] = record_.config_snapshot;
        j["config_hash"] = record_.config_hash;
        j["artifact_version"] = record_.artifact_version;
        j["normalization_id"] = record_.normalization_id;
        j["pipeline"] = record_.pipeline;
        j["status"] = record_.status;
        j["started_utc"] = record_.started_utc;
        j["finished_utc"] = record_.finished_utc;
        j["metadata"] = record_.metadata;
        nlohmann::json manifest = nlohmann::json::array();
        for (const auto &e : record_.manifest)
            manifest.push_back({{"path", e.path}, {"hash", e.hash}, {"bytes", e.bytes}});
        j["manifest"] = manifest;
        atomic_write(outdir_ / "run_record.json", j.dump(2) + "\n");
        return record_;
    }

  private:
    std::filesystem::path outdir_;
    RunRecord record_;
};

namespace detail {

struct AssembledRun {
    MeasureReport measure_report;
    std::vector<ExponentAtom> atom_list;
    AssembledOperator op;
};

inline AssembledRun assemble_from_config(const RunConfig &cfg, RunWriter &writer) {
    const SpectralMeasure measure = cfg.measure();
    const MeasureReport report = validate_hypotheses(measure);
    writer.metadata()["gamma"] = report.gamma;
    writer.metadata()["s_sharp"] = report.s_sharp;
    writer.metadata()["mass_plus_high"] = report.mass_plus_high;
    writer.metadata()["mass_minus_low"] = report.mass_minus_low;
    writer.metadata()["hypotheses"] = {{"positive_high_mass", report.positive_high_mass},
                                       {"negative_part_confined", report.negative_part_confined},
                                       {"negative_mass_controlled", report.negative_mass_controlled}};
    // Dimension bookkeeping: the embedding theory wants N > 2 s_sharp; on the
    // interval this is recorded, not enforced.
    writer.metadata()["n_gt_2s_sharp"] = 1.0 > 2.0 * report.s_sharp;
    if (!report.positive_high_mass)
        throw HypothesisError("measure: no positive mass on [s_bar, 1]");
    if (!report.negative_part_confined)
        throw HypothesisError("measure: negative part is not confined below s_bar");
    std::vector<ExponentAtom> atom_list = to_atoms(measure, cfg.quadrature_order);
    AssembledOperator op = assemble_operator(cfg.mesh(), atom_list, cfg.s_bar);
    return {report, std::move(atom_list), std::move(op)};
}

inline std::string spectrum_csv(const Spectrum &sp) {
    std::string csv = "k,lambda,residual,multiplicity_cluster_id\n";
    for (int k = 0; k < sp.count(); ++k)
        csv += std::to_string(k + 1) + "," + format_g17(sp.eigenvalues[k]) + "," +
               format_g17(sp.residuals[k]) + "," + std::to_string(sp.cluster_id[k]) + "\n";
    return csv;
}

inline std::string two_column_dat(const std::vector<std::pair<double, double>> &rows) {
    std::string dat;
    for (const auto &[x, y] : rows) dat += format_g17(x) + " " + format_g17(y) + "\n";
    return dat;
}

inline nlohmann::json window_json(const WindowReport &w) {
    nlohmann::json j;
    j["present"] = w.present;
    j["variant"] = w.variant == WindowVariant::standard ? "standard" : "mirrored";
    if (w.present) {
        j["h"] = w.h;
        j["k"] = w.k;
        j["pairs_predicted"] = w.pairs_predicted();
        j["margin_low"] = w.margin_low;
        j["margin_high"] = w.margin_high;
    }
    j["lambda_bar_in_spectrum"] = w.lambda_bar_in_spectrum;
    j["lambda_bar_distance"] = w.lambda_bar_distance;
    return j;
}

} // namespace detail

// Plot emission: two-column text files under plots/<pipeline>-<confighash8>/,
// named by what they show; deterministic for a fixed config.
struct PlotSet {
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> plots;
};

inline void emit_plotdata(RunWriter &writer, const std::string &pipeline, const PlotSet &plots) {
    const std::string dir = "plots/" + pipeline + "-" + writer.config_hash8();
    for (const auto &[name, rows] : plots.plots)
        writer.add_text(dir + "/" + name, detail::two_column_dat(rows));
}

inline RunRecord run_pipeline(const RunConfig &cfg,
                              const std::filesystem::path &outdir_override = {}) {
    const std::filesystem::path outdir =
        outdir_override.empty() ? std::filesystem::path(cfg.output_dir) : outdir_override;
    RunWriter writer(cfg, outdir);
    std::string module = "config";
    try {
        if (cfg.pipeline == "spectrum" || cfg.pipeline == "window" || cfg.pipeline == "solve") {
            module = "measure";
            auto run = detail::assemble_from_config(cfg, writer);
            module = "spectral";
            detail::log_info("solving spectrum, n = " + std::to_string(cfg.n_interior));
            const Spectrum sp = solve_spectrum(run.op, std::min(cfg.m, cfg.n_interior));
            const CoercivityCertificate cert = coercivity_certificate(run.op);
            writer.metadata()["c0_gamma"] = cert.c0_gamma;
            writer.metadata()["certificate_passes"] = cert.passes;
            writer.add_text("spectrum.csv", detail::spectrum_csv(sp));
            writer.add_matrix("eigenvectors.mat", sp.eigenvectors);

            std::string rayleigh = "k,deviation,vector_error,skipped\n";
            const int checks = std::min(sp.count(), 10);
            for (int k = 0; k < checks; ++k) {
                const RayleighCheck chk = rayleigh_verify(sp, run.op, k);
                rayleigh += std::to_string(k) + "," + format_g17(chk.deviation) + "," +
                            (chk.vector_error ? format_g17(*chk.vector_error) : "") + "," +
                            (chk.vector_check_skipped ? "1" : "0") + "\n";
            }
            writer.add_text("rayleigh.csv", rayleigh);

            PlotSet plots;
            std::vector<std::pair<double, double>> spec_rows;
            for (int k = 0; k < sp.count(); ++k)
                spec_rows.push_back({double(k + 1), sp.eigenvalues[k]});
            plots.plots.push_back({"spectrum.dat", spec_rows});

            if (cfg.pipeline == "spectrum") {
                emit_plotdata(writer, cfg.pipeline, plots);
                return writer.finish();
            }

            module = "minimax";
            const Nonlinearity nl = cfg.nonlinearity();
            const GrowthBound growth = check_growth(nl, 0.1);
            if (growth.sublinear_violated)
                throw HypothesisError("nonlinearity: |f(t)|/|t| does not decay at infinity");
            const WindowReport window = lambda_window(sp, nl);
            writer.metadata()["window"] = detail::window_json(window);
            writer.metadata()["a_epsilon_0.1"] = growth.a_epsilon;
            if (window.lambda_bar_in_spectrum)
                detail::log_info("warning: lambda_bar is within tolerance of an eigenvalue");

            if (cfg.pipeline == "window") {
                nlohmann::json summary;
                summary["window"] = detail::window_json(window);
                summary["gamma"] = run.measure_report.gamma;
                summary["c0_gamma"] = cert.c0_gamma;
                summary["a_epsilon_0.1"] = growth.a_epsilon;
                writer.add_text("summary.json", summary.dump(2) + "\n");
                emit_plotdata(writer, cfg.pipeline, plots);
                return writer.finish();
            }

            if (!cert.passes)
                throw HypothesisError("coercivity certificate failed: c0_gamma = " +
                                      std::to_string(cert.c0_gamma));
            if (!window.present)
                throw RequestError("no eigenvalue window: the problem predicts no pairs");

            MinimaxOptions opts;
            opts.budget = cfg.budget;
            opts.residual_tol = cfg.tolerance;
            opts.nontrivial_tol = cfg.nontrivial_tol;
            opts.distinct_tol = cfg.distinct_tol;
            opts.deflation_radius = cfg.deflation_radius;
            opts.seed = cfg.seed;
            detail::log_info("searching for solution pairs, budget = " +
                             std::to_string(cfg.budget));
            const MinimaxReport report = find_pairs(run.op, nl, sp, window, opts);

            nlohmann::json summary;
            summary["pairs_found"] = report.pairs_found;
            summary["pairs_predicted"] = report.pairs_predicted;
            summary["window"] = detail::window_json(window);
            summary["energy_band"] = {{"c0", report.band.c0},
                                      {"c_inf", report.band.c_inf},
                                      {"rho", report.band.rho},
                                      {"tolerance", report.band_tolerance},
                                      {"estimate", true}};
            summary["iterations_used"] = report.iterations_used;
            summary["worker_count"] = report.worker_count;
            nlohmann::json sols = nlohmann::json::array();
            for (const auto &s : report.solutions)
                sols.push_back({{"pair_id", s.pair_id},
                                {"sign", s.sign},
                                {"energy", s.energy},
                                {"residual", s.residual},
                                {"in_band", s.in_band}});
            summary["solutions"] = sols;
            nlohmann::json diags = nlohmann::json::array();
            for (const auto &d : report.diagnostics)
                diags.push_back({{"seed", d.seed_label},
                                 {"iterations", d.iterations},
                                 {"initial_residual", d.initial_residual},
                                 {"final_residual", d.final_residual},
                                 {"max_norm", d.max_norm},
                                 {"outcome", d.outcome},
                                 {"residual_trace", d.residual_trace}});
            summary["ps_diagnostics"] = diags;
            writer.add_text("summary.json", summary.dump(2) + "\n");

            const auto nodes = run.op.mesh.nodes();
            for (const auto &s : report.solutions) {
                const std::string tag =
                    std::to_string(s.pair_id) + "_" + (s.sign > 0 ? "plus" : "minus");
                std::string csv = "x,u\n";
                for (int i = 0; i < s.u.size(); ++i)
                    csv += format_g17(nodes[i]) + "," + format_g17(s.u[i]) + "\n";
                writer.add_text("solution_" + tag + ".csv", csv);
                std::vector<std::pair<double, double>> rows;
                for (int i = 0; i < s.u.size(); ++i) rows.push_back({nodes[i], s.u[i]});
                plots.plots.push_back({"solution_" + tag + ".dat", rows});
            }
            emit_plotdata(writer, cfg.pipeline, plots);
            return writer.finish();
        }

        if (cfg.pipeline == "certify") {
            module = "measure";
            auto run = detail::assemble_from_config(cfg, writer);
            module = "spectral";
            const CoercivityCertificate cert = coercivity_certificate(run.op);
            writer.metadata()["c0_gamma"] = cert.c0_gamma;
            writer.metadata()["certificate_passes"] = cert.passes;
            writer.metadata()["equivalence_bounds"] = {cert.lower_equivalence,
                                                       cert.upper_equivalence};

            module = "assembly";
            std::vector<double> exps;
            for (const auto &a : run.atom_list) exps.push_back(a.s);
            std::sort(exps.begin(), exps.end());
            exps.erase(std::unique(exps.begin(), exps.end()), exps.end());
            StiffnessFamily family(cfg.mesh());
            std::string csv = "s1,s2,domination_constant\n";
            for (std::size_t i = 0; i < exps.size(); ++i)
                for (std::size_t j = i; j < exps.size(); ++j) {
                    const double c = domination_constant(family.matrix(exps[i]),
                                                         family.matrix(exps[j]));
                    csv += format_g17(exps[i]) + "," + format_g17(exps[j]) + "," +
                           format_g17(c) + "\n";
                }
            writer.add_text("domination.csv", csv);

            nlohmann::json summary;
            summary["gamma"] = run.measure_report.gamma;
            summary["c0_gamma"] = cert.c0_gamma;
            summary["passes"] = cert.passes;
            summary["equivalence_bounds"] = {cert.lower_equivalence, cert.upper_equivalence};
            writer.add_text("summary.json", summary.dump(2) + "\n");
            return writer.finish();
        }

        if (cfg.pipeline == "convergence") {
            module = "assembly";
            if (cfg.atoms.size() != 1 || !cfg.density.empty() || cfg.atoms[0].c <= 0.0)
                throw ConfigError("convergence pipeline expects a single positive atom measure");
            const double s = cfg.atoms[0].s;
            const double w = cfg.atoms[0].c;
            if (!(s > 0.0 && s <= 1.0))
                throw ConfigError("convergence pipeline expects exponent s in (0, 1]");
            const double center = 0.5 * (cfg.a + cfg.b);
            const double radius = 0.5 * (cfg.b - cfg.a);
            const double amplitude = std::pow(radius, 2.0 * s) / (w * std::tgamma(2.0 * s + 1.0));

            std::vector<std::pair<double, double>> err_rows;
            std::string csv = "n,h,error\n";
            for (int n : {64, 128, 256, 512}) {
                DomainMesh mesh(cfg.a, cfg.b, n);
                const Matrix k = w * assemble_fractional_stiffness(mesh, s);
                const Matrix mass = assemble_mass(mesh);
                const Vector load = mass * Vector::Ones(n);
                const Vector u = k.ldlt().solve(load);
                Vector exact(n);
                for (int i = 0; i < n; ++i) {
                    const double y = (mesh.node(i) - center) / radius;
                    exact[i] = amplitude * std::pow(std::max(0.0, 1.0 - y * y), s);
                }
                const Vector diff = u - exact;
                const double err = std::sqrt(diff.dot(mass * diff));
                err_rows.push_back({mesh.h(), err});
                csv += std::to_string(n) + "," + format_g17(mesh.h()) + "," + format_g17(err) +
                       "\n";
                detail::log_info("convergence n = " + std::to_string(n) +
                                 ", error = " + format_g17(err));
            }
            writer.add_text("convergence.csv", csv);
            PlotSet plots;
            plots.plots.push_back({"error_vs_h.dat", err_rows});
            emit_plotdata(writer, cfg.pipeline, plots);

            nlohmann::json summary;
            summary["exponent"] = s;
            summary["errors"] = nlohmann::json::array();
            for (auto &[hh, ee] : err_rows) summary["errors"].push_back({{"h", hh}, {"error", ee}});
            writer.add_text("summary.json", summary.dump(2) + "\n");
            return writer.finish();
        }

        throw ConfigError("unknown pipeline: " + cfg.pipeline);
    } catch (const ConfigError &e) {
        writer.finish("error:" + module);
        throw ConfigError("[" + module + "] " + e.what());
    } catch (const RequestError &e) {
        writer.finish("error:" + module);
        throw RequestError("[" + module + "] " + e.what());
    } catch (const HypothesisError &e) {
        writer.finish("error:" + module);
        throw HypothesisError("[" + module + "] " + e.what());
    } catch (const NumericalError &e) {
        writer.finish("error:" + module);
        throw NumericalError("[" + module + "] " + e.what());
    } catch (const std::exception &e) {
        writer.finish("error:" + module);
        throw NumericalError("[" + module + "] " + e.what());
    }
}

} // namespace musolve
