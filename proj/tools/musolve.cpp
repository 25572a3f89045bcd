// musolve: config-driven runs of the mixed-order operator pipelines.
//
//   musolve <config.json> [--pipeline P] [--out DIR]
//
// Exit codes: 0 success, 2 config error, 3 hypothesis/certificate failure,
// 4 numerical failure. Set MUSOLVE_LOG=quiet|info|debug for log verbosity.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "musolve/pipeline.hpp"

int main(int argc, char **argv) {
    CLI::App app{"mixed-order nonlocal operator toolkit"};
    std::string config_path;
    std::string pipeline_override;
    std::string out_override;
    app.add_option("config", config_path, "run configuration (JSON)")->required();
    app.add_option("--pipeline", pipeline_override,
                   "override the pipeline: spectrum|certify|window|solve|convergence");
    app.add_option("--out", out_override, "override the output directory");
    CLI11_PARSE(app, argc, argv);

    try {
        musolve::RunConfig cfg = musolve::parse_config(config_path);
        if (!pipeline_override.empty()) {
            cfg.pipeline = pipeline_override;
            cfg = musolve::config_from_json(musolve::render(cfg)); // revalidate
        }
        const musolve::RunRecord record =
            musolve::run_pipeline(cfg, out_override.empty() ? std::filesystem::path{}
                                                            : std::filesystem::path(out_override));
        std::printf("ok: pipeline '%s' wrote %zu files to %s\n", record.pipeline.c_str(),
                    record.manifest.size() + 1, record.output_dir.string().c_str());
        return 0;
    } catch (const musolve::ConfigError &e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const musolve::RequestError &e) {
        std::fprintf(stderr, "request error: %s\n", e.what());
        return 2;
    } catch (const musolve::HypothesisError &e) {
        std::fprintf(stderr, "hypothesis/certificate failure: %s\n", e.what());
        return 3;
    } catch (const musolve::NumericalError &e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 4;
    }
}
