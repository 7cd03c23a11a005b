#include "bsdelab/experiment.hpp"
#include "bsdelab/simd.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv)
{
    using namespace bsdelab;
    CLI::App app{"bsdelab: BSDE experiments"};
    std::string config_file, scenario, backend, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps, paths;
    std::optional<unsigned> workers;
    std::optional<double> tol_scale;
    std::vector<std::string> sets;
    bool list = false;

    app.add_option("--config", config_file, "key = value config file");
    app.add_option("--scenario", scenario, "scenario name");
    app.add_option("--seed", seed, "RNG seed (BSDELAB_SEED overrides)");
    app.add_option("--steps", steps, "time steps N");
    app.add_option("--paths", paths, "Monte Carlo paths M");
    app.add_option("--backend", backend, "grid or lsmc")->check(CLI::IsMember({"grid", "lsmc"}));
    app.add_option("--out", out, "output directory");
    app.add_option("--workers", workers, "worker threads");
    app.add_option("--tolerance-scale", tol_scale, "multiplier on scenario tolerances");
    app.add_option("--set", sets, "extra key=value config assignment");
    app.add_flag("--list", list, "list scenarios and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (list) {
        for (const auto& s : scenario_names()) std::cout << s << '\n';
        return 0;
    }

    try {
        ExperimentConfig cfg = config_file.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(config_file);
        if (!scenario.empty()) cfg.scenario = scenario;
        if (seed) cfg.seed = *seed;
        if (steps) cfg.steps = *steps;
        if (paths) cfg.paths = *paths;
        if (!backend.empty()) cfg.backend = backend;
        if (!out.empty()) cfg.out = out;
        if (workers) cfg.workers = *workers;
        if (tol_scale) cfg.tolerance_scale = *tol_scale;
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (const char* env = std::getenv("BSDELAB_SEED")) cfg.set("seed", env);

        const auto res = run_experiment(cfg);
        for (const auto& c : res.report.checks)
            std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << c.value << " tol=" << c.tolerance
                      << (c.detail.empty() ? "" : "  " + c.detail) << '\n';
        if (res.report.exploratory) std::cout << "exploratory - no theoretical claim\n";
        for (const auto& f : res.files) std::cout << "wrote " << f.string() << '\n';
        std::cout << (res.exit_code == 0 ? "OK" : "FAILED") << " (isa " << simd::active().name << ")\n";
        return res.exit_code;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
