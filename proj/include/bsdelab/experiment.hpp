#pragma once

#include "bsdelab/bsde.hpp"
#include "bsdelab/report.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bsdelab {

struct ExperimentConfig {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::size_t steps = 200;
    std::size_t paths = 100000;
    std::string backend = "grid";
    std::filesystem::path out = "bsdelab-out";
    unsigned workers = 1;
    double tolerance_scale = 1.0;
    // used by the generic "solve" scenario
    std::string generator = "zero";
    Params generator_params;
    std::string terminal = "brownian";
    Params terminal_params;
    double drift = 0.0, vol = 1.0, x0 = 0.0, horizon = 1.0;

    // one `key = value` assignment; ValidationError names the field
    void set(const std::string& key, const std::string& value);
    // flat key = value file, '#' starts a comment
    static ExperimentConfig from_file(const std::filesystem::path& file);
    void validate() const;
    Json to_json() const;
};

struct ExperimentResult {
    int exit_code = 0;
    Report report;
    std::vector<std::filesystem::path> files;
};

std::vector<std::string> scenario_names();

// Terminal catalog: functions of the Brownian endpoint.
StateFn make_terminal(const std::string& tag, const Params& params = {});
std::vector<std::string> terminal_tags();

// Runs the scenario and writes <out>/<scenario>.json plus CSV artifacts.
// Throws ValidationError for bad configurations.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

} // namespace bsdelab
