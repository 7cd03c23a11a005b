#pragma once

#include "bsdelab/bsde.hpp"
#include "bsdelab/report.hpp"
#include "bsdelab/test_function.hpp"

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace bsdelab {

struct SubmartingaleOptions {
    // check pairs among every `stride`-th node and the terminal node
    std::size_t stride = 10;
    // lattice: relative tolerance on phi
    double lattice_tol = 1e-6;
    // lattice: only nodes within this fraction of the half width are checked
    double inner_fraction = 0.6;
    // lsmc: standard errors allowed below zero, number of state quantile bins
    double se_mult = 3.0;
    std::size_t bins = 10;
    BasisSpec basis;
    // applied to Y at non-terminal nodes (adversarial tests)
    std::function<double(double t, double y)> y_transform;
};

// phi(t_i, |Y_i| + F(t_i)) <= E[phi(t_j, |Y_j| + F(t_j)) | F_{t_i}], F the integral of
// the growth's f. Refuses (ValidationError) unless phi verifies against the
// generator's growth. `model` is required for lattice solutions.
Report submartingale_check(const DiscreteSolution& sol, const Generator& gen, const PhiSpec& phi,
                           const MarkovModel* model, const SubmartingaleOptions& opt = {});

enum class ComparisonRegime { LinearGrowth, Quadratic };

struct ComparisonOptions {
    ComparisonRegime regime = ComparisonRegime::LinearGrowth;
    // generators of the two equations, for the ordering audit along the solution
    std::optional<Generator> gen_a, gen_b;
    double rel_tol = 1e-6;
    double se_mult = 3.0;
    // lattice: the order is asserted within this fraction of the half width;
    // edge nodes lean on extrapolated values and are only reported
    double inner_fraction = 0.6;
    std::vector<double> thetas{0.5, 0.9, 0.99};
};

struct ComparisonDiagnostic {
    double theta = 0.5;
    // delta U = (Y - theta Y')/(1 - theta), delta V likewise, per node and lattice point/path
    std::vector<std::vector<double>> delta_u, delta_v;
    double envelope = 0.0;          // max (delta U)^+
    double scaled_envelope = 0.0;   // (1 - theta) * envelope
    double reconstruction_error = 0.0;
};

struct ComparisonResult {
    Report report;
    double worst_margin = 0.0;      // max over nodes of Y - Y'
    std::vector<ComparisonDiagnostic> diagnostics;
};

// Y_t <= Y'_t + tol at every node. Throws ValidationError when xi <= xi' or the
// generator ordering fails, naming the violating node.
ComparisonResult comparison_check(const DiscreteSolution& a, const DiscreteSolution& b,
                                  const ComparisonOptions& opt = {});

struct ScenarioOptions {
    std::uint64_t seed = 1;
    std::size_t steps = 200;
    std::size_t paths = 100000;
    double tolerance_scale = 1.0;
};

std::vector<std::string> counterexample_tags();
Report counterexample_suite(std::string_view name, const ScenarioOptions& opt = {});

} // namespace bsdelab
