#pragma once

#include "bsdelab/generator.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bsdelab {

struct TimeGrid {
    double T = 1.0;
    std::size_t N = 200;

    TimeGrid() = default;
    TimeGrid(double T_, std::size_t N_);
    double dt() const { return T / double(N); }
    // t_N is exactly T
    double t(std::size_t i) const { return i == N ? T : T * double(i) / double(N); }
};

// Brownian paths on a uniform grid, stored as positions B_{t_i}; increments are
// differences of consecutive positions. Optionally carries a one-dimensional
// forward state X_{t_i} per path.
class PathBundle {
public:
    PathBundle(std::size_t d, TimeGrid grid, std::size_t M, std::uint64_t seed);

    std::size_t M() const { return M_; }
    std::size_t d() const { return d_; }
    const TimeGrid& grid() const { return grid_; }
    std::uint64_t seed() const { return seed_; }

    std::span<const double> brownian(std::size_t i, std::size_t k) const
    {
        return {pos_.data() + (i * d_ + k) * M_, M_};
    }
    std::span<double> brownian_mut(std::size_t i, std::size_t k) { return {pos_.data() + (i * d_ + k) * M_, M_}; }
    void increments(std::size_t i, std::size_t k, std::span<double> out) const;

    bool has_state() const { return !state_.empty(); }
    std::span<const double> state(std::size_t i) const { return {state_.data() + i * M_, M_}; }
    void set_state(std::vector<double> x);

    // Same paths sampled every `factor` steps.
    PathBundle coarsen(std::size_t factor) const;

    std::uint64_t cache_key() const { return cache_key(seed_, M_, grid_.N, d_, grid_.T); }
    static std::uint64_t cache_key(std::uint64_t seed, std::size_t M, std::size_t N, std::size_t d, double T);
    void save(const std::filesystem::path& file) const;
    static PathBundle load(const std::filesystem::path& file);

private:
    PathBundle() = default;
    std::size_t d_ = 1, M_ = 0;
    TimeGrid grid_;
    std::uint64_t seed_ = 0;
    std::vector<double> pos_;
    std::vector<double> state_;
};

PathBundle simulate_paths(std::size_t d, const TimeGrid& grid, std::size_t M, std::uint64_t seed);
// Reuses <dir>/paths-<hash>.bin when present, writes it otherwise.
PathBundle simulate_paths_cached(const std::filesystem::path& dir, std::size_t d, const TimeGrid& grid, std::size_t M,
                                 std::uint64_t seed);

struct MarkovModel {
    std::function<double(double, double)> b;
    std::function<double(double, double)> sigma;
    double x0 = 0.0;

    static MarkovModel brownian(double x0 = 0.0);
    static MarkovModel constant(double drift, double vol, double x0 = 0.0);
};

struct LatticeSpec {
    std::size_t nodes = 401;
    double width_sd = 6.0;
    std::size_t hermite = 24;
    double z_cap = 1e3;
    double picard_tol = 1e-12;
    std::size_t picard_max = 50;
    // lattice centre and half width override (NaN keeps the default)
    double centre = NAN;
    double half_width = NAN;
};

struct BasisSpec {
    std::size_t degree = 4;
    // for t_i >= indicator_time every monomial is also multiplied by 1{B^1_tau > 0}
    std::optional<double> indicator_time;
    double z_cap = 1e3;
    double picard_tol = 1e-12;
    std::size_t picard_max = 50;
    // regress on the forward state instead of the Brownian position, when present
    bool use_state = true;
};

struct SolverDiagnostics {
    std::size_t picard_iterations_max = 0;
    std::size_t root_fallbacks = 0;
    std::size_t extrapolations = 0;
    std::size_t z_clipped = 0;
    std::size_t ridge_fallbacks = 0;
    double max_condition = 0.0;
    std::vector<double> regression_rms;
    std::optional<double> cole_hopf_reference;
    std::vector<std::string> warnings;
};

class LsmcFit;

struct DiscreteSolution {
    std::string backend;
    TimeGrid grid;
    std::size_t d = 1;
    std::uint64_t seed = 0;

    // grid backend: y[i][j], z[i][j] on the lattice nodes (z is one-dimensional there)
    std::vector<double> lattice;
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> z;

    double y0 = 0.0;
    std::vector<double> z0;
    double y0_se = 0.0;

    // per node summaries under the law of the state
    std::vector<double> y_mean, y_sd;
    std::vector<std::vector<double>> z_mean;

    SolverDiagnostics diag;

    // lsmc backend
    std::shared_ptr<const LsmcFit> fit;
    std::shared_ptr<const PathBundle> paths;

    // Y_{t_i} as a function of the state (lattice interpolation or regression)
    double y_at(std::size_t i, std::span<const double> state) const;
    double y_at(std::size_t i, double x) const { return y_at(i, std::span<const double>(&x, 1)); }
    // lsmc: Y_{t_i} along the stored paths
    std::vector<double> y_on_paths(std::size_t i) const;
    std::vector<std::vector<double>> z_on_paths(std::size_t i) const;

    std::string csv() const;
};

using StateFn = std::function<double(double)>;

DiscreteSolution solve_markov_grid(const Generator& gen, const StateFn& terminal, const MarkovModel& model,
                                   const TimeGrid& grid, const LatticeSpec& spec = {});

// xi holds one terminal value per path of `paths`; `end_step` < N solves on [0, t_end].
DiscreteSolution solve_lsmc(const Generator& gen, std::span<const double> xi, std::shared_ptr<const PathBundle> paths,
                            const BasisSpec& basis = {}, std::optional<std::size_t> end_step = std::nullopt);

// xi_m = f(state at step i) for every path
std::vector<double> terminal_values(const PathBundle& paths, const std::function<double(std::span<const double>)>& f,
                                    std::optional<std::size_t> step = std::nullopt);

// Least-squares projection of `target` onto the solver's polynomial basis in
// the state at step i; returns the fitted values along the paths.
std::vector<double> regress_on_state(const PathBundle& paths, std::size_t i, std::span<const double> target,
                                     const BasisSpec& basis = {});

using FamilySolver = std::function<DiscreteSolution(const Generator& gen_np, double n, double p)>;

// Lattice solver for BSDE(xi^{n,p}, g^{n,p}) with xi = terminal(X_T).
FamilySolver grid_family_solver(StateFn terminal, MarkovModel model, TimeGrid grid, LatticeSpec spec = {});

struct TruncatedFamily {
    std::vector<double> n_list, p_list;
    std::vector<DiscreteSolution> members;
    bool monotone_n = true;
    bool antitone_p = true;
    double worst_violation = 0.0;
    double tolerance = 0.0;
    std::string detail;
    // monotone-limit envelope: Y0 at the largest n for each p and at the smallest p for each n
    std::vector<double> envelope_n, envelope_p;

    const DiscreteSolution& at(std::size_t a, std::size_t b) const { return members[a * p_list.size() + b]; }
    double y0(std::size_t a, std::size_t b) const { return at(a, b).y0; }
};

TruncatedFamily solve_truncated_family(const Generator& gen, const FamilySolver& solve, std::vector<double> n_list,
                                       std::vector<double> p_list, double rel_tol = 1e-6);

using CandidateY = std::function<double(double t, std::span<const double> state)>;
using CandidateZ = std::function<void(double t, std::span<const double> state, std::span<double> z)>;

struct ResidualStats {
    std::vector<std::size_t> steps;
    // max over nodes of the root-mean-square residual, finest grid first
    std::vector<double> rms;
    std::vector<double> rms_by_node;
    bool passed = false;
    double max_rms = 0.0;
    std::string note;
};

// State passed to candidates is the Brownian position (or the forward state when present).
ResidualStats residual_check(const CandidateY& y, const CandidateZ& z, const Generator& gen,
                             const std::function<double(std::span<const double>)>& terminal, const PathBundle& fine,
                             std::size_t refinements = 2);

} // namespace bsdelab
