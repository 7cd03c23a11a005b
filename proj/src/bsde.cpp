#include "bsdelab/bsde.hpp"

#include "bsdelab/interpolation.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/quadrature.hpp"
#include "bsdelab/simd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

namespace bsdelab {

TimeGrid::TimeGrid(double T_, std::size_t N_) : T(T_), N(N_)
{
    if (!(T > 0)) throw ValidationError("TimeGrid: horizon must be positive");
    if (N == 0) throw ValidationError("TimeGrid: need at least one step");
}

// ---------------------------------------------------------------- paths

PathBundle::PathBundle(std::size_t d, TimeGrid grid, std::size_t M, std::uint64_t seed)
    : d_(d), M_(M), grid_(grid), seed_(seed), pos_((grid.N + 1) * d * M, 0.0)
{
    if (d == 0) throw ValidationError("PathBundle: dimension must be positive");
    if (M == 0) throw ValidationError("PathBundle: need at least one path");
}

void PathBundle::increments(std::size_t i, std::size_t k, std::span<double> out) const
{
    simd::axpy(-1.0, brownian(i, k), brownian(i + 1, k), out);
}

void PathBundle::set_state(std::vector<double> x)
{
    if (x.size() != (grid_.N + 1) * M_) throw ValidationError("PathBundle: state size mismatch");
    state_ = std::move(x);
}

PathBundle PathBundle::coarsen(std::size_t f) const
{
    if (f == 0 || grid_.N % f != 0) throw ValidationError("PathBundle::coarsen: factor must divide N");
    PathBundle out(d_, TimeGrid(grid_.T, grid_.N / f), M_, seed_);
    for (std::size_t i = 0; i <= out.grid_.N; ++i)
        for (std::size_t k = 0; k < d_; ++k) {
            auto src = brownian(i * f, k);
            std::copy(src.begin(), src.end(), out.brownian_mut(i, k).begin());
        }
    if (has_state()) {
        std::vector<double> s((out.grid_.N + 1) * M_);
        for (std::size_t i = 0; i <= out.grid_.N; ++i) {
            auto src = state(i * f);
            std::copy(src.begin(), src.end(), s.begin() + std::ptrdiff_t(i * M_));
        }
        out.state_ = std::move(s);
    }
    return out;
}

std::uint64_t PathBundle::cache_key(std::uint64_t seed, std::size_t M, std::size_t N, std::size_t d, double T)
{
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    std::uint64_t tb;
    std::memcpy(&tb, &T, sizeof tb);
    mix(seed);
    mix(M);
    mix(N);
    mix(d);
    mix(tb);
    return h;
}

namespace {
constexpr char kMagic[8] = {'B', 'S', 'D', 'E', 'P', 'B', '1', 0};
}

void PathBundle::save(const std::filesystem::path& file) const
{
    std::ofstream os(file, std::ios::binary);
    if (!os) throw Error("cannot write path cache " + file.string());
    const std::uint64_t hdr[5] = {d_, M_, grid_.N, seed_, state_.empty() ? 0ULL : 1ULL};
    os.write(kMagic, 8);
    os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    os.write(reinterpret_cast<const char*>(&grid_.T), sizeof(double));
    os.write(reinterpret_cast<const char*>(pos_.data()), std::streamsize(pos_.size() * sizeof(double)));
    if (!state_.empty())
        os.write(reinterpret_cast<const char*>(state_.data()), std::streamsize(state_.size() * sizeof(double)));
}

PathBundle PathBundle::load(const std::filesystem::path& file)
{
    std::ifstream is(file, std::ios::binary);
    if (!is) throw Error("cannot read path cache " + file.string());
    char magic[8];
    std::uint64_t hdr[5];
    double T;
    is.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw Error("not a path cache: " + file.string());
    is.read(reinterpret_cast<char*>(hdr), sizeof hdr);
    is.read(reinterpret_cast<char*>(&T), sizeof T);
    PathBundle b(hdr[0], TimeGrid(T, hdr[2]), hdr[1], hdr[3]);
    is.read(reinterpret_cast<char*>(b.pos_.data()), std::streamsize(b.pos_.size() * sizeof(double)));
    if (hdr[4]) {
        b.state_.resize((b.grid_.N + 1) * b.M_);
        is.read(reinterpret_cast<char*>(b.state_.data()), std::streamsize(b.state_.size() * sizeof(double)));
    }
    if (!is) throw Error("truncated path cache " + file.string());
    return b;
}

PathBundle simulate_paths(std::size_t d, const TimeGrid& grid, std::size_t M, std::uint64_t seed)
{
    PathBundle b(d, grid, M, seed);
    const double sdt = std::sqrt(grid.dt());
    constexpr std::size_t kBlock = 4096;
    parallel_blocks(M, kBlock, [&](std::size_t lo, std::size_t hi, std::size_t blk) {
        auto eng = stream_engine(seed, blk);
        std::normal_distribution<double> nd;
        std::vector<double> buf(hi - lo);
        for (std::size_t i = 0; i < grid.N; ++i)
            for (std::size_t k = 0; k < d; ++k) {
                for (double& v : buf) v = nd(eng);
                auto from = b.brownian(i, k).subspan(lo, hi - lo);
                auto to = b.brownian_mut(i + 1, k).subspan(lo, hi - lo);
                simd::axpy(sdt, buf, from, to);
            }
    });
    return b;
}

PathBundle simulate_paths_cached(const std::filesystem::path& dir, std::size_t d, const TimeGrid& grid,
                                 std::size_t M, std::uint64_t seed)
{
    char name[64];
    std::snprintf(name, sizeof name, "paths-%016llx.bin",
                  static_cast<unsigned long long>(PathBundle::cache_key(seed, M, grid.N, d, grid.T)));
    const auto file = dir / name;
    if (std::filesystem::exists(file)) {
        auto b = PathBundle::load(file);
        if (b.M() == M && b.d() == d && b.grid().N == grid.N && b.seed() == seed && b.grid().T == grid.T) return b;
    }
    auto b = simulate_paths(d, grid, M, seed);
    std::filesystem::create_directories(dir);
    b.save(file);
    return b;
}

MarkovModel MarkovModel::brownian(double x0) { return constant(0.0, 1.0, x0); }

MarkovModel MarkovModel::constant(double drift, double vol, double x0)
{
    MarkovModel m;
    m.b = [drift](double, double) { return drift; };
    m.sigma = [vol](double, double) { return vol; };
    m.x0 = x0;
    return m;
}

// ---------------------------------------------------------------- implicit step

namespace {

struct StepResult {
    double y;
    std::size_t iters;
    bool fallback;
};

// Solves y = E + g(y) dt: Picard first, bracketed bisection when Picard stalls.
template <class G>
StepResult implicit_step(G&& g, double E, double dt, double tol, std::size_t maxit, const char* where)
{
    double y = E;
    for (std::size_t it = 1; it <= maxit; ++it) {
        const double next = E + g(y) * dt;
        if (!std::isfinite(next)) break;
        if (std::abs(next - y) <= tol * (1.0 + std::abs(next))) return {next, it, false};
        y = next;
    }
    auto phi = [&](double v) { return v - E - g(v) * dt; };
    double a = E, fa = phi(E);
    if (fa == 0.0) return {E, maxit, true};
    const double dir = fa < 0 ? 1.0 : -1.0;
    double step = std::max({std::abs(fa), 1e-14 * (1.0 + std::abs(E)), 1e-300});
    double b = a, fb = fa;
    bool found = false;
    for (int k = 0; k < 400 && !found; ++k) {
        b = E + dir * step;
        fb = phi(b);
        if (std::isfinite(fb) && (fb == 0.0 || (fb > 0) != (fa > 0))) found = true;
        else step *= 2.0;
    }
    if (!found) throw ConvergenceError(std::string("implicit step did not converge and no bracket was found at ") + where);
    if (fb == 0.0) return {b, maxit, true};
    for (int k = 0; k < 300; ++k) {
        const double m = 0.5 * (a + b);
        const double fm = phi(m);
        if (fm == 0.0 || std::abs(b - a) <= tol * (1.0 + std::abs(m)) || m == a || m == b) return {m, maxit, true};
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return {0.5 * (a + b), maxit, true};
}

bool clips_z(const Generator& g) { return g.growth() && g.growth()->alpha() > 1.0; }

} // namespace

// ---------------------------------------------------------------- lattice backend

DiscreteSolution solve_markov_grid(const Generator& gen, const StateFn& terminal, const MarkovModel& model,
                                   const TimeGrid& grid, const LatticeSpec& spec)
{
    if (gen.dim() != 1) throw ValidationError("solve_markov_grid: lattice backend is one-dimensional");
    if (!terminal) throw ValidationError("solve_markov_grid: empty terminal");
    if (spec.nodes < 3) throw ValidationError("solve_markov_grid: need at least 3 lattice nodes");
    const double T = grid.T, dt = grid.dt(), sdt = std::sqrt(dt);
    const double s0 = model.sigma(0.0, model.x0);
    if (!(s0 > 0)) throw ValidationError("solve_markov_grid: sigma must be positive at the initial state");
    const double centre = std::isnan(spec.centre) ? model.x0 : spec.centre;
    const double half = std::isnan(spec.half_width)
                            ? spec.width_sd * s0 * std::sqrt(T) + std::abs(model.b(0.0, model.x0)) * T
                            : spec.half_width;
    const std::size_t J = spec.nodes;
    const double h = 2.0 * half / double(J - 1);
    const double lo = centre - half;

    DiscreteSolution sol;
    sol.backend = "grid";
    sol.grid = grid;
    sol.d = 1;
    sol.lattice.resize(J);
    for (std::size_t j = 0; j < J; ++j) sol.lattice[j] = lo + h * double(j);
    if (J % 2 == 1) sol.lattice[J / 2] = centre;
    sol.y.assign(grid.N + 1, std::vector<double>(J));
    sol.z.assign(grid.N + 1, std::vector<double>(J, 0.0));
    for (std::size_t j = 0; j < J; ++j) {
        sol.y[grid.N][j] = terminal(sol.lattice[j]);
        if (!std::isfinite(sol.y[grid.N][j])) throw ValidationError("solve_markov_grid: terminal not finite on the lattice");
    }

    const auto& gh = gauss_hermite(spec.hermite);
    const bool cap = clips_z(gen);
    constexpr std::size_t kBlock = 32;
    const std::size_t nblocks = (J + kBlock - 1) / kBlock;

    for (std::size_t i = grid.N; i-- > 0;) {
        const MonotoneCubic next(lo, h, sol.y[i + 1]);
        const double t = grid.t(i);
        struct Counters {
            std::size_t iters = 0, fallbacks = 0, extrap = 0, clipped = 0;
        };
        std::vector<Counters> cnt(nblocks);
        parallel_blocks(J, kBlock, [&](std::size_t a, std::size_t b, std::size_t blk) {
            Counters& C = cnt[blk];
            for (std::size_t j = a; j < b; ++j) {
                const double x = sol.lattice[j];
                const double bb = model.b(t, x), ss = model.sigma(t, x);
                double E = 0.0, EZ = 0.0;
                for (std::size_t q = 0; q < gh.nodes.size(); ++q) {
                    const double dB = sdt * gh.nodes[q];
                    const double xp = x + bb * dt + ss * dB;
                    if (!next.inside(xp)) C.extrap++;
                    const double v = next(xp);
                    E += gh.weights[q] * v;
                    EZ += gh.weights[q] * v * dB;
                }
                double Z = EZ / dt;
                if (cap && std::abs(Z) > spec.z_cap) {
                    Z = std::copysign(spec.z_cap, Z);
                    C.clipped++;
                }
                char where[96];
                std::snprintf(where, sizeof where, "t=%.6g x=%.6g", t, x);
                const auto r = implicit_step([&](double y) { return gen.at_state(t, x, y, Z); }, E, dt,
                                             spec.picard_tol, spec.picard_max, where);
                sol.y[i][j] = r.y;
                sol.z[i][j] = Z;
                C.iters = std::max(C.iters, r.iters);
                C.fallbacks += r.fallback;
            }
        });
        for (const auto& C : cnt) {
            sol.diag.picard_iterations_max = std::max(sol.diag.picard_iterations_max, C.iters);
            sol.diag.root_fallbacks += C.fallbacks;
            sol.diag.extrapolations += C.extrap;
            sol.diag.z_clipped += C.clipped;
        }
        for (std::size_t j = 0; j < J; ++j)
            if (!std::isfinite(sol.y[i][j]))
                throw ConvergenceError("solve_markov_grid: non-finite value at t=" + std::to_string(t) +
                                       " x=" + std::to_string(sol.lattice[j]));
    }
    if (sol.diag.extrapolations > 0)
        sol.diag.warnings.push_back(std::to_string(sol.diag.extrapolations) +
                                    " transitions left the lattice and were extrapolated linearly");
    if (sol.diag.z_clipped > 0)
        sol.diag.warnings.push_back(std::to_string(sol.diag.z_clipped) + " Z values clipped at the cap");

    sol.y0 = sol.y_at(0, model.x0);
    sol.z0 = {MonotoneCubic(lo, h, sol.z[0])(model.x0)};

    // law of X_{t_i} on the lattice by forward transport with linear splitting
    std::vector<double> mass(J, 0.0), nmass(J);
    auto deposit = [&](std::vector<double>& m, double x, double w) {
        const double u = std::clamp((x - lo) / h, 0.0, double(J - 1));
        const auto j = std::min<std::size_t>(std::size_t(u), J - 2);
        const double f = u - double(j);
        m[j] += w * (1 - f);
        m[j + 1] += w * f;
    };
    deposit(mass, model.x0, 1.0);
    sol.y_mean.resize(grid.N + 1);
    sol.y_sd.resize(grid.N + 1);
    sol.z_mean.assign(grid.N + 1, std::vector<double>(1, 0.0));
    for (std::size_t i = 0; i <= grid.N; ++i) {
        double my = 0, mz = 0, m2 = 0;
        for (std::size_t j = 0; j < J; ++j) {
            my += mass[j] * sol.y[i][j];
            mz += mass[j] * sol.z[i][j];
        }
        for (std::size_t j = 0; j < J; ++j) m2 += mass[j] * (sol.y[i][j] - my) * (sol.y[i][j] - my);
        if (i == 0) {
            my = sol.y0;
            mz = sol.z0[0];
            m2 = 0;
        }
        sol.y_mean[i] = my;
        sol.y_sd[i] = std::sqrt(std::max(m2, 0.0));
        sol.z_mean[i][0] = i == grid.N ? NAN : mz;
        if (i == grid.N) break;
        std::fill(nmass.begin(), nmass.end(), 0.0);
        const double t = grid.t(i);
        for (std::size_t j = 0; j < J; ++j) {
            if (mass[j] == 0.0) continue;
            const double x = sol.lattice[j];
            const double bb = model.b(t, x), ss = model.sigma(t, x);
            for (std::size_t q = 0; q < gh.nodes.size(); ++q)
                deposit(nmass, x + bb * dt + ss * sdt * gh.nodes[q], mass[j] * gh.weights[q]);
        }
        mass.swap(nmass);
    }

    if (gen.tag() == "quadratic-half") {
        const auto& g64 = gauss_hermite(64);
        const double m = model.x0 + model.b(0.0, model.x0) * T;
        const double s = s0 * std::sqrt(T);
        double acc = -INFINITY;
        for (std::size_t q = 0; q < g64.nodes.size(); ++q)
            acc = log_add(acc, std::log(g64.weights[q]) + terminal(m + s * g64.nodes[q]));
        sol.diag.cole_hopf_reference = acc;
        if (std::abs(acc - sol.y0) > 1e-2)
            sol.diag.warnings.push_back("Y0 deviates from the Cole-Hopf value by more than 1e-2");
    }
    return sol;
}

// ---------------------------------------------------------------- regression backend

class LsmcFit {
public:
    struct Step {
        std::vector<double> mean, inv_sd;       // per state dimension
        std::vector<std::vector<int>> exps;     // monomial exponents over kept dims
        std::vector<std::size_t> dims;          // kept state dimensions
        bool indicator = false;
        Eigen::VectorXd ce;                     // conditional expectation
        std::vector<Eigen::VectorXd> cz;        // one per Brownian coordinate
        std::size_t p() const { return exps.size() * (indicator ? 2 : 1); }
    };

    Generator gen;
    TimeGrid grid;
    std::size_t d = 1;
    std::size_t end = 0;
    bool state_input = false;
    std::optional<std::size_t> ind_step;
    BasisSpec basis;
    std::vector<Step> steps;
    std::vector<double> terminal;

    explicit LsmcFit(Generator g) : gen(std::move(g)) {}

    // basis values at one state point; `ind` is the indicator event value
    void features(const Step& s, std::span<const double> x, double ind, Eigen::VectorXd& out) const
    {
        const std::size_t nm = s.exps.size();
        out.resize(Eigen::Index(s.p()));
        for (std::size_t a = 0; a < nm; ++a) {
            double v = 1.0;
            for (std::size_t q = 0; q < s.dims.size(); ++q) {
                const double u = (x[s.dims[q]] - s.mean[s.dims[q]]) * s.inv_sd[s.dims[q]];
                for (int e = 0; e < s.exps[a][q]; ++e) v *= u;
            }
            out(Eigen::Index(a)) = v;
            if (s.indicator) out(Eigen::Index(nm + a)) = v * ind;
        }
    }

    double y_point(std::size_t i, std::span<const double> x, double ind) const
    {
        if (i == end) throw ValidationError("lsmc: Y at the terminal step is the terminal data");
        const Step& s = steps[i];
        Eigen::VectorXd f;
        features(s, x, ind, f);
        const double E = f.dot(s.ce);
        std::vector<double> z(d);
        for (std::size_t k = 0; k < d; ++k) z[k] = clip(f.dot(s.cz[k]));
        const double t = grid.t(i);
        return implicit_step([&](double y) { return gen.at_state(t, x[0], y, z); }, E, grid.dt(), basis.picard_tol,
                             basis.picard_max, "lsmc evaluation")
            .y;
    }

    double clip(double z) const
    {
        if (gen.growth() && gen.growth()->alpha() > 1.0 && std::abs(z) > basis.z_cap) return std::copysign(basis.z_cap, z);
        return z;
    }
};

namespace {

void enumerate_monomials(std::size_t dims, std::size_t degree, std::vector<std::vector<int>>& out)
{
    std::vector<int> cur(dims, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t q, int left) {
        if (q == dims) {
            out.push_back(cur);
            return;
        }
        for (int e = 0; e <= left; ++e) {
            cur[q] = e;
            rec(q + 1, left - e);
        }
        cur[q] = 0;
    };
    rec(0, int(degree));
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        int sa = 0, sb = 0;
        for (int v : a) sa += v;
        for (int v : b) sb += v;
        return sa < sb;
    });
}

struct Design {
    // column-major feature matrix: cols[a] has M entries
    std::vector<std::vector<double>> cols;
    Eigen::MatrixXd gram;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    double condition = 1.0;
    bool ridge = false;
};

void build_design(const LsmcFit::Step& st, const std::vector<std::span<const double>>& x,
                  std::span<const double> ind, std::size_t M, Design& D)
{
    const std::size_t nm = st.exps.size();
    const std::size_t p = st.p();
    D.cols.assign(p, std::vector<double>(M));
    std::vector<std::vector<double>> z(st.dims.size(), std::vector<double>(M));
    for (std::size_t q = 0; q < st.dims.size(); ++q)
        simd::affine(x[st.dims[q]], st.mean[st.dims[q]], st.inv_sd[st.dims[q]], z[q]);
    for (std::size_t a = 0; a < nm; ++a) {
        auto& c = D.cols[a];
        std::fill(c.begin(), c.end(), 1.0);
        for (std::size_t q = 0; q < st.dims.size(); ++q)
            for (int e = 0; e < st.exps[a][q]; ++e) simd::mul(c, z[q], c);
        if (st.indicator) simd::mul(c, ind, D.cols[nm + a]);
    }
    D.gram.resize(Eigen::Index(p), Eigen::Index(p));
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            const double v = simd::dot(D.cols[a], D.cols[b]);
            D.gram(Eigen::Index(a), Eigen::Index(b)) = D.gram(Eigen::Index(b), Eigen::Index(a)) = v;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D.gram, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    D.condition = lmin > 0 ? std::sqrt(lmax / lmin) : INFINITY;
    D.ridge = !(lmin > 1e-12 * lmax);
    Eigen::MatrixXd A = D.gram;
    if (D.ridge) A += 1e-10 * double(M) * Eigen::MatrixXd::Identity(Eigen::Index(p), Eigen::Index(p));
    D.ldlt.compute(A);
}

Eigen::VectorXd regress(const Design& D, std::span<const double> target)
{
    const std::size_t p = D.cols.size();
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(p));
    for (std::size_t a = 0; a < p; ++a) rhs(Eigen::Index(a)) = simd::dot(D.cols[a], target);
    return D.ldlt.solve(rhs);
}

void predict(const Design& D, const Eigen::VectorXd& c, std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t a = 0; a < D.cols.size(); ++a) simd::axpy(c(Eigen::Index(a)), D.cols[a], out, out);
}

std::vector<std::span<const double>> state_views(const LsmcFit& F, const PathBundle& P, std::size_t i)
{
    std::vector<std::span<const double>> x;
    if (F.state_input) x.push_back(P.state(i));
    else
        for (std::size_t k = 0; k < P.d(); ++k) x.push_back(P.brownian(i, k));
    return x;
}

std::vector<double> indicator_values(const LsmcFit& F, const PathBundle& P)
{
    if (!F.ind_step) return {};
    auto b = P.brownian(*F.ind_step, 0);
    std::vector<double> ind(P.M());
    for (std::size_t m = 0; m < P.M(); ++m) ind[m] = b[m] > 0 ? 1.0 : 0.0;
    return ind;
}

void make_step(LsmcFit::Step& st, const std::vector<std::span<const double>>& x, std::size_t degree, bool indicator)
{
    const std::size_t nd = x.size();
    st.mean.assign(nd, 0.0);
    st.inv_sd.assign(nd, 0.0);
    st.dims.clear();
    for (std::size_t q = 0; q < nd; ++q) {
        const double M = double(x[q].size());
        const double mu = simd::sum(x[q]) / M;
        double v = 0.0;
        for (double w : x[q]) v += (w - mu) * (w - mu);
        const double sd = std::sqrt(v / M);
        st.mean[q] = mu;
        if (sd > 1e-12 * (1.0 + std::abs(mu))) {
            st.inv_sd[q] = 1.0 / sd;
            st.dims.push_back(q);
        }
    }
    st.exps.clear();
    enumerate_monomials(st.dims.size(), st.dims.empty() ? 0 : degree, st.exps);
    st.indicator = indicator;
}

} // namespace

std::vector<double> terminal_values(const PathBundle& P, const std::function<double(std::span<const double>)>& f,
                                    std::optional<std::size_t> step)
{
    const std::size_t i = step.value_or(P.grid().N);
    std::vector<double> out(P.M());
    std::vector<double> s(P.has_state() ? 1 : P.d());
    for (std::size_t m = 0; m < P.M(); ++m) {
        if (P.has_state()) s[0] = P.state(i)[m];
        else
            for (std::size_t k = 0; k < P.d(); ++k) s[k] = P.brownian(i, k)[m];
        out[m] = f(s);
    }
    return out;
}

std::vector<double> regress_on_state(const PathBundle& P, std::size_t i, std::span<const double> target,
                                     const BasisSpec& basis)
{
    if (target.size() != P.M()) throw ValidationError("regress_on_state: target size differs from the path count");
    if (i > P.grid().N) throw ValidationError("regress_on_state: step out of range");
    LsmcFit F(make_generator("zero"));
    F.state_input = basis.use_state && P.has_state();
    const auto x = state_views(F, P, i);
    LsmcFit::Step st;
    make_step(st, x, basis.degree, false);
    Design D;
    build_design(st, x, {}, P.M(), D);
    std::vector<double> out(P.M());
    predict(D, regress(D, target), out);
    return out;
}

DiscreteSolution solve_lsmc(const Generator& gen, std::span<const double> xi, std::shared_ptr<const PathBundle> paths,
                            const BasisSpec& basis, std::optional<std::size_t> end_step)
{
    if (!paths) throw ValidationError("solve_lsmc: no path bundle");
    const PathBundle& P = *paths;
    const std::size_t M = P.M(), d = P.d();
    if (xi.size() != M) throw ValidationError("solve_lsmc: terminal has " + std::to_string(xi.size()) +
                                              " values for " + std::to_string(M) + " paths");
    if (gen.dim() != d) throw ValidationError("solve_lsmc: generator dimension differs from the Brownian dimension");
    const std::size_t end = end_step.value_or(P.grid().N);
    if (end == 0 || end > P.grid().N) throw ValidationError("solve_lsmc: end step out of range");
    const TimeGrid& grid = P.grid();
    const double dt = grid.dt();

    auto fit = std::make_shared<LsmcFit>(gen);
    fit->grid = grid;
    fit->d = d;
    fit->end = end;
    fit->basis = basis;
    fit->state_input = basis.use_state && P.has_state();
    fit->terminal.assign(xi.begin(), xi.end());
    if (basis.indicator_time) {
        const double s = *basis.indicator_time / dt;
        const auto si = std::size_t(std::llround(s));
        if (std::abs(s - double(si)) > 1e-9 || si > end) throw ValidationError("solve_lsmc: indicator time not on the grid");
        fit->ind_step = si;
    }
    fit->steps.resize(end);
    const auto ind = indicator_values(*fit, P);

    DiscreteSolution sol;
    sol.backend = "lsmc";
    sol.grid = TimeGrid(grid.t(end), end);
    sol.d = d;
    sol.seed = P.seed();
    sol.y_mean.assign(end + 1, 0.0);
    sol.y_sd.assign(end + 1, 0.0);
    sol.z_mean.assign(end + 1, std::vector<double>(d, NAN));
    sol.diag.regression_rms.assign(end, 0.0);

    std::vector<double> ynext(xi.begin(), xi.end()), ycur(M), E(M), resid(M), target(M), gsum(M, 0.0), db(M), gv(M);
    std::vector<std::vector<double>> Z(d, std::vector<double>(M));
    auto moments = [&](std::span<const double> v, double& mean, double& sd) {
        mean = simd::sum(v) / double(M);
        double s2 = 0;
        for (double w : v) s2 += (w - mean) * (w - mean);
        sd = std::sqrt(s2 / double(M));
    };
    moments(ynext, sol.y_mean[end], sol.y_sd[end]);

    for (std::size_t i = end; i-- > 0;) {
        const double t = grid.t(i);
        auto x = state_views(*fit, P, i);
        auto& st = fit->steps[i];
        make_step(st, x, basis.degree, fit->ind_step && i >= *fit->ind_step);
        Design D;
        build_design(st, x, ind, M, D);
        sol.diag.max_condition = std::max(sol.diag.max_condition, D.condition);
        if (D.ridge) {
            sol.diag.ridge_fallbacks++;
            if (sol.diag.ridge_fallbacks == 1)
                sol.diag.warnings.push_back("rank-deficient design at t=" + std::to_string(t) + "; ridge 1e-10 applied");
        }
        st.ce = regress(D, ynext);
        predict(D, st.ce, E);
        simd::axpy(-1.0, E, ynext, resid);
        sol.diag.regression_rms[i] = std::sqrt(simd::dot(resid, resid) / double(M));
        st.cz.resize(d);
        for (std::size_t k = 0; k < d; ++k) {
            P.increments(i, k, db);
            simd::mul(resid, db, target);
            for (double& v : target) v /= dt;
            st.cz[k] = regress(D, target);
            predict(D, st.cz[k], Z[k]);
            for (double& v : Z[k]) {
                const double c = fit->clip(v);
                if (c != v) sol.diag.z_clipped++;
                v = c;
            }
        }
        std::size_t iters = 0, fallbacks = 0;
        std::vector<double> zm(d);
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t k = 0; k < d; ++k) zm[k] = Z[k][m];
            const double xs = x.empty() ? 0.0 : x[0][m];
            const auto r = implicit_step([&](double y) { return gen.at_state(t, xs, y, zm); }, E[m], dt,
                                         basis.picard_tol, basis.picard_max, "lsmc path");
            ycur[m] = r.y;
            iters = std::max(iters, r.iters);
            fallbacks += r.fallback;
            gv[m] = gen.at_state(t, xs, r.y, zm);
        }
        simd::axpy(dt, gv, gsum, gsum);
        sol.diag.picard_iterations_max = std::max(sol.diag.picard_iterations_max, iters);
        sol.diag.root_fallbacks += fallbacks;
        moments(ycur, sol.y_mean[i], sol.y_sd[i]);
        for (std::size_t k = 0; k < d; ++k) sol.z_mean[i][k] = simd::sum(Z[k]) / double(M);
        ynext.swap(ycur);
    }
    sol.y0 = sol.y_mean[0];
    sol.z0.assign(sol.z_mean[0].begin(), sol.z_mean[0].end());
    // pathwise sd of xi + sum g dt
    simd::axpy(1.0, xi, gsum, gsum);
    double mu, sd;
    moments(gsum, mu, sd);
    sol.y0_se = sd / std::sqrt(double(M));
    if (sol.diag.z_clipped) sol.diag.warnings.push_back(std::to_string(sol.diag.z_clipped) + " Z values clipped");
    sol.fit = fit;
    sol.paths = paths;
    return sol;
}

double DiscreteSolution::y_at(std::size_t i, std::span<const double> s) const
{
    if (i > grid.N) throw ValidationError("y_at: step out of range");
    if (backend == "grid") {
        const double h = lattice[1] - lattice[0];
        return MonotoneCubic(lattice.front(), h, y[i])(s[0]);
    }
    if (!fit) throw ValidationError("y_at: solution carries no regression");
    const std::size_t nd = fit->state_input ? 1 : d;
    if (i == fit->end) throw ValidationError("y_at: terminal step holds path data only");
    const bool ind = fit->ind_step && i >= *fit->ind_step;
    if (s.size() < nd + (ind ? 1 : 0)) throw ValidationError("y_at: state needs the indicator value appended");
    return fit->y_point(i, s, ind ? s[nd] : 0.0);
}

std::vector<double> DiscreteSolution::y_on_paths(std::size_t i) const
{
    if (!fit || !paths) throw ValidationError("y_on_paths: only for the regression backend");
    if (i == fit->end) return fit->terminal;
    const PathBundle& P = *paths;
    const auto x = state_views(*fit, P, i);
    const auto ind = indicator_values(*fit, P);
    const bool use_ind = fit->ind_step && i >= *fit->ind_step;
    std::vector<double> out(P.M());
    std::vector<double> s(x.size());
    for (std::size_t m = 0; m < P.M(); ++m) {
        for (std::size_t q = 0; q < x.size(); ++q) s[q] = x[q][m];
        out[m] = fit->y_point(i, s, use_ind ? ind[m] : 0.0);
    }
    return out;
}

std::vector<std::vector<double>> DiscreteSolution::z_on_paths(std::size_t i) const
{
    if (!fit || !paths) throw ValidationError("z_on_paths: only for the regression backend");
    if (i >= fit->end) throw ValidationError("z_on_paths: no Z at the terminal step");
    const PathBundle& P = *paths;
    const auto x = state_views(*fit, P, i);
    const auto ind = indicator_values(*fit, P);
    const auto& st = fit->steps[i];
    std::vector<std::vector<double>> out(d, std::vector<double>(P.M()));
    Eigen::VectorXd f;
    std::vector<double> s(x.size());
    for (std::size_t m = 0; m < P.M(); ++m) {
        for (std::size_t q = 0; q < x.size(); ++q) s[q] = x[q][m];
        fit->features(st, s, st.indicator ? ind[m] : 0.0, f);
        for (std::size_t k = 0; k < d; ++k) out[k][m] = fit->clip(f.dot(st.cz[k]));
    }
    return out;
}

std::string DiscreteSolution::csv() const
{
    std::ostringstream os;
    os << "t,y_mean,y_sd";
    for (std::size_t k = 0; k < d; ++k) os << ",z" << k + 1 << "_mean";
    os << '\n';
    char buf[64];
    auto put = [&](double v) {
        if (std::isnan(v)) os << ',';
        else {
            std::snprintf(buf, sizeof buf, ",%.12g", v);
            os << buf;
        }
    };
    for (std::size_t i = 0; i <= grid.N; ++i) {
        std::snprintf(buf, sizeof buf, "%.12g", grid.t(i));
        os << buf;
        put(y_mean[i]);
        put(y_sd[i]);
        for (std::size_t k = 0; k < d; ++k) put(z_mean[i][k]);
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------- truncated family

FamilySolver grid_family_solver(StateFn terminal, MarkovModel model, TimeGrid grid, LatticeSpec spec)
{
    return [=](const Generator& g, double n, double p) {
        auto xi = [&](double x) { return truncate_value(terminal(x), n, p); };
        return solve_markov_grid(g, xi, model, grid, spec);
    };
}

namespace {
// worst amount by which `lo` exceeds `hi` pointwise
double excess(const DiscreteSolution& lo, const DiscreteSolution& hi, double& scale)
{
    double w = -INFINITY;
    if (lo.backend == "grid") {
        for (std::size_t i = 0; i < lo.y.size(); ++i)
            for (std::size_t j = 0; j < lo.y[i].size(); ++j) {
                w = std::max(w, lo.y[i][j] - hi.y[i][j]);
                scale = std::max({scale, std::abs(lo.y[i][j]), std::abs(hi.y[i][j])});
            }
        return w;
    }
    for (std::size_t i = 0; i <= lo.grid.N; ++i) {
        const auto a = lo.y_on_paths(i), b = hi.y_on_paths(i);
        for (std::size_t m = 0; m < a.size(); ++m) {
            w = std::max(w, a[m] - b[m]);
            scale = std::max({scale, std::abs(a[m]), std::abs(b[m])});
        }
    }
    return w;
}
} // namespace

TruncatedFamily solve_truncated_family(const Generator& gen, const FamilySolver& solve, std::vector<double> n_list,
                                       std::vector<double> p_list, double rel_tol)
{
    if (n_list.empty() || p_list.empty()) throw ValidationError("solve_truncated_family: empty index lists");
    if (!std::is_sorted(n_list.begin(), n_list.end()) || !std::is_sorted(p_list.begin(), p_list.end()))
        throw ValidationError("solve_truncated_family: index lists must be sorted ascending");
    TruncatedFamily fam;
    fam.n_list = n_list;
    fam.p_list = p_list;
    for (double n : n_list)
        for (double p : p_list) fam.members.push_back(solve(truncate(gen, n, p), n, p));

    double scale = 1.0;
    std::vector<double> ex_n, ex_p;
    for (std::size_t a = 0; a < n_list.size(); ++a)
        for (std::size_t b = 0; b < p_list.size(); ++b) {
            if (a + 1 < n_list.size()) ex_n.push_back(excess(fam.at(a, b), fam.at(a + 1, b), scale));
            if (b + 1 < p_list.size()) ex_p.push_back(excess(fam.at(a, b + 1), fam.at(a, b), scale));
        }
    const double tol = rel_tol * scale;
    fam.tolerance = tol;
    std::ostringstream os;
    for (double e : ex_n) {
        fam.worst_violation = std::max(fam.worst_violation, e);
        if (e > tol) fam.monotone_n = false;
    }
    for (double e : ex_p) {
        fam.worst_violation = std::max(fam.worst_violation, e);
        if (e > tol) fam.antitone_p = false;
    }
    os << "worst pointwise order violation " << fam.worst_violation << " against tolerance " << tol;
    if (!fam.monotone_n || !fam.antitone_p) os << "; monotonicity broken (solver bug or tolerance misconfiguration)";
    fam.detail = os.str();
    for (std::size_t b = 0; b < p_list.size(); ++b) fam.envelope_n.push_back(fam.y0(n_list.size() - 1, b));
    for (std::size_t a = 0; a < n_list.size(); ++a) fam.envelope_p.push_back(fam.y0(a, 0));
    return fam;
}

// ---------------------------------------------------------------- residuals

ResidualStats residual_check(const CandidateY& cy, const CandidateZ& cz, const Generator& gen,
                             const std::function<double(std::span<const double>)>& terminal, const PathBundle& fine,
                             std::size_t refinements)
{
    ResidualStats st;
    const std::size_t d = fine.d();
    if (gen.dim() != d) throw ValidationError("residual_check: generator and path dimensions differ");
    for (std::size_t r = 0; r <= refinements; ++r) {
        const std::size_t f = std::size_t(1) << r;
        if (fine.grid().N % f != 0) throw ValidationError("residual_check: N must be divisible by 2^refinements");
        const PathBundle P = r == 0 ? fine : fine.coarsen(f);
        const std::size_t M = P.M(), N = P.grid().N;
        const double dt = P.grid().dt();
        const std::size_t sd = P.has_state() ? 1 : d;
        std::vector<double> S = terminal_values(P, terminal);
        std::vector<double> g(M), R(M), db(M), s(sd), zeros(M, 0.0);
        std::vector<std::vector<double>> Z(d, std::vector<double>(M));
        std::vector<double> zv(d);
        std::vector<double> node_rms(N + 1, 0.0);
        auto load_state = [&](std::size_t i, std::size_t m) {
            if (P.has_state()) s[0] = P.state(i)[m];
            else
                for (std::size_t k = 0; k < d; ++k) s[k] = P.brownian(i, k)[m];
        };
        auto rms_at = [&](std::size_t i) {
            const double t = P.grid().t(i);
            for (std::size_t m = 0; m < M; ++m) {
                load_state(i, m);
                R[m] = cy(t, s) - S[m];
            }
            return std::sqrt(simd::dot(R, R) / double(M));
        };
        node_rms[N] = rms_at(N);
        for (std::size_t i = N; i-- > 0;) {
            const double t = P.grid().t(i);
            for (std::size_t m = 0; m < M; ++m) {
                load_state(i, m);
                cz(t, s, zv);
                for (std::size_t k = 0; k < d; ++k) Z[k][m] = zv[k];
                g[m] = gen.at_state(t, s[0], cy(t, s), zv);
            }
            // S_i = S_{i+1} + g dt - Z dB
            for (std::size_t k = 0; k < d; ++k) {
                P.increments(i, k, db);
                simd::residual_step(S, k == 0 ? g : zeros, k == 0 ? dt : 0.0, Z[k], db);
            }
            node_rms[i] = rms_at(i);
        }
        st.steps.push_back(N);
        st.rms.push_back(*std::max_element(node_rms.begin(), node_rms.end()));
        if (r == 0) st.rms_by_node = node_rms;
    }
    st.max_rms = st.rms.front();
    constexpr double kFloor = 1e-8;
    if (st.max_rms <= kFloor) {
        st.passed = true;
        st.note = "residual at rounding level";
        return st;
    }
    st.passed = true;
    std::ostringstream os;
    for (std::size_t r = 1; r < st.rms.size(); ++r) {
        const double ratio = st.rms[r] / st.rms[r - 1];
        os << (r > 1 ? ", " : "") << "coarsening ratio " << ratio;
        if (!(ratio >= std::numbers::sqrt2 / 1.2)) st.passed = false;
    }
    os << (st.passed ? " (decay consistent with O(sqrt dt))" : " (no decay at the O(sqrt dt) rate)");
    st.note = os.str();
    return st;
}

} // namespace bsdelab
