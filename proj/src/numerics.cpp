#include "bsdelab/common.hpp"
#include "bsdelab/interpolation.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>

namespace bsdelab {

namespace {
std::atomic<unsigned> g_workers{1};
}

void set_workers(unsigned n) { g_workers = n == 0 ? 1 : n; }
unsigned workers() { return g_workers; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

const QuadratureRule& gauss_hermite(std::size_t n)
{
    static std::mutex mu;
    static std::map<std::size_t, QuadratureRule> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    if (n == 0) throw ValidationError("gauss_hermite: n must be positive");

    // Golub-Welsch on the probabilists' Hermite recurrence.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t k = 1; k < n; ++k) {
        J(Eigen::Index(k), Eigen::Index(k - 1)) = std::sqrt(double(k));
        J(Eigen::Index(k - 1), Eigen::Index(k)) = std::sqrt(double(k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    QuadratureRule r;
    for (std::size_t i = 0; i < n; ++i) {
        r.nodes.push_back(es.eigenvalues()(Eigen::Index(i)));
        const double v = es.eigenvectors()(0, Eigen::Index(i));
        r.weights.push_back(v * v);
    }
    // symmetrize so odd moments vanish to rounding
    for (std::size_t i = 0; i < n / 2; ++i) {
        const std::size_t j = n - 1 - i;
        const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
        const double w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -x;
        r.nodes[j] = x;
        r.weights[i] = r.weights[j] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    double s = 0.0;
    for (double w : r.weights) s += w;
    for (double& w : r.weights) w /= s;
    return cache.emplace(n, std::move(r)).first->second;
}

const QuadratureRule& gauss_legendre(std::size_t n)
{
    static std::mutex mu;
    static std::map<std::size_t, QuadratureRule> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    if (n == 0) throw ValidationError("gauss_legendre: n must be positive");

    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (double(i) + 0.75) / (double(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * double(k) - 1.0) * x * p1 - (double(k) - 1.0) * p0) / double(k);
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = double(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

MonotoneCubic::MonotoneCubic(double x0, double h, std::vector<double> y) : x0_(x0), h_(h), y_(std::move(y))
{
    const std::size_t n = y_.size();
    if (n < 2 || !(h > 0.0)) throw ValidationError("MonotoneCubic: need >= 2 nodes and positive spacing");
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / h_;
    m_.assign(n, 0.0);
    m_[0] = d[0];
    m_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = d[i - 1] * d[i] <= 0.0 ? 0.0 : 0.5 * (d[i - 1] + d[i]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (d[i] == 0.0) {
            m_[i] = m_[i + 1] = 0.0;
            continue;
        }
        const double a = m_[i] / d[i];
        const double b = m_[i + 1] / d[i];
        const double s = a * a + b * b;
        if (s > 9.0) {
            const double t = 3.0 / std::sqrt(s);
            m_[i] = t * a * d[i];
            m_[i + 1] = t * b * d[i];
        }
    }
}

double MonotoneCubic::operator()(double x) const
{
    const std::size_t n = y_.size();
    const double u = (x - x0_) / h_;
    if (u <= 0.0) return y_[0] + m_[0] * (x - x0_);
    if (u >= double(n - 1)) return y_[n - 1] + m_[n - 1] * (x - hi());
    const auto i = std::min<std::size_t>(std::size_t(u), n - 2);
    const double t = u - double(i);
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * y_[i] + h10 * h_ * m_[i] + h01 * y_[i + 1] + h11 * h_ * m_[i + 1];
}

HermiteTable::HermiteTable(std::vector<double> x, std::vector<double> y, std::vector<double> dy)
    : x_(std::move(x)), y_(std::move(y)), dy_(std::move(dy))
{
    if (x_.size() < 2 || y_.size() != x_.size() || dy_.size() != x_.size())
        throw ValidationError("HermiteTable: size mismatch");
    if (!std::is_sorted(x_.begin(), x_.end())) throw ValidationError("HermiteTable: nodes must be sorted");
}

double HermiteTable::operator()(double x) const
{
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : std::size_t(it - x_.begin()) - 1;
    i = std::min(i, x_.size() - 2);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * dy_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
           (t3 - t2) * h * dy_[i + 1];
}

} // namespace bsdelab
