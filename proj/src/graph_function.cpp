#include "kirchhoff/graph_function.hpp"

#include <algorithm>
#include <cmath>

#include "kirchhoff/error.hpp"

namespace kirchhoff
{

namespace
{

constexpr double kSeriesRadius = 0.5;

cplx lerp(cplx f0, cplx f1, double s)
{
    return f0 + (f1 - f0) * s;
}

// h * integral_0^1 (f0 (1-s) + f1 s) exp(kappa (y0 + s h - anchor)) ds
cplx cell_moment(cplx f0, cplx f1, double y0, double h, cplx kappa, double anchor)
{
    const cplx z = kappa * h;
    if (std::abs(z) < kSeriesRadius) {
        const cplx e0 = std::exp(kappa * (y0 - anchor));
        const cplx i0 = phi1(z);
        const cplx i1 = phi2(z);
        return h * e0 * (f0 * (i0 - i1) + f1 * i1);
    }
    const cplx e0 = std::exp(kappa * (y0 - anchor));
    const cplx e1 = std::exp(kappa * (y0 + h - anchor));
    const cplx i0 = (e1 - e0) / z;
    const cplx i1 = (e1 * (z - 1.0) + e0) / (z * z);
    return h * (f0 * (i0 - i1) + f1 * i1);
}

} // namespace

cplx phi1(cplx z)
{
    if (std::abs(z) >= kSeriesRadius) {
        return (std::exp(z) - 1.0) / z;
    }
    // sum z^k / (k+1)!
    cplx term = 1.0;
    cplx sum = 1.0;
    for (int k = 1; k < 30; ++k) {
        term *= z / static_cast<double>(k + 1);
        sum += term;
        if (std::abs(term) < 1e-18) {
            break;
        }
    }
    return sum;
}

cplx phi2(cplx z)
{
    if (std::abs(z) >= kSeriesRadius) {
        return (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
    }
    // sum z^k / (k! (k+2))
    cplx zk = 1.0;
    cplx sum = 0.5;
    for (int k = 1; k < 30; ++k) {
        zk *= z / static_cast<double>(k);
        cplx term = zk / static_cast<double>(k + 2);
        sum += term;
        if (std::abs(term) < 1e-18) {
            break;
        }
    }
    return sum;
}

void GraphFunction::set_edge(std::size_t e, std::vector<double> x, Eigen::VectorXcd values)
{
    if (static_cast<Eigen::Index>(x.size()) != values.size()) {
        throw Error(ErrorCode::SchemaError, "sample count mismatch");
    }
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1])) {
            throw Error(ErrorCode::SchemaError, "sample coordinates must increase strictly");
        }
    }
    edges_.at(e).x = std::move(x);
    edges_.at(e).values = std::move(values);
}

cplx GraphFunction::operator()(std::size_t e, double x) const
{
    const EdgeSamples& s = edges_.at(e);
    if (s.x.empty() || x < s.x.front() || x > s.x.back()) {
        return 0.0;
    }
    if (s.x.size() == 1) {
        return s.values[0];
    }
    auto it = std::upper_bound(s.x.begin(), s.x.end(), x);
    std::size_t j = it == s.x.end() ? s.x.size() - 1 : static_cast<std::size_t>(it - s.x.begin());
    const double x0 = s.x[j - 1];
    const double x1 = s.x[j];
    return lerp(s.values[j - 1], s.values[j], (x - x0) / (x1 - x0));
}

void GraphFunction::check_against(const MetricTree& tree) const
{
    if (edges_.size() != tree.edge_count()) {
        throw Error(ErrorCode::GridMismatch, "function and tree have different edge counts");
    }
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const auto& s = edges_[e];
        if (s.x.empty()) {
            continue;
        }
        const Edge& ed = tree.edges[e];
        if (s.x.front() < 0.0 || (ed.length && s.x.back() > *ed.length * (1.0 + 1e-14))) {
            throw Error(ErrorCode::OutOfRangeCoordinate,
                        "samples outside edge '" + ed.id + "'");
        }
    }
}

double cell_abs_integral(cplx f0, cplx f1, double h)
{
    // |f0 + (f1 - f0) s|^2 = A s^2 + B s + C
    const cplx d = f1 - f0;
    const double A = std::norm(d);
    const double C = std::norm(f0);
    if (A <= 1e-300 * (C + 1e-300)) {
        return h * std::sqrt(C);
    }
    const double B = 2.0 * std::real(f0 * std::conj(d));
    const double k2 = std::max(0.0, C / A - (B * B) / (4.0 * A * A));
    const double k = std::sqrt(k2);
    auto F = [&](double u) {
        const double r = std::sqrt(u * u + k2);
        if (k == 0.0) {
            return 0.5 * u * std::abs(u);
        }
        return 0.5 * (u * r + k2 * std::asinh(u / k));
    };
    const double u0 = B / (2.0 * A);
    return h * std::sqrt(A) * (F(1.0 + u0) - F(u0));
}

double GraphFunction::l1_norm() const
{
    double s = 0.0;
    for (const auto& e : edges_) {
        for (std::size_t i = 0; i + 1 < e.x.size(); ++i) {
            s += cell_abs_integral(e.values[i], e.values[i + 1], e.x[i + 1] - e.x[i]);
        }
    }
    return s;
}

double GraphFunction::l2_norm() const
{
    double s = 0.0;
    for (const auto& e : edges_) {
        for (std::size_t i = 0; i + 1 < e.x.size(); ++i) {
            const cplx a = e.values[i];
            const cplx b = e.values[i + 1];
            s += (e.x[i + 1] - e.x[i]) *
                 (std::norm(a) + std::real(a * std::conj(b)) + std::norm(b)) / 3.0;
        }
    }
    return std::sqrt(s);
}

double GraphFunction::linf_norm() const
{
    double m = 0.0;
    for (const auto& e : edges_) {
        if (e.values.size() > 0) {
            m = std::max(m, e.values.cwiseAbs().maxCoeff());
        }
    }
    return m;
}

std::size_t GraphFunction::sample_count() const
{
    std::size_t n = 0;
    for (const auto& e : edges_) {
        n += e.x.size();
    }
    return n;
}

std::pair<double, double> GraphFunction::support(std::size_t e) const
{
    const auto& s = edges_.at(e);
    if (s.x.empty()) {
        return {1.0, 0.0};
    }
    return {s.x.front(), s.x.back()};
}

cplx inner(const GraphFunction& f, const GraphFunction& g)
{
    if (f.edge_count() != g.edge_count()) {
        throw Error(ErrorCode::GridMismatch, "inner product of functions on different trees");
    }
    cplx s = 0.0;
    for (std::size_t e = 0; e < f.edge_count(); ++e) {
        const auto& fe = f.edge(e);
        const auto& ge = g.edge(e);
        if (fe.x.size() < 2 || ge.x.size() < 2) {
            continue;
        }
        const double lo = std::max(fe.x.front(), ge.x.front());
        const double hi = std::min(fe.x.back(), ge.x.back());
        if (!(hi > lo)) {
            continue;
        }
        std::vector<double> nodes;
        for (double x : fe.x) {
            if (x >= lo && x <= hi) {
                nodes.push_back(x);
            }
        }
        for (double x : ge.x) {
            if (x >= lo && x <= hi) {
                nodes.push_back(x);
            }
        }
        nodes.push_back(lo);
        nodes.push_back(hi);
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            const double h = nodes[i + 1] - nodes[i];
            const cplx f0 = f(e, nodes[i]);
            const cplx f1 = f(e, nodes[i + 1]);
            const cplx g0 = std::conj(g(e, nodes[i]));
            const cplx g1 = std::conj(g(e, nodes[i + 1]));
            s += h * (f0 * g0 / 3.0 + (f0 * g1 + f1 * g0) / 6.0 + f1 * g1 / 3.0);
        }
    }
    return s;
}

cplx edge_moment(const EdgeSamples& s, double a, double c, cplx kappa, double anchor)
{
    if (s.x.size() < 2) {
        return 0.0;
    }
    a = std::max(a, s.x.front());
    c = std::min(c, s.x.back());
    if (!(c > a)) {
        return 0.0;
    }
    auto it = std::upper_bound(s.x.begin(), s.x.end(), a);
    std::size_t j = static_cast<std::size_t>(it - s.x.begin());
    j = std::max<std::size_t>(j, 1);
    cplx sum = 0.0;
    for (; j < s.x.size() && s.x[j - 1] < c; ++j) {
        const double x0 = s.x[j - 1];
        const double x1 = s.x[j];
        const double lo = std::max(x0, a);
        const double hi = std::min(x1, c);
        if (!(hi > lo)) {
            continue;
        }
        const double w = x1 - x0;
        const cplx f0 = lerp(s.values[j - 1], s.values[j], (lo - x0) / w);
        const cplx f1 = lerp(s.values[j - 1], s.values[j], (hi - x0) / w);
        sum += cell_moment(f0, f1, lo, hi - lo, kappa, anchor);
    }
    return sum;
}

GraphFunction tabulate(const MetricTree& tree,
                       const std::function<cplx(std::size_t, double)>& fn, double h,
                       double truncation)
{
    GraphFunction g(tree.edge_count());
    for (std::size_t e = 0; e < tree.edge_count(); ++e) {
        const Edge& ed = tree.edges[e];
        const double hi = ed.length ? *ed.length : truncation;
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(hi / h - 1e-9)));
        std::vector<double> x(n + 1);
        Eigen::VectorXcd v(static_cast<Eigen::Index>(n + 1));
        for (std::size_t i = 0; i <= n; ++i) {
            x[i] = hi * static_cast<double>(i) / static_cast<double>(n);
            v[static_cast<Eigen::Index>(i)] = fn(e, x[i]);
        }
        g.set_edge(e, std::move(x), std::move(v));
    }
    return g;
}

GraphFunction resample(const GraphFunction& like,
                       const std::function<cplx(std::size_t, double)>& fn)
{
    GraphFunction g(like.edge_count());
    for (std::size_t e = 0; e < like.edge_count(); ++e) {
        const auto& s = like.edge(e);
        Eigen::VectorXcd v(static_cast<Eigen::Index>(s.x.size()));
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            v[static_cast<Eigen::Index>(i)] = fn(e, s.x[i]);
        }
        g.set_edge(e, s.x, std::move(v));
    }
    return g;
}

} // namespace kirchhoff
