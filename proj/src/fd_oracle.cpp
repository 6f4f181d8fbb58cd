#include "kirchhoff/fd_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SparseLU>

#include "kirchhoff/error.hpp"

namespace kirchhoff
{

namespace
{

double largest_sigma(const MetricTree& tree)
{
    double s = 0.0;
    for (const Edge& e : tree.edges) {
        for (const ProfilePiece& p : e.profile) {
            s = std::max(s, p.sigma);
        }
    }
    return s;
}

} // namespace

TruncatedGrid make_grid(const MetricTree& tree, double h, double L)
{
    if (!(h > 0.0)) {
        throw Error(ErrorCode::ConfigError, "grid spacing must be positive");
    }
    TruncatedGrid g;
    g.h = h;
    g.L = L;
    g.edges.resize(tree.edge_count());
    int next = static_cast<int>(tree.vertex_count());

    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> mass(tree.vertex_count(), 0.0);
    for (std::size_t ei = 0; ei < tree.edge_count(); ++ei) {
        const Edge& e = tree.edges[ei];
        auto& en = g.edges[ei];
        en.length = e.length ? *e.length : L;
        if (e.infinite() && !(L > e.profile.back().at + h)) {
            throw Error(ErrorCode::TruncationTooShort,
                        "truncation length does not clear the breakpoints of edge " + e.id);
        }
        en.x.push_back(0.0);
        for (std::size_t k = 0; k < e.segment_count(); ++k) {
            const Segment s = e.segment(k);
            const double lo = s.begin;
            const double hi = s.end ? *s.end : en.length;
            const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / h - 1e-9)));
            for (int i = 1; i <= n; ++i) {
                en.x.push_back(i == n ? hi : lo + (hi - lo) * i / n);
            }
        }
        const std::size_t nn = en.x.size();
        en.index.assign(nn, -1);
        en.index.front() = e.from;
        for (std::size_t i = 1; i + 1 < nn; ++i) {
            en.index[i] = next++;
            mass.push_back(0.0);
        }
        en.index.back() = e.infinite() ? -1 : e.to;

        for (std::size_t i = 0; i + 1 < nn; ++i) {
            const double len = en.x[i + 1] - en.x[i];
            const double sigma = e.segment(e.segment_at(0.5 * (en.x[i] + en.x[i + 1]))).sigma;
            const double c = sigma / len;
            const int a = en.index[i];
            const int b = en.index[i + 1];
            for (int p : {a, b}) {
                if (p >= 0) {
                    mass[p] += 0.5 * len;
                    trip.emplace_back(p, p, c);
                }
            }
            if (a >= 0 && b >= 0) {
                trip.emplace_back(a, b, -c);
                trip.emplace_back(b, a, -c);
            }
        }
    }
    g.unknowns = next;
    g.mass = Eigen::Map<Eigen::VectorXd>(mass.data(), static_cast<Eigen::Index>(mass.size()));
    g.stiffness.resize(next, next);
    g.stiffness.setFromTriplets(trip.begin(), trip.end());
    return g;
}

struct CnStepper::Factor
{
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    Eigen::SparseMatrix<cplx> rhs;
};

CnStepper::CnStepper(const MetricTree& tree, double h, double L, double dt)
    : grid_(make_grid(tree, h, L)), dt_(dt), factor_(std::make_unique<Factor>())
{
    if (!(dt > 0.0)) {
        throw Error(ErrorCode::ConfigError, "time step must be positive");
    }
    const int n = grid_.unknowns;
    Eigen::SparseMatrix<cplx> m(n, n);
    m.reserve(Eigen::VectorXi::Constant(n, 1));
    for (int i = 0; i < n; ++i) {
        m.insert(i, i) = grid_.mass[i];
    }
    const Eigen::SparseMatrix<cplx> s = grid_.stiffness.cast<cplx>();
    const cplx half(0.0, 0.5 * dt);
    Eigen::SparseMatrix<cplx> lhs = m + half * s;
    factor_->rhs = m - half * s;
    lhs.makeCompressed();
    factor_->lu.compute(lhs);
    if (factor_->lu.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularSystem, "Crank-Nicolson factorization failed");
    }
}

CnStepper::~CnStepper() = default;
CnStepper::CnStepper(CnStepper&&) noexcept = default;
CnStepper& CnStepper::operator=(CnStepper&&) noexcept = default;

Eigen::VectorXcd CnStepper::sample(const GraphFunction& f) const
{
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(grid_.unknowns);
    std::vector<int> count(grid_.unknowns, 0);
    for (std::size_t e = 0; e < grid_.edges.size(); ++e) {
        const auto& en = grid_.edges[e];
        for (std::size_t i = 0; i < en.x.size(); ++i) {
            const int idx = en.index[i];
            if (idx < 0) {
                continue;
            }
            u[idx] += f(e, en.x[i]);
            ++count[idx];
        }
    }
    for (int i = 0; i < grid_.unknowns; ++i) {
        if (count[i] > 1) {
            u[i] /= static_cast<double>(count[i]);
        }
    }
    return u;
}

GraphFunction CnStepper::to_function(const Eigen::VectorXcd& u) const
{
    GraphFunction f(grid_.edges.size());
    for (std::size_t e = 0; e < grid_.edges.size(); ++e) {
        const auto& en = grid_.edges[e];
        Eigen::VectorXcd v(static_cast<Eigen::Index>(en.x.size()));
        for (std::size_t i = 0; i < en.x.size(); ++i) {
            v[static_cast<Eigen::Index>(i)] = en.index[i] >= 0 ? u[en.index[i]] : cplx(0.0);
        }
        f.set_edge(e, en.x, std::move(v));
    }
    return f;
}

void CnStepper::step(Eigen::VectorXcd& u) const
{
    const Eigen::VectorXcd b = factor_->rhs * u;
    u = factor_->lu.solve(b);
}

double CnStepper::mass(const Eigen::VectorXcd& u) const
{
    return (grid_.mass.array() * u.array().abs2()).sum();
}

double CnStepper::boundary_mass(const Eigen::VectorXcd& u, double zone) const
{
    double m = 0.0;
    for (const auto& en : grid_.edges) {
        if (en.index.back() >= 0) {
            continue;
        }
        for (std::size_t i = 0; i < en.x.size(); ++i) {
            if (en.index[i] >= 0 && en.x[i] >= en.length - zone) {
                m += grid_.mass[en.index[i]] * std::norm(u[en.index[i]]);
            }
        }
    }
    return m;
}

GraphFunction cn_evolve(const MetricTree& tree, const GraphFunction& u0, double T, double dt,
                        double h, double L, CnReport* report)
{
    const int steps = std::max(1, static_cast<int>(std::llround(std::abs(T) / dt)));
    const double sdt = T / steps;
    if (!(std::abs(sdt) > 0.0)) {
        throw Error(ErrorCode::ConfigError, "evolution time must be nonzero");
    }
    // Backward evolution is the conjugate of forward evolution of conj(u0).
    const bool backward = T < 0.0;
    CnStepper stepper(tree, h, L, std::abs(sdt));
    Eigen::VectorXcd u = stepper.sample(u0);
    if (backward) {
        u = u.conjugate();
    }
    CnReport rep;
    rep.steps = steps;
    rep.mass0 = stepper.mass(u);
    const double zone = 4.0 * std::sqrt(largest_sigma(tree) * std::abs(T));
    for (int n = 0; n < steps; ++n) {
        stepper.step(u);
    }
    rep.mass1 = stepper.mass(u);
    const double total = std::max(rep.mass0, 1e-300);
    rep.boundary_fraction =
        std::max(stepper.boundary_mass(u, zone), stepper.boundary_mass(stepper.sample(u0), zone)) /
        total;
    if (rep.boundary_fraction > kBoundaryFail) {
        throw Error(ErrorCode::TruncationTooShort,
                    "boundary mass fraction " + std::to_string(rep.boundary_fraction) +
                        " exceeds 1e-3; increase L");
    }
    if (rep.boundary_fraction > kBoundaryWarn) {
        rep.warnings.push_back("boundary mass fraction " + std::to_string(rep.boundary_fraction) +
                               " exceeds 1e-6");
    }
    if (backward) {
        u = u.conjugate();
    }
    if (report) {
        *report = std::move(rep);
    }
    return stepper.to_function(u);
}

cplx free_kernel(double t, double r)
{
    if (t == 0.0) {
        throw Error(ErrorCode::ZeroTime, "free kernel at t = 0");
    }
    const double sgn = t > 0.0 ? 1.0 : -1.0;
    return std::exp(cplx(0.0, -sgn * std::numbers::pi / 4.0 + r * r / (4.0 * t))) /
           std::sqrt(4.0 * std::numbers::pi * std::abs(t));
}

cplx star_kernel(int m, double t, int x_edge, double x, int y_edge, double y)
{
    if (x_edge == y_edge) {
        return free_kernel(t, x - y) + (2.0 / m - 1.0) * free_kernel(t, x + y);
    }
    return (2.0 / m) * free_kernel(t, x + y);
}

cplx free_gaussian(double z, double z0, double t)
{
    const cplx d(1.0, 4.0 * t);
    return std::exp(-(z - z0) * (z - z0) / d) / std::sqrt(d);
}

CompareReport compare(const GraphFunction& a, const GraphFunction& b)
{
    if (a.edge_count() != b.edge_count()) {
        throw Error(ErrorCode::GridMismatch, "edge counts differ");
    }
    CompareReport r;
    r.edges = a.edge_count();
    GraphFunction d(a.edge_count());
    for (std::size_t e = 0; e < a.edge_count(); ++e) {
        const auto& ea = a.edge(e);
        const auto& eb = b.edge(e);
        if (ea.x.size() != eb.x.size()) {
            throw Error(ErrorCode::GridMismatch, "sample counts differ on edge " + std::to_string(e));
        }
        for (std::size_t i = 0; i < ea.x.size(); ++i) {
            if (std::abs(ea.x[i] - eb.x[i]) > 1e-12 * std::max(1.0, std::abs(ea.x[i]))) {
                throw Error(ErrorCode::GridMismatch, "coordinates differ on edge " + std::to_string(e));
            }
        }
        if (ea.x.empty()) {
            continue;
        }
        const Eigen::VectorXcd diff = ea.values - eb.values;
        r.linf_err = std::max(r.linf_err, diff.cwiseAbs().maxCoeff());
        r.nodes += ea.x.size();
        d.set_edge(e, ea.x, diff);
    }
    r.l2_err = d.l2_norm();
    return r;
}

GraphFunction restrict_to(const GraphFunction& f, double reach)
{
    GraphFunction out(f.edge_count());
    for (std::size_t e = 0; e < f.edge_count(); ++e) {
        const auto& s = f.edge(e);
        std::size_t n = 0;
        while (n < s.x.size() && s.x[n] <= reach + 1e-12) {
            ++n;
        }
        if (n == 0) {
            continue;
        }
        std::vector<double> x(s.x.begin(), s.x.begin() + static_cast<std::ptrdiff_t>(n));
        out.set_edge(e, std::move(x), s.values.head(static_cast<Eigen::Index>(n)));
    }
    return out;
}

} // namespace kirchhoff
