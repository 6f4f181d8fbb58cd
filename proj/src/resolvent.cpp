#include "kirchhoff/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include <Eigen/SVD>

#include "kirchhoff/error.hpp"

namespace kirchhoff
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_flipped(std::uint64_t mask, int edge)
{
    return edge < 64 && ((mask >> edge) & 1ULL) != 0;
}

double seg_end_or_inf(const Segment& s)
{
    return s.end ? *s.end : kInf;
}

// Probe at an edge end incident to a vertex.
Probe end_probe(const Edge& e, const EdgeEnd& end, bool flux, double weight)
{
    Probe p;
    p.edge = end.edge;
    p.segment = end.at_start ? 0 : static_cast<int>(e.segment_count()) - 1;
    p.x = end.at_start ? 0.0 : *e.length;
    p.flux = flux;
    p.weight = weight;
    return p;
}

} // namespace

CouplingLayout make_layout(const MetricTree& tree, std::uint64_t flipped)
{
    if (tree.edge_count() > 64 && flipped != 0) {
        throw Error(ErrorCode::InvalidStep, "flipped edge sets support at most 64 edges");
    }
    CouplingLayout L;
    L.flipped = flipped;
    L.slot_index.resize(tree.edge_count());
    for (std::size_t e = 0; e < tree.edge_count(); ++e) {
        L.slot_index[e].assign(tree.edges[e].segment_count(), {-1, -1});
    }
    std::vector<char> edge_done(tree.edge_count(), 0);

    auto add_edge = [&](int ei) {
        const Edge& e = tree.edges[ei];
        const int ns = static_cast<int>(e.segment_count());
        for (int k = 0; k < ns; ++k) {
            const bool last_infinite = e.infinite() && k == ns - 1;
            for (int sign : {+1, -1}) {
                if (last_infinite) {
                    const int kept = is_flipped(flipped, ei) ? +1 : -1;
                    if (sign != kept) {
                        continue;
                    }
                }
                L.slot_index[ei][k][sign > 0 ? 0 : 1] = static_cast<int>(L.slots.size());
                L.slots.push_back({ei, k, sign});
            }
        }
        for (int k = 1; k < ns; ++k) {
            const double x = e.profile[k].at;
            L.rows.push_back({{ei, k - 1, x, false, 1.0}, {ei, k, x, false, -1.0}});
            L.row_labels.push_back("interface " + e.id + "@" + std::to_string(x) + " value");
            L.rows.push_back({{ei, k - 1, x, true, 1.0}, {ei, k, x, true, -1.0}});
            L.row_labels.push_back("interface " + e.id + "@" + std::to_string(x) + " flux");
        }
    };

    std::function<void(int)> visit = [&](int v) {
        const auto inc = tree.incident(v);
        for (std::size_t k = 0; k + 1 < inc.size(); ++k) {
            const Edge& a = tree.edges[inc[k].edge];
            const Edge& b = tree.edges[inc[k + 1].edge];
            L.rows.push_back({end_probe(a, inc[k], false, 1.0),
                              end_probe(b, inc[k + 1], false, -1.0)});
            L.row_labels.push_back("vertex " + tree.vertices[v] + " continuity");
        }
        std::vector<Probe> flux;
        for (const auto& end : inc) {
            flux.push_back(end_probe(tree.edges[end.edge], end, true, end.at_start ? -1.0 : 1.0));
        }
        L.rows.push_back(flux);
        L.row_labels.push_back("vertex " + tree.vertices[v] + " flux");
        for (const auto& end : inc) {
            if (edge_done[end.edge]) {
                continue;
            }
            edge_done[end.edge] = 1;
            add_edge(end.edge);
            const Edge& e = tree.edges[end.edge];
            if (!e.infinite()) {
                visit(e.other_end(v));
            }
        }
    };
    visit(0);
    return L;
}

std::vector<std::vector<SymEntry>> symbolic_matrix(const MetricTree& tree,
                                                   const CouplingLayout& L)
{
    std::vector<std::vector<SymEntry>> rows(L.rows.size());
    for (std::size_t r = 0; r < L.rows.size(); ++r) {
        std::map<std::pair<int, double>, double> acc;
        for (const Probe& p : L.rows[r]) {
            const Segment seg = tree.edges[p.edge].segment(p.segment);
            const double b = seg.slowness();
            for (int sign : {+1, -1}) {
                const int col = L.column(p.edge, p.segment, sign);
                if (col < 0) {
                    continue;
                }
                const double c = p.flux ? p.weight * sign / b : p.weight;
                acc[{col, sign * b * p.x}] += c;
            }
        }
        for (const auto& [key, c] : acc) {
            if (c != 0.0) {
                rows[r].push_back({key.first, key.second, c});
            }
        }
    }
    return rows;
}

std::vector<std::vector<RhsTerm>> symbolic_rhs(const MetricTree& tree, const CouplingLayout& L)
{
    std::vector<std::vector<RhsTerm>> rows(L.rows.size());
    for (std::size_t r = 0; r < L.rows.size(); ++r) {
        for (const Probe& p : L.rows[r]) {
            const Segment seg = tree.edges[p.edge].segment(p.segment);
            const double b = seg.slowness();
            const bool left = p.x == seg.begin;
            RhsTerm t;
            t.moment = {p.edge, p.segment, left ? -1 : +1};
            if (left) {
                t.lambda = b * p.x;
                t.coeff = p.flux ? -p.weight : -p.weight * b;
            } else {
                t.lambda = -b * p.x;
                t.coeff = p.flux ? p.weight : -p.weight * b;
            }
            rows[r].push_back(t);
        }
    }
    return rows;
}

Eigen::MatrixXcd coupling_matrix(const MetricTree& tree, const CouplingLayout& L, cplx omega)
{
    const int n = L.size();
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
    const auto sym = symbolic_matrix(tree, L);
    for (int r = 0; r < n; ++r) {
        for (const SymEntry& e : sym[r]) {
            A(r, e.col) += e.coeff * std::exp(omega * e.lambda);
        }
    }
    return A;
}

cplx particular_solution(const Segment& seg, const EdgeSamples& f, cplx omega, double x)
{
    if (omega == 0.0) {
        throw Error(ErrorCode::ZeroFrequency, "particular solution at omega = 0");
    }
    const double b = seg.slowness();
    const cplx k = omega * b;
    const cplx below = edge_moment(f, seg.begin, x, k, x);
    const cplx above = edge_moment(f, x, seg_end_or_inf(seg), -k, x);
    return (below + above) / (2.0 * omega);
}

cplx particular_flux(const Segment& seg, const EdgeSamples& f, cplx omega, double x)
{
    if (omega == 0.0) {
        throw Error(ErrorCode::ZeroFrequency, "particular solution at omega = 0");
    }
    const double b = seg.slowness();
    const cplx k = omega * b;
    const cplx below = edge_moment(f, seg.begin, x, k, x);
    const cplx above = edge_moment(f, x, seg_end_or_inf(seg), -k, x);
    return (above - below) / (2.0 * omega);
}

CouplingSystem assemble(const MetricTree& tree, cplx omega, const GraphFunction& f)
{
    if (omega == 0.0) {
        throw Error(ErrorCode::ZeroFrequency, "coupling system at omega = 0");
    }
    CouplingSystem sys;
    sys.layout = make_layout(tree);
    sys.omega = omega;
    sys.matrix = coupling_matrix(tree, sys.layout, omega);
    const int n = sys.layout.size();
    sys.rhs = Eigen::VectorXcd::Zero(n);
    for (int r = 0; r < n; ++r) {
        for (const Probe& p : sys.layout.rows[r]) {
            const Segment seg = tree.edges[p.edge].segment(p.segment);
            const EdgeSamples& fe = f.edge(p.edge);
            if (fe.x.size() < 2) {
                continue;
            }
            if (p.flux) {
                sys.rhs[r] -= p.weight * particular_flux(seg, fe, omega, p.x);
            } else {
                sys.rhs[r] -= p.weight * seg.slowness() * particular_solution(seg, fe, omega, p.x);
            }
        }
    }
    return sys;
}

ResolventSolution::ResolventSolution(const MetricTree& tree, const GraphFunction& f, cplx omega,
                                     Eigen::VectorXcd coefficients, CouplingLayout layout,
                                     double condition)
    : tree_(&tree), f_(&f), omega_(omega), coeffs_(std::move(coefficients)),
      layout_(std::move(layout)), condition_(condition)
{
}

cplx ResolventSolution::operator()(int edge, double x) const
{
    const Edge& e = tree_->edges.at(edge);
    const int k = static_cast<int>(e.segment_at(x));
    const Segment seg = e.segment(k);
    const double b = seg.slowness();
    cplx u = 0.0;
    for (int sign : {+1, -1}) {
        const int col = layout_.column(edge, k, sign);
        if (col >= 0) {
            u += coeffs_[col] * std::exp(omega_ * (sign * b * x));
        }
    }
    const EdgeSamples& fe = f_->edge(edge);
    if (fe.x.size() >= 2) {
        u += b * particular_solution(seg, fe, omega_, x);
    }
    return u;
}

cplx ResolventSolution::flux(int edge, double x) const
{
    const Edge& e = tree_->edges.at(edge);
    const int k = static_cast<int>(e.segment_at(x));
    const Segment seg = e.segment(k);
    const double b = seg.slowness();
    cplx q = 0.0;
    for (int sign : {+1, -1}) {
        const int col = layout_.column(edge, k, sign);
        if (col >= 0) {
            q += coeffs_[col] * (sign / b) * std::exp(omega_ * (sign * b * x));
        }
    }
    const EdgeSamples& fe = f_->edge(edge);
    if (fe.x.size() >= 2) {
        q += particular_flux(seg, fe, omega_, x);
    }
    return omega_ * q;
}

ResolventSolution resolvent(const MetricTree& tree, cplx omega, const GraphFunction& f)
{
    CouplingSystem sys = assemble(tree, omega, f);
    const int n = sys.layout.size();
    Eigen::VectorXd scale(n);
    for (int c = 0; c < n; ++c) {
        const double m = sys.matrix.col(c).cwiseAbs().maxCoeff();
        scale[c] = m > 0.0 ? 1.0 / m : 1.0;
    }
    const Eigen::MatrixXcd scaled = sys.matrix * scale.asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(scaled, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smin = sv[n - 1];
    const double cond = smin > 0.0 ? sv[0] / smin : std::numeric_limits<double>::infinity();
    if (!(cond <= kConditionLimit)) {
        throw Error(ErrorCode::SingularSystem,
                    "coupling system condition number " + std::to_string(cond) +
                        " exceeds 1e12");
    }
    Eigen::VectorXcd y = svd.solve(sys.rhs);
    Eigen::VectorXcd c = scale.asDiagonal() * y;
    return ResolventSolution(tree, f, omega, std::move(c), std::move(sys.layout), cond);
}

GraphFunction solve_resolvent(const MetricTree& tree, cplx omega, const GraphFunction& f)
{
    const ResolventSolution sol = resolvent(tree, omega, f);
    return resample(f, [&](std::size_t e, double x) { return sol(static_cast<int>(e), x); });
}

cplx det_direct(const MetricTree& tree, cplx omega, std::uint64_t flipped)
{
    const CouplingLayout L = make_layout(tree, flipped);
    return coupling_matrix(tree, L, omega).partialPivLu().determinant();
}

namespace
{

struct Stage
{
    enum Kind
    {
        Interface,
        Vertex,
        Base
    } kind = Base;
    // Interface: edge, x_f, b_i, b_f. Vertex: internal edge, a, b_i.
    int edge = -1;
    double x = 0.0;
    double b_i = 1.0;
    double b_f = 1.0;
    // Vertex: external edges; Base: all edges. (global index, slowness)
    std::vector<std::pair<int, double>> edges;
};

std::vector<Stage> build_stages(const MetricTree& tree)
{
    std::vector<Stage> stages;
    MetricTree cur = tree;
    auto gid = [&](int local) { return tree.find_edge(cur.edges[local].id); };
    while (true) {
        std::vector<int> ext;
        ReductionStep step;
        const bool star = cur.vertex_count() == 1;
        if (star) {
            for (int i = 0; i < static_cast<int>(cur.edge_count()); ++i) {
                ext.push_back(i);
            }
        } else {
            step = find_reducible_vertex(cur);
            ext = step.external_edges;
        }
        auto layered = std::find_if(ext.begin(), ext.end(),
                                    [&](int i) { return cur.edges[i].profile.size() > 1; });
        if (layered != ext.end()) {
            const Edge& e = cur.edges[*layered];
            const std::size_t n = e.profile.size();
            Stage s;
            s.kind = Stage::Interface;
            s.edge = gid(*layered);
            s.x = e.profile[n - 1].at;
            s.b_f = 1.0 / std::sqrt(e.profile[n - 1].sigma);
            s.b_i = 1.0 / std::sqrt(e.profile[n - 2].sigma);
            stages.push_back(s);
            cur = remove_last_breakpoint(cur, *layered);
            continue;
        }
        Stage s;
        for (int i : ext) {
            s.edges.push_back({gid(i), cur.edges[i].segment(0).slowness()});
        }
        if (star) {
            s.kind = Stage::Base;
            stages.push_back(s);
            break;
        }
        const Edge& l = cur.edges[step.internal_edge];
        const Edge lp = l.from == step.parent ? l : reversed(l);
        s.kind = Stage::Vertex;
        s.edge = gid(step.internal_edge);
        s.x = *lp.length;
        s.b_i = 1.0 / std::sqrt(lp.profile.back().sigma);
        stages.push_back(s);
        cur = reduce(cur, step);
    }
    return stages;
}

class DetRecursion
{
public:
    explicit DetRecursion(std::vector<Stage> stages) : stages_(std::move(stages))
    {
    }

    const ExpPolyd& det(std::size_t k, std::uint64_t S)
    {
        auto key = std::make_pair(k, S);
        auto it = memo_.find(key);
        if (it != memo_.end()) {
            return it->second;
        }
        const Stage& st = stages_[k];
        ExpPolyd out;
        auto bit = [](int e) { return 1ULL << e; };
        switch (st.kind) {
        case Stage::Base: {
            double v = 0.0;
            for (const auto& [e, b] : st.edges) {
                v += (S & bit(e)) ? -1.0 / b : 1.0 / b;
            }
            out = ExpPolyd::constant(v);
            break;
        }
        case Stage::Interface: {
            const bool fl = (S & bit(st.edge)) != 0;
            const double g = fl ? -1.0 / st.b_f : 1.0 / st.b_f;
            const double shift = fl ? st.b_f * st.x : -st.b_f * st.x;
            const std::uint64_t s0 = S & ~bit(st.edge);
            const std::uint64_t s1 = S | bit(st.edge);
            ExpPolyd a = mul(ExpPolyd::monomial(st.b_i * st.x, 1.0 / st.b_i + g), det(k + 1, s0));
            ExpPolyd c =
                mul(ExpPolyd::monomial(-st.b_i * st.x, 1.0 / st.b_i - g), det(k + 1, s1));
            out = (a + c).shifted(shift);
            break;
        }
        case Stage::Vertex: {
            double G = 0.0;
            std::uint64_t s0 = S;
            for (const auto& [e, b] : st.edges) {
                G += (S & bit(e)) ? -1.0 / b : 1.0 / b;
                s0 &= ~bit(e);
            }
            const std::uint64_t s1 = s0 | bit(st.edge);
            ExpPolyd a = mul(ExpPolyd::monomial(st.b_i * st.x, G + 1.0 / st.b_i), det(k + 1, s0));
            ExpPolyd c =
                mul(ExpPolyd::monomial(-st.b_i * st.x, 1.0 / st.b_i - G), det(k + 1, s1));
            out = a + c;
            break;
        }
        }
        return memo_.emplace(key, std::move(out)).first->second;
    }

private:
    std::vector<Stage> stages_;
    std::map<std::pair<std::size_t, std::uint64_t>, ExpPolyd> memo_;
};

int distinguished_edge(const MetricTree& tree)
{
    if (tree.vertex_count() == 1) {
        return static_cast<int>(tree.edge_count()) - 1;
    }
    return find_reducible_vertex(tree).external_edges.back();
}

double golden_min(const std::function<double(double)>& f, double a, double b)
{
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < 80 && (b - a) > 1e-13 * (1.0 + std::abs(a)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

} // namespace

ExpPolyd det_recursive_flipped(const MetricTree& tree, std::uint64_t flipped)
{
    if (tree.edge_count() > 64) {
        throw Error(ErrorCode::InvalidStep, "recursive determinant supports at most 64 edges");
    }
    DetRecursion rec(build_stages(tree));
    return rec.det(0, flipped);
}

StripScan strip_scan(const ExpPolyd& det, const ExpPolyd& det_tilde, double tau_max, int samples)
{
    StripScan out;
    out.c_min = std::numeric_limits<double>::infinity();
    out.r_max = 0.0;
    auto abs_det = [&](double t) { return std::abs(det(cplx(0.0, t))); };
    auto ratio = [&](double t) {
        return std::abs(det_tilde(cplx(0.0, t))) / std::abs(det(cplx(0.0, t)));
    };
    std::vector<double> taus;
    for (int j = 0; j < samples; ++j) {
        const double t =
            samples == 1 ? tau_max : -tau_max + 2.0 * tau_max * j / (samples - 1);
        if (t != 0.0) {
            taus.push_back(t);
        }
    }
    std::vector<double> ad(taus.size());
    std::vector<double> ra(taus.size());
    for (std::size_t j = 0; j < taus.size(); ++j) {
        ad[j] = abs_det(taus[j]);
        ra[j] = ratio(taus[j]);
        out.rows.push_back({taus[j], ad[j], ra[j]});
    }
    const double amin = *std::min_element(ad.begin(), ad.end());
    const double rmax = *std::max_element(ra.begin(), ra.end());
    const double span = 1e-2 * (1.0 + amin);
    // Polish sampled extrema close to the global ones.
    for (std::size_t j = 1; j + 1 < taus.size(); ++j) {
        if (ad[j] <= ad[j - 1] && ad[j] <= ad[j + 1] && ad[j] <= amin + span) {
            const double t = golden_min(abs_det, taus[j - 1], taus[j + 1]);
            if (t != 0.0) {
                out.rows.push_back({t, abs_det(t), ratio(t)});
            }
        }
        if (ra[j] >= ra[j - 1] && ra[j] >= ra[j + 1] && ra[j] >= rmax - 1e-2) {
            const double t =
                golden_min([&](double s) { return -ratio(s); }, taus[j - 1], taus[j + 1]);
            if (t != 0.0) {
                out.rows.push_back({t, abs_det(t), ratio(t)});
            }
        }
    }
    std::sort(out.rows.begin(), out.rows.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
    for (const auto& r : out.rows) {
        if (r[1] < out.c_min) {
            out.c_min = r[1];
            out.tau_at_c_min = r[0];
        }
        if (r[2] > out.r_max) {
            out.r_max = r[2];
            out.tau_at_r_max = r[0];
        }
    }
    return out;
}

StripScan strip_scan(const MetricTree& tree, double tau_max, int samples)
{
    const int d = distinguished_edge(tree);
    const ExpPolyd det = det_recursive_flipped(tree, 0);
    const ExpPolyd det_tilde = det_recursive_flipped(tree, 1ULL << d);
    StripScan s = strip_scan(det, det_tilde, tau_max, samples);
    if (!(s.c_min > 0.0) || !(s.r_max < 1.0)) {
        throw Error(ErrorCode::BoundViolated,
                    "strip scan: c_min = " + std::to_string(s.c_min) +
                        ", r_max = " + std::to_string(s.r_max));
    }
    return s;
}

DetPair det_recursive(const MetricTree& tree, double tau_max, int samples)
{
    if (tree.edge_count() > 64) {
        throw Error(ErrorCode::InvalidStep, "recursive determinant supports at most 64 edges");
    }
    DetPair p;
    std::vector<Stage> stages = build_stages(tree);
    p.stages = static_cast<int>(stages.size()) - 1;
    DetRecursion rec(std::move(stages));
    p.distinguished_edge = distinguished_edge(tree);
    p.det = rec.det(0, 0);
    p.det_tilde = rec.det(0, 1ULL << p.distinguished_edge);
    if (samples > 0) {
        StripScan s = strip_scan(p.det, p.det_tilde, tau_max, samples);
        if (!(s.c_min > 0.0) || !(s.r_max < 1.0)) {
            throw Error(ErrorCode::BoundViolated,
                        "strip scan: c_min = " + std::to_string(s.c_min) +
                            ", r_max = " + std::to_string(s.r_max));
        }
        p.lower_bound = s.c_min;
        p.ratio_bound = s.r_max;
    }
    return p;
}

Eigen::MatrixXd vertex_scattering(const std::vector<double>& w)
{
    const int m = static_cast<int>(w.size());
    Eigen::MatrixXd S(m, m);
    // Incoming unit wave on edge k: u_j = delta_jk e^{-ikx} + S_jk e^{ikx}.
    for (int k = 0; k < m; ++k) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
        for (int j = 0; j + 1 < m; ++j) {
            A(j, j) = 1.0;
            A(j, j + 1) = -1.0;
            rhs[j] = (j + 1 == k ? 1.0 : 0.0) - (j == k ? 1.0 : 0.0);
        }
        for (int j = 0; j < m; ++j) {
            A(m - 1, j) = w[j];
        }
        rhs[m - 1] = w[k];
        S.col(k) = A.fullPivLu().solve(rhs);
    }
    return S;
}

Eigen::MatrixXd vertex_scattering(int m)
{
    return vertex_scattering(std::vector<double>(static_cast<std::size_t>(m), 1.0));
}

Eigen::Matrix2d interface_scattering(double b_i, double b_f)
{
    const double wi = 1.0 / b_i;
    const double wf = 1.0 / b_f;
    Eigen::Matrix2d S;
    // From the b_i side: 1 + r = t, wi (1 - r) = wf t.
    Eigen::Matrix2d A;
    A << 1.0, -1.0, wi, wf;
    S.col(0) = A.fullPivLu().solve(Eigen::Vector2d(-1.0, wi));
    // From the b_f side: 1 + r' = t', wf (1 - r') = wi t'.
    Eigen::Matrix2d B;
    B << 1.0, -1.0, wf, wi;
    Eigen::Vector2d tr = B.fullPivLu().solve(Eigen::Vector2d(-1.0, wf));
    S(1, 1) = tr[0];
    S(0, 1) = tr[1];
    return S;
}

double flux_unitarity_defect(const Eigen::MatrixXd& s, const std::vector<double>& w)
{
    const int m = static_cast<int>(w.size());
    Eigen::VectorXd sq(m);
    for (int j = 0; j < m; ++j) {
        sq[j] = std::sqrt(w[j]);
    }
    const Eigen::MatrixXd M = sq.asDiagonal() * s * sq.cwiseInverse().asDiagonal();
    return (M * M.transpose() - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
}

} // namespace kirchhoff
