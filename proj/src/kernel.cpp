#include "kirchhoff/kernel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <thread>
#include <tuple>
#include <unordered_map>

#include "kirchhoff/error.hpp"
#include "kirchhoff/resolvent.hpp"
#include "gauss_rule.hpp"

namespace kirchhoff
{

namespace
{

using Poly = ExpPolyd;

// Entries of one row grouped by column.
std::vector<std::vector<std::pair<int, Poly>>> row_polys(
    const std::vector<std::vector<SymEntry>>& sym)
{
    std::vector<std::vector<std::pair<int, Poly>>> rows(sym.size());
    for (std::size_t r = 0; r < sym.size(); ++r) {
        std::map<int, std::vector<Poly::Term>> by_col;
        for (const SymEntry& e : sym[r]) {
            by_col[e.col].push_back({e.lambda, e.coeff});
        }
        for (auto& [c, ts] : by_col) {
            Poly p = Poly::from_terms(std::move(ts));
            if (!p.empty()) {
                rows[r].emplace_back(c, std::move(p));
            }
        }
    }
    return rows;
}

bool odd_above(std::uint64_t mask, int c)
{
    return (std::popcount(mask >> (c + 1)) & 1) != 0;
}

// Permutation expansion row by row; state = set of used columns.
Poly symbolic_det(const std::vector<std::vector<std::pair<int, Poly>>>& rows)
{
    std::map<std::uint64_t, Poly> cur;
    cur.emplace(0, Poly::constant(1.0));
    for (const auto& row : rows) {
        std::map<std::uint64_t, Poly> next;
        for (const auto& [mask, val] : cur) {
            for (const auto& [c, entry] : row) {
                const std::uint64_t bit = 1ULL << c;
                if (mask & bit) {
                    continue;
                }
                Poly v = mul(val, entry);
                if (odd_above(mask, c)) {
                    v = -v;
                }
                next[mask | bit] += v;
            }
        }
        cur = std::move(next);
    }
    const std::uint64_t full = rows.size() == 64 ? ~0ULL : (1ULL << rows.size()) - 1;
    auto it = cur.find(full);
    return it == cur.end() ? Poly() : it->second;
}

// Cofactors C_{jk} for all rows j of column k: the determinant with column
// k replaced by the unit vector e_j. The tag records which row took k.
std::vector<Poly> cofactor_column(const std::vector<std::vector<std::pair<int, Poly>>>& rows,
                                  int k)
{
    const int n = static_cast<int>(rows.size());
    std::map<std::pair<std::uint64_t, int>, Poly> cur;
    cur.emplace(std::make_pair(0ULL, -1), Poly::constant(1.0));
    const std::uint64_t kbit = 1ULL << k;
    for (int r = 0; r < n; ++r) {
        std::map<std::pair<std::uint64_t, int>, Poly> next;
        for (const auto& [key, val] : cur) {
            const auto [mask, tag] = key;
            for (const auto& [c, entry] : rows[r]) {
                const std::uint64_t bit = 1ULL << c;
                if (c == k || (mask & bit)) {
                    continue;
                }
                Poly v = mul(val, entry);
                if (odd_above(mask, c)) {
                    v = -v;
                }
                next[{mask | bit, tag}] += v;
            }
            if (tag < 0) {
                next[{mask | kbit, r}] += odd_above(mask, k) ? -val : val;
            }
        }
        cur = std::move(next);
    }
    const std::uint64_t full = n == 64 ? ~0ULL : (1ULL << n) - 1;
    std::vector<Poly> out(n);
    for (auto& [key, val] : cur) {
        if (key.first == full && key.second >= 0) {
            out[key.second] = std::move(val);
        }
    }
    return out;
}

using MomentKey = std::tuple<int, int, int>;

void sort_terms(std::vector<KernelTerm>& terms)
{
    std::sort(terms.begin(), terms.end(), [](const KernelTerm& a, const KernelTerm& b) {
        return std::tie(a.source_edge, a.source_segment, a.p, a.target_edge, a.target_segment,
                        a.q, a.beta, a.region) < std::tie(b.source_edge, b.source_segment, b.p,
                                                           b.target_edge, b.target_segment, b.q,
                                                           b.beta, b.region);
    });
}

double amplitude_sum(const std::vector<KernelTerm>& terms)
{
    std::map<std::array<int, 4>, double> acc;
    for (const KernelTerm& t : terms) {
        if (t.region > 0) {
            continue;
        }
        acc[{t.target_edge, t.target_segment, t.source_edge, t.source_segment}] +=
            std::abs(t.amplitude);
    }
    double best = 0.0;
    for (const auto& [key, s] : acc) {
        best = std::max(best, s);
    }
    return best;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn)
{
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(1, n / 16));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) {
            break;
        }
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

} // namespace

KernelExpansion kernel_terms(const MetricTree& tree, double eps, const KernelOptions& options)
{
    if (!(eps > 0.0)) {
        throw Error(ErrorCode::ConfigError, "kernel_terms: eps must be positive");
    }
    const CouplingLayout L = make_layout(tree);
    const int n = L.size();
    if (n > 64) {
        throw Error(ErrorCode::UnsupportedData, "kernel_terms supports at most 64 unknowns");
    }
    const auto rows = row_polys(symbolic_matrix(tree, L));
    const auto rhs = symbolic_rhs(tree, L);
    const Poly det = symbolic_det(rows);

    // N[k][M] = sum_j C_jk rho_jM.
    std::vector<std::map<MomentKey, Poly>> numer(n);
    double max_numer = 0.0;
    for (int k = 0; k < n; ++k) {
        const std::vector<Poly> cof = cofactor_column(rows, k);
        for (int j = 0; j < n; ++j) {
            if (cof[j].empty()) {
                continue;
            }
            for (const RhsTerm& t : rhs[j]) {
                const MomentKey key{t.moment.edge, t.moment.segment, t.moment.sign};
                numer[k][key] += mul(cof[j], Poly::monomial(t.lambda, t.coeff));
            }
        }
        for (const auto& [key, p] : numer[k]) {
            max_numer = std::max(max_numer, p.abs_sum());
        }
    }

    const double eps_inv = max_numer > 0.0 ? 0.5 * eps / max_numer : eps;
    const GeomInverse<double> inv = geom_inverse(det, eps_inv, options.inverse_prune);

    KernelExpansion out;
    out.ratio = inv.ratio;
    out.order = inv.order;
    out.inverse_terms = inv.inverse.size();
    // Error per target segment: 0.5 * sum over its slots of
    // max_M (|N_kM|_1 tail + pruned_kM).
    std::map<std::pair<int, int>, double> seg_err;
    const double prune_budget = 0.25 * eps;
    for (int k = 0; k < n; ++k) {
        const Slot& slot = L.slots[k];
        const double bt = tree.edges[slot.edge].segment(slot.segment).slowness();
        double worst = 0.0;
        for (const auto& [key, np] : numer[k]) {
            if (np.empty()) {
                continue;
            }
            const auto [se, ss, ssign] = key;
            const double bs = tree.edges[se].segment(ss).slowness();
            const Poly prod = mul(np, inv.inverse);
            std::vector<Poly::Term> ts = prod.terms();
            std::sort(ts.begin(), ts.end(), [](const auto& a, const auto& b) {
                return std::abs(a.coeff) < std::abs(b.coeff);
            });
            double pruned = 0.0;
            for (const auto& term : ts) {
                const double a = std::abs(term.coeff);
                if (pruned + a <= prune_budget) {
                    pruned += a;
                    continue;
                }
                KernelTerm kt;
                kt.amplitude = cplx(0.0, -0.5 * term.coeff);
                kt.target_edge = slot.edge;
                kt.target_segment = slot.segment;
                kt.p = term.lambda;
                kt.q = slot.sign * bt;
                kt.source_edge = se;
                kt.source_segment = ss;
                kt.beta = ssign * bs;
                out.terms.push_back(kt);
            }
            worst = std::max(worst, np.abs_sum() * inv.tail_bound + pruned);
        }
        seg_err[{slot.edge, slot.segment}] += 0.5 * worst;
    }
    for (const auto& [key, err] : seg_err) {
        out.eps_rep = std::max(out.eps_rep, err);
    }

    for (std::size_t e = 0; e < tree.edge_count(); ++e) {
        const Edge& ed = tree.edges[e];
        for (std::size_t s = 0; s < ed.segment_count(); ++s) {
            const double b = ed.segment(s).slowness();
            for (int region : {-1, +1}) {
                KernelTerm kt;
                kt.amplitude = cplx(0.0, -0.5 * b);
                kt.target_edge = kt.source_edge = static_cast<int>(e);
                kt.target_segment = kt.source_segment = static_cast<int>(s);
                kt.p = 0.0;
                kt.q = region < 0 ? -b : b;
                kt.beta = -kt.q;
                kt.region = region;
                out.terms.push_back(kt);
            }
        }
    }
    sort_terms(out.terms);
    out.amplitude_sum = amplitude_sum(out.terms);
    return out;
}

cplx evaluate_terms(const KernelExpansion& k, const MetricTree& tree, const GraphFunction& f,
                    double tau, int edge, double x)
{
    const Edge& te = tree.edges.at(edge);
    const int seg = static_cast<int>(te.segment_at(x));
    cplx sum = 0.0;
    for (const KernelTerm& t : k.terms) {
        if (t.target_edge != edge || t.target_segment != seg) {
            continue;
        }
        const Segment s = tree.edges[t.source_edge].segment(t.source_segment);
        double a = s.begin;
        double c = s.end ? *s.end : std::numeric_limits<double>::infinity();
        if (t.region < 0) {
            c = std::min(c, x);
        } else if (t.region > 0) {
            a = std::max(a, x);
        }
        const cplx m = edge_moment(f.edge(t.source_edge), a, c, cplx(0.0, tau * t.beta), 0.0);
        sum += t.amplitude * std::exp(cplx(0.0, tau * (t.p + t.q * x))) * m;
    }
    return sum;
}

cplx time_integral(double r, double t)
{
    if (t == 0.0) {
        throw Error(ErrorCode::ZeroTime, "time integral at t = 0");
    }
    const double sgn = t > 0.0 ? 1.0 : -1.0;
    return std::sqrt(std::numbers::pi / std::abs(t)) *
           std::exp(cplx(0.0, sgn * std::numbers::pi / 4.0 - r * r / (4.0 * t)));
}

namespace
{

constexpr int kChebNodes = 20;
constexpr double kMaxCellPhase = 2.5;

struct Cell
{
    double y0, y1;
    cplx u0, u1;
};

// H(k) = integral of u(y) exp(i (c2 y^2 + k (y - yc))) over the data on one
// source segment; the integrand has exponential type W/2 in k, so panels of
// width 8/W are resolved by kChebNodes Chebyshev nodes.
class SourceTable
{
public:
    SourceTable(std::vector<Cell> cells, double c2) : cells_(std::move(cells)), c2_(c2)
    {
        lo_ = cells_.front().y0;
        hi_ = cells_.back().y1;
        yc_ = 0.5 * (lo_ + hi_);
        width_ = 8.0 / std::max(hi_ - lo_, 1e-6);
    }

    long panel_of(double k) const
    {
        return static_cast<long>(std::floor(k / width_));
    }

    void require(long j)
    {
        index_.emplace(j, -1);
    }

    std::vector<long> pending() const
    {
        std::vector<long> out;
        for (const auto& [j, off] : index_) {
            if (off < 0) {
                out.push_back(j);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    void allocate(const std::vector<long>& panels)
    {
        for (long j : panels) {
            index_[j] = static_cast<long>(coeffs_.size());
            coeffs_.resize(coeffs_.size() + kChebNodes);
        }
    }

    // Fills an allocated panel; returns the tail estimate of its series.
    double build(long j)
    {
        const long off = index_.at(j);
        const double kc = (j + 0.5) * width_;
        std::array<cplx, kChebNodes> vals;
        for (int i = 0; i < kChebNodes; ++i) {
            const double xi = std::cos(std::numbers::pi * (i + 0.5) / kChebNodes);
            vals[i] = h_value(kc + 0.5 * width_ * xi);
        }
        for (int m = 0; m < kChebNodes; ++m) {
            cplx s = 0.0;
            for (int i = 0; i < kChebNodes; ++i) {
                s += vals[i] * std::cos(std::numbers::pi * m * (i + 0.5) / kChebNodes);
            }
            s *= 2.0 / kChebNodes;
            if (m == 0) {
                s *= 0.5;
            }
            coeffs_[off + m] = s;
        }
        return std::abs(coeffs_[off + kChebNodes - 1]) + std::abs(coeffs_[off + kChebNodes - 2]);
    }

    // G(k) = H(k) exp(i k yc).
    cplx g_value(double k) const
    {
        const long j = panel_of(k);
        const long off = index_.at(j);
        const double kc = (j + 0.5) * width_;
        const double xi = (k - kc) / (0.5 * width_);
        cplx b1 = 0.0;
        cplx b2 = 0.0;
        for (int m = kChebNodes - 1; m >= 1; --m) {
            const cplx b0 = 2.0 * xi * b1 - b2 + coeffs_[off + m];
            b2 = b1;
            b1 = b0;
        }
        const cplx h = xi * b1 - b2 + coeffs_[off];
        return h * std::exp(cplx(0.0, k * yc_));
    }

private:
    cplx h_value(double k) const
    {
        const auto& gl = detail::gauss_rule<6>();
        cplx sum = 0.0;
        for (const Cell& c : cells_) {
            const double len = c.y1 - c.y0;
            const double ym = 0.5 * (c.y0 + c.y1);
            const double span = std::abs(2.0 * c2_ * ym + k) * len + c2_ * len * len;
            const int nsub = std::max(1, static_cast<int>(std::ceil(span / kMaxCellPhase)));
            const double sub = len / nsub;
            for (int s = 0; s < nsub; ++s) {
                const double a = c.y0 + s * sub;
                for (int g = 0; g < 6; ++g) {
                    const double y = a + 0.5 * sub * (gl.nodes[g] + 1.0);
                    const double w = (y - c.y0) / len;
                    const cplx u = c.u0 + (c.u1 - c.u0) * w;
                    const double phase = c2_ * y * y + k * (y - yc_);
                    sum += (0.5 * sub * gl.weights[g]) * u * std::exp(cplx(0.0, phase));
                }
            }
        }
        return sum;
    }

    std::vector<Cell> cells_;
    double c2_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    double yc_ = 0.0;
    double width_ = 1.0;
    std::map<long, long> index_;
    std::vector<cplx> coeffs_;
};

// Cells of the interpolant of s clipped to [a, c].
std::vector<Cell> clip_cells(const EdgeSamples& s, double a, double c)
{
    std::vector<Cell> out;
    for (std::size_t j = 1; j < s.x.size(); ++j) {
        const double x0 = s.x[j - 1];
        const double x1 = s.x[j];
        const double lo = std::max(x0, a);
        const double hi = std::min(x1, c);
        if (!(hi > lo)) {
            continue;
        }
        const cplx f0 = s.values[j - 1] + (s.values[j] - s.values[j - 1]) * ((lo - x0) / (x1 - x0));
        const cplx f1 = s.values[j - 1] + (s.values[j] - s.values[j - 1]) * ((hi - x0) / (x1 - x0));
        if (f0 == 0.0 && f1 == 0.0) {
            continue;
        }
        out.push_back({lo, hi, f0, f1});
    }
    return out;
}

void check_data(const MetricTree& tree, const GraphFunction& u0)
{
    if (u0.edge_count() != tree.edge_count()) {
        throw Error(ErrorCode::UnsupportedData, "data edge count does not match the tree");
    }
    u0.check_against(tree);
    const double scale = std::max(1.0, u0.linf_norm());
    for (std::size_t e = 0; e < tree.edge_count(); ++e) {
        const EdgeSamples& s = u0.edge(e);
        if (tree.edges[e].infinite() && s.size() >= 1 &&
            std::abs(s.values[s.values.size() - 1]) > 1e-12 * scale) {
            throw Error(ErrorCode::UnsupportedData,
                        "data on infinite edge " + tree.edges[e].id +
                            " does not vanish at its last sample");
        }
    }
}

} // namespace

Propagation propagate(const MetricTree& tree, const GraphFunction& u0, double t,
                      const std::vector<EvalPoint>& points, double eps, int threads)
{
    if (t == 0.0) {
        throw Error(ErrorCode::ZeroTime, "propagate at t = 0");
    }
    const KernelExpansion k = kernel_terms(tree, eps);
    return propagate(k, tree, u0, t, points, threads);
}

Propagation propagate(const KernelExpansion& k, const MetricTree& tree, const GraphFunction& u0,
                      double t, const std::vector<EvalPoint>& points, int threads)
{
    if (t == 0.0) {
        throw Error(ErrorCode::ZeroTime, "propagate at t = 0");
    }
    check_data(tree, u0);
    const double a = 1.0 / (4.0 * t);

    // One table per source segment carrying data.
    std::map<std::pair<int, int>, int> table_of;
    std::vector<SourceTable> tables;
    for (std::size_t e = 0; e < tree.edge_count(); ++e) {
        const Edge& ed = tree.edges[e];
        for (std::size_t s = 0; s < ed.segment_count(); ++s) {
            const Segment seg = ed.segment(s);
            auto cells = clip_cells(u0.edge(e), seg.begin,
                                    seg.end ? *seg.end : std::numeric_limits<double>::infinity());
            if (cells.empty()) {
                continue;
            }
            const double b = seg.slowness();
            table_of[{static_cast<int>(e), static_cast<int>(s)}] = static_cast<int>(tables.size());
            tables.emplace_back(std::move(cells), a * b * b);
        }
    }

    // Terms per target segment with their table; the lower direct piece
    // stands for the whole direct kernel since time_integral is even in r.
    struct Active
    {
        cplx amplitude;
        double p, q, beta;
        int table;
    };
    std::map<std::pair<int, int>, std::vector<Active>> by_target;
    std::map<std::pair<int, int>, double> target_mass;
    for (const KernelTerm& kt : k.terms) {
        if (kt.region > 0) {
            continue;
        }
        auto it = table_of.find({kt.source_edge, kt.source_segment});
        if (it == table_of.end()) {
            continue;
        }
        by_target[{kt.target_edge, kt.target_segment}].push_back(
            {kt.amplitude, kt.p, kt.q, kt.beta, it->second});
        target_mass[{kt.target_edge, kt.target_segment}] += std::abs(kt.amplitude);
    }

    std::vector<int> point_seg(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Edge& ed = tree.edges.at(points[i].edge);
        point_seg[i] = static_cast<int>(ed.segment_at(points[i].x));
        auto it = by_target.find({points[i].edge, point_seg[i]});
        if (it == by_target.end()) {
            continue;
        }
        for (const Active& act : it->second) {
            const double r0 = act.p + act.q * points[i].x;
            SourceTable& tab = tables[act.table];
            tab.require(tab.panel_of(2.0 * a * r0 * act.beta));
        }
    }

    std::vector<std::pair<int, long>> jobs;
    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
        const auto pend = tables[ti].pending();
        tables[ti].allocate(pend);
        for (long j : pend) {
            jobs.emplace_back(static_cast<int>(ti), j);
        }
    }
    std::vector<double> tails(jobs.size(), 0.0);
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        tails[i] = tables[jobs[i].first].build(jobs[i].second);
    });
    const double tail = tails.empty() ? 0.0 : *std::max_element(tails.begin(), tails.end());

    const cplx pref = cplx(0.0, 1.0 / std::numbers::pi) *
                      std::sqrt(std::numbers::pi / std::abs(t)) *
                      std::exp(cplx(0.0, -(t > 0.0 ? 1.0 : -1.0) * std::numbers::pi / 4.0));
    Propagation out;
    out.values.assign(points.size(), 0.0);
    parallel_for(points.size(), threads, [&](std::size_t i) {
        auto it = by_target.find({points[i].edge, point_seg[i]});
        if (it == by_target.end()) {
            return;
        }
        cplx sum = 0.0;
        for (const Active& act : it->second) {
            const double r0 = act.p + act.q * points[i].x;
            const cplx g = tables[act.table].g_value(2.0 * a * r0 * act.beta);
            sum += act.amplitude * std::exp(cplx(0.0, a * r0 * r0)) * g;
        }
        out.values[i] = pref * sum;
    });

    double mass = 0.0;
    for (const auto& [key, m] : target_mass) {
        mass = std::max(mass, m);
    }
    const double norm = 1.0 / std::sqrt(std::numbers::pi * std::abs(t));
    out.eps_rep = k.eps_rep;
    out.amplitude_sum = k.amplitude_sum;
    out.term_count = k.terms.size();
    out.truncation_bound = k.eps_rep * u0.l1_norm() * norm;
    out.quadrature_bound = mass * tail * norm;
    return out;
}

GraphFunction propagate_on(const KernelExpansion& k, const MetricTree& tree,
                           const GraphFunction& u0, double t, const GraphFunction& like,
                           Propagation* info, int threads)
{
    std::vector<EvalPoint> pts;
    for (std::size_t e = 0; e < like.edge_count(); ++e) {
        for (double x : like.edge(e).x) {
            pts.push_back({static_cast<int>(e), x});
        }
    }
    Propagation p = propagate(k, tree, u0, t, pts, threads);
    GraphFunction out(like.edge_count());
    std::size_t i = 0;
    for (std::size_t e = 0; e < like.edge_count(); ++e) {
        const auto& xs = like.edge(e).x;
        Eigen::VectorXcd v(static_cast<Eigen::Index>(xs.size()));
        for (std::size_t j = 0; j < xs.size(); ++j) {
            v[static_cast<Eigen::Index>(j)] = p.values[i++];
        }
        if (!xs.empty()) {
            out.set_edge(e, xs, std::move(v));
        }
    }
    if (info) {
        p.values.clear();
        *info = std::move(p);
    }
    return out;
}

} // namespace kirchhoff
