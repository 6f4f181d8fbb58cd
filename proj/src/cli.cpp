#include "kirchhoff/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kirchhoff/analysis.hpp"
#include "kirchhoff/error.hpp"
#include "kirchhoff/fd_oracle.hpp"
#include "kirchhoff/resolvent.hpp"

namespace kirchhoff
{

namespace
{

using nlohmann::ordered_json;

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hex(std::uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return {};
    }
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_row(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(trim(cell));
    }
    return out;
}

double parse_number(const std::string& s, const std::string& where)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        throw Error(ErrorCode::SchemaError, where + ": not a number: '" + s + "'");
    }
    return v;
}

// Data rows of a CSV file; comments, blank lines and a leading header row
// (first cell not numeric and equal to "edge") are skipped.
std::vector<std::pair<int, std::vector<std::string>>> read_rows(const std::string& path,
                                                                std::size_t columns)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot read " + path);
    }
    std::vector<std::pair<int, std::vector<std::string>>> rows;
    std::string line;
    int lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        auto cells = split_row(t);
        if (first && !cells.empty() && cells[0] == "edge") {
            first = false;
            continue;
        }
        first = false;
        if (cells.size() != columns) {
            throw Error(ErrorCode::SchemaError, path + ":" + std::to_string(lineno) + ": expected " +
                                                    std::to_string(columns) + " columns");
        }
        rows.emplace_back(lineno, std::move(cells));
    }
    return rows;
}

int edge_index(const MetricTree& tree, const std::string& id, const std::string& where)
{
    const int e = tree.find_edge(id);
    if (e < 0) {
        throw Error(ErrorCode::SchemaError, where + ": unknown edge '" + id + "'");
    }
    return e;
}

void check_coordinate(const MetricTree& tree, int e, double x, const std::string& where)
{
    const Edge& ed = tree.edges[e];
    if (!std::isfinite(x) || x < 0.0 || (ed.length && x > *ed.length)) {
        throw Error(ErrorCode::OutOfRangeCoordinate,
                    where + ": x = " + num(x) + " outside edge '" + ed.id + "'");
    }
}

// Output sink: the file named by --out or the caller's stream.
class Sink
{
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback)
    {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) {
                throw Error(ErrorCode::IoError, "cannot write " + path);
            }
            stream_ = &file_;
        }
    }
    std::ostream& operator*()
    {
        return *stream_;
    }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

using Params = std::vector<std::pair<std::string, std::string>>;

Params command_params(const RunConfig& c)
{
    Params p;
    auto add = [&p](const char* k, const std::string& v) { p.emplace_back(k, v); };
    const std::string& cmd = c.command;
    if (cmd == "det-scan" || cmd == "expand") {
        add("tau_max", num(c.tau_max));
    }
    if (cmd == "det-scan") {
        add("samples", std::to_string(c.samples));
    }
    if (cmd == "resolvent-check") {
        add("omega_re", num(c.omega.real()));
        add("omega_im", num(c.omega.imag()));
    }
    if (cmd == "expand" || cmd == "evolve" || cmd == "oracle-compare" || cmd == "dispersion") {
        add("eps", num(c.eps));
    }
    if (cmd == "evolve" || cmd == "oracle-compare") {
        add("time", num(c.time));
        add("h", num(c.h));
        add("reach", num(c.reach));
    }
    if (cmd == "oracle-compare" || cmd == "nls") {
        add("dt", num(c.dt));
        add("L", num(c.L));
    }
    if (cmd == "nls") {
        add("h", num(c.h));
        add("p", num(c.p));
        add("sign", std::to_string(c.sign));
        add("T", num(c.T));
        add("snapshot_every", std::to_string(c.snapshot_every));
    }
    if (cmd == "dispersion") {
        add("tmin", num(c.tmin));
        add("tmax", num(c.tmax));
        add("n", std::to_string(c.n));
    }
    if (!c.data.empty()) {
        add("data", c.data);
    }
    if (!c.points.empty()) {
        add("points", c.points);
    }
    return p;
}

std::string timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Context
{
    const RunConfig& cfg;
    MetricTree tree;
    std::string hash;
};

// Header of a CSV table; `extra` carries error budgets and results.
void csv_header(std::ostream& os, const Context& ctx, const Params& extra)
{
    os << "# kirchhoff " << kToolVersion << '\n';
    os << "# command: " << ctx.cfg.command << '\n';
    os << "# graph: " << ctx.cfg.graph << '\n';
    os << "# graph_hash: " << ctx.hash << '\n';
    os << "# params:";
    for (const auto& [k, v] : command_params(ctx.cfg)) {
        os << ' ' << k << '=' << v;
    }
    os << '\n';
    os << "# seed: " << ctx.cfg.seed << '\n';
    for (const auto& [k, v] : extra) {
        os << "# " << k << ": " << v << '\n';
    }
    if (!ctx.cfg.no_timestamp) {
        os << "# timestamp: " << timestamp() << '\n';
    }
}

ordered_json json_meta(const Context& ctx)
{
    ordered_json m;
    m["tool"] = "kirchhoff";
    m["version"] = kToolVersion;
    m["command"] = ctx.cfg.command;
    m["graph"] = ctx.cfg.graph;
    m["graph_hash"] = ctx.hash;
    ordered_json p = ordered_json::object();
    for (const auto& [k, v] : command_params(ctx.cfg)) {
        p[k] = v;
    }
    m["params"] = p;
    m["seed"] = ctx.cfg.seed;
    if (!ctx.cfg.no_timestamp) {
        m["timestamp"] = timestamp();
    }
    return m;
}

GraphFunction require_data(const Context& ctx)
{
    if (ctx.cfg.data.empty()) {
        throw Error(ErrorCode::ConfigError, ctx.cfg.command + " needs --data");
    }
    return load_data(ctx.cfg.data, ctx.tree);
}

double support_hi(const GraphFunction& f)
{
    double hi = 0.0;
    for (std::size_t e = 0; e < f.edge_count(); ++e) {
        if (!f.edge(e).empty()) {
            hi = std::max(hi, f.support(e).second);
        }
    }
    return hi;
}

void write_function(std::ostream& os, const MetricTree& tree, const GraphFunction& f)
{
    os << "edge,x,re,im\n";
    for (std::size_t e = 0; e < f.edge_count(); ++e) {
        const EdgeSamples& s = f.edge(e);
        for (std::size_t i = 0; i < s.size(); ++i) {
            os << tree.edges[e].id << ',' << num(s.x[i]) << ',' << num(s.values[i].real()) << ','
               << num(s.values[i].imag()) << '\n';
        }
    }
}

void cmd_validate(const Context& ctx, std::ostream& os)
{
    const MetricTree& t = ctx.tree;
    ordered_json r;
    r["meta"] = json_meta(ctx);
    r["vertices"] = t.vertex_count();
    r["edges"] = t.edge_count();
    r["finite_edges"] = t.finite_edge_count();
    r["infinite_edges"] = t.infinite_edge_count();
    r["finite_length"] = t.finite_length();
    r["sigma_bounds"] = {{"min", t.sigma_min}, {"max", t.sigma_max}};
    r["vertex_ids"] = t.vertices;
    ordered_json edges = ordered_json::array();
    for (const Edge& e : t.edges) {
        ordered_json je;
        je["id"] = e.id;
        je["from"] = t.vertices[e.from];
        je["to"] = e.to == kNoVertex ? ordered_json(nullptr) : ordered_json(t.vertices[e.to]);
        je["length"] = e.length ? ordered_json(*e.length) : ordered_json(nullptr);
        je["segments"] = e.segment_count();
        edges.push_back(je);
    }
    r["edge_list"] = edges;
    r["notes"] = t.notes;
    r["hash"] = ctx.hash;
    os << r.dump(2) << '\n';
}

void cmd_det_scan(const Context& ctx, std::ostream& os)
{
    const DetPair dp = det_recursive(ctx.tree, ctx.cfg.tau_max, 0);
    const StripScan s = strip_scan(dp.det, dp.det_tilde, ctx.cfg.tau_max, ctx.cfg.samples);
    csv_header(os, ctx,
               {{"c_min", num(s.c_min)},
                {"tau_at_c_min", num(s.tau_at_c_min)},
                {"r_max", num(s.r_max)},
                {"tau_at_r_max", num(s.tau_at_r_max)},
                {"distinguished_edge", ctx.tree.edges[dp.distinguished_edge].id},
                {"det_terms", std::to_string(dp.det.size())}});
    os << "tau,abs_det,ratio\n";
    for (const auto& row : s.rows) {
        os << num(row[0]) << ',' << num(row[1]) << ',' << num(row[2]) << '\n';
    }
    os.flush();
    if (!(s.c_min > 0.0) || !(s.r_max < 1.0)) {
        throw Error(ErrorCode::BoundViolated,
                    "strip scan: c_min = " + num(s.c_min) + ", r_max = " + num(s.r_max));
    }
}

// Smooth bump on a random edge, used when resolvent-check has no --data.
GraphFunction random_bump(const MetricTree& tree, std::mt19937_64& rng)
{
    const int e = std::uniform_int_distribution<int>(0, static_cast<int>(tree.edge_count()) - 1)(rng);
    const Edge& ed = tree.edges[e];
    const double span = ed.length ? *ed.length : 4.0;
    const double c = std::uniform_real_distribution<double>(0.3, 0.7)(rng) * span;
    const double w = 0.15 * span;
    const double phase = std::uniform_real_distribution<double>(0.0, 6.283185307179586)(rng);
    return tabulate(
        tree,
        [=](std::size_t ee, double x) {
            if (static_cast<int>(ee) != e || std::abs(x - c) >= w) {
                return cplx(0.0);
            }
            const double s = std::cos(0.5 * 3.141592653589793 * (x - c) / w);
            return s * s * std::polar(1.0, phase);
        },
        0.001, span);
}

GraphFunction conjugate(const GraphFunction& f)
{
    return resample(f, [&f](std::size_t e, double x) { return std::conj(f(e, x)); });
}

void cmd_resolvent_check(const Context& ctx, std::ostream& os)
{
    std::mt19937_64 rng(ctx.cfg.seed);
    const GraphFunction f = ctx.cfg.data.empty() ? random_bump(ctx.tree, rng) : require_data(ctx);
    const GraphFunction g = random_bump(ctx.tree, rng);
    const cplx w = ctx.cfg.omega;
    const ResolventSolution rf = resolvent(ctx.tree, w, f);
    const ResolventSolution rg = resolvent(ctx.tree, w, g);

    double continuity = 0.0;
    double flux = 0.0;
    for (int v = 0; v < static_cast<int>(ctx.tree.vertex_count()); ++v) {
        cplx first = 0.0;
        cplx net = 0.0;
        bool have = false;
        for (const auto& end : ctx.tree.incident(v)) {
            const Edge& e = ctx.tree.edges[end.edge];
            const double x = end.at_start ? 0.0 : *e.length;
            const cplx val = rf(end.edge, x);
            if (!have) {
                first = val;
                have = true;
            }
            continuity = std::max(continuity, std::abs(val - first));
            net += (end.at_start ? -1.0 : 1.0) * rf.flux(end.edge, x);
        }
        flux = std::max(flux, std::abs(net));
    }
    // Bilinear symmetry: int (R f) g = int f (R g).
    const GraphFunction rf_on_g =
        resample(g, [&](std::size_t e, double x) { return rf(static_cast<int>(e), x); });
    const GraphFunction rg_on_f =
        resample(f, [&](std::size_t e, double x) { return rg(static_cast<int>(e), x); });
    const cplx a = inner(rf_on_g, conjugate(g));
    const cplx b = inner(f, conjugate(rg_on_f));

    ordered_json r;
    r["meta"] = json_meta(ctx);
    r["omega"] = {w.real(), w.imag()};
    r["data_l1"] = f.l1_norm();
    r["condition"] = rf.condition();
    r["continuity_residual"] = continuity;
    r["flux_residual"] = flux;
    r["symmetry"] = {{"lhs", {a.real(), a.imag()}},
                     {"rhs", {b.real(), b.imag()}},
                     {"defect", std::abs(a - b)},
                     {"relative_defect", std::abs(a) > 0.0 ? std::abs(a - b) / std::abs(a) : 0.0}};
    os << r.dump(2) << '\n';
}

void cmd_expand(const Context& ctx, std::ostream& os)
{
    if (ctx.cfg.dump_poly) {
        const DetPair dp = det_recursive(ctx.tree, ctx.cfg.tau_max, 0);
        csv_header(os, ctx, {{"poly", "det"}, {"terms", std::to_string(dp.det.size())}});
        os << "lambda,re,im\n";
        for (const auto& t : dp.det.terms()) {
            os << num(t.lambda) << ',' << num(t.coeff) << ",0\n";
        }
        return;
    }
    const KernelExpansion k = kernel_terms(ctx.tree, ctx.cfg.eps);
    csv_header(os, ctx,
               {{"eps_rep", num(k.eps_rep)},
                {"amplitude_sum", num(k.amplitude_sum)},
                {"ratio", num(k.ratio)},
                {"order", std::to_string(k.order)},
                {"terms", std::to_string(k.terms.size())}});
    os << "amplitude_re,amplitude_im,source_edge,target_edge,p,q,beta,source_segment,"
          "target_segment,region\n";
    for (const KernelTerm& t : k.terms) {
        os << num(t.amplitude.real()) << ',' << num(t.amplitude.imag()) << ','
           << ctx.tree.edges[t.source_edge].id << ',' << ctx.tree.edges[t.target_edge].id << ','
           << num(t.p) << ',' << num(t.q) << ',' << num(t.beta) << ',' << t.source_segment << ','
           << t.target_segment << ',' << t.region << '\n';
    }
}

std::vector<EvalPoint> default_points(const MetricTree& tree, double reach, double h)
{
    std::vector<EvalPoint> pts;
    for (std::size_t e = 0; e < tree.edge_count(); ++e) {
        const double len = tree.edges[e].length ? *tree.edges[e].length : reach;
        const int n = std::max(1, static_cast<int>(std::ceil(len / h)));
        for (int i = 0; i <= n; ++i) {
            pts.push_back({static_cast<int>(e), len * i / n});
        }
    }
    return pts;
}

double reach_for(const RunConfig& cfg, const GraphFunction& u0)
{
    return cfg.reach > 0.0 ? cfg.reach : support_hi(u0) + 10.0;
}

void cmd_evolve(const Context& ctx, std::ostream& os)
{
    const GraphFunction u0 = require_data(ctx);
    const std::vector<EvalPoint> pts = ctx.cfg.points.empty()
                                           ? default_points(ctx.tree, reach_for(ctx.cfg, u0), ctx.cfg.h)
                                           : load_points(ctx.cfg.points, ctx.tree);
    const Propagation p = propagate(ctx.tree, u0, ctx.cfg.time, pts, ctx.cfg.eps, ctx.cfg.threads);
    csv_header(os, ctx,
               {{"eps_rep", num(p.eps_rep)},
                {"truncation_bound", num(p.truncation_bound)},
                {"quadrature_bound", num(p.quadrature_bound)},
                {"amplitude_sum", num(p.amplitude_sum)},
                {"terms", std::to_string(p.term_count)},
                {"data_l1", num(u0.l1_norm())}});
    os << "edge,x,re_u,im_u,abs_u\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const cplx u = p.values[i];
        os << ctx.tree.edges[pts[i].edge].id << ',' << num(pts[i].x) << ',' << num(u.real()) << ','
           << num(u.imag()) << ',' << num(std::abs(u)) << '\n';
    }
}

void cmd_oracle_compare(const Context& ctx, std::ostream& os)
{
    const RunConfig& c = ctx.cfg;
    const GraphFunction u0 = require_data(ctx);
    const KernelExpansion k = kernel_terms(ctx.tree, c.eps);
    CnReport rep;
    const GraphFunction cn = cn_evolve(ctx.tree, u0, c.time, c.dt, c.h, c.L, &rep);
    const double reach = reach_for(c, u0);
    const GraphFunction cn_near = restrict_to(cn, reach);
    Propagation info;
    const GraphFunction pr = propagate_on(k, ctx.tree, u0, c.time, cn_near, &info, c.threads);
    const CompareReport cmp = compare(pr, cn_near);

    ordered_json r;
    r["meta"] = json_meta(ctx);
    r["l2_err"] = cmp.l2_err;
    r["linf_err"] = cmp.linf_err;
    r["nodes"] = cmp.nodes;
    r["edges"] = cmp.edges;
    r["reach"] = reach;
    r["propagate"] = {{"terms", info.term_count},
                      {"eps_rep", info.eps_rep},
                      {"truncation_bound", info.truncation_bound},
                      {"quadrature_bound", info.quadrature_bound}};
    r["cn"] = {{"steps", rep.steps},
               {"mass0", rep.mass0},
               {"mass1", rep.mass1},
               {"relative_mass_drift",
                rep.mass0 > 0.0 ? std::abs(rep.mass1 - rep.mass0) / rep.mass0 : 0.0},
               {"boundary_fraction", rep.boundary_fraction},
               {"warnings", rep.warnings}};
    os << r.dump(2) << '\n';
}

void cmd_dispersion(const Context& ctx, std::ostream& os)
{
    const RunConfig& c = ctx.cfg;
    const GraphFunction u0 = require_data(ctx);
    NormSampling s;
    s.threads = c.threads;
    const EvolutionReport r =
        dispersion_profile(ctx.tree, u0, log_grid(c.tmin, c.tmax, c.n), c.eps, s);
    csv_header(os, ctx,
               {{"C", num(r.C)},
                {"bound", num(r.bound)},
                {"l1_initial", num(r.l1_initial)},
                {"l2_initial", num(r.l2_initial)},
                {"eps_rep", num(r.eps_rep)},
                {"method", r.method}});
    os << "t,l2,linf,scaled,budget\n";
    for (const auto& row : r.rows) {
        os << num(row.t) << ',' << num(row.l2) << ',' << num(row.linf) << ',' << num(row.scaled)
           << ',' << num(row.budget) << '\n';
    }
}

void cmd_nls(const Context& ctx, std::ostream& os)
{
    const RunConfig& c = ctx.cfg;
    if (c.snapshot_every > 0 && c.snapshot_prefix.empty()) {
        throw Error(ErrorCode::ConfigError, "--snapshot-every needs --snapshot-prefix");
    }
    const GraphFunction u0 = require_data(ctx);
    NlsConfig n;
    n.p = c.p;
    n.sign = c.sign;
    n.T = c.T;
    n.dt = c.dt;
    n.h = c.h;
    n.L = c.L;
    n.allow_any_p = c.allow_any_p;
    n.snapshot_every = c.snapshot_every;
    const NlsResult r = nls_evolve(ctx.tree, u0, n);
    csv_header(os, ctx, {{"relative_drift", num(r.relative_drift)}, {"method", n.method}});
    os << "t,l2,linf\n";
    for (const auto& row : r.rows) {
        os << num(row.t) << ',' << num(row.mass) << ',' << num(row.linf) << '\n';
    }
    for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
        const std::string path = c.snapshot_prefix + "_" + std::to_string(i) + ".csv";
        std::ofstream f(path);
        if (!f) {
            throw Error(ErrorCode::IoError, "cannot write " + path);
        }
        csv_header(f, ctx, {{"t", num(r.snapshots[i].first)}});
        write_function(f, ctx.tree, r.snapshots[i].second);
    }
}

const std::map<std::string, void (*)(const Context&, std::ostream&)>& commands()
{
    static const std::map<std::string, void (*)(const Context&, std::ostream&)> table{
        {"validate", cmd_validate},
        {"det-scan", cmd_det_scan},
        {"resolvent-check", cmd_resolvent_check},
        {"expand", cmd_expand},
        {"evolve", cmd_evolve},
        {"oracle-compare", cmd_oracle_compare},
        {"dispersion", cmd_dispersion},
        {"nls", cmd_nls},
    };
    return table;
}

void write_error(std::ostream& err, const std::string& name, int code, const std::string& msg)
{
    ordered_json j;
    j["error"] = name;
    j["code"] = code;
    j["message"] = msg;
    err << j.dump() << '\n';
}

} // namespace

GraphFunction load_data(const std::string& path, const MetricTree& tree)
{
    std::vector<std::vector<std::pair<double, cplx>>> per_edge(tree.edge_count());
    for (const auto& [lineno, cells] : read_rows(path, 4)) {
        const std::string where = path + ":" + std::to_string(lineno);
        const int e = edge_index(tree, cells[0], where);
        const double x = parse_number(cells[1], where);
        check_coordinate(tree, e, x, where);
        per_edge[e].emplace_back(x, cplx(parse_number(cells[2], where), parse_number(cells[3], where)));
    }
    GraphFunction f(tree.edge_count());
    for (std::size_t e = 0; e < per_edge.size(); ++e) {
        auto& rows = per_edge[e];
        if (rows.empty()) {
            continue;
        }
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<double> x(rows.size());
        Eigen::VectorXcd v(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && rows[i].first == rows[i - 1].first) {
                throw Error(ErrorCode::SchemaError, path + ": duplicate row for edge '" +
                                                        tree.edges[e].id + "' at x = " +
                                                        num(rows[i].first));
            }
            x[i] = rows[i].first;
            v[static_cast<Eigen::Index>(i)] = rows[i].second;
        }
        f.set_edge(e, std::move(x), std::move(v));
    }
    return f;
}

std::vector<EvalPoint> load_points(const std::string& path, const MetricTree& tree)
{
    std::vector<EvalPoint> pts;
    for (const auto& [lineno, cells] : read_rows(path, 2)) {
        const std::string where = path + ":" + std::to_string(lineno);
        const int e = edge_index(tree, cells[0], where);
        const double x = parse_number(cells[1], where);
        check_coordinate(tree, e, x, where);
        pts.push_back({e, x});
    }
    return pts;
}

bool parse_args(int argc, const char* const* argv, RunConfig& cfg, std::ostream& out)
{
    CLI::App app{"Schrodinger evolution on metric trees with Kirchhoff conditions", "kirchhoff"};
    app.require_subcommand(1);
    // -h stays free for the grid step option.
    app.set_help_flag("--help", "Print this help message and exit");
    app.set_version_flag("--version", kToolVersion);
    app.add_option("--graph", cfg.graph, "Graph description (JSON)");
    app.add_option("--out", cfg.out, "Output file (default: stdout)");
    app.add_option("--eps", cfg.eps, "Kernel truncation tolerance");
    app.add_option("--threads", cfg.threads, "Worker threads (0: all cores)");
    app.add_option("--seed", cfg.seed, "Seed for randomized checks");
    app.add_flag("--no-timestamp", cfg.no_timestamp, "Omit the timestamp header line");

    auto sub = [&](const char* name, const char* desc) {
        CLI::App* s = app.add_subcommand(name, desc);
        s->set_help_flag("--help", "Print this help message and exit");
        s->fallthrough();
        return s;
    };
    sub("validate", "Parse, normalize and summarize a graph");

    CLI::App* det = sub("det-scan", "Strip scan of the coupling determinant");
    det->add_option("--tau-max", cfg.tau_max);
    det->add_option("--samples", cfg.samples);

    CLI::App* res = sub("resolvent-check", "Vertex residuals and symmetry of the resolvent");
    std::string omega = "1,0";
    res->add_option("--omega", omega, "re,im");
    res->add_option("--data", cfg.data);

    CLI::App* exp = sub("expand", "Kernel term table");
    exp->add_flag("--dump-poly", cfg.dump_poly, "Emit the determinant as (lambda, re, im)");
    exp->add_option("--tau-max", cfg.tau_max);

    CLI::App* ev = sub("evolve", "Evaluate e^{it Delta} u0");
    ev->add_option("--data", cfg.data)->required();
    ev->add_option("--time", cfg.time)->required();
    ev->add_option("--points", cfg.points, "CSV (edge, x); default: uniform grid of step --h");
    ev->add_option("--h", cfg.h);
    ev->add_option("--reach", cfg.reach);

    CLI::App* oc = sub("oracle-compare", "Kernel propagator against Crank-Nicolson");
    oc->add_option("--data", cfg.data)->required();
    oc->add_option("--time", cfg.time);
    oc->add_option("--h", cfg.h);
    oc->add_option("--dt", cfg.dt);
    oc->add_option("--L", cfg.L);
    oc->add_option("--reach", cfg.reach);

    CLI::App* dis = sub("dispersion", "Scaled sup norms on a log time grid");
    dis->add_option("--data", cfg.data)->required();
    dis->add_option("--tmin", cfg.tmin);
    dis->add_option("--tmax", cfg.tmax);
    dis->add_option("--n", cfg.n);

    CLI::App* nls = sub("nls", "Split-step nonlinear evolution");
    nls->add_option("--data", cfg.data)->required();
    nls->add_option("--p", cfg.p);
    nls->add_option("--sign", cfg.sign)->check(CLI::IsMember({-1, 1}));
    nls->add_option("--T", cfg.T);
    nls->add_option("--dt", cfg.dt);
    nls->add_option("--h", cfg.h);
    nls->add_option("--L", cfg.L);
    nls->add_flag("--allow-any-p", cfg.allow_any_p);
    nls->add_option("--snapshot-every", cfg.snapshot_every);
    nls->add_option("--snapshot-prefix", cfg.snapshot_prefix);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return false;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return false;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return false;
    } catch (const CLI::ParseError& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }
    cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command == "resolvent-check") {
        const auto parts = split_row(omega);
        if (parts.empty() || parts.size() > 2) {
            throw Error(ErrorCode::ConfigError, "--omega expects re,im");
        }
        try {
            cfg.omega = cplx(parse_number(parts[0], "--omega"),
                             parts.size() == 2 ? parse_number(parts[1], "--omega") : 0.0);
        } catch (const Error& e) {
            throw Error(ErrorCode::ConfigError, e.what());
        }
    }
    return true;
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    try {
        const auto it = commands().find(cfg.command);
        if (it == commands().end()) {
            throw Error(ErrorCode::ConfigError, "unknown command '" + cfg.command + "'");
        }
        if (cfg.graph.empty()) {
            throw Error(ErrorCode::ConfigError, cfg.command + " needs --graph");
        }
        Context ctx{cfg, load_tree(cfg.graph), {}};
        ctx.hash = hex(tree_hash(ctx.tree));
        Sink sink(cfg.out, out);
        it->second(ctx, *sink);
        (*sink).flush();
        return 0;
    } catch (const Error& e) {
        write_error(err, std::string(error_name(e.code())), static_cast<int>(e.code()), e.what());
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        write_error(err, "InternalError", 1, e.what());
        return 1;
    }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    try {
        if (!parse_args(argc, argv, cfg, out)) {
            return 0;
        }
    } catch (const Error& e) {
        write_error(err, std::string(error_name(e.code())), static_cast<int>(e.code()), e.what());
        return static_cast<int>(e.code());
    }
    return run(cfg, out, err);
}

} // namespace kirchhoff
