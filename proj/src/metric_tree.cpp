#include "kirchhoff/metric_tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "kirchhoff/error.hpp"

namespace kirchhoff
{

namespace
{

using json = nlohmann::json;

[[noreturn]] void fail(ErrorCode code, const std::string& msg)
{
    throw Error(code, msg);
}

std::string fmt_double(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Union-find over vertex indices.
struct Dsu
{
    std::vector<int> parent;
    explicit Dsu(std::size_t n) : parent(n)
    {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x)
    {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    bool unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        parent[b] = a;
        return true;
    }
};

void check_profile(const Edge& e, double smin, double smax)
{
    if (e.profile.empty() || e.profile.front().at != 0.0) {
        fail(ErrorCode::BreakpointOutOfRange,
             "edge '" + e.id + "': profile must start at 0");
    }
    for (std::size_t k = 0; k < e.profile.size(); ++k) {
        const auto& p = e.profile[k];
        if (!std::isfinite(p.sigma) || !(p.sigma > smin) || !(p.sigma < smax)) {
            fail(ErrorCode::CoefficientOutOfBounds,
                 "edge '" + e.id + "': sigma " + fmt_double(p.sigma) +
                     " outside (" + fmt_double(smin) + ", " + fmt_double(smax) + ")");
        }
        if (k > 0) {
            if (!(p.at > e.profile[k - 1].at)) {
                fail(ErrorCode::BreakpointOutOfRange,
                     "edge '" + e.id + "': breakpoints must increase strictly");
            }
            if (e.length && !(p.at < *e.length)) {
                fail(ErrorCode::BreakpointOutOfRange,
                     "edge '" + e.id + "': breakpoint " + fmt_double(p.at) +
                         " not interior to the edge");
            }
            if (!std::isfinite(p.at)) {
                fail(ErrorCode::BreakpointOutOfRange,
                     "edge '" + e.id + "': breakpoint must be finite");
            }
        }
    }
}

// Orients every finite edge away from vertex 0.
void orient_from_root(MetricTree& t)
{
    if (t.vertices.empty()) {
        return;
    }
    std::vector<char> seen(t.vertices.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
        int v = q.front();
        q.pop();
        for (std::size_t i = 0; i < t.edges.size(); ++i) {
            Edge& e = t.edges[i];
            if (e.infinite()) {
                continue;
            }
            int w = kNoVertex;
            if (e.from == v && !seen[e.to]) {
                w = e.to;
            } else if (e.to == v && !seen[e.from]) {
                e = reversed(e);
                t.notes.push_back("edge '" + e.id + "' reoriented away from root");
                w = e.to;
            }
            if (w != kNoVertex) {
                seen[w] = 1;
                q.push(w);
            }
        }
    }
}

void merge_equal_pieces(Edge& e)
{
    std::vector<ProfilePiece> out;
    for (const auto& p : e.profile) {
        if (!out.empty() && out.back().sigma == p.sigma) {
            continue;
        }
        out.push_back(p);
    }
    e.profile = std::move(out);
}

void remove_vertex(MetricTree& t, int v)
{
    t.vertices.erase(t.vertices.begin() + v);
    for (auto& e : t.edges) {
        if (e.from > v) {
            --e.from;
        }
        if (e.to > v) {
            --e.to;
        }
    }
}

// Concatenates a finite edge ending at w with an edge starting at w.
Edge concat(const Edge& first, const Edge& second)
{
    Edge out = first;
    out.to = second.to;
    const double l1 = *first.length;
    out.length = second.length ? std::optional<double>(l1 + *second.length)
                               : std::nullopt;
    for (const auto& p : second.profile) {
        out.profile.push_back({l1 + p.at, p.sigma});
    }
    merge_equal_pieces(out);
    return out;
}

bool merge_one_degree_two(MetricTree& t)
{
    if (t.vertices.size() <= 1) {
        return false;
    }
    for (int v = 0; v < static_cast<int>(t.vertices.size()); ++v) {
        auto inc = t.incident(v);
        if (inc.size() != 2) {
            continue;
        }
        int i1 = std::min(inc[0].edge, inc[1].edge);
        int i2 = std::max(inc[0].edge, inc[1].edge);
        Edge a = t.edges[i1];
        Edge b = t.edges[i2];
        // Put a finite edge first, ending at v; the other edge starts at v.
        if (a.infinite()) {
            std::swap(a, b);
        }
        if (a.infinite()) {
            continue;
        }
        if (a.to != v) {
            a = reversed(a);
        }
        if (!b.infinite() && b.from != v) {
            b = reversed(b);
        }
        Edge merged = concat(a, b);
        merged.id = t.edges[i1].id;
        t.notes.push_back("degree-2 vertex '" + t.vertices[v] + "' merged: edges '" +
                          t.edges[i1].id + "' and '" + t.edges[i2].id +
                          "' joined as '" + merged.id + "'");
        t.edges[i1] = merged;
        t.edges.erase(t.edges.begin() + i2);
        remove_vertex(t, v);
        return true;
    }
    return false;
}

} // namespace

double Segment::slowness() const
{
    return 1.0 / std::sqrt(sigma);
}

Segment Edge::segment(std::size_t k) const
{
    Segment s;
    s.begin = profile[k].at;
    s.sigma = profile[k].sigma;
    if (k + 1 < profile.size()) {
        s.end = profile[k + 1].at;
    } else {
        s.end = length;
    }
    return s;
}

std::vector<Segment> Edge::segments() const
{
    std::vector<Segment> out;
    out.reserve(profile.size());
    for (std::size_t k = 0; k < profile.size(); ++k) {
        out.push_back(segment(k));
    }
    return out;
}

std::size_t Edge::segment_at(double x) const
{
    auto it = std::upper_bound(profile.begin(), profile.end(), x,
                               [](double v, const ProfilePiece& p) { return v < p.at; });
    if (it == profile.begin()) {
        return 0;
    }
    return static_cast<std::size_t>(it - profile.begin()) - 1;
}

int Edge::other_end(int v) const
{
    return from == v ? to : from;
}

Edge reversed(const Edge& e)
{
    Edge r = e;
    std::swap(r.from, r.to);
    const double l = *e.length;
    r.profile.clear();
    for (std::size_t k = e.profile.size(); k-- > 0;) {
        double end = k + 1 < e.profile.size() ? e.profile[k + 1].at : l;
        r.profile.push_back({l - end, e.profile[k].sigma});
    }
    r.profile.front().at = 0.0;
    return r;
}

std::size_t MetricTree::finite_edge_count() const
{
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return !e.infinite(); }));
}

std::size_t MetricTree::infinite_edge_count() const
{
    return edges.size() - finite_edge_count();
}

std::vector<EdgeEnd> MetricTree::incident(int v) const
{
    std::vector<EdgeEnd> out;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.from == v) {
            out.push_back({static_cast<int>(i), true});
        }
        if (e.to == v) {
            out.push_back({static_cast<int>(i), false});
        }
    }
    return out;
}

std::size_t MetricTree::degree(int v) const
{
    return incident(v).size();
}

int MetricTree::find_vertex(const std::string& name) const
{
    auto it = std::find(vertices.begin(), vertices.end(), name);
    return it == vertices.end() ? kNoVertex : static_cast<int>(it - vertices.begin());
}

int MetricTree::find_edge(const std::string& id) const
{
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (edges[i].id == id) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

double MetricTree::finite_length() const
{
    double s = 0.0;
    for (const auto& e : edges) {
        if (!e.infinite()) {
            s += *e.length;
        }
    }
    return s;
}

void MetricTree::validate() const
{
    const int n = static_cast<int>(vertices.size());
    if (n == 0) {
        fail(ErrorCode::SchemaError, "tree has no vertices");
    }
    Dsu dsu(vertices.size());
    for (const auto& e : edges) {
        if (e.from < 0 || e.from >= n || (e.to != kNoVertex && (e.to < 0 || e.to >= n))) {
            fail(ErrorCode::SchemaError, "edge '" + e.id + "' references an unknown vertex");
        }
        if (e.infinite() != (e.to == kNoVertex)) {
            fail(ErrorCode::SchemaError,
                 "edge '" + e.id + "': 'to' and 'length' must be null together");
        }
        if (e.length && !(*e.length > 0.0 && std::isfinite(*e.length))) {
            fail(ErrorCode::NonPositiveLength, "edge '" + e.id + "' has non-positive length");
        }
        check_profile(e, sigma_min, sigma_max);
        if (!e.infinite()) {
            if (e.from == e.to || !dsu.unite(e.from, e.to)) {
                fail(ErrorCode::CycleDetected, "edge '" + e.id + "' closes a cycle");
            }
        }
    }
    for (int v = 1; v < n; ++v) {
        if (dsu.find(v) != dsu.find(0)) {
            fail(ErrorCode::Disconnected, "vertex '" + vertices[v] + "' is not reachable");
        }
    }
    for (int v = 0; v < n; ++v) {
        std::size_t d = degree(v);
        bool line = n == 1 && d == 2;
        if (d < 3 && !line) {
            fail(ErrorCode::InvalidDegree,
                 "vertex '" + vertices[v] + "' has degree " + std::to_string(d));
        }
    }
}

MetricTree normalize(MetricTree t)
{
    while (merge_one_degree_two(t)) {
    }
    for (auto& e : t.edges) {
        merge_equal_pieces(e);
    }
    orient_from_root(t);
    t.validate();
    return t;
}

MetricTree parse_tree(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& ex) {
        fail(ErrorCode::SchemaError, std::string("malformed graph document: ") + ex.what());
    }
    MetricTree t;
    try {
        if (!doc.is_object() || !doc.contains("vertices") || !doc.contains("edges")) {
            fail(ErrorCode::SchemaError, "graph document needs 'vertices' and 'edges'");
        }
        for (const auto& v : doc.at("vertices")) {
            std::string name = v.get<std::string>();
            if (t.find_vertex(name) != kNoVertex) {
                fail(ErrorCode::SchemaError, "duplicate vertex '" + name + "'");
            }
            t.vertices.push_back(name);
        }
        if (doc.contains("sigma_bounds")) {
            const auto& sb = doc.at("sigma_bounds");
            if (sb.contains("min") && !sb.at("min").is_null()) {
                t.sigma_min = sb.at("min").get<double>();
            }
            if (sb.contains("max") && !sb.at("max").is_null()) {
                t.sigma_max = sb.at("max").get<double>();
            }
            if (!(t.sigma_min >= 0.0) || !(t.sigma_max > t.sigma_min)) {
                fail(ErrorCode::SchemaError, "invalid sigma_bounds");
            }
        }
        for (const auto& je : doc.at("edges")) {
            Edge e;
            const auto& jid = je.at("id");
            e.id = jid.is_string() ? jid.get<std::string>() : jid.dump();
            if (t.find_edge(e.id) >= 0) {
                fail(ErrorCode::SchemaError, "duplicate edge id '" + e.id + "'");
            }
            std::string from = je.at("from").get<std::string>();
            e.from = t.find_vertex(from);
            if (e.from == kNoVertex) {
                fail(ErrorCode::SchemaError, "edge '" + e.id + "': unknown vertex '" + from + "'");
            }
            const bool to_null = !je.contains("to") || je.at("to").is_null();
            const bool len_null = !je.contains("length") || je.at("length").is_null();
            if (to_null != len_null) {
                fail(ErrorCode::SchemaError,
                     "edge '" + e.id + "': 'to' and 'length' must be null together");
            }
            if (!to_null) {
                std::string to = je.at("to").get<std::string>();
                e.to = t.find_vertex(to);
                if (e.to == kNoVertex) {
                    fail(ErrorCode::SchemaError, "edge '" + e.id + "': unknown vertex '" + to + "'");
                }
                e.length = je.at("length").get<double>();
                if (!(*e.length > 0.0) || !std::isfinite(*e.length)) {
                    fail(ErrorCode::NonPositiveLength,
                         "edge '" + e.id + "' has non-positive length");
                }
            }
            if (je.contains("profile") && !je.at("profile").empty()) {
                e.profile.clear();
                for (const auto& jp : je.at("profile")) {
                    e.profile.push_back({jp.at("at").get<double>(), jp.at("sigma").get<double>()});
                }
            }
            check_profile(e, t.sigma_min, t.sigma_max);
            t.edges.push_back(std::move(e));
        }
    } catch (const json::exception& ex) {
        fail(ErrorCode::SchemaError, std::string("graph document: ") + ex.what());
    }
    // Structural checks that do not depend on degrees run before merging.
    Dsu dsu(t.vertices.size());
    for (const auto& e : t.edges) {
        if (!e.infinite() && (e.from == e.to || !dsu.unite(e.from, e.to))) {
            fail(ErrorCode::CycleDetected, "edge '" + e.id + "' closes a cycle");
        }
    }
    for (std::size_t v = 1; v < t.vertices.size(); ++v) {
        if (dsu.find(static_cast<int>(v)) != dsu.find(0)) {
            fail(ErrorCode::Disconnected, "vertex '" + t.vertices[v] + "' is not reachable");
        }
    }
    if (t.vertices.empty()) {
        fail(ErrorCode::SchemaError, "tree has no vertices");
    }
    return normalize(std::move(t));
}

MetricTree load_tree(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::IoError, "cannot read graph file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_tree(ss.str());
}

std::string serialize_tree(const MetricTree& t)
{
    json doc;
    doc["vertices"] = t.vertices;
    json edges = json::array();
    for (const auto& e : t.edges) {
        json je;
        je["id"] = e.id;
        je["from"] = t.vertices[e.from];
        je["to"] = e.infinite() ? json(nullptr) : json(t.vertices[e.to]);
        je["length"] = e.length ? json(*e.length) : json(nullptr);
        json prof = json::array();
        for (const auto& p : e.profile) {
            prof.push_back({{"at", p.at}, {"sigma", p.sigma}});
        }
        je["profile"] = prof;
        edges.push_back(je);
    }
    doc["edges"] = edges;
    doc["sigma_bounds"] = {
        {"min", t.sigma_min},
        {"max", std::isfinite(t.sigma_max) ? json(t.sigma_max) : json(nullptr)}};
    return doc.dump(2);
}

std::uint64_t tree_hash(const MetricTree& t)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize_tree(t)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ReductionStep find_reducible_vertex(const MetricTree& t)
{
    if (t.vertices.size() < 2) {
        fail(ErrorCode::NoReducibleVertex, "a single star has no reducible vertex");
    }
    for (int v = 0; v < static_cast<int>(t.vertices.size()); ++v) {
        ReductionStep s;
        s.vertex = v;
        int finite = 0;
        for (const auto& end : t.incident(v)) {
            const Edge& e = t.edges[end.edge];
            if (e.infinite()) {
                s.external_edges.push_back(end.edge);
            } else {
                ++finite;
                s.internal_edge = end.edge;
            }
        }
        if (finite == 1 && s.external_edges.size() >= 2) {
            const Edge& l = t.edges[s.internal_edge];
            s.m = static_cast<int>(s.external_edges.size());
            s.a = *l.length;
            s.parent = l.other_end(v);
            return s;
        }
    }
    fail(ErrorCode::NoReducibleVertex, "no vertex with exactly one finite edge");
}

MetricTree reduce(const MetricTree& t, const ReductionStep& step)
{
    const int n = static_cast<int>(t.vertices.size());
    if (step.vertex < 0 || step.vertex >= n || step.internal_edge < 0 ||
        step.internal_edge >= static_cast<int>(t.edges.size())) {
        fail(ErrorCode::InvalidStep, "reduction step references unknown entities");
    }
    std::vector<int> ext;
    int finite = 0;
    for (const auto& end : t.incident(step.vertex)) {
        if (t.edges[end.edge].infinite()) {
            ext.push_back(end.edge);
        } else {
            ++finite;
            if (end.edge != step.internal_edge) {
                fail(ErrorCode::InvalidStep, "internal edge does not match the vertex");
            }
        }
    }
    const Edge& l = t.edges[step.internal_edge];
    if (finite != 1 || static_cast<int>(ext.size()) != step.m || l.infinite() ||
        l.other_end(step.vertex) != step.parent) {
        fail(ErrorCode::InvalidStep, "step does not describe a reducible vertex");
    }
    MetricTree r = t;
    r.notes.clear();
    Edge freed = l.from == step.parent ? l : reversed(l);
    freed.to = kNoVertex;
    freed.length.reset();
    r.edges[step.internal_edge] = freed;
    std::vector<Edge> kept;
    for (std::size_t i = 0; i < r.edges.size(); ++i) {
        if (std::find(ext.begin(), ext.end(), static_cast<int>(i)) == ext.end()) {
            kept.push_back(r.edges[i]);
        }
    }
    r.edges = std::move(kept);
    remove_vertex(r, step.vertex);
    orient_from_root(r);
    r.notes.clear();
    return r;
}

MetricTree remove_last_breakpoint(const MetricTree& t, int edge)
{
    if (edge < 0 || edge >= static_cast<int>(t.edges.size()) || !t.edges[edge].infinite() ||
        t.edges[edge].profile.size() < 2) {
        fail(ErrorCode::InvalidStep, "edge has no removable breakpoint");
    }
    MetricTree r = t;
    r.edges[edge].profile.pop_back();
    return r;
}

} // namespace kirchhoff
