#include <doctest.h>

#include <cmath>

#include "kirchhoff/error.hpp"
#include "kirchhoff/metric_tree.hpp"

using namespace kirchhoff;

namespace
{

ErrorCode code_of(const std::string& text)
{
    try {
        parse_tree(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ConfigError;
}

} // namespace

TEST_CASE("minimal star")
{
    MetricTree t = load_tree("data/star3.json");
    CHECK(t.vertex_count() == 1);
    CHECK(t.edge_count() == 3);
    CHECK(t.infinite_edge_count() == 3);
    CHECK(t.degree(0) == 3);
}

TEST_CASE("four-vertex tree and its reduction")
{
    MetricTree t = load_tree("data/fig1.json");
    CHECK(t.vertex_count() == 4);
    CHECK(t.finite_edge_count() == 3);
    ReductionStep s = find_reducible_vertex(t);
    CHECK(t.vertices[s.vertex] == "v");
    CHECK(s.m == 2);
    CHECK(t.edges[s.internal_edge].id == "u2v");
    CHECK(s.a == 0.5);
    CHECK(t.vertices[s.parent] == "u2");

    MetricTree r = reduce(t, s);
    CHECK(r.vertex_count() == 3);
    CHECK(r.finite_edge_count() == 2);
    const int freed = r.find_edge("u2v");
    REQUIRE(freed >= 0);
    CHECK(r.edges[freed].infinite());
    CHECK(r.vertices[r.edges[freed].from] == "u2");
    CHECK(r.find_edge("va") < 0);
    r.validate();

    // Iterated reduction ends at a star after |V| - 1 steps.
    int steps = 0;
    while (r.vertex_count() > 1) {
        r = reduce(r, find_reducible_vertex(r));
        ++steps;
    }
    CHECK(steps == 2);
    CHECK(r.edge_count() == 3);
}

TEST_CASE("two-vertex tree reduces to the 3-star")
{
    MetricTree t = load_tree("data/twovertex.json");
    ReductionStep s = find_reducible_vertex(t);
    CHECK(t.vertices[s.vertex] == "A");
    CHECK(s.m == 2);
    MetricTree r = reduce(t, s);
    CHECK(r.vertex_count() == 1);
    CHECK(r.edge_count() == 3);
    CHECK(r.infinite_edge_count() == 3);
    CHECK(r.vertices[0] == "B");
}

TEST_CASE("laminar reduction keeps the profile of the freed edge")
{
    MetricTree t = load_tree("data/laminar2.json");
    ReductionStep s = find_reducible_vertex(t);
    MetricTree r = reduce(t, s);
    const Edge& e = r.edges[r.find_edge("a")];
    CHECK(e.infinite());
    REQUIRE(e.profile.size() == 2);
    // Measured from B: sigma 2.25 on [0, 0.5), then 1 extended to infinity.
    CHECK(e.profile[0].sigma == 2.25);
    CHECK(e.profile[1].at == doctest::Approx(0.5));
    CHECK(e.profile[1].sigma == 1.0);
    CHECK_THROWS_AS(reduce(t, ReductionStep{}), Error);
}

TEST_CASE("structural errors")
{
    CHECK(code_of(R"({"vertices":["a","b","c"],"edges":[
        {"id":"1","from":"a","to":"b","length":1},
        {"id":"2","from":"b","to":"c","length":1},
        {"id":"3","from":"c","to":"a","length":1}]})") == ErrorCode::CycleDetected);
    CHECK(code_of(R"({"vertices":["a","b"],"edges":[
        {"id":"1","from":"a","to":null,"length":null},
        {"id":"2","from":"a","to":null,"length":null},
        {"id":"3","from":"a","to":null,"length":null}]})") == ErrorCode::Disconnected);
    CHECK(code_of(R"({"vertices":["a","b"],"edges":[
        {"id":"1","from":"a","to":"b","length":-1}]})") == ErrorCode::NonPositiveLength);
    CHECK(code_of(R"({"vertices":["a"],"sigma_bounds":{"min":0.5,"max":2},"edges":[
        {"id":"1","from":"a","to":null,"length":null,"profile":[{"at":0,"sigma":3}]},
        {"id":"2","from":"a","to":null,"length":null},
        {"id":"3","from":"a","to":null,"length":null}]})") == ErrorCode::CoefficientOutOfBounds);
    CHECK(code_of(R"({"vertices":["a","b"],"edges":[
        {"id":"0","from":"a","to":"b","length":1,"profile":[{"at":0,"sigma":1},{"at":1.5,"sigma":2}]},
        {"id":"1","from":"a","to":null,"length":null},
        {"id":"2","from":"a","to":null,"length":null},
        {"id":"3","from":"b","to":null,"length":null},
        {"id":"4","from":"b","to":null,"length":null}]})") == ErrorCode::BreakpointOutOfRange);
    CHECK(code_of(R"({"vertices":["a","b"],"edges":[
        {"id":"0","from":"a","to":"b","length":1},
        {"id":"1","from":"a","to":null,"length":null},
        {"id":"2","from":"a","to":null,"length":null}]})") == ErrorCode::InvalidDegree);
    CHECK(code_of(R"({"vertices":["a"],"edges":[
        {"id":"0","from":"a","to":null,"length":1}]})") == ErrorCode::SchemaError);
    CHECK(code_of("not json") == ErrorCode::SchemaError);
}

TEST_CASE("degree-2 vertices are merged")
{
    MetricTree t = parse_tree(R"({"vertices":["a","m","b"],"edges":[
        {"id":"x","from":"a","to":"m","length":1,"profile":[{"at":0,"sigma":1}]},
        {"id":"y","from":"b","to":"m","length":2,"profile":[{"at":0,"sigma":4},{"at":0.5,"sigma":1}]},
        {"id":"a1","from":"a","to":null,"length":null},
        {"id":"a2","from":"a","to":null,"length":null},
        {"id":"b1","from":"b","to":null,"length":null},
        {"id":"b2","from":"b","to":null,"length":null}]})");
    CHECK(t.vertex_count() == 2);
    CHECK(t.finite_edge_count() == 1);
    const Edge& e = t.edges[t.find_edge("x")];
    CHECK(*e.length == 3.0);
    // y reversed: sigma 1 on [0, 1.5), 4 on [1.5, 2); joined after x.
    REQUIRE(e.profile.size() == 2);
    CHECK(e.profile[1].at == doctest::Approx(2.5));
    CHECK(e.profile[1].sigma == 4.0);
    CHECK(!t.notes.empty());

    MetricTree ray = parse_tree(R"({"vertices":["a","m"],"edges":[
        {"id":"x","from":"a","to":"m","length":1},
        {"id":"r","from":"m","to":null,"length":null,"profile":[{"at":0,"sigma":2}]},
        {"id":"a1","from":"a","to":null,"length":null},
        {"id":"a2","from":"a","to":null,"length":null}]})");
    CHECK(ray.vertex_count() == 1);
    CHECK(ray.edge_count() == 3);
    const Edge& re = ray.edges[ray.find_edge("x")];
    CHECK(re.infinite());
    REQUIRE(re.profile.size() == 2);
    CHECK(re.profile[1].at == 1.0);

    MetricTree line = load_tree("data/line.json");
    CHECK(line.vertex_count() == 1);
    CHECK(line.edge_count() == 2);
}

TEST_CASE("serialize round trip and hash")
{
    for (const char* path : {"data/star3.json", "data/fig1.json", "data/laminar2.json"}) {
        MetricTree t = load_tree(path);
        MetricTree u = parse_tree(serialize_tree(t));
        CHECK(serialize_tree(u) == serialize_tree(t));
        CHECK(tree_hash(u) == tree_hash(t));
    }
    CHECK(tree_hash(load_tree("data/star3.json")) != tree_hash(load_tree("data/fig1.json")));
}

TEST_CASE("orientation is root-outward")
{
    MetricTree t = parse_tree(R"({"vertices":["r","s"],"edges":[
        {"id":"0","from":"s","to":"r","length":2,"profile":[{"at":0,"sigma":1},{"at":0.5,"sigma":4}]},
        {"id":"1","from":"r","to":null,"length":null},
        {"id":"2","from":"r","to":null,"length":null},
        {"id":"3","from":"s","to":null,"length":null},
        {"id":"4","from":"s","to":null,"length":null}]})");
    const Edge& e = t.edges[0];
    CHECK(t.vertices[e.from] == "r");
    REQUIRE(e.profile.size() == 2);
    CHECK(e.profile[0].sigma == 4.0);
    CHECK(e.profile[1].at == doctest::Approx(1.5));
    CHECK(e.segment_at(1.5) == 1);
    CHECK(e.segment_at(1.0) == 0);
}
