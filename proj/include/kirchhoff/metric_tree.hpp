#ifndef KIRCHHOFF_METRIC_TREE_HPP
#define KIRCHHOFF_METRIC_TREE_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kirchhoff
{

inline constexpr int kNoVertex = -1;

// Coefficient sigma on [at, next at) in edge coordinates.
struct ProfilePiece
{
    double at = 0.0;
    double sigma = 1.0;
};

// Maximal interval of an edge with constant coefficient.
struct Segment
{
    double begin = 0.0;
    // nullopt on the unbounded last segment of an infinite edge.
    std::optional<double> end;
    double sigma = 1.0;

    // Local slowness sigma^{-1/2}.
    double slowness() const;
    bool infinite() const
    {
        return !end.has_value();
    }
};

struct Edge
{
    std::string id;
    int from = kNoVertex;
    // kNoVertex for an infinite edge.
    int to = kNoVertex;
    // nullopt for an infinite edge.
    std::optional<double> length;
    // First piece starts at 0; breakpoints strictly increasing.
    std::vector<ProfilePiece> profile{ProfilePiece{}};

    bool infinite() const
    {
        return !length.has_value();
    }
    std::size_t segment_count() const
    {
        return profile.size();
    }
    Segment segment(std::size_t k) const;
    std::vector<Segment> segments() const;
    // Index of the segment containing x (right-continuous at breakpoints).
    std::size_t segment_at(double x) const;
    int other_end(int v) const;
};

// Incident edge end as seen from a vertex.
struct EdgeEnd
{
    int edge = -1;
    // true if the vertex sits at x = 0 of the edge.
    bool at_start = true;
};

class MetricTree
{
public:
    std::vector<std::string> vertices;
    std::vector<Edge> edges;
    double sigma_min = 0.0;
    double sigma_max = std::numeric_limits<double>::infinity();
    // Human-readable normalization notes (degree-2 merges, reorientations).
    std::vector<std::string> notes;

    std::size_t vertex_count() const
    {
        return vertices.size();
    }
    std::size_t edge_count() const
    {
        return edges.size();
    }
    std::size_t finite_edge_count() const;
    std::size_t infinite_edge_count() const;

    // Edge ends incident to v in edge-index order.
    std::vector<EdgeEnd> incident(int v) const;
    std::size_t degree(int v) const;

    int find_vertex(const std::string& name) const;
    int find_edge(const std::string& id) const;

    // Sum of the lengths of all finite edges.
    double finite_length() const;

    // Checks every structural invariant; throws Error on violation.
    void validate() const;
};

struct ReductionStep
{
    int vertex = kNoVertex;
    int m = 0;
    int internal_edge = -1;
    double a = 0.0;
    int parent = kNoVertex;
    // Infinite edges hanging at `vertex`, in edge-index order.
    std::vector<int> external_edges;
};

// Parses and normalizes a graph description (JSON text).
MetricTree parse_tree(const std::string& text);
MetricTree load_tree(const std::string& path);
std::string serialize_tree(const MetricTree& tree);

// Degree-2 merging, root-outward orientation and removal of breakpoints
// without a coefficient jump. Called by parse_tree.
MetricTree normalize(MetricTree tree);

ReductionStep find_reducible_vertex(const MetricTree& tree);

// Removes step.vertex and its external edges; the internal edge becomes an
// infinite edge hanging at step.parent and keeps its whole profile, the
// segment adjacent to the removed vertex being extended to infinity.
MetricTree reduce(const MetricTree& tree, const ReductionStep& step);

// Drops the last breakpoint of an infinite edge: the segment before it is
// extended to infinity.
MetricTree remove_last_breakpoint(const MetricTree& tree, int edge);

// FNV-1a of the canonical serialization.
std::uint64_t tree_hash(const MetricTree& tree);

// Reverses the coordinate of a finite edge (x -> l - x).
Edge reversed(const Edge& e);

} // namespace kirchhoff

#endif // KIRCHHOFF_METRIC_TREE_HPP
