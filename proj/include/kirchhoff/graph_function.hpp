#ifndef KIRCHHOFF_GRAPH_FUNCTION_HPP
#define KIRCHHOFF_GRAPH_FUNCTION_HPP

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "kirchhoff/metric_tree.hpp"

namespace kirchhoff
{

using cplx = std::complex<double>;

// Samples of one edge; the function is the piecewise-linear interpolant on
// [x.front(), x.back()] and zero elsewhere.
struct EdgeSamples
{
    std::vector<double> x;
    Eigen::VectorXcd values;

    bool empty() const
    {
        return x.empty();
    }
    std::size_t size() const
    {
        return x.size();
    }
};

class GraphFunction
{
public:
    GraphFunction() = default;
    explicit GraphFunction(std::size_t edge_count) : edges_(edge_count)
    {
    }

    std::size_t edge_count() const
    {
        return edges_.size();
    }
    const EdgeSamples& edge(std::size_t e) const
    {
        return edges_[e];
    }
    EdgeSamples& edge(std::size_t e)
    {
        return edges_[e];
    }

    // Replaces the samples of edge e; x must increase strictly.
    void set_edge(std::size_t e, std::vector<double> x, Eigen::VectorXcd values);

    // Piecewise-linear value at x on edge e.
    cplx operator()(std::size_t e, double x) const;

    // Checks coordinates against the tree; throws OutOfRangeCoordinate.
    void check_against(const MetricTree& tree) const;

    double l1_norm() const;
    double l2_norm() const;
    double linf_norm() const;

    // Total sample count.
    std::size_t sample_count() const;

    // Support [lo, hi] of edge e (empty edge: lo > hi).
    std::pair<double, double> support(std::size_t e) const;

private:
    std::vector<EdgeSamples> edges_;
};

// Integral of conj(g) f for the piecewise-linear interpolants.
cplx inner(const GraphFunction& f, const GraphFunction& g);

// Exact l1 norm of a complex linear function on one cell.
double cell_abs_integral(cplx f0, cplx f1, double h);

// exp(z) - 1 over z and (exp(z)(z - 1) + 1) over z^2, stable near 0.
cplx phi1(cplx z);
cplx phi2(cplx z);

// Integral over [a, c] of f(y) exp(kappa (y - anchor)) for the interpolant
// of edge e; exact for piecewise-linear data.
cplx edge_moment(const EdgeSamples& s, double a, double c, cplx kappa, double anchor);

// Samples fn on a uniform grid of step about h over [lo, hi] on every edge;
// infinite edges use hi = min(hi, truncation).
GraphFunction tabulate(const MetricTree& tree,
                       const std::function<cplx(std::size_t, double)>& fn, double h,
                       double truncation);

// Same grid as `like`, values from fn.
GraphFunction resample(const GraphFunction& like,
                       const std::function<cplx(std::size_t, double)>& fn);

} // namespace kirchhoff

#endif // KIRCHHOFF_GRAPH_FUNCTION_HPP
