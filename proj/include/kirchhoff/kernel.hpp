#ifndef KIRCHHOFF_KERNEL_HPP
#define KIRCHHOFF_KERNEL_HPP

#include <cstddef>
#include <vector>

#include "kirchhoff/exp_poly.hpp"
#include "kirchhoff/graph_function.hpp"
#include "kirchhoff/metric_tree.hpp"

namespace kirchhoff
{

// One almost-periodic term of tau R_{i tau} f:
//
//   amplitude * exp(i tau (p + q x)) * integral over the source region of
//   f(y) exp(i tau beta y) dy
//
// for x on the target segment. The source region is the whole source
// segment (region 0), or its part below (-1) or above (+1) x; the latter two
// are the two affine pieces of the direct kernel exp(-i tau b |x - y|).
struct KernelTerm
{
    cplx amplitude = 0.0;
    int target_edge = 0;
    int target_segment = 0;
    double p = 0.0;
    double q = 0.0;
    int source_edge = 0;
    int source_segment = 0;
    double beta = 0.0;
    int region = 0;
};

struct KernelExpansion
{
    // Sorted by (source edge, source segment, p, target edge, target
    // segment, q, beta, region).
    std::vector<KernelTerm> terms;
    // Certified bound: |sum of terms - tau R_{i tau} f| <= eps_rep * |f|_1.
    double eps_rep = 0.0;
    // max over (target segment, source segment) of sum |amplitude|, with
    // the direct kernel counted once.
    double amplitude_sum = 0.0;
    // Contraction ratio and order of the determinant inverse.
    double ratio = 0.0;
    int order = 0;
    std::size_t inverse_terms = 0;
};

struct KernelOptions
{
    // Pruning threshold inside the determinant inverse; 0 disables it.
    double inverse_prune = 0.0;
};

// Throws NotContractive when the determinant has no contractive
// single-term factorization.
KernelExpansion kernel_terms(const MetricTree& tree, double eps,
                             const KernelOptions& options = {});

// Sum of the terms at (edge, x) for data f, exact for piecewise-linear f.
cplx evaluate_terms(const KernelExpansion& k, const MetricTree& tree, const GraphFunction& f,
                    double tau, int edge, double x);

// Distributional value of integral exp(i t s^2) exp(i s r) ds.
cplx time_integral(double r, double t);

struct EvalPoint
{
    int edge = 0;
    double x = 0.0;
};

struct Propagation
{
    std::vector<cplx> values;
    // eps_rep |u0|_1 / sqrt(pi |t|).
    double truncation_bound = 0.0;
    // Interpolation error of the tabulated source integrals.
    double quadrature_bound = 0.0;
    double eps_rep = 0.0;
    double amplitude_sum = 0.0;
    std::size_t term_count = 0;
};

// e^{it Delta} u0 at the given points; threads = 0 uses all cores.
// Throws ZeroTime, UnsupportedData (u0 nonzero at the end of an infinite
// edge's samples).
Propagation propagate(const MetricTree& tree, const GraphFunction& u0, double t,
                      const std::vector<EvalPoint>& points, double eps, int threads = 0);
Propagation propagate(const KernelExpansion& k, const MetricTree& tree, const GraphFunction& u0,
                      double t, const std::vector<EvalPoint>& points, int threads = 0);

// Propagates onto the sample grid of `like`.
GraphFunction propagate_on(const KernelExpansion& k, const MetricTree& tree,
                           const GraphFunction& u0, double t, const GraphFunction& like,
                           Propagation* info = nullptr, int threads = 0);

} // namespace kirchhoff

#endif // KIRCHHOFF_KERNEL_HPP
