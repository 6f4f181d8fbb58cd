#ifndef KIRCHHOFF_ANALYSIS_HPP
#define KIRCHHOFF_ANALYSIS_HPP

#include <string>
#include <vector>

#include "kirchhoff/graph_function.hpp"
#include "kirchhoff/kernel.hpp"
#include "kirchhoff/metric_tree.hpp"

namespace kirchhoff
{

struct EvolutionRow
{
    double t = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
    // sqrt|t| linf / |u0|_1
    double scaled = 0.0;
    // Pointwise error budget (truncation plus quadrature).
    double budget = 0.0;
};

struct EvolutionReport
{
    std::vector<EvolutionRow> rows;
    // Empirical constant: max of the scaled column.
    double C = 0.0;
    // Term-sum bound sum |b| / sqrt(pi).
    double bound = 0.0;
    double l1_initial = 0.0;
    double l2_initial = 0.0;
    double eps = 0.0;
    double eps_rep = 0.0;
    std::string method;
};

// Sampling of u(t) for norms: Gauss-Legendre panels on [0, reach] of every
// infinite edge and on every finite edge.
struct NormSampling
{
    // 0 picks |data support| + 10 + 16 |t|, capped at max_reach.
    double reach = 0.0;
    double max_reach = 400.0;
    double panel = 0.1;
    int threads = 0;
};

struct NormEstimate
{
    double l2 = 0.0;
    double linf = 0.0;
    // Pointwise error budget and its L^2 counterpart over the sampled region.
    double budget = 0.0;
    double l2_budget = 0.0;
    std::size_t points = 0;
};

NormEstimate propagated_norms(const KernelExpansion& k, const MetricTree& tree,
                              const GraphFunction& u0, double t, const NormSampling& s = {});

// Default time grid: n log-spaced points in [tmin, tmax].
std::vector<double> log_grid(double tmin, double tmax, int n);

EvolutionReport dispersion_profile(const MetricTree& tree, const GraphFunction& u0,
                                   const std::vector<double>& t_grid, double eps,
                                   const NormSampling& s = {});

struct NlsConfig
{
    double p = 2.0;
    // +1 focusing, -1 defocusing: i u_t + Delta u + sign |u|^p u = 0.
    int sign = -1;
    // Multiplies the nonlinearity; 0 gives the linear flow.
    double coefficient = 1.0;
    double T = 1.0;
    double dt = 1e-3;
    double h = 0.01;
    double L = 40.0;
    // Allows p outside (0, 4).
    bool allow_any_p = false;
    // Keep every n-th state (0: none).
    int snapshot_every = 0;
    std::string method = "strang-cn";
};

struct NlsRow
{
    double t = 0.0;
    double mass = 0.0;
    double linf = 0.0;
};

struct NlsResult
{
    std::vector<NlsRow> rows;
    std::vector<std::pair<double, GraphFunction>> snapshots;
    GraphFunction final_state;
    // max |mass(t) - mass(0)| / mass(0) for the L^2 norm.
    double relative_drift = 0.0;
};

// Throws ExponentOutOfRange, BlowUpSuspected (focusing, linf above 1e3
// times its initial value).
NlsResult nls_evolve(const MetricTree& tree, const GraphFunction& u0, const NlsConfig& cfg);

} // namespace kirchhoff

#endif // KIRCHHOFF_ANALYSIS_HPP
