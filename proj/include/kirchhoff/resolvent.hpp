#ifndef KIRCHHOFF_RESOLVENT_HPP
#define KIRCHHOFF_RESOLVENT_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kirchhoff/exp_poly.hpp"
#include "kirchhoff/graph_function.hpp"
#include "kirchhoff/metric_tree.hpp"

namespace kirchhoff
{

// Coefficient slot of exp(sign * omega * b * x) on one segment.
struct Slot
{
    int edge = 0;
    int segment = 0;
    int sign = -1;
};

// Moment M = integral over a segment of f(y) exp(sign * omega * b * y).
struct MomentId
{
    int edge = 0;
    int segment = 0;
    int sign = -1;
};

// Linear functional entering a row: value or sigma-weighted derivative
// (divided by omega) of the solution at coordinate x of a segment.
struct Probe
{
    int edge = 0;
    int segment = 0;
    double x = 0.0;
    bool flux = false;
    double weight = 1.0;
};

// Single monomial entry c * exp(omega * lambda) of the symbolic matrix.
struct SymEntry
{
    int col = 0;
    double lambda = 0.0;
    double coeff = 0.0;
};

// Unknown and row ordering of the coupling system. `flipped` marks infinite
// edges whose last segment carries the growing exponential instead of the
// decaying one.
struct CouplingLayout
{
    std::vector<Slot> slots;
    std::vector<std::vector<Probe>> rows;
    std::vector<std::string> row_labels;
    // slot_index[edge][segment] = {plus column or -1, minus column or -1}
    std::vector<std::vector<std::array<int, 2>>> slot_index;
    std::uint64_t flipped = 0;

    int size() const
    {
        return static_cast<int>(slots.size());
    }
    int column(int edge, int segment, int sign) const
    {
        return slot_index[edge][segment][sign > 0 ? 0 : 1];
    }
};

CouplingLayout make_layout(const MetricTree& tree, std::uint64_t flipped = 0);

// Rows of monomial entries; evaluating at omega gives the coupling matrix.
std::vector<std::vector<SymEntry>> symbolic_matrix(const MetricTree& tree,
                                                   const CouplingLayout& layout);

// rhs = (1 / (2 omega)) sum_M rho[row][M] * M, rho given as monomials keyed
// by moment.
struct RhsTerm
{
    MomentId moment;
    double lambda = 0.0;
    double coeff = 0.0;
};
std::vector<std::vector<RhsTerm>> symbolic_rhs(const MetricTree& tree,
                                               const CouplingLayout& layout);

struct CouplingSystem
{
    CouplingLayout layout;
    Eigen::MatrixXcd matrix;
    Eigen::VectorXcd rhs;
    cplx omega;
};

Eigen::MatrixXcd coupling_matrix(const MetricTree& tree, const CouplingLayout& layout,
                                 cplx omega);

CouplingSystem assemble(const MetricTree& tree, cplx omega, const GraphFunction& f);

// (1 / (2 omega)) * integral over the segment of f(y) exp(-omega b |x - y|);
// the resolvent's particular part on the segment is b times this value.
cplx particular_solution(const Segment& seg, const EdgeSamples& f, cplx omega, double x);

// sigma u' / omega of the particular part, with the same 1 / (2 omega)
// normalization (no factor b).
cplx particular_flux(const Segment& seg, const EdgeSamples& f, cplx omega, double x);

// R_omega f as a function on the tree.
class ResolventSolution
{
public:
    ResolventSolution(const MetricTree& tree, const GraphFunction& f, cplx omega,
                      Eigen::VectorXcd coefficients, CouplingLayout layout,
                      double condition);

    cplx operator()(int edge, double x) const;
    // sigma u' at x (derivative along the edge coordinate).
    cplx flux(int edge, double x) const;

    const Eigen::VectorXcd& coefficients() const
    {
        return coeffs_;
    }
    double condition() const
    {
        return condition_;
    }

private:
    const MetricTree* tree_;
    const GraphFunction* f_;
    cplx omega_;
    Eigen::VectorXcd coeffs_;
    CouplingLayout layout_;
    double condition_;
};

inline constexpr double kConditionLimit = 1e12;

// Throws SingularSystem above kConditionLimit, ZeroFrequency at omega = 0.
// The returned object references tree and f.
ResolventSolution resolvent(const MetricTree& tree, cplx omega, const GraphFunction& f);

// R_omega f sampled on f's grids.
GraphFunction solve_resolvent(const MetricTree& tree, cplx omega, const GraphFunction& f);

cplx det_direct(const MetricTree& tree, cplx omega, std::uint64_t flipped = 0);

struct StripScan
{
    double c_min = 0.0;
    double r_max = 0.0;
    double tau_at_c_min = 0.0;
    double tau_at_r_max = 0.0;
    // (tau, |det|, |det_tilde / det|) including refined extrema, sorted by tau.
    std::vector<std::array<double, 3>> rows;
};

struct DetPair
{
    ExpPolyd det;
    ExpPolyd det_tilde;
    double ratio_bound = 0.0;
    double lower_bound = 0.0;
    // Infinite edge whose decaying exponential is replaced in det_tilde.
    int distinguished_edge = -1;
    // Number of recursion stages (interface and vertex steps).
    int stages = 0;
};

// Recursive determinant of the coupling matrix with the edges in `flipped`
// (by edge index) carrying growing exponentials. Equal to det_direct up to a
// factor independent of omega.
ExpPolyd det_recursive_flipped(const MetricTree& tree, std::uint64_t flipped);

// det and det_tilde; bounds from strip_scan with the given parameters.
DetPair det_recursive(const MetricTree& tree, double tau_max = 50.0, int samples = 10000);

StripScan strip_scan(const ExpPolyd& det, const ExpPolyd& det_tilde, double tau_max,
                     int samples);
// Throws BoundViolated if c_min <= 0 or r_max >= 1.
StripScan strip_scan(const MetricTree& tree, double tau_max, int samples);

// Vertex scattering matrix from the one-vertex Kirchhoff system with
// edge weights w_j = 1 / b_j: S_jk = 2 w_k / sum(w) - delta_jk.
Eigen::MatrixXd vertex_scattering(const std::vector<double>& weights);
Eigen::MatrixXd vertex_scattering(int m);

// 2x2 scattering matrix of a single interface between slownesses b_i and
// b_f, from the continuity and flux matching equations. Entry (0,0) is the
// reflection seen from the b_i side, (1,0) the transmission into b_f.
Eigen::Matrix2d interface_scattering(double b_i, double b_f);

// max |W^{1/2} S W^{-1/2} (W^{1/2} S W^{-1/2})^T - I| with W = diag(weights).
double flux_unitarity_defect(const Eigen::MatrixXd& s, const std::vector<double>& weights);

} // namespace kirchhoff

#endif // KIRCHHOFF_RESOLVENT_HPP
