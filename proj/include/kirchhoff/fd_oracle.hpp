#ifndef KIRCHHOFF_FD_ORACLE_HPP
#define KIRCHHOFF_FD_ORACLE_HPP

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "kirchhoff/graph_function.hpp"
#include "kirchhoff/metric_tree.hpp"

namespace kirchhoff
{

// Nodes of the tree truncated at distance L on infinite edges. Vertex nodes
// are shared by all incident edges; truncation tips carry a homogeneous
// Dirichlet condition and are not unknowns. Breakpoints are nodes.
struct TruncatedGrid
{
    struct EdgeNodes
    {
        double length = 0.0;
        std::vector<double> x;
        // Global unknown index per node, -1 at a truncation tip.
        std::vector<int> index;
    };
    std::vector<EdgeNodes> edges;
    int unknowns = 0;
    double h = 0.0;
    double L = 0.0;
    // Lumped mass per unknown.
    Eigen::VectorXd mass;
    // Stiffness of -(sigma u')' with Kirchhoff vertex rows built in.
    Eigen::SparseMatrix<double> stiffness;
};

TruncatedGrid make_grid(const MetricTree& tree, double h, double L);

// Crank-Nicolson map (M + i dt/2 S) u+ = (M - i dt/2 S) u, unitary in the
// lumped-mass norm. One factorization serves every step.
class CnStepper
{
public:
    CnStepper(const MetricTree& tree, double h, double L, double dt);
    ~CnStepper();
    CnStepper(CnStepper&&) noexcept;
    CnStepper& operator=(CnStepper&&) noexcept;

    const TruncatedGrid& grid() const
    {
        return grid_;
    }
    double dt() const
    {
        return dt_;
    }

    Eigen::VectorXcd sample(const GraphFunction& f) const;
    GraphFunction to_function(const Eigen::VectorXcd& u) const;

    void step(Eigen::VectorXcd& u) const;
    // Discrete L^2 norm squared.
    double mass(const Eigen::VectorXcd& u) const;
    // Mass on infinite edges within `zone` of the truncation tip.
    double boundary_mass(const Eigen::VectorXcd& u, double zone) const;

private:
    TruncatedGrid grid_;
    double dt_;
    struct Factor;
    std::unique_ptr<Factor> factor_;
};

struct CnReport
{
    double mass0 = 0.0;
    double mass1 = 0.0;
    double boundary_fraction = 0.0;
    int steps = 0;
    std::vector<std::string> warnings;
};

inline constexpr double kBoundaryWarn = 1e-6;
inline constexpr double kBoundaryFail = 1e-3;

// Evolves to time T with round(T / dt) steps. Warns when more than 1e-6 of
// the mass lies within 4 sqrt(sigma_max T) of a tip and throws
// TruncationTooShort above 1e-3.
GraphFunction cn_evolve(const MetricTree& tree, const GraphFunction& u0, double T, double dt,
                        double h, double L, CnReport* report = nullptr);

// Image-sum kernel of the constant-coefficient m-star.
cplx star_kernel(int m, double t, int x_edge, double x, int y_edge, double y);

// (4 pi i t)^{-1/2} exp(i r^2 / (4 t)).
cplx free_kernel(double t, double r);

// Free evolution of exp(-(z - z0)^2) on the line.
cplx free_gaussian(double z, double z0, double t);

struct CompareReport
{
    double l2_err = 0.0;
    double linf_err = 0.0;
    std::size_t nodes = 0;
    std::size_t edges = 0;
};

// Throws GridMismatch unless both functions have identical grids.
CompareReport compare(const GraphFunction& a, const GraphFunction& b);

// Restriction of f to x <= reach on every edge.
GraphFunction restrict_to(const GraphFunction& f, double reach);

} // namespace kirchhoff

#endif // KIRCHHOFF_FD_ORACLE_HPP
