#include <doctest.h>

#include <cmath>

#include "kirchhoff/error.hpp"
#include "kirchhoff/fd_oracle.hpp"

using namespace kirchhoff;

namespace
{

// exp(-(x - c)^2) on edge e, zero elsewhere.
GraphFunction gaussian_on(const MetricTree& tree, int e, double c, double h)
{
    return tabulate(
        tree,
        [e, c](std::size_t ed, double x) {
            return static_cast<int>(ed) == e ? cplx(std::exp(-(x - c) * (x - c))) : cplx(0.0);
        },
        h, c + 8.0);
}

// Image-sum evolution of exp(-(x - c)^2) on edge 0 of the m-star.
cplx star_gaussian(int m, int edge, double x, double c, double t)
{
    if (edge == 0) {
        return free_gaussian(x, c, t) + (2.0 / m - 1.0) * free_gaussian(-x, c, t);
    }
    return (2.0 / m) * free_gaussian(-x, c, t);
}

double star_error(const MetricTree& tree, double h, double dt, double c, double T)
{
    const GraphFunction u0 = gaussian_on(tree, 0, c, h);
    const GraphFunction u = cn_evolve(tree, u0, T, dt, h, 40.0);
    const int m = static_cast<int>(tree.edge_count());
    const GraphFunction ref = resample(u, [&](std::size_t e, double x) {
        return star_gaussian(m, static_cast<int>(e), x, c, T);
    });
    return compare(restrict_to(u, 20.0), restrict_to(ref, 20.0)).linf_err;
}

} // namespace

TEST_CASE("free line matches the closed form")
{
    const MetricTree line = load_tree("data/line.json");
    // Gaussian centered at the vertex: exp(-x^2) on both halves.
    const GraphFunction u0 = tabulate(
        line, [](std::size_t, double x) { return cplx(std::exp(-x * x)); }, 0.01, 8.0);
    CnReport rep;
    const GraphFunction u = cn_evolve(line, u0, 1.0, 1e-3, 0.01, 40.0, &rep);
    const GraphFunction ref =
        resample(u, [](std::size_t, double x) { return free_gaussian(x, 0.0, 1.0); });
    CHECK(compare(u, ref).linf_err <= 5e-4);
    CHECK(rep.steps == 1000);
    CHECK(std::abs(rep.mass1 - rep.mass0) <= 1e-12 * rep.mass0);
    CHECK(rep.warnings.empty());
}

TEST_CASE("discrete mass is conserved on a laminar tree")
{
    const MetricTree t = load_tree("data/laminar2.json");
    const GraphFunction u0 = gaussian_on(t, 2, 3.0, 0.02);
    CnReport rep;
    cn_evolve(t, u0, 1.0, 1e-3, 0.02, 30.0, &rep);
    CHECK(std::abs(rep.mass1 - rep.mass0) <= 1e-12 * rep.mass0);
}

TEST_CASE("3-star matches the image sum at second order")
{
    const MetricTree star = load_tree("data/star3.json");
    const double e1 = star_error(star, 0.02, 2e-3, 4.0, 1.0);
    const double e2 = star_error(star, 0.01, 1e-3, 4.0, 1.0);
    CHECK(e2 < 2e-3);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("star kernel identities")
{
    for (int m = 2; m <= 6; ++m) {
        const double r = 2.0 / m - 1.0;
        const double s = 2.0 / m;
        CHECK(r * r + (m - 1) * s * s == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(std::abs(star_kernel(2, 0.7, 0, 0.3, 0, 1.1) - free_kernel(0.7, 0.8)) < 1e-15);
    CHECK(std::abs(star_kernel(3, 2.0, 0, 0.3, 1, 1.1)) ==
          doctest::Approx(2.0 / 3.0 / std::sqrt(8.0 * M_PI)).epsilon(1e-14));
    CHECK_THROWS_AS(star_kernel(3, 0.0, 0, 0.1, 0, 0.2), Error);
}

TEST_CASE("compare")
{
    const MetricTree star = load_tree("data/star3.json");
    const GraphFunction a = gaussian_on(star, 0, 2.0, 0.1);
    const CompareReport same = compare(a, a);
    CHECK(same.l2_err == 0.0);
    CHECK(same.linf_err == 0.0);
    const GraphFunction b = gaussian_on(star, 0, 2.0, 0.05);
    try {
        compare(a, b);
        FAIL("expected GridMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GridMismatch);
    }
}

TEST_CASE("short truncation is rejected")
{
    const MetricTree line = load_tree("data/line.json");
    const GraphFunction u0 = tabulate(
        line, [](std::size_t, double x) { return cplx(std::exp(-x * x)); }, 0.05, 8.0);
    try {
        cn_evolve(line, u0, 1.0, 1e-2, 0.05, 5.0);
        FAIL("expected TruncationTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TruncationTooShort);
    }
    CnReport rep;
    cn_evolve(line, u0, 1.0, 1e-2, 0.05, 13.0, &rep);
    CHECK(!rep.warnings.empty());
}
