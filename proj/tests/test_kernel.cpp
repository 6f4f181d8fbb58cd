#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kirchhoff/error.hpp"
#include "kirchhoff/kernel.hpp"
#include "kirchhoff/resolvent.hpp"

using namespace kirchhoff;

namespace
{

// Smooth bump of width w centered at c on edge e, sampled with step h.
GraphFunction bump(const MetricTree& tree, int e, double c, double w, cplx amp, double h)
{
    GraphFunction f(tree.edge_count());
    const double hi = tree.edges[e].length ? *tree.edges[e].length : c + w + 1.0;
    const double lo = std::max(0.0, c - w);
    const double top = std::min(hi, c + w);
    const int n = std::max(2, static_cast<int>(std::ceil((top - lo) / h)));
    std::vector<double> x(n + 1);
    Eigen::VectorXcd v(n + 1);
    for (int i = 0; i <= n; ++i) {
        x[i] = lo + (top - lo) * i / n;
        const double s = (x[i] - c) / w;
        v[i] = std::abs(s) < 1.0 ? amp * std::pow(1.0 - s * s, 3) : 0.0;
    }
    f.set_edge(e, x, v);
    return f;
}

GraphFunction gaussian_line(const MetricTree& line, double h)
{
    return tabulate(
        line, [](std::size_t, double x) { return cplx(std::exp(-x * x)); }, h, 7.0);
}

cplx free_gaussian(double x, double t)
{
    const cplx d(1.0, 4.0 * t);
    return std::exp(-x * x / d) / std::sqrt(d);
}

} // namespace

TEST_CASE("3-star kernel terms are the image system")
{
    const MetricTree t = load_tree("data/star3.json");
    const KernelExpansion k = kernel_terms(t, 1e-8);
    CHECK(k.eps_rep == 0.0);
    CHECK(k.ratio == 0.0);
    int reflected = 0;
    int transmitted = 0;
    for (const KernelTerm& kt : k.terms) {
        if (kt.region != 0) {
            CHECK(kt.amplitude == cplx(0.0, -0.5));
            continue;
        }
        CHECK(kt.p == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(kt.q == -1.0);
        CHECK(kt.beta == -1.0);
        if (kt.source_edge == kt.target_edge) {
            CHECK(std::abs(kt.amplitude - cplx(0.0, -0.5 * (2.0 / 3.0 - 1.0))) < 1e-14);
            ++reflected;
        } else {
            CHECK(std::abs(kt.amplitude - cplx(0.0, -0.5 * 2.0 / 3.0)) < 1e-14);
            ++transmitted;
        }
    }
    CHECK(reflected == 3);
    CHECK(transmitted == 6);
    CHECK(k.amplitude_sum == doctest::Approx(0.5 + 1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("two-vertex amplitudes decay by 1/9 per round trip")
{
    const MetricTree t = load_tree("data/twovertex.json");
    const KernelExpansion k = kernel_terms(t, 1e-10);
    CHECK(k.ratio == doctest::Approx(1.0 / 9.0));
    CHECK(k.eps_rep <= 1e-10);
    // Terms from edge A1 to edge B1 ordered by path length.
    const int a1 = t.find_edge("A1");
    const int b1 = t.find_edge("B1");
    std::vector<double> amps;
    for (const KernelTerm& kt : k.terms) {
        if (kt.source_edge == a1 && kt.target_edge == b1) {
            amps.push_back(std::abs(kt.amplitude));
        }
    }
    REQUIRE(amps.size() >= 4);
    // Sorted by p ascending, i.e. by descending path length; compare
    // successive shorter paths.
    for (std::size_t i = amps.size() - 3; i + 1 < amps.size(); ++i) {
        CHECK(amps[i] / amps[i + 1] == doctest::Approx(1.0 / 9.0).epsilon(1e-9));
    }
}

TEST_CASE("expansion reproduces tau times the resolvent")
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const char* path :
         {"data/star3.json", "data/twovertex.json", "data/fig1.json", "data/laminar2.json"}) {
        const MetricTree t = load_tree(path);
        const KernelExpansion k = kernel_terms(t, 1e-8);
        CHECK(k.eps_rep <= 1e-8);
        for (int d = 0; d < 2; ++d) {
            const int e = static_cast<int>(U(rng) * t.edge_count());
            const double len = t.edges[e].length.value_or(3.0);
            const GraphFunction f =
                bump(t, e, len * (0.2 + 0.6 * U(rng)), 0.2 + 0.3 * U(rng),
                     cplx(U(rng) - 0.5, U(rng) - 0.5), 0.01);
            for (int s = 0; s < 10; ++s) {
                double tau = -30.0 + 60.0 * U(rng);
                if (std::abs(tau) < 1e-3) {
                    tau = 1e-3;
                }
                const ResolventSolution sol = resolvent(t, cplx(0.0, tau), f);
                for (int p = 0; p < 5; ++p) {
                    const int ee = static_cast<int>(U(rng) * t.edge_count());
                    const double x = t.edges[ee].length.value_or(4.0) * U(rng);
                    const cplx direct = tau * sol(ee, x);
                    const cplx series = evaluate_terms(k, t, f, tau, ee, x);
                    CHECK(std::abs(direct - series) <= k.eps_rep * f.l1_norm() + 1e-10);
                }
            }
        }
    }
}

TEST_CASE("time integral constant")
{
    const cplx v = time_integral(0.0, 1.0);
    CHECK(std::abs(v - std::sqrt(std::numbers::pi) * std::exp(cplx(0.0, std::numbers::pi / 4))) <
          1e-15);
    for (double r : {-3.0, 0.5, 7.0}) {
        CHECK(std::abs(time_integral(r, 2.0)) == doctest::Approx(std::sqrt(std::numbers::pi / 2)));
        CHECK(std::abs(time_integral(r, -0.5)) == doctest::Approx(std::sqrt(2 * std::numbers::pi)));
    }
    // Damped quadrature of integral exp(i t s^2 + i r s - delta s^2) ds,
    // extrapolated in delta.
    const double r = 0.7;
    const double t = 1.3;
    auto damped = [&](double delta) {
        const cplx a(delta, -t);
        return std::sqrt(std::numbers::pi / a) * std::exp(-r * r / (4.0 * a));
    };
    const cplx lim = 2.0 * damped(1e-8) - damped(2e-8);
    CHECK(std::abs(time_integral(r, t) - lim) < 1e-6);
    CHECK_THROWS_AS(time_integral(1.0, 0.0), Error);
}

TEST_CASE("free line propagation matches the closed form")
{
    const MetricTree line = load_tree("data/line.json");
    const GraphFunction u0 = gaussian_line(line, 0.0025);
    for (double t : {0.25, 1.0, 4.0}) {
        std::vector<EvalPoint> pts;
        for (int e = 0; e < 2; ++e) {
            for (int i = 0; i <= 200; ++i) {
                pts.push_back({e, 0.05 * i});
            }
        }
        const Propagation p = propagate(line, u0, t, pts, 1e-10);
        double err = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            err = std::max(err, std::abs(p.values[i] - free_gaussian(pts[i].x, t)));
        }
        CHECK(err <= 1e-6);
        CHECK(p.truncation_bound == 0.0);
        CHECK(p.quadrature_bound < 1e-10);
    }
    CHECK_THROWS_AS(propagate(line, u0, 0.0, {}, 1e-8), Error);
}

TEST_CASE("propagate rejects truncated data")
{
    const MetricTree line = load_tree("data/line.json");
    const GraphFunction u0 =
        tabulate(line, [](std::size_t, double) { return cplx(1.0); }, 0.1, 2.0);
    try {
        propagate(line, u0, 1.0, {{0, 0.5}}, 1e-8);
        FAIL("expected UnsupportedData");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedData);
    }
}
