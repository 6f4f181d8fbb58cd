#ifndef KIRCHHOFF_GAUSS_RULE_HPP
#define KIRCHHOFF_GAUSS_RULE_HPP

#include <array>
#include <cstddef>

#include <boost/math/quadrature/gauss.hpp>

namespace kirchhoff::detail
{

// N-point Gauss-Legendre rule on [-1, 1], nodes ascending (N even).
template <std::size_t N>
struct GaussRule
{
    static_assert(N % 2 == 0);
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    GaussRule()
    {
        using G = boost::math::quadrature::gauss<double, N>;
        const auto& x = G::abscissa();
        const auto& w = G::weights();
        for (std::size_t i = 0; i < N / 2; ++i) {
            nodes[N / 2 + i] = x[i];
            weights[N / 2 + i] = w[i];
            nodes[N / 2 - 1 - i] = -x[i];
            weights[N / 2 - 1 - i] = w[i];
        }
    }
};

template <std::size_t N>
const GaussRule<N>& gauss_rule()
{
    static const GaussRule<N> rule;
    return rule;
}

} // namespace kirchhoff::detail

#endif // KIRCHHOFF_GAUSS_RULE_HPP
