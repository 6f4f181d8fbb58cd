#ifndef KIRCHHOFF_TEST_SUPPORT_HPP
#define KIRCHHOFF_TEST_SUPPORT_HPP

#include <random>
#include <string>

#include <json.hpp>

#include "kirchhoff/metric_tree.hpp"

namespace kirchhoff::testing
{

// Random tree with n vertices, lengths in [0.5, 2], every vertex of degree
// at least 3, and up to `jumps` coefficient discontinuities.
inline MetricTree random_tree(std::mt19937& rng, int n, int jumps)
{
    std::uniform_real_distribution<double> len(0.5, 2.0);
    std::uniform_real_distribution<double> sig(0.5, 2.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    nlohmann::json doc;
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) {
        names.push_back("v" + std::to_string(i));
    }
    doc["vertices"] = names;
    doc["sigma_bounds"] = {{"min", 0.1}, {"max", 10.0}};
    nlohmann::json edges = nlohmann::json::array();
    std::vector<int> deg(n, 0);
    for (int i = 1; i < n; ++i) {
        int p = std::uniform_int_distribution<int>(0, i - 1)(rng);
        edges.push_back({{"id", "f" + std::to_string(i)}, {"from", names[p]},
                         {"to", names[i]}, {"length", len(rng)}});
        ++deg[p];
        ++deg[i];
    }
    int k = 0;
    for (int v = 0; v < n; ++v) {
        int extra = std::max(0, 3 - deg[v]) + (u01(rng) < 0.3 ? 1 : 0);
        if (n > 1 && deg[v] == 1) {
            extra = std::max(extra, 2);
        }
        for (int j = 0; j < extra; ++j) {
            edges.push_back({{"id", "i" + std::to_string(k++)}, {"from", names[v]},
                             {"to", nullptr}, {"length", nullptr}});
        }
    }
    for (auto& e : edges) {
        e["profile"] = nlohmann::json::array({{{"at", 0.0}, {"sigma", jumps > 0 ? sig(rng) : 1.0}}});
    }
    for (int j = 0; j < jumps; ++j) {
        auto& e = edges[std::uniform_int_distribution<std::size_t>(0, edges.size() - 1)(rng)];
        const double span = e["length"].is_null() ? 2.0 : e["length"].get<double>();
        const double last = e["profile"].back()["at"].get<double>();
        const double at = last + (span - last) * (0.2 + 0.6 * u01(rng));
        e["profile"].push_back({{"at", at}, {"sigma", sig(rng)}});
    }
    doc["edges"] = edges;
    return parse_tree(doc.dump());
}

} // namespace kirchhoff::testing

#endif // KIRCHHOFF_TEST_SUPPORT_HPP
