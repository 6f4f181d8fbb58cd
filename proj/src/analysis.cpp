#include "kirchhoff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kirchhoff/error.hpp"
#include "kirchhoff/fd_oracle.hpp"
#include "gauss_rule.hpp"

namespace kirchhoff
{

namespace
{

double support_reach(const GraphFunction& u0)
{
    double hi = 0.0;
    for (std::size_t e = 0; e < u0.edge_count(); ++e) {
        if (!u0.edge(e).empty()) {
            hi = std::max(hi, u0.support(e).second);
        }
    }
    return hi;
}

} // namespace

NormEstimate propagated_norms(const KernelExpansion& k, const MetricTree& tree,
                              const GraphFunction& u0, double t, const NormSampling& s)
{
    double reach = s.reach > 0.0 ? s.reach : support_reach(u0) + 10.0 + 16.0 * std::abs(t);
    reach = std::min(reach, s.max_reach);
    // Local wavenumber is at most about reach / (2|t|); keep 8 nodes per
    // half wavelength or better.
    const double panel =
        std::min(s.panel, std::numbers::pi * 2.0 * std::abs(t) / std::max(reach, 1.0));

    const auto& gl = detail::gauss_rule<8>();
    std::vector<EvalPoint> pts;
    std::vector<double> weights;
    double measure = 0.0;
    for (std::size_t e = 0; e < tree.edge_count(); ++e) {
        const double len = tree.edges[e].length ? *tree.edges[e].length : reach;
        measure += len;
        // Panels end at breakpoints so the integrand is smooth on each.
        std::vector<double> cuts{0.0};
        for (std::size_t j = 1; j < tree.edges[e].profile.size(); ++j) {
            if (tree.edges[e].profile[j].at < len) {
                cuts.push_back(tree.edges[e].profile[j].at);
            }
        }
        cuts.push_back(len);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double a = cuts[c];
            const double b = cuts[c + 1];
            const int n = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
            const double w = (b - a) / n;
            for (int i = 0; i < n; ++i) {
                for (int g = 0; g < 8; ++g) {
                    pts.push_back({static_cast<int>(e), a + w * (i + 0.5 * (gl.nodes[g] + 1.0))});
                    weights.push_back(0.5 * w * gl.weights[g]);
                }
            }
        }
    }
    const Propagation p = propagate(k, tree, u0, t, pts, s.threads);
    NormEstimate out;
    out.points = pts.size();
    double sq = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        sq += weights[i] * std::norm(p.values[i]);
        out.linf = std::max(out.linf, std::abs(p.values[i]));
    }
    out.l2 = std::sqrt(sq);
    out.budget = p.truncation_bound + p.quadrature_bound;
    out.l2_budget = out.budget * std::sqrt(measure);
    return out;
}

std::vector<double> log_grid(double tmin, double tmax, int n)
{
    if (!(tmin > 0.0) || !(tmax > tmin) || n < 2) {
        throw Error(ErrorCode::ConfigError, "log grid needs 0 < tmin < tmax and n >= 2");
    }
    std::vector<double> g(n);
    const double a = std::log(tmin);
    const double b = std::log(tmax);
    for (int i = 0; i < n; ++i) {
        g[i] = std::exp(a + (b - a) * i / (n - 1));
    }
    return g;
}

EvolutionReport dispersion_profile(const MetricTree& tree, const GraphFunction& u0,
                                   const std::vector<double>& t_grid, double eps,
                                   const NormSampling& s)
{
    const KernelExpansion k = kernel_terms(tree, eps);
    EvolutionReport r;
    r.eps = eps;
    r.eps_rep = k.eps_rep;
    r.bound = k.amplitude_sum / std::sqrt(std::numbers::pi);
    r.l1_initial = u0.l1_norm();
    r.l2_initial = u0.l2_norm();
    r.method = "kernel-terms";
    for (double t : t_grid) {
        const NormEstimate n = propagated_norms(k, tree, u0, t, s);
        EvolutionRow row;
        row.t = t;
        row.l2 = n.l2;
        row.linf = n.linf;
        row.scaled = r.l1_initial > 0.0 ? std::sqrt(std::abs(t)) * n.linf / r.l1_initial : 0.0;
        row.budget = n.budget;
        r.C = std::max(r.C, row.scaled);
        r.rows.push_back(row);
    }
    return r;
}

NlsResult nls_evolve(const MetricTree& tree, const GraphFunction& u0, const NlsConfig& cfg)
{
    if (!cfg.allow_any_p && !(cfg.p > 0.0 && cfg.p < 4.0)) {
        throw Error(ErrorCode::ExponentOutOfRange,
                    "exponent p = " + std::to_string(cfg.p) + " outside (0, 4)");
    }
    if (cfg.sign != 1 && cfg.sign != -1) {
        throw Error(ErrorCode::ConfigError, "sign must be +1 or -1");
    }
    if (!(cfg.T > 0.0) || !(cfg.dt > 0.0)) {
        throw Error(ErrorCode::ConfigError, "T and dt must be positive");
    }
    const int steps = std::max(1, static_cast<int>(std::llround(cfg.T / cfg.dt)));
    const double dt = cfg.T / steps;
    const CnStepper stepper(tree, cfg.h, cfg.L, dt);
    Eigen::VectorXcd u = stepper.sample(u0);

    const double g = cfg.sign * cfg.coefficient;
    auto phase = [&](double tau) {
        if (g == 0.0) {
            return;
        }
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const double a = std::abs(u[i]);
            if (a > 0.0) {
                u[i] *= std::exp(cplx(0.0, g * std::pow(a, cfg.p) * tau));
            }
        }
    };

    NlsResult out;
    const double m0 = stepper.mass(u);
    const double linf0 = u.size() > 0 ? u.cwiseAbs().maxCoeff() : 0.0;
    out.rows.push_back({0.0, std::sqrt(m0), linf0});
    if (cfg.snapshot_every > 0) {
        out.snapshots.emplace_back(0.0, stepper.to_function(u));
    }
    for (int n = 1; n <= steps; ++n) {
        phase(0.5 * dt);
        stepper.step(u);
        phase(0.5 * dt);
        const double m = stepper.mass(u);
        const double linf = u.cwiseAbs().maxCoeff();
        out.rows.push_back({n * dt, std::sqrt(m), linf});
        if (m0 > 0.0) {
            out.relative_drift =
                std::max(out.relative_drift, std::abs(std::sqrt(m) - std::sqrt(m0)) / std::sqrt(m0));
        }
        if (cfg.sign > 0 && linf0 > 0.0 && linf > 1e3 * linf0) {
            throw Error(ErrorCode::BlowUpSuspected,
                        "sup norm grew from " + std::to_string(linf0) + " to " +
                            std::to_string(linf) + " by t = " + std::to_string(n * dt));
        }
        if (cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0) {
            out.snapshots.emplace_back(n * dt, stepper.to_function(u));
        }
    }
    out.final_state = stepper.to_function(u);
    return out;
}

} // namespace kirchhoff
