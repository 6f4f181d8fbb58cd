#ifndef KIRCHHOFF_EXP_POLY_HPP
#define KIRCHHOFF_EXP_POLY_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "kirchhoff/error.hpp"

namespace kirchhoff
{

inline constexpr double kDefaultMergeTolerance = 1e-12;

//
// Almost-periodic exponential polynomial
//
//   p(w) = sum_k c_k exp(w * lambda_k)
//
// with real, pairwise distinct frequencies lambda_k (up to the merge
// tolerance) and nonzero coefficients of type Scalar (double or
// std::complex<double>). Terms are kept sorted by ascending frequency.
//
template <typename Scalar>
class ExpPoly
{
public:
    using scalar_type = Scalar;
    using real_type = double;
    using complex_type = std::complex<double>;

    struct Term
    {
        double lambda;
        Scalar coeff;
    };

    ExpPoly() = default;

    explicit ExpPoly(double merge_tol) : tol_(merge_tol)
    {
    }

    ExpPoly(std::initializer_list<std::pair<double, Scalar>> init,
            double merge_tol = kDefaultMergeTolerance)
        : tol_(merge_tol)
    {
        terms_.reserve(init.size());
        for (const auto& [lambda, c] : init) {
            terms_.push_back({lambda, c});
        }
        normalize();
    }

    static ExpPoly constant(Scalar c, double merge_tol = kDefaultMergeTolerance)
    {
        return monomial(0.0, c, merge_tol);
    }

    static ExpPoly monomial(double lambda, Scalar c,
                            double merge_tol = kDefaultMergeTolerance)
    {
        ExpPoly p(merge_tol);
        if (c != Scalar(0)) {
            p.terms_.push_back({lambda, c});
        }
        return p;
    }

    // Build from unsorted, possibly colliding terms.
    static ExpPoly from_terms(std::vector<Term> terms,
                              double merge_tol = kDefaultMergeTolerance)
    {
        ExpPoly p(merge_tol);
        p.terms_ = std::move(terms);
        p.normalize();
        return p;
    }

    const std::vector<Term>& terms() const
    {
        return terms_;
    }

    std::size_t size() const
    {
        return terms_.size();
    }

    bool empty() const
    {
        return terms_.empty();
    }

    double merge_tolerance() const
    {
        return tol_;
    }

    // sum_k |c_k|
    double abs_sum() const
    {
        double s = 0.0;
        for (const auto& t : terms_) {
            s += std::abs(t.coeff);
        }
        return s;
    }

    // Coefficient of the frequency closest to `lambda` within tolerance,
    // zero if absent.
    Scalar coeff_at(double lambda) const
    {
        auto it = std::lower_bound(
            terms_.begin(), terms_.end(), lambda - tol_,
            [](const Term& t, double v) { return t.lambda < v; });
        if (it != terms_.end() && std::abs(it->lambda - lambda) <= tol_) {
            return it->coeff;
        }
        return Scalar(0);
    }

    // Evaluate at complex w, summing in ascending frequency order.
    complex_type operator()(complex_type w) const
    {
        complex_type s(0.0, 0.0);
        for (const auto& t : terms_) {
            s += complex_type(t.coeff) * std::exp(w * t.lambda);
        }
        return s;
    }

    // Multiply by exp(w * mu).
    ExpPoly shifted(double mu) const
    {
        ExpPoly r(*this);
        for (auto& t : r.terms_) {
            t.lambda += mu;
        }
        return r;
    }

    ExpPoly& operator+=(const ExpPoly& q)
    {
        if (q.terms_.empty()) {
            return *this;
        }
        std::vector<Term> merged;
        merged.reserve(terms_.size() + q.terms_.size());
        std::merge(terms_.begin(), terms_.end(), q.terms_.begin(),
                   q.terms_.end(), std::back_inserter(merged),
                   [](const Term& a, const Term& b) {
                       return a.lambda < b.lambda;
                   });
        terms_ = std::move(merged);
        collapse();
        return *this;
    }

    ExpPoly& operator-=(const ExpPoly& q)
    {
        return *this += (-q);
    }

    ExpPoly& operator*=(Scalar c)
    {
        if (c == Scalar(0)) {
            terms_.clear();
            return *this;
        }
        for (auto& t : terms_) {
            t.coeff *= c;
        }
        return *this;
    }

    ExpPoly operator-() const
    {
        ExpPoly r(*this);
        for (auto& t : r.terms_) {
            t.coeff = -t.coeff;
        }
        return r;
    }

    // Drop terms with |c| < threshold; returns the abs-sum of what was
    // dropped.
    double prune(double threshold)
    {
        double dropped = 0.0;
        auto keep = std::remove_if(terms_.begin(), terms_.end(),
                                   [&](const Term& t) {
                                       double a = std::abs(t.coeff);
                                       if (a < threshold) {
                                           dropped += a;
                                           return true;
                                       }
                                       return false;
                                   });
        terms_.erase(keep, terms_.end());
        return dropped;
    }

    template <typename Other>
    ExpPoly<Other> cast() const
    {
        ExpPoly<Other> r(tol_);
        std::vector<typename ExpPoly<Other>::Term> ts;
        ts.reserve(terms_.size());
        for (const auto& t : terms_) {
            ts.push_back({t.lambda, Other(t.coeff)});
        }
        return ExpPoly<Other>::from_terms(std::move(ts), tol_);
    }

private:
    void normalize()
    {
        std::sort(terms_.begin(), terms_.end(),
                  [](const Term& a, const Term& b) {
                      return a.lambda < b.lambda;
                  });
        collapse();
    }

    // Merge runs of sorted frequencies whose neighbours lie within the
    // tolerance; the merged frequency is the coefficient-weighted first
    // member of the run (stable for exact collisions).
    void collapse()
    {
        std::size_t out = 0;
        for (std::size_t i = 0; i < terms_.size();) {
            Term acc = terms_[i];
            std::size_t j = i + 1;
            while (j < terms_.size() &&
                   terms_[j].lambda - terms_[j - 1].lambda <= tol_) {
                acc.coeff += terms_[j].coeff;
                ++j;
            }
            if (acc.coeff != Scalar(0)) {
                terms_[out++] = acc;
            }
            i = j;
        }
        terms_.resize(out);
    }

    std::vector<Term> terms_;
    double tol_ = kDefaultMergeTolerance;
};

using ExpPolyd = ExpPoly<double>;
using ExpPolycd = ExpPoly<std::complex<double>>;

template <typename Scalar>
std::complex<double> evaluate(const ExpPoly<Scalar>& p, std::complex<double> w)
{
    return p(w);
}

template <typename Scalar>
ExpPoly<Scalar> operator+(ExpPoly<Scalar> p, const ExpPoly<Scalar>& q)
{
    p += q;
    return p;
}

template <typename Scalar>
ExpPoly<Scalar> operator-(ExpPoly<Scalar> p, const ExpPoly<Scalar>& q)
{
    p -= q;
    return p;
}

template <typename Scalar>
ExpPoly<Scalar> operator*(ExpPoly<Scalar> p, Scalar c)
{
    p *= c;
    return p;
}

template <typename Scalar>
ExpPoly<Scalar> operator*(Scalar c, ExpPoly<Scalar> p)
{
    p *= c;
    return p;
}

// Convolution of term maps.
template <typename Scalar>
ExpPoly<Scalar> mul(const ExpPoly<Scalar>& p, const ExpPoly<Scalar>& q)
{
    const double tol = std::max(p.merge_tolerance(), q.merge_tolerance());
    if (p.empty() || q.empty()) {
        return ExpPoly<Scalar>(tol);
    }
    std::vector<typename ExpPoly<Scalar>::Term> prod;
    prod.reserve(p.size() * q.size());
    for (const auto& a : p.terms()) {
        for (const auto& b : q.terms()) {
            prod.push_back({a.lambda + b.lambda, a.coeff * b.coeff});
        }
    }
    return ExpPoly<Scalar>::from_terms(std::move(prod), tol);
}

template <typename Scalar>
ExpPoly<Scalar> operator*(const ExpPoly<Scalar>& p, const ExpPoly<Scalar>& q)
{
    return mul(p, q);
}

template <typename Scalar>
struct GeomInverse
{
    ExpPoly<Scalar> inverse;
    // Certified l1 bound on the discarded part of the exact inverse series.
    double tail_bound = 0.0;
    // abs_sum of q in p = c exp(w mu) (1 - q).
    double ratio = 0.0;
    // Highest power of q kept.
    int order = 0;
    // Dominant term that was factored out.
    double mu = 0.0;
    Scalar dominant = Scalar(0);
};

//
// Inverse of p by a truncated geometric series.
//
// Writes p = c exp(w mu) (1 - q) around its unique largest-modulus term and
// returns (1/c) exp(-w mu) sum_{k=0}^{K} q^k with K the smallest order whose
// certified tail r^{K+1} / ((1 - r)|c|) is at most eps, r = abs_sum(q).
// Terms of the partial sums below `prune_below` are dropped along the way;
// their contribution is added to the tail bound.
//
template <typename Scalar>
GeomInverse<Scalar> geom_inverse(const ExpPoly<Scalar>& p, double eps,
                                 double prune_below = 0.0)
{
    if (!(eps > 0.0)) {
        throw Error(ErrorCode::NotContractive,
                    "geom_inverse: eps must be positive");
    }
    if (p.empty()) {
        throw Error(ErrorCode::NotContractive,
                    "geom_inverse: zero polynomial has no inverse");
    }
    const auto& ts = p.terms();
    std::size_t dom = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double a = std::abs(ts[i].coeff);
        if (a > best) {
            best = a;
            dom = i;
        }
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i != dom && std::abs(ts[i].coeff) >= best * (1.0 - 1e-12)) {
            throw Error(ErrorCode::NotContractive,
                        "geom_inverse: dominant term is not unique");
        }
    }
    const Scalar c = ts[dom].coeff;
    const double mu = ts[dom].lambda;
    const double abs_c = std::abs(c);

    std::vector<typename ExpPoly<Scalar>::Term> qt;
    qt.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i != dom) {
            qt.push_back({ts[i].lambda - mu, -ts[i].coeff / c});
        }
    }
    const ExpPoly<Scalar> q =
        ExpPoly<Scalar>::from_terms(std::move(qt), p.merge_tolerance());
    const double r = q.abs_sum();
    if (r >= 1.0) {
        throw Error(ErrorCode::NotContractive,
                    "geom_inverse: contraction ratio " + std::to_string(r) +
                        " >= 1");
    }

    GeomInverse<Scalar> out;
    out.ratio = r;
    out.mu = mu;
    out.dominant = c;

    int order = 0;
    double tail = 0.0;
    if (r > 0.0) {
        // r^{K+1} / ((1 - r)|c|) <= eps, with half the budget reserved for
        // pruning when requested.
        const double budget = prune_below > 0.0 ? 0.5 * eps : eps;
        double rk = r;
        while (rk / ((1.0 - r) * abs_c) > budget) {
            rk *= r;
            ++order;
        }
        tail = rk / ((1.0 - r) * abs_c);
    }

    // Horner: S <- 1 + q S, K times.
    const ExpPoly<Scalar> one = ExpPoly<Scalar>::constant(Scalar(1), p.merge_tolerance());
    ExpPoly<Scalar> s = one;
    double pruned = 0.0;
    for (int k = 0; k < order; ++k) {
        s = one + mul(q, s);
        if (prune_below > 0.0) {
            pruned += s.prune(prune_below);
        }
    }
    // A pruned mass d at some step is later multiplied by at most sum r^j.
    tail += pruned / ((1.0 - r) * abs_c);

    s *= Scalar(1) / c;
    out.inverse = s.shifted(-mu);
    out.tail_bound = tail;
    out.order = order;
    return out;
}

} // namespace kirchhoff

#endif // KIRCHHOFF_EXP_POLY_HPP
