#pragma once

#include <annolab/distance.hpp>
#include <annolab/error.hpp>
#include <annolab/matrix.hpp>
#include <annolab/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace annolab {

enum class Method { RND, FAFT, TwoDV };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::RND: return "RND";
    case Method::FAFT: return "FAFT";
    case Method::TwoDV: return "2DV";
    }
    return "RND";
}

// Accepts "RND"/"rnd", "FAFT"/"faft", "2DV"/"2dv".
inline std::optional<Method> parse_method(std::string_view s) {
    if (s == "RND" || s == "rnd") return Method::RND;
    if (s == "FAFT" || s == "faft") return Method::FAFT;
    if (s == "2DV" || s == "2dv") return Method::TwoDV;
    return std::nullopt;
}

struct SampleOrder {
    Method method = Method::RND;
    std::vector<std::size_t> order;
    std::uint64_t seed = 0;
    std::optional<Metric> metric;  // FAFT only
    // FAFT only: radii[t] = distance of order[t] to {order[0..t-1]}; radii[0] is +inf.
    std::vector<double> radii;

    bool operator==(const SampleOrder& o) const {
        return method == o.method && order == o.order && seed == o.seed && metric == o.metric;
    }
};

// Seeded uniform draws without replacement. Sequential partial Fisher-Yates, so
// the first k entries of a budget-B order equal the budget-k order for the same seed.
inline SampleOrder sample_random(std::size_t n_total, std::size_t budget, std::uint64_t seed) {
    if (budget == 0 || budget > n_total)
        fail(ErrorKind::BudgetExceedsPopulation,
             "budget " + std::to_string(budget) + " not in [1, " + std::to_string(n_total) + "]");
    std::vector<std::size_t> pool(n_total);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t t = 0; t < budget; ++t) {
        const std::size_t j = t + static_cast<std::size_t>(rng.uniform_index(n_total - t));
        std::swap(pool[t], pool[j]);
    }
    pool.resize(budget);
    return {Method::RND, std::move(pool), seed, std::nullopt, {}};
}

namespace detail {

// Row-to-row distances over a feature matrix with cached squared norms. The
// arithmetic matches cosine_distance/euclidean_distance term for term, so the
// results are bit-identical to the plain functions.
class RowDistance {
public:
    RowDistance(const FeatureMatrix& m, Metric metric) : m_(m), metric_(metric) {
        if (metric_ == Metric::Cosine) {
            sq_norms_.resize(m.n_samples);
            for (std::size_t i = 0; i < m.n_samples; ++i) {
                double s = 0.0;
                for (float x : m.row(i)) {
                    const double a = x;
                    s += a * a;
                }
                sq_norms_[i] = s;
            }
        }
    }

    double operator()(std::size_t i, std::size_t j) const {
        const auto u = m_.row(i);
        const auto v = m_.row(j);
        if (metric_ == Metric::Euclidean) return euclidean_distance(u, v);
        double dot = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double a = u[k], b = v[k];
            dot += a * b;
        }
        const double nu = sq_norms_[i], nv = sq_norms_[j];
        if (nu == 0.0 || nv == 0.0) return 1.0;
        return std::clamp(1.0 - dot / (std::sqrt(nu) * std::sqrt(nv)), 0.0, 2.0);
    }

private:
    const FeatureMatrix& m_;
    Metric metric_;
    std::vector<double> sq_norms_;
};

} // namespace detail

// Farthest-first traversal (k-center greedy). The first pick is one seeded
// uniform draw (the same draw sample_random makes first); every later pick is
// the unselected row whose nearest selected row is farthest, lowest index on ties.
// `first_index` overrides the seeded first pick.
inline SampleOrder sample_faft(const FeatureMatrix& features, std::size_t budget, std::uint64_t seed, Metric metric,
                               std::optional<std::size_t> first_index = std::nullopt) {
    const std::size_t n = features.n_samples;
    if (budget == 0 || budget > n)
        fail(ErrorKind::BudgetExceedsPopulation, "budget " + std::to_string(budget) + " not in [1, " + std::to_string(n) + "]");
    if (first_index && *first_index >= n)
        fail(ErrorKind::InvalidArgument, "first index " + std::to_string(*first_index) + " out of range");

    Rng rng(seed);
    const std::size_t drawn = static_cast<std::size_t>(rng.uniform_index(n));
    const std::size_t first = first_index.value_or(drawn);

    SampleOrder out{Method::FAFT, {first}, seed, metric, {std::numeric_limits<double>::infinity()}};
    out.order.reserve(budget);
    out.radii.reserve(budget);
    if (budget == 1) return out;

    const detail::RowDistance dist(features, metric);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<bool> selected(n, false);
    selected[first] = true;
    std::size_t last = first;

    for (std::size_t t = 1; t < budget; ++t) {
        std::size_t best = n;
        double best_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (selected[i]) continue;
            const double d = dist(i, last);
            if (d < nearest[i]) nearest[i] = d;
            if (nearest[i] > best_d) {
                best_d = nearest[i];
                best = i;
            }
        }
        selected[best] = true;
        out.order.push_back(best);
        out.radii.push_back(best_d);
        last = best;
    }
    return out;
}

} // namespace annolab
