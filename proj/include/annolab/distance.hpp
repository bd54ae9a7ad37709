#pragma once

#include <annolab/error.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace annolab {

enum class Metric { Cosine, Euclidean };

inline std::string_view to_string(Metric m) { return m == Metric::Cosine ? "cosine" : "euclidean"; }

inline std::optional<Metric> parse_metric(std::string_view s) {
    if (s == "cosine") return Metric::Cosine;
    if (s == "euclidean") return Metric::Euclidean;
    return std::nullopt;
}

template <typename T, typename U>
double cosine_distance(std::span<const T> u, std::span<const U> v) {
    if (u.size() != v.size())
        fail(ErrorKind::LengthMismatch, "vectors of length " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = u[i], b = v[i];
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    // A zero vector has no direction; treat it as maximally dissimilar.
    if (nu == 0.0 || nv == 0.0) return 1.0;
    return std::clamp(1.0 - dot / (std::sqrt(nu) * std::sqrt(nv)), 0.0, 2.0);
}

template <typename T, typename U>
double euclidean_distance(std::span<const T> u, std::span<const U> v) {
    if (u.size() != v.size())
        fail(ErrorKind::LengthMismatch, "vectors of length " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = static_cast<double>(u[i]) - static_cast<double>(v[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

template <typename T, typename U>
double distance(Metric m, std::span<const T> u, std::span<const U> v) {
    return m == Metric::Cosine ? cosine_distance(u, v) : euclidean_distance(u, v);
}

inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
    return cosine_distance<double, double>(u, v);
}

} // namespace annolab
