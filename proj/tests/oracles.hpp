#pragma once

// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks: brute force where the library is
// incremental, Jacobi rotations where the library uses Eigen, and so on.

#include <annolab/dataset.hpp>
#include <annolab/distance.hpp>
#include <annolab/random.hpp>
#include <annolab/synthetic.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

namespace oracle {

using annolab::FeatureMatrix;
using annolab::Metric;

inline FeatureMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
    annolab::Rng rng(seed);
    std::vector<float> v(n * d);
    for (auto& x : v) x = static_cast<float>(scale * rng.normal());
    return FeatureMatrix(n, d, std::move(v));
}

inline double dist(const FeatureMatrix& m, Metric metric, std::size_t i, std::size_t j) {
    return annolab::distance(metric, m.row(i), m.row(j));
}

// Farthest-first order recomputed from scratch at every step: all pairwise
// minima to the chosen set, argmax, lowest index on ties.
inline std::vector<std::size_t> faft(const FeatureMatrix& m, std::size_t budget, std::size_t first, Metric metric,
                                     std::vector<double>* radii = nullptr) {
    std::vector<std::size_t> chosen{first};
    if (radii) radii->assign(1, std::numeric_limits<double>::infinity());
    while (chosen.size() < budget) {
        std::size_t best = m.n_samples;
        double best_d = -1.0;
        for (std::size_t i = 0; i < m.n_samples; ++i) {
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
            double mind = std::numeric_limits<double>::infinity();
            for (auto c : chosen) mind = std::min(mind, dist(m, metric, i, c));
            if (mind > best_d) {
                best_d = mind;
                best = i;
            }
        }
        chosen.push_back(best);
        if (radii) radii->push_back(best_d);
    }
    return chosen;
}

// max over points of the distance to the nearest center
inline double covering_radius(const FeatureMatrix& m, Metric metric, const std::vector<std::size_t>& centers) {
    double r = 0.0;
    for (std::size_t i = 0; i < m.n_samples; ++i) {
        double mind = std::numeric_limits<double>::infinity();
        for (auto c : centers) mind = std::min(mind, dist(m, metric, i, c));
        r = std::max(r, mind);
    }
    return r;
}

// Optimal k-center radius by enumerating every k-subset.
inline double optimal_k_center(const FeatureMatrix& m, Metric metric, std::size_t k) {
    const std::size_t n = m.n_samples;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    double best = std::numeric_limits<double>::infinity();
    do {
        std::vector<std::size_t> c;
        for (std::size_t i = 0; i < n; ++i)
            if (pick[i]) c.push_back(i);
        best = std::min(best, covering_radius(m, metric, c));
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

// Cyclic Jacobi eigenvalue iteration for a symmetric matrix (row-major d*d).
// Returns eigenvalues descending and eigenvectors as columns of `vectors`.
inline std::vector<double> jacobi_eigen(std::vector<double> a, std::size_t d, std::vector<double>* vectors = nullptr) {
    std::vector<double> v(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a[p * d + q];
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = a[k * d + p], akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = a[p * d + k], aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v[k * d + p], vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> idx(d);
    for (std::size_t i = 0; i < d; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return a[x * d + x] > a[y * d + y]; });
    std::vector<double> vals;
    for (auto i : idx) vals.push_back(a[i * d + i]);
    if (vectors) {
        vectors->assign(d * d, 0.0);
        for (std::size_t c = 0; c < d; ++c)
            for (std::size_t r = 0; r < d; ++r) (*vectors)[r * d + c] = v[r * d + idx[c]];
    }
    return vals;
}

// Population covariance, accumulated in long double.
inline std::vector<double> covariance(const FeatureMatrix& m) {
    const std::size_t n = m.n_samples, d = m.n_dims;
    std::vector<long double> mean(d, 0.0L);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += m(i, j);
    for (auto& x : mean) x /= static_cast<long double>(n);
    std::vector<double> c(d * d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            long double s = 0.0L;
            for (std::size_t i = 0; i < n; ++i) s += (m(i, a) - mean[a]) * (m(i, b) - mean[b]);
            c[a * d + b] = static_cast<double>(s / static_cast<long double>(n));
        }
    return c;
}

// t-SNE objective written out directly from the Student-t kernel.
inline double tsne_kl(const std::vector<double>& p, const std::vector<double>& y) {
    const std::size_t n = y.size() / 2;
    long double z = 0.0L;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) {
                const long double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
                z += 1.0L / (1.0L + dx * dx + dy * dy);
            }
    long double kl = 0.0L;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double pij = p[i * n + j];
            if (i == j || pij <= 0.0) continue;
            const long double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            const long double q = 1.0L / (1.0L + dx * dx + dy * dy) / z;
            kl += pij * std::log(pij / q);
        }
    return static_cast<double>(kl);
}

inline std::vector<double> central_difference(const std::vector<double>& p, std::vector<double> y, double h = 1e-5) {
    std::vector<double> g(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double y0 = y[k];
        y[k] = y0 + h;
        const double fp = tsne_kl(p, y);
        y[k] = y0 - h;
        const double fm = tsne_kl(p, y);
        y[k] = y0;
        g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Hellinger distance through the Bhattacharyya coefficient: H^2 = 1 - sum sqrt(p q).
inline double hellinger_bc(const std::vector<double>& p, const std::vector<double>& q) {
    double bc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) bc += std::sqrt(p[i] * q[i]);
    return std::sqrt(std::max(0.0, 1.0 - bc));
}

// k-NN by fully sorting every training row; majority vote, ties to the class
// listed first in `class_order`.
inline std::vector<std::string> knn(const FeatureMatrix& m, const std::vector<std::size_t>& train,
                                    const std::vector<std::string>& labels, const std::vector<std::size_t>& test,
                                    std::size_t k, Metric metric, const std::vector<std::string>& class_order) {
    std::vector<std::string> out;
    k = std::min(k, train.size());
    for (auto t : test) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t r = 0; r < train.size(); ++r) d.push_back({dist(m, metric, t, train[r]), r});
        std::sort(d.begin(), d.end(), [&](const auto& a, const auto& b) {
            return a.first != b.first ? a.first < b.first : train[a.second] < train[b.second];
        });
        std::map<std::string, int> votes;
        for (std::size_t i = 0; i < k; ++i) ++votes[labels[d[i].second]];
        std::string best;
        int best_v = -1;
        for (const auto& c : class_order)
            if (votes[c] > best_v) {
                best_v = votes[c];
                best = c;
            }
        out.push_back(best);
    }
    return out;
}

// Unique scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    static int counter = 0;
    auto p = std::filesystem::temp_directory_path() /
             ("annolab_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline annolab::Dataset small_dataset(std::size_t n = 60, std::size_t classes = 3, std::uint64_t seed = 3) {
    annolab::SyntheticSpec spec;
    spec.n_samples = n;
    spec.n_dims = 4;
    spec.n_classes = classes;
    spec.seed = seed;
    return annolab::make_synthetic_dataset(spec);
}

} // namespace oracle
