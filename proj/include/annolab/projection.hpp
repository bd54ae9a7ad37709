#pragma once

#include <annolab/error.hpp>
#include <annolab/matrix.hpp>
#include <annolab/random.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

namespace annolab {

struct TsneConfig {
    double perplexity = 30.0;
    int n_iterations = 1000;
    double early_exaggeration = 12.0;
    int exaggeration_iterations = 250;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iteration = 250;
    std::uint64_t seed = 0;
    // Test harness mode: momentum forced to 0 and, once exaggeration is off,
    // each step is halved until the KL divergence does not increase.
    bool line_search = false;

    bool operator==(const TsneConfig&) const = default;

    void validate(std::size_t n) const {
        auto bad = [](const std::string& m) { fail(ErrorKind::InvalidArgument, m); };
        if (!(perplexity > 0.0)) bad("perplexity must be positive");
        if (!(perplexity < static_cast<double>(n) / 3.0))
            bad("perplexity " + std::to_string(perplexity) + " must be below N/3 = " + std::to_string(n / 3.0));
        if (n_iterations <= 0) bad("n_iterations must be positive");
        if (!(early_exaggeration > 0.0)) bad("early_exaggeration must be positive");
        if (exaggeration_iterations < 0) bad("exaggeration_iterations must be nonnegative");
        if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
        for (double m : {initial_momentum, final_momentum})
            if (!(m >= 0.0 && m < 1.0)) bad("momentum must lie in [0, 1)");
    }
};

struct ComputedPca {
    bool operator==(const ComputedPca&) const = default;
};
struct ComputedTsne {
    TsneConfig config;
    bool operator==(const ComputedTsne&) const = default;
};
struct Imported {
    std::filesystem::path source;
    bool operator==(const Imported&) const = default;
};
using Provenance = std::variant<ComputedPca, ComputedTsne, Imported>;

inline std::string provenance_label(const Provenance& p) {
    if (std::holds_alternative<ComputedPca>(p)) return "pca";
    if (std::holds_alternative<ComputedTsne>(p)) return "tsne";
    return "imported";
}

// Named 2D embedding; coords is row-major N x 2, row i <-> global index i.
struct Projection2D {
    std::string name;
    std::vector<double> coords;
    Provenance provenance;

    std::size_t size() const { return coords.size() / 2; }
    double x(std::size_t i) const { return coords[2 * i]; }
    double y(std::size_t i) const { return coords[2 * i + 1]; }

    FeatureMatrix as_matrix() const {
        std::vector<float> v(coords.begin(), coords.end());
        return FeatureMatrix(size(), 2, std::move(v));
    }

    bool operator==(const Projection2D&) const = default;
};

// ---------------------------------------------------------------------------
// PCA

struct PcaResult {
    Projection2D projection;
    std::array<std::vector<double>, 2> components;  // unit loadings, length D
    std::array<double, 2> explained_variance{};     // covariance eigenvalues
    double total_variance = 0.0;                    // trace of the covariance
};

inline PcaResult compute_pca_full(const FeatureMatrix& m, std::string name = "pca") {
    const std::size_t n = m.n_samples, d = m.n_dims;
    if (n < 2 || d < 2)
        fail(ErrorKind::DegenerateInput, "PCA needs N >= 2 and D >= 2, got " + std::to_string(n) + "x" + std::to_string(d));

    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = m(i, j);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    // Population covariance (divide by N).
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) fail(ErrorKind::DegenerateInput, "covariance eigendecomposition failed");

    PcaResult out;
    out.total_variance = cov.trace();
    Eigen::MatrixXd basis(d, 2);
    for (int c = 0; c < 2; ++c) {
        // Eigenvalues come back ascending.
        const Eigen::Index col = static_cast<Eigen::Index>(d) - 1 - c;
        Eigen::VectorXd v = eig.eigenvectors().col(col);
        Eigen::Index arg = 0;
        for (Eigen::Index k = 1; k < v.size(); ++k)
            if (std::abs(v(k)) > std::abs(v(arg))) arg = k;
        if (v(arg) < 0) v = -v;
        basis.col(c) = v;
        out.explained_variance[c] = std::max(0.0, eig.eigenvalues()(col));
        out.components[c].assign(v.data(), v.data() + v.size());
    }

    const Eigen::MatrixXd y = x * basis;
    out.projection.name = std::move(name);
    out.projection.provenance = ComputedPca{};
    out.projection.coords.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        out.projection.coords[2 * i] = y(i, 0);
        out.projection.coords[2 * i + 1] = y(i, 1);
    }
    return out;
}

inline Projection2D compute_pca(const FeatureMatrix& m) { return compute_pca_full(m).projection; }

// ---------------------------------------------------------------------------
// t-SNE (exact, O(N^2))

namespace tsne {

// Pairwise squared Euclidean distances, N x N row-major.
inline std::vector<double> squared_distances(const FeatureMatrix& m) {
    const std::size_t n = m.n_samples;
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = m.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto b = m.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) {
                const double t = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                s += t * t;
            }
            d[i * n + j] = d[j * n + i] = s;
        }
    }
    return d;
}

struct Calibration {
    std::vector<double> conditional;  // row i holds p_{j|i}, p_{i|i} = 0
    std::vector<double> sigma;        // Gaussian bandwidth per point
    std::vector<double> perplexity;   // achieved 2^H per point
};

inline constexpr double perplexity_tolerance = 1e-5;
inline constexpr int max_calibration_steps = 100;

// Per-point binary search on the Gaussian precision so that each conditional
// distribution has perplexity 2^H equal to the target within tolerance.
inline Calibration calibrate(const std::vector<double>& sq_dist, std::size_t n, double target_perplexity) {
    Calibration cal;
    cal.conditional.assign(n * n, 0.0);
    cal.sigma.resize(n);
    cal.perplexity.resize(n);
    const double target_h = std::log(target_perplexity);  // nats

    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &sq_dist[i * n];
        double d_min = std::numeric_limits<double>::infinity(), d_sum = 0.0;
        std::size_t nonzero = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            d_min = std::min(d_min, row[j]);
            if (row[j] > 0) {
                d_sum += row[j];
                ++nonzero;
            }
        }
        double beta = nonzero ? static_cast<double>(nonzero) / d_sum : 1.0;
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        bool converged = false;
        double perp = 0.0;
        for (int step = 0; step < max_calibration_steps; ++step) {
            // Shift by the nearest distance so the largest weight is exp(0).
            double sum = 0.0, weighted = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    p[j] = 0.0;
                    continue;
                }
                const double shifted = row[j] - d_min;
                p[j] = std::exp(-beta * shifted);
                sum += p[j];
                weighted += shifted * p[j];
            }
            const double h = std::log(sum) + beta * weighted / sum;
            perp = std::exp(h);
            if (std::abs(perp - target_perplexity) <= perplexity_tolerance) {
                for (std::size_t j = 0; j < n; ++j) p[j] /= sum;
                converged = true;
                break;
            }
            if (h > target_h) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        if (!converged)
            fail(ErrorKind::CalibrationFailure, "perplexity search did not converge for point " + std::to_string(i) +
                                                    " (reached " + std::to_string(perp) + ")");
        std::copy(p.begin(), p.end(), cal.conditional.begin() + static_cast<std::ptrdiff_t>(i * n));
        cal.sigma[i] = std::sqrt(1.0 / (2.0 * beta));
        cal.perplexity[i] = perp;
    }
    return cal;
}

// p_ij = (p_{j|i} + p_{i|j}) / 2N
inline std::vector<double> joint_affinities(const std::vector<double>& conditional, std::size_t n) {
    std::vector<double> p(n * n, 0.0);
    const double denom = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) p[i * n + j] = p[j * n + i] = (conditional[i * n + j] + conditional[j * n + i]) / denom;
    return p;
}

inline std::vector<double> affinities(const FeatureMatrix& m, double perplexity) {
    const auto d = squared_distances(m);
    return joint_affinities(calibrate(d, m.n_samples, perplexity).conditional, m.n_samples);
}

// KL(P || Q) with Student-t (1 d.o.f.) low-dimensional kernel; y is N x 2.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& y) {
    const std::size_t n = y.size() / 2;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            z += 1.0 / (1.0 + dx * dx + dy * dy);
        }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double pij = p[i * n + j];
            if (i == j || pij <= 0.0) continue;
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            const double q = 1.0 / (1.0 + dx * dx + dy * dy) / z;
            kl += pij * std::log(pij / q);
        }
    return kl;
}

// dC/dy_i = 4 sum_j (a p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2), a = exaggeration.
inline std::vector<double> gradient(const std::vector<double>& p, const std::vector<double>& y, double exaggeration = 1.0) {
    const std::size_t n = y.size() / 2;
    std::vector<double> w(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            const double v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[i * n + j] = w[j * n + i] = v;
            z += 2.0 * v;
        }
    std::vector<double> g(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double gx = 0.0, gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double wij = w[i * n + j];
            const double coeff = (exaggeration * p[i * n + j] - wij / z) * wij;
            gx += coeff * (y[2 * i] - y[2 * j]);
            gy += coeff * (y[2 * i + 1] - y[2 * j + 1]);
        }
        g[2 * i] = 4.0 * gx;
        g[2 * i + 1] = 4.0 * gy;
    }
    return g;
}

struct Hooks {
    std::function<void(double)> on_progress;  // fraction in [0, 1]
    std::stop_token stop;
    std::vector<double>* kl_trace = nullptr;  // true KL after every iteration
};

inline std::vector<double> initial_embedding(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> y(2 * n);
    for (auto& v : y) v = 1e-4 * rng.normal();
    return y;
}

inline std::vector<double> optimize(const std::vector<double>& p, std::vector<double> y, const TsneConfig& cfg,
                                    const Hooks& hooks = {}) {
    const std::size_t n = y.size() / 2;
    std::vector<double> velocity(2 * n, 0.0);
    for (int it = 0; it < cfg.n_iterations; ++it) {
        if (hooks.stop.stop_requested()) fail(ErrorKind::Cancelled, "t-SNE cancelled at iteration " + std::to_string(it));
        const bool exaggerating = it < cfg.exaggeration_iterations;
        const double exaggeration = exaggerating ? cfg.early_exaggeration : 1.0;
        const auto g = gradient(p, y, exaggeration);

        if (cfg.line_search && !exaggerating) {
            const double kl0 = kl_divergence(p, y);
            double step = cfg.learning_rate;
            std::vector<double> trial(2 * n);
            for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
                for (std::size_t k = 0; k < 2 * n; ++k) trial[k] = y[k] - step * g[k];
                if (kl_divergence(p, trial) <= kl0) break;
                if (halving == 59) trial = y;
            }
            y.swap(trial);
        } else {
            const double momentum = cfg.line_search ? 0.0
                                    : it < cfg.momentum_switch_iteration ? cfg.initial_momentum
                                                                         : cfg.final_momentum;
            for (std::size_t k = 0; k < 2 * n; ++k) {
                velocity[k] = momentum * velocity[k] - cfg.learning_rate * g[k];
                y[k] += velocity[k];
            }
        }

        // KL is translation invariant; keep the embedding centred.
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y[2 * i];
            my += y[2 * i + 1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[2 * i] -= mx;
            y[2 * i + 1] -= my;
        }

        if (hooks.kl_trace) hooks.kl_trace->push_back(kl_divergence(p, y));
        if (hooks.on_progress) hooks.on_progress(static_cast<double>(it + 1) / cfg.n_iterations);
    }
    return y;
}

} // namespace tsne

inline Projection2D compute_tsne(const FeatureMatrix& m, const TsneConfig& cfg, const tsne::Hooks& hooks = {},
                                 std::string name = "tsne") {
    if (m.n_samples < 4) fail(ErrorKind::DegenerateInput, "t-SNE needs at least 4 points");
    cfg.validate(m.n_samples);
    const auto p = tsne::affinities(m, cfg.perplexity);
    auto y = tsne::optimize(p, tsne::initial_embedding(m.n_samples, cfg.seed), cfg, hooks);
    for (double v : y)
        if (!std::isfinite(v)) fail(ErrorKind::NonFiniteCoordinate, "t-SNE diverged; lower the learning rate");
    return {std::move(name), std::move(y), ComputedTsne{cfg}};
}

// ---------------------------------------------------------------------------
// Import / export

inline Projection2D load_projection(const std::string& name, const std::filesystem::path& path, std::size_t n_expected) {
    const FeatureMatrix m = matrix_format::read(path);
    if (m.n_dims != 2 || m.n_samples != n_expected)
        fail(ErrorKind::ShapeMismatch, path.string() + " holds " + std::to_string(m.n_samples) + "x" +
                                           std::to_string(m.n_dims) + ", expected " + std::to_string(n_expected) + "x2");
    Projection2D p{name, {}, Imported{path}};
    p.coords.reserve(2 * n_expected);
    for (std::size_t i = 0; i < m.n_samples; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const float v = m(i, j);
            if (!std::isfinite(v))
                fail(ErrorKind::NonFiniteCoordinate, "non-finite coordinate at row " + std::to_string(i) + ", column " +
                                                         std::to_string(j) + " of " + path.string());
            p.coords.push_back(v);
        }
    return p;
}

inline void save_projection(const std::filesystem::path& path, const Projection2D& p) {
    matrix_format::write(path, p.as_matrix());
}

// Published projections are immutable and shared; writers are serialized.
class ProjectionRegistry {
public:
    std::shared_ptr<const Projection2D> add(Projection2D p) {
        std::unique_lock lock(mutex_);
        for (const auto& e : entries_)
            if (e->name == p.name) fail(ErrorKind::DuplicateName, "projection '" + p.name + "' already registered");
        auto ptr = std::make_shared<const Projection2D>(std::move(p));
        entries_.push_back(ptr);
        return ptr;
    }

    std::shared_ptr<const Projection2D> import(const std::string& name, const std::filesystem::path& path,
                                               std::size_t n_expected) {
        if (contains(name)) fail(ErrorKind::DuplicateName, "projection '" + name + "' already registered");
        return add(load_projection(name, path, n_expected));
    }

    std::shared_ptr<const Projection2D> get(const std::string& name) const {
        std::shared_lock lock(mutex_);
        for (const auto& e : entries_)
            if (e->name == name) return e;
        fail(ErrorKind::NotFound, "no projection named '" + name + "'");
    }

    bool contains(const std::string& name) const {
        std::shared_lock lock(mutex_);
        for (const auto& e : entries_)
            if (e->name == name) return true;
        return false;
    }

    std::vector<std::string> names() const {
        std::shared_lock lock(mutex_);
        std::vector<std::string> out;
        for (const auto& e : entries_) out.push_back(e->name);
        return out;
    }

private:
    mutable std::shared_mutex mutex_;
    std::vector<std::shared_ptr<const Projection2D>> entries_;
};

} // namespace annolab
