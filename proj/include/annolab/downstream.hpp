#pragma once

#include <annolab/dataset.hpp>
#include <annolab/distance.hpp>
#include <annolab/error.hpp>
#include <annolab/label_analysis.hpp>
#include <annolab/projection.hpp>
#include <annolab/sampling.hpp>
#include <annolab/session.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace annolab {

// Majority class among the k nearest training rows for every test row. Rows are
// global indices into `features`. Neighbors tied at the k-th distance go to the
// lower global index; tied votes go to the class listed first in `class_order`.
inline std::vector<std::string> knn_classify(const FeatureMatrix& features, const std::vector<std::size_t>& train_rows,
                                             const std::vector<std::string>& train_labels,
                                             const std::vector<std::size_t>& test_rows, std::size_t k, Metric metric,
                                             const std::vector<std::string>& class_order) {
    if (train_rows.empty()) fail(ErrorKind::EmptyTrainingSet, "no training samples");
    if (train_rows.size() != train_labels.size())
        fail(ErrorKind::LengthMismatch, std::to_string(train_rows.size()) + " training rows, " +
                                            std::to_string(train_labels.size()) + " labels");
    if (k == 0) fail(ErrorKind::InvalidArgument, "k must be at least 1");
    for (auto r : train_rows)
        if (r >= features.n_samples) fail(ErrorKind::UnknownSample, "training row " + std::to_string(r) + " out of range");
    for (auto r : test_rows)
        if (r >= features.n_samples) fail(ErrorKind::UnknownSample, "test row " + std::to_string(r) + " out of range");
    k = std::min(k, train_rows.size());

    std::vector<std::size_t> train_class(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        const auto it = std::find(class_order.begin(), class_order.end(), train_labels[i]);
        if (it == class_order.end()) fail(ErrorKind::UnknownClass, "training label '" + train_labels[i] + "' not in class order");
        train_class[i] = static_cast<std::size_t>(it - class_order.begin());
    }

    const detail::RowDistance dist(features, metric);
    std::vector<std::string> out(test_rows.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<double, std::size_t>> cand(train_rows.size());  // (distance, position in train)
        std::vector<std::size_t> votes(class_order.size());
        for (std::size_t t = begin; t < end; ++t) {
            for (std::size_t i = 0; i < train_rows.size(); ++i) cand[i] = {dist(test_rows[t], train_rows[i]), i};
            auto closer = [&](const auto& a, const auto& b) {
                return a.first != b.first ? a.first < b.first : train_rows[a.second] < train_rows[b.second];
            };
            std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end(), closer);
            std::fill(votes.begin(), votes.end(), 0);
            // nth_element leaves the k smallest (under `closer`) in the first k slots.
            for (std::size_t j = 0; j < k; ++j) ++votes[train_class[cand[j].second]];
            const auto best = std::max_element(votes.begin(), votes.end());  // first maximum = scheme order
            out[t] = class_order[static_cast<std::size_t>(best - votes.begin())];
        }
    };

    const std::size_t n_threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
    const std::size_t work_units = test_rows.size() * train_rows.size();
    if (n_threads == 1 || work_units < 200000) {
        work(0, test_rows.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (test_rows.size() + n_threads - 1) / n_threads;
        for (std::size_t b = 0; b < test_rows.size(); b += chunk) pool.emplace_back(work, b, std::min(b + chunk, test_rows.size()));
    }
    return out;
}

// Unweighted average recall over the classes present in `truth`.
inline double uar(const std::vector<std::string>& predictions, const std::vector<std::string>& truth) {
    if (truth.empty()) fail(ErrorKind::EmptyTestSet, "no test samples");
    if (predictions.size() != truth.size())
        fail(ErrorKind::LengthMismatch, std::to_string(predictions.size()) + " predictions for " + std::to_string(truth.size()) + " samples");
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_class;  // class -> (hits, total)
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& c = per_class[truth[i]];
        ++c.second;
        if (predictions[i] == truth[i]) ++c.first;
    }
    double sum = 0.0;
    for (const auto& [cls, c] : per_class) sum += static_cast<double>(c.first) / static_cast<double>(c.second);
    return sum / static_cast<double>(per_class.size());
}

inline std::vector<std::size_t> default_checkpoints(std::size_t budget) {
    std::vector<std::size_t> out;
    for (std::size_t n = 50; n <= 300 && n <= budget; n += 50) out.push_back(n);
    if (out.empty() || out.back() != budget) out.push_back(budget);
    return out;
}

struct EvalProtocol {
    std::vector<std::size_t> checkpoints = {50, 100, 150, 200, 250, 300};
    std::size_t n_repeats = 10;
    std::size_t k = 5;
    Metric metric = Metric::Cosine;
    // Empty: every ground-truth sample that no annotator labeled.
    std::optional<std::vector<std::size_t>> test_indices;
    std::uint64_t seed = 0;  // base seed for merge tie-breaks; repeat r uses seed + r
    // Also assert train/test disjointness for an explicit test list.
    bool require_disjoint = false;

    void validate() const {
        if (checkpoints.empty()) fail(ErrorKind::InvalidArgument, "no checkpoints");
        for (std::size_t i = 0; i < checkpoints.size(); ++i) {
            if (checkpoints[i] == 0) fail(ErrorKind::InvalidArgument, "checkpoint 0");
            if (i && checkpoints[i] <= checkpoints[i - 1]) fail(ErrorKind::InvalidArgument, "checkpoints must be strictly increasing");
        }
        if (n_repeats == 0) fail(ErrorKind::InvalidArgument, "n_repeats must be at least 1");
        if (k == 0) fail(ErrorKind::InvalidArgument, "k must be at least 1");
    }
};

struct CurvePoint {
    std::size_t n_labels = 0;
    double mean = 0.0;
    std::vector<double> scores;  // one per repeat
    std::size_t train_size = 0;  // merged training set size of the first repeat
};

struct LearningCurve {
    std::string label;
    std::vector<CurvePoint> points;
};

struct EvalContext {
    std::vector<std::size_t> test;
    std::vector<std::string> test_truth;
    std::vector<std::string> class_order;
};

namespace detail {

inline EvalContext make_eval_context(const std::vector<AnnotatorLabels>& annotators, const Dataset& dataset,
                                     const std::string& track, const EvalProtocol& protocol,
                                     const std::optional<ClassRemap>& remap) {
    const auto truth = dataset.truth_by_index(track);
    auto mapped = [&](const std::string& cls) -> std::string {
        if (!remap) return cls;
        const auto it = remap->mapping.find(cls);
        if (it == remap->mapping.end()) fail(ErrorKind::UnmappedClass, "ground-truth class '" + cls + "' has no mapping");
        return it->second;
    };

    EvalContext ctx;
    ctx.class_order = remap ? remap->target.class_ids() : dataset.scheme(track).class_ids();
    if (protocol.test_indices) {
        for (auto idx : *protocol.test_indices) {
            if (idx >= truth.size()) fail(ErrorKind::UnknownSample, "test index " + std::to_string(idx) + " out of range");
            if (!truth[idx]) fail(ErrorKind::MissingGroundTruth, "test sample " + dataset.samples[idx].sample_id + " has no ground truth");
            ctx.test.push_back(idx);
        }
    } else {
        std::vector<bool> annotated(truth.size(), false);
        for (const auto& a : annotators)
            for (const auto& [idx, v] : a.ordered) annotated.at(idx) = true;
        for (std::size_t i = 0; i < truth.size(); ++i)
            if (truth[i] && !annotated[i]) ctx.test.push_back(i);
    }
    if (ctx.test.empty()) fail(ErrorKind::EmptyTestSet, "no test samples for track '" + track + "'");
    for (auto idx : ctx.test) ctx.test_truth.push_back(mapped(*truth[idx]));
    return ctx;
}

} // namespace detail

// Trains on the first n labels of every annotator (merged by majority vote when
// there are several) for each checkpoint n and scores UAR on the test set.
// Repeats differ only in the merge tie-break seed.
inline LearningCurve learning_curve(const std::vector<AnnotatorLabels>& annotators, const Dataset& dataset,
                                    const std::string& track, const EvalProtocol& protocol,
                                    const std::optional<ClassRemap>& remap = std::nullopt) {
    protocol.validate();
    if (annotators.empty()) fail(ErrorKind::EmptyTrainingSet, "no annotators");
    for (const auto& a : annotators)
        if (protocol.checkpoints.back() > a.ordered.size())
            fail(ErrorKind::CheckpointExceedsLabels, "checkpoint " + std::to_string(protocol.checkpoints.back()) + " exceeds the " +
                                                         std::to_string(a.ordered.size()) + " labels of annotator '" + a.annotator_id + "'");
    if (remap) remap->validate();
    const auto ctx = detail::make_eval_context(annotators, dataset, track, protocol, remap);
    const bool held_out = !protocol.test_indices || protocol.require_disjoint;
    const std::set<std::size_t> test_set(ctx.test.begin(), ctx.test.end());

    LearningCurve curve;
    for (std::size_t n : protocol.checkpoints) {
        std::vector<LabelMap> firsts;
        for (const auto& a : annotators) {
            auto m = to_label_map(a, n);
            firsts.push_back(remap ? remap_labels(m, *remap) : std::move(m));
        }
        CurvePoint pt{n, 0.0, {}, 0};
        LabelMap previous;
        double previous_score = 0.0;
        for (std::size_t r = 0; r < protocol.n_repeats; ++r) {
            const LabelMap merged = merge_majority(firsts, protocol.seed + r);
            if (r == 0) pt.train_size = merged.size();
            if (r > 0 && merged == previous) {
                pt.scores.push_back(previous_score);
                continue;
            }
            std::vector<std::size_t> rows;
            std::vector<std::string> labels;
            for (const auto& [idx, v] : merged) {
                if (held_out && test_set.count(idx))
                    fail(ErrorKind::InvalidArgument, "training sample " + dataset.samples[idx].sample_id + " is in the held-out test set");
                rows.push_back(idx);
                labels.push_back(v.class_id);
            }
            const auto pred = knn_classify(dataset.features, rows, labels, ctx.test, protocol.k, protocol.metric, ctx.class_order);
            previous_score = uar(pred, ctx.test_truth);
            previous = merged;
            pt.scores.push_back(previous_score);
        }
        for (double s : pt.scores) pt.mean += s;
        pt.mean /= static_cast<double>(pt.scores.size());
        curve.points.push_back(std::move(pt));
    }
    return curve;
}

// Point-wise average of curves over the same checkpoints (separate-annotator scenario).
inline LearningCurve mean_curve(const std::vector<LearningCurve>& curves, std::string label = {}) {
    if (curves.empty()) fail(ErrorKind::EmptyInput, "no curves to average");
    LearningCurve out{std::move(label), curves.front().points};
    for (std::size_t c = 1; c < curves.size(); ++c) {
        if (curves[c].points.size() != out.points.size()) fail(ErrorKind::LengthMismatch, "curves have different checkpoints");
        for (std::size_t i = 0; i < out.points.size(); ++i) {
            const auto& p = curves[c].points[i];
            if (p.n_labels != out.points[i].n_labels || p.scores.size() != out.points[i].scores.size())
                fail(ErrorKind::LengthMismatch, "curves have different checkpoints");
            out.points[i].mean += p.mean;
            out.points[i].train_size += p.train_size;
            for (std::size_t r = 0; r < p.scores.size(); ++r) out.points[i].scores[r] += p.scores[r];
        }
    }
    const double n = static_cast<double>(curves.size());
    for (auto& p : out.points) {
        p.mean /= n;
        p.train_size = static_cast<std::size_t>(std::llround(static_cast<double>(p.train_size) / n));
        for (auto& s : p.scores) s /= n;
    }
    return out;
}

struct RegionBias {
    std::shared_ptr<const Projection2D> projection;
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
};

struct SimulationSpec {
    SessionConfig session;
    double noise_rate = 0.0;
    std::optional<RegionBias> region_bias;  // 2DV only
    std::int64_t start_ms = 0;              // synthetic clock: label k is stamped start_ms + k * step_ms
    std::int64_t step_ms = 1000;
};

namespace detail {

inline std::size_t pick_2dv(AnnotationSession& s, const std::optional<RegionBias>& bias) {
    const std::size_t n = s.n_total();
    auto unlabeled = [&](std::size_t i) { return !s.labels.count(i); };
    if (!bias) {
        std::uint64_t j = s.rng.uniform_index(n - s.labeled_count());
        for (std::size_t i = 0; i < n; ++i)
            if (unlabeled(i) && j-- == 0) return i;
        fail(ErrorKind::InvalidArgument, "no unlabeled sample left");
    }
    const auto& p = *bias->projection;
    std::vector<std::size_t> inside;
    std::size_t nearest = n;
    double nearest_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (!unlabeled(i)) continue;
        const double d = std::hypot(p.x(i) - bias->cx, p.y(i) - bias->cy);
        if (d <= bias->radius) inside.push_back(i);
        if (d < nearest_d) {
            nearest_d = d;
            nearest = i;
        }
    }
    if (!inside.empty()) return inside[s.rng.uniform_index(inside.size())];
    if (nearest == n) fail(ErrorKind::InvalidArgument, "no unlabeled sample left");
    return nearest;
}

} // namespace detail

// Runs a session to its budget with a simulated annotator that answers with the
// ground truth, replaced with probability noise_rate by a uniformly drawn other
// class. RND/FAFT follow their order. 2DV picks uniformly among unlabeled samples,
// or, under a region bias, uniformly among unlabeled samples within the radius
// of the center in the given projection and the nearest one once those run out.
// All draws come from the session generator, so runs are reproducible per seed.
inline AnnotationSession simulate_annotation(const Dataset& dataset, const SimulationSpec& spec) {
    if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0) fail(ErrorKind::InvalidArgument, "noise rate must be in [0, 1]");
    const auto truth = dataset.truth_by_index(spec.session.track);
    if (spec.region_bias) {
        if (spec.session.method != Method::TwoDV) fail(ErrorKind::InvalidArgument, "region bias applies to 2DV only");
        if (!spec.region_bias->projection || spec.region_bias->projection->size() != dataset.size())
            fail(ErrorKind::ShapeMismatch, "region-bias projection does not cover the dataset");
    }
    AnnotationSession s = create_session(dataset, spec.session);
    const auto classes = s.scheme.class_ids();
    std::int64_t t = spec.start_ms;

    while (s.status == SessionStatus::Active) {
        std::size_t idx;
        if (s.config.method == Method::TwoDV) {
            idx = detail::pick_2dv(s, spec.region_bias);
            navigate(s, Select{idx});
        } else {
            idx = *s.frontier();
        }
        LabelValue value;
        if (!truth[idx]) {
            if (!s.scheme.allows_erroneous)
                fail(ErrorKind::MissingGroundTruth, "sample " + dataset.samples[idx].sample_id + " has no ground truth");
            value = LabelValue::erroneous_sample();
        } else if (s.rng.bernoulli(spec.noise_rate)) {
            const std::size_t true_pos = *s.scheme.index_of(*truth[idx]);
            std::size_t j = static_cast<std::size_t>(s.rng.uniform_index(classes.size() - 1));
            if (j >= true_pos) ++j;
            value = LabelValue::of(classes[j]);
        } else {
            value = LabelValue::of(*truth[idx]);
        }
        assign_label(s, idx, value, t);
        t += spec.step_ms;
    }
    return s;
}

} // namespace annolab
