#include "oracles.hpp"

#include <annolab/downstream.hpp>
#include <annolab/pipeline.hpp>
#include <annolab/projection.hpp>

#include <gtest/gtest.h>

using namespace annolab;

namespace {

SimulationSpec sim(Method m, std::size_t budget, std::uint64_t seed, const std::string& annotator = "a1") {
    SimulationSpec s;
    s.session.track = "class";
    s.session.method = m;
    s.session.budget = budget;
    s.session.seed = seed;
    s.session.annotator_id = annotator;
    return s;
}

} // namespace

TEST(Knn, Examples) {
    const FeatureMatrix m(4, 2, {0, 0, 10, 0, 10, 1, 9, 0});
    const std::vector<std::string> order{"A", "B"};
    EXPECT_EQ(knn_classify(m, {0, 1, 2}, {"A", "B", "B"}, {3}, 3, Metric::Euclidean, order), (std::vector<std::string>{"B"}));
    EXPECT_EQ(knn_classify(m, {0, 1, 2}, {"A", "B", "B"}, {0}, 1, Metric::Euclidean, order), (std::vector<std::string>{"A"}));
    // k larger than the training set behaves as k = 3
    EXPECT_EQ(knn_classify(m, {0, 1, 2}, {"A", "B", "B"}, {3}, 50, Metric::Euclidean, order),
              knn_classify(m, {0, 1, 2}, {"A", "B", "B"}, {3}, 3, Metric::Euclidean, order));
}

TEST(Knn, VoteTieGoesToFirstClassInSchemeOrder) {
    const FeatureMatrix m(3, 1, {-1, 1, 0});
    EXPECT_EQ(knn_classify(m, {0, 1}, {"B", "A"}, {2}, 2, Metric::Euclidean, {"A", "B"}), (std::vector<std::string>{"A"}));
    EXPECT_EQ(knn_classify(m, {0, 1}, {"B", "A"}, {2}, 2, Metric::Euclidean, {"B", "A"}), (std::vector<std::string>{"B"}));
}

TEST(Knn, MatchesBruteForceOracle) {
    const auto m = oracle::random_matrix(400, 6, 31);
    Rng rng(2);
    const std::vector<std::string> order{"x", "y", "z"};
    std::vector<std::size_t> train, test;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < 400; ++i) {
        if (i % 3 == 0) {
            test.push_back(i);
        } else {
            train.push_back(i);
            labels.push_back(order[rng.uniform_index(3)]);
        }
    }
    for (auto metric : {Metric::Cosine, Metric::Euclidean})
        for (std::size_t k : {1, 4, 5, 9})
            EXPECT_EQ(knn_classify(m, train, labels, test, k, metric, order), oracle::knn(m, train, labels, test, k, metric, order));
}

TEST(Knn, ThreadedPathMatchesOracle) {
    // large enough to cross the threading threshold
    const auto m = oracle::random_matrix(1200, 4, 5);
    std::vector<std::size_t> train, test;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < 1200; ++i) {
        if (i < 600) {
            train.push_back(i);
            labels.push_back(m(i, 0) > 0 ? "p" : "n");
        } else {
            test.push_back(i);
        }
    }
    EXPECT_EQ(knn_classify(m, train, labels, test, 5, Metric::Euclidean, {"n", "p"}),
              oracle::knn(m, train, labels, test, 5, Metric::Euclidean, {"n", "p"}));
}

TEST(Knn, Errors) {
    const FeatureMatrix m(2, 1, {0, 1});
    EXPECT_THROW(knn_classify(m, {}, {}, {1}, 1, Metric::Euclidean, {"A"}), Error);
    EXPECT_THROW(knn_classify(m, {0}, {"A", "B"}, {1}, 1, Metric::Euclidean, {"A"}), Error);
}

TEST(Uar, Examples) {
    EXPECT_DOUBLE_EQ(uar({"A", "B", "C"}, {"A", "B", "C"}), 1.0);
    EXPECT_DOUBLE_EQ(uar({"A", "A", "A", "A"}, {"A", "A", "B", "B"}), 0.5);
    EXPECT_DOUBLE_EQ(uar({"A", "B", "B", "B"}, {"A", "A", "B", "B"}), 0.75);
    EXPECT_THROW(uar({}, {}), Error);
    EXPECT_THROW(uar({"A"}, {"A", "B"}), Error);
}

TEST(DefaultCheckpoints, Protocol) {
    EXPECT_EQ(default_checkpoints(360), (std::vector<std::size_t>{50, 100, 150, 200, 250, 300, 360}));
    EXPECT_EQ(default_checkpoints(120), (std::vector<std::size_t>{50, 100, 120}));
    EXPECT_EQ(default_checkpoints(30), (std::vector<std::size_t>{30}));
}

TEST(LearningCurve, TwoCheckpointsAndIdenticalRepeats) {
    SyntheticSpec spec;
    spec.n_samples = 600;
    spec.seed = 4;
    const auto ds = make_synthetic_dataset(spec);
    const auto s = simulate_annotation(ds, sim(Method::FAFT, 100, 1));
    EvalProtocol p;
    p.checkpoints = {50, 100};
    const auto c = learning_curve({annotator_labels(s)}, ds, "class", p);
    ASSERT_EQ(c.points.size(), 2u);
    for (const auto& pt : c.points) {
        ASSERT_EQ(pt.scores.size(), 10u);
        for (double v : pt.scores) EXPECT_EQ(v, pt.scores.front());
    }
    EXPECT_EQ(c.points[1].train_size, 100u);
    p.checkpoints = {50, 101};
    EXPECT_THROW(learning_curve({annotator_labels(s)}, ds, "class", p), Error);
}

TEST(LearningCurve, FaftCurveRoughlyMonotone) {
    SyntheticSpec spec;
    spec.n_samples = 1500;
    spec.seed = 6;
    const auto ds = make_synthetic_dataset(spec);
    const auto s = simulate_annotation(ds, sim(Method::FAFT, 300, 2));
    EvalProtocol p;
    const auto c = learning_curve({annotator_labels(s)}, ds, "class", p);
    for (std::size_t i = 1; i < c.points.size(); ++i) EXPECT_GE(c.points[i].mean, c.points[i - 1].mean - 0.05);
}

TEST(LearningCurve, HeldOutSetMustBeDisjoint) {
    const auto ds = oracle::small_dataset(200);
    const auto s = simulate_annotation(ds, sim(Method::RND, 60, 3));
    EvalProtocol p;
    p.checkpoints = {50};
    p.test_indices = std::vector<std::size_t>{s.order.order[0], s.order.order[59] };
    p.require_disjoint = true;
    EXPECT_THROW(learning_curve({annotator_labels(s)}, ds, "class", p), Error);
    p.require_disjoint = false;  // explicit overlap allowed when asked for
    EXPECT_NO_THROW(learning_curve({annotator_labels(s)}, ds, "class", p));
}

TEST(LearningCurve, MergedTieBreakVariesAcrossRepeats) {
    const auto ds = oracle::small_dataset(200, 3, 9);
    auto a = annotator_labels(simulate_annotation(ds, sim(Method::RND, 80, 5, "a")));
    auto b = a;
    b.annotator_id = "b";
    for (auto& [idx, v] : b.ordered) v = LabelValue::of(v.class_id == "c0" ? "c1" : "c0");
    EvalProtocol p;
    p.checkpoints = {80};
    const auto c = learning_curve({a, b}, ds, "class", p);
    EXPECT_EQ(c.points[0].scores.size(), 10u);
    const auto again = learning_curve({b, a}, ds, "class", p);
    EXPECT_EQ(c.points[0].scores, again.points[0].scores);
}

TEST(Simulation, NoiseZeroMatchesTruth) {
    const auto ds = oracle::small_dataset(120);
    for (auto m : {Method::RND, Method::FAFT, Method::TwoDV}) {
        const auto s = simulate_annotation(ds, sim(m, 40, 7));
        EXPECT_EQ(s.labeled_count(), 40u);
        for (const auto& [idx, rec] : s.labels) EXPECT_EQ(rec.value.class_id, ds.ground_truth.at("class").at(ds.samples[idx].sample_id));
        if (m != Method::TwoDV) EXPECT_EQ(s.label_sequence, s.order.order);
    }
}

TEST(Simulation, NoiseOneFlipsEveryBinaryLabel) {
    const auto ds = oracle::small_dataset(120, 2);
    auto spec = sim(Method::RND, 50, 7);
    spec.noise_rate = 1.0;
    const auto s = simulate_annotation(ds, spec);
    for (const auto& [idx, rec] : s.labels) EXPECT_NE(rec.value.class_id, ds.ground_truth.at("class").at(ds.samples[idx].sample_id));
}

TEST(Simulation, DeterministicClockAndSeed) {
    const auto ds = oracle::small_dataset(120);
    auto spec = sim(Method::TwoDV, 30, 9);
    spec.noise_rate = 0.3;
    spec.start_ms = 5000;
    const auto a = simulate_annotation(ds, spec), b = simulate_annotation(ds, spec);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.labels.at(a.label_sequence[2]).timestamp_ms, 7000);
}

TEST(Simulation, RegionBiasSkewsHistogram) {
    SyntheticSpec spec;
    spec.n_samples = 1500;
    spec.seed = 12;
    const auto ds = make_synthetic_dataset(spec);
    auto proj = std::make_shared<const Projection2D>(compute_pca(ds.features));
    const auto ref = reference_histogram(ds, "class");
    // centre on the PCA position of the first sample of class c0
    std::size_t anchor = 0;
    while (ds.ground_truth.at("class").at(ds.samples[anchor].sample_id) != "c0") ++anchor;

    double biased = 0, unbiased = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto b = sim(Method::TwoDV, 200, seed);
        b.region_bias = RegionBias{proj, proj->x(anchor), proj->y(anchor), 1.0};
        biased += hellinger(label_histogram(to_label_map(annotator_labels(simulate_annotation(ds, b))), ds.scheme("class")), ref);
        unbiased += hellinger(label_histogram(to_label_map(annotator_labels(simulate_annotation(ds, sim(Method::TwoDV, 200, seed)))),
                                              ds.scheme("class")),
                              ref);
    }
    EXPECT_GT(biased, unbiased);
}

TEST(Simulation, MissingTruthBecomesErroneous) {
    auto ds = oracle::small_dataset(40);
    ds.ground_truth["class"].erase(ds.samples[5].sample_id);
    auto spec = sim(Method::TwoDV, 40, 1);
    const auto s = simulate_annotation(ds, spec);
    EXPECT_TRUE(s.labels.at(5).value.erroneous);
    ds.schemes[0].allows_erroneous = false;
    EXPECT_THROW(simulate_annotation(ds, spec), Error);
}

TEST(Pipeline, HistogramReportGroupsByMethod) {
    const auto ds = oracle::small_dataset(300);
    std::vector<AnnotatorLabels> sets;
    for (auto m : {Method::TwoDV, Method::RND, Method::FAFT})
        for (int a = 0; a < 3; ++a) sets.push_back(annotator_labels(simulate_annotation(ds, sim(m, 60, 10 * a + 1, "a" + std::to_string(a)))));
    const auto r = histograms_from_labels(ds, "class", sets);
    ASSERT_EQ(r.groups.size(), 3u);
    EXPECT_EQ(r.groups[0].name, "RND");
    EXPECT_EQ(r.groups[2].name, "2DV");
    EXPECT_EQ(r.groups[1].members.size(), 3u);
    EXPECT_EQ(r.groups[1].sd.size(), 3u);
    ASSERT_TRUE(r.reference);
    const auto tsv = render_histogram_tsv(r);
    EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "group\tclass\tmean\tsd\tp1\tp2\tp3");
    EXPECT_NE(render_histogram_svg(r, "class").find("<svg"), std::string::npos);

    EvalProtocol p;
    p.checkpoints = {20, 40};
    p.n_repeats = 2;
    const auto curves = curves_from_labels(ds, "class", sets, p, false);
    ASSERT_EQ(curves.size(), 3u);
    EXPECT_EQ(curves[1].label, "FAFT");
    EXPECT_NE(render_curve_svg(curves, "curve", 0.9).find("polyline"), std::string::npos);
}
