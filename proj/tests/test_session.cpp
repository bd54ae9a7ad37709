#include "fuzz.hpp"
#include "oracles.hpp"

#include <annolab/csv.hpp>
#include <annolab/session.hpp>

#include <gtest/gtest.h>

#include <set>

using namespace annolab;

namespace {

SessionConfig config(Method m, std::size_t budget, std::uint64_t seed = 7) {
    SessionConfig c;
    c.track = "class";
    c.method = m;
    c.budget = budget;
    c.seed = seed;
    c.annotator_id = "e1";
    return c;
}

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::InvalidArgument;
}

} // namespace

TEST(Session, CreateFaft360) {
    SyntheticSpec spec;
    spec.n_samples = 1000;
    const auto ds = make_synthetic_dataset(spec);
    const auto s = create_session(ds, config(Method::FAFT, 360));
    EXPECT_EQ(s.order.order.size(), 360u);
    EXPECT_EQ(std::set<std::size_t>(s.order.order.begin(), s.order.order.end()).size(), 360u);
    EXPECT_EQ(s.current(), s.order.order.front());
}

TEST(Session, Create2dvIsEmpty) {
    SyntheticSpec spec;
    spec.n_samples = 500;
    const auto s = create_session(make_synthetic_dataset(spec), config(Method::TwoDV, 400));
    EXPECT_TRUE(s.order.order.empty());
    EXPECT_TRUE(s.queue.empty());
    EXPECT_FALSE(s.current());
}

TEST(Session, BudgetAboveDatasetSize) {
    const auto ds = oracle::small_dataset(20);
    EXPECT_EQ(kind_of([&] { create_session(ds, config(Method::RND, 21)); }), ErrorKind::BudgetExceedsPopulation);
}

TEST(Session, LabelAdvancesAndRevisionKeepsCount) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::FAFT, 5));
    const auto first = *s.current();
    assign_label(s, first, LabelValue::of("c0"), 1000);
    EXPECT_EQ(s.labeled_count(), 1u);
    EXPECT_EQ(s.current(), s.order.order[1]);

    assign_label(s, first, LabelValue::of("c2"), 2000);
    EXPECT_EQ(s.labeled_count(), 1u);
    EXPECT_EQ(s.labels.at(first).value, LabelValue::of("c2"));
    EXPECT_EQ(s.labels.at(first).timestamp_ms, 2000);
}

TEST(Session, LabelErrors) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::RND, 2));
    EXPECT_EQ(kind_of([&] { assign_label(s, *s.current(), LabelValue::of("jumping")); }), ErrorKind::UnknownClass);
    EXPECT_EQ(kind_of([&] { assign_label(s, s.order.order[1], LabelValue::of("c0")); }), ErrorKind::OutOfOrderLabel);
    EXPECT_EQ(kind_of([&] { assign_label(s, 999, LabelValue::of("c0")); }), ErrorKind::UnknownSample);
    assign_label(s, s.order.order[0], LabelValue::of("c0"));
    assign_label(s, s.order.order[1], LabelValue::erroneous_sample());
    EXPECT_EQ(s.status, SessionStatus::Complete);
    std::size_t fresh = 0;
    while (s.labels.count(fresh)) ++fresh;
    EXPECT_EQ(kind_of([&] { assign_label(s, fresh, LabelValue::of("c0")); }), ErrorKind::SessionComplete);
    // revisions remain possible after completion
    assign_label(s, s.order.order[0], LabelValue::of("c1"));
    EXPECT_EQ(s.labeled_count(), 2u);
}

TEST(Session, ErroneousRejectedWhenSchemeForbidsIt) {
    auto ds = oracle::small_dataset();
    ds.schemes[0].allows_erroneous = false;
    auto s = create_session(ds, config(Method::RND, 3));
    EXPECT_EQ(kind_of([&] { assign_label(s, *s.current(), LabelValue::erroneous_sample()); }), ErrorKind::UnknownClass);
}

TEST(Session, QueueFifoAndDedup) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::TwoDV, 10));
    navigate(s, Enqueue{5});
    navigate(s, Enqueue{9});
    navigate(s, Enqueue{5});
    EXPECT_EQ(s.queue.size(), 2u);
    EXPECT_EQ(navigate(s, Next{}), 5u);
    EXPECT_EQ(navigate(s, Next{}), 9u);
    EXPECT_EQ(kind_of([&] { navigate(s, Next{}); }), ErrorKind::EmptyQueue);
    EXPECT_EQ(navigate(s, Previous{}), 5u);
}

TEST(Session, SelectRemovesFromQueue) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::TwoDV, 10));
    navigate(s, Enqueue{3});
    navigate(s, Enqueue{4});
    EXPECT_EQ(navigate(s, Select{4}), 4u);
    EXPECT_EQ(std::vector<std::size_t>(s.queue.begin(), s.queue.end()), (std::vector<std::size_t>{3}));
    assign_label(s, 4, LabelValue::of("c1"));
    assign_label(s, 17, LabelValue::of("c0"));  // any index may be labeled in 2DV
    EXPECT_EQ(s.labeled_count(), 2u);
    EXPECT_EQ(s.current(), 17u);
}

TEST(Session, OrderedSessionsRejectFreeFormActions) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::RND, 4));
    EXPECT_EQ(kind_of([&] { navigate(s, Select{1}); }), ErrorKind::InvalidAction);
    EXPECT_EQ(kind_of([&] { navigate(s, Enqueue{1}); }), ErrorKind::InvalidAction);
}

TEST(Session, PreviousAfterLabelingTwo) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::RND, 2));
    const auto a = s.order.order[0], b = s.order.order[1];
    assign_label(s, a, LabelValue::of("c0"));
    assign_label(s, b, LabelValue::of("c1"));
    EXPECT_EQ(navigate(s, Previous{}), a);
    EXPECT_EQ(navigate(s, Previous{}), a);  // history start: no-op
    EXPECT_EQ(navigate(s, Next{}), b);
}

TEST(Session, PreviousStepsBackThroughHistory) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::RND, 5));
    const auto& o = s.order.order;
    assign_label(s, o[0], LabelValue::of("c0"));
    assign_label(s, o[1], LabelValue::of("c1"));
    EXPECT_EQ(s.current(), o[2]);
    EXPECT_EQ(navigate(s, Previous{}), o[1]);
    EXPECT_EQ(navigate(s, Previous{}), o[0]);
    assign_label(s, o[0], LabelValue::of("c2"));  // revision while stepped back
    EXPECT_EQ(navigate(s, Next{}), o[1]);
    EXPECT_EQ(navigate(s, Next{}), o[2]);
    EXPECT_EQ(navigate(s, Next{}), o[2]);
}

TEST(Session, CoverageAtCompletionEqualsOrderPrefix) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::FAFT, 12));
    while (s.status == SessionStatus::Active) assign_label(s, *s.frontier(), LabelValue::of("c0"));
    std::set<std::size_t> labeled;
    for (const auto& [i, r] : s.labels) labeled.insert(i);
    EXPECT_EQ(labeled, std::set<std::size_t>(s.order.order.begin(), s.order.order.end()));
}

TEST(Session, SnapshotRoundTripFreshAndMidAnnotation) {
    SyntheticSpec spec;
    spec.n_samples = 400;
    const auto ds = make_synthetic_dataset(spec);
    auto s = create_session(ds, config(Method::TwoDV, 200));
    EXPECT_EQ(load_session(save_session(s)), s);
    for (std::size_t i = 0; i < 137; ++i) assign_label(s, (i * 7) % 400, LabelValue::of("c" + std::to_string(i % 3)), 1000 + i);
    for (std::size_t q : {300u, 11u, 250u}) navigate(s, Enqueue{q});
    const auto back = load_session(save_session(s));
    EXPECT_EQ(back, s);
    EXPECT_EQ(back.labeled_count(), 137u);
    EXPECT_EQ(std::vector<std::size_t>(back.queue.begin(), back.queue.end()), (std::vector<std::size_t>{300, 11, 250}));
}

TEST(Session, CorruptSnapshots) {
    const auto ds = oracle::small_dataset();
    const auto bytes = save_session(create_session(ds, config(Method::RND, 4)));
    EXPECT_EQ(kind_of([&] { load_session(bytes.substr(0, bytes.size() - 3)); }), ErrorKind::CorruptSnapshot);
    EXPECT_EQ(kind_of([&] { load_session(bytes.substr(0, 10)); }), ErrorKind::CorruptSnapshot);
    auto flipped = bytes;
    flipped[bytes.size() - 5] ^= 0x40;
    EXPECT_EQ(kind_of([&] { load_session(flipped); }), ErrorKind::CorruptSnapshot);
    auto version = bytes;
    version[8] = 9;
    EXPECT_EQ(kind_of([&] { load_session(version); }), ErrorKind::CorruptSnapshot);
}

TEST(Session, RandomizedLaws) {
    const auto ds = oracle::small_dataset(80);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = fuzz::random_session(ds, seed, 60);
        ASSERT_LE(s.labeled_count(), s.budget());
        ASSERT_EQ(load_session(save_session(s)), s) << "seed " << seed;
        ASSERT_EQ(export_csv(s), export_csv(load_session(save_session(s))));

        auto fresh = create_session(ds, s.config);
        replay(fresh, parse_event_log(export_event_log(s)));
        ASSERT_EQ(fresh.labels, s.labels) << "seed " << seed;
        ASSERT_EQ(fresh, s) << "seed " << seed;
        for (const auto& [idx, r] : s.labels) ASSERT_NE(std::find(s.visited.begin(), s.visited.end(), idx), s.visited.end());
    }
}

TEST(Session, LabeledCountNeverDecreases) {
    const auto ds = oracle::small_dataset(80);
    auto s = fuzz::random_session(ds, 3, 0);
    std::size_t last = 0;
    for (const auto& e : fuzz::random_session(ds, 3, 200).events) {
        replay(s, std::span(&e, 1));
        ASSERT_GE(s.labeled_count(), last);
        last = s.labeled_count();
    }
}

TEST(ExportCsv, HeaderOnlyWhenEmpty) {
    const auto ds = oracle::small_dataset();
    EXPECT_EQ(export_csv(create_session(ds, config(Method::RND, 3))),
              "sample_id,track,method,annotator_id,annotator_group,label,is_erroneous,annotation_order,timestamp_utc\n");
}

TEST(ExportCsv, ThreeLabelsOneErroneous) {
    const auto ds = oracle::small_dataset();
    auto s = create_session(ds, config(Method::RND, 3));
    assign_label(s, *s.frontier(), LabelValue::of("c1"), 0);
    assign_label(s, *s.frontier(), LabelValue::erroneous_sample(), 1500);
    assign_label(s, *s.frontier(), LabelValue::of("c0"), 86'400'000);
    const auto text = export_csv(s);
    EXPECT_EQ(text, export_csv(s));
    const auto rows = csv::parse(text);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    EXPECT_EQ(rows[2][5], "");
    EXPECT_EQ(rows[2][6], "true");
    EXPECT_EQ(rows[1][6], "false");
    EXPECT_EQ(rows[3][7], "3");
    EXPECT_EQ(rows[1][8], "1970-01-01T00:00:00.000Z");
    EXPECT_EQ(rows[2][8], "1970-01-01T00:00:01.500Z");
    EXPECT_EQ(rows[3][8], "1970-01-02T00:00:00.000Z");
    EXPECT_EQ(rows[1][0], ds.samples[s.order.order[0]].sample_id);
}

TEST(ExportCsv, ImportRoundTrip) {
    const auto ds = oracle::small_dataset();
    const auto s = fuzz::random_session(ds, 11, 80);
    const auto a = import_csv(export_csv(s), ds);
    const auto b = annotator_labels(s);
    ASSERT_GT(s.labeled_count(), 0u);
    EXPECT_EQ(a.ordered, b.ordered);
    EXPECT_EQ(a.method, b.method);
    EXPECT_EQ(a.group, b.group);
}
