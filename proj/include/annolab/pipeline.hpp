#pragma once

// Glue between annotation sessions and the analyses: grouping label sets by
// method, histogram reports, risk inputs and learning curves.

#include <annolab/downstream.hpp>
#include <annolab/label_analysis.hpp>
#include <annolab/report.hpp>
#include <annolab/risk.hpp>
#include <annolab/session.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace annolab {

inline bool in_group(const AnnotatorLabels& a, GroupKind g) {
    switch (g) {
    case GroupKind::Expert: return a.group == AnnotatorGroup::Expert;
    case GroupKind::NonExpert: return a.group == AnnotatorGroup::NonExpert;
    case GroupKind::All: return true;
    }
    return true;
}

// Method name -> label sets of that method for `track`, in input order.
inline std::map<std::string, std::vector<AnnotatorLabels>> by_method(const std::vector<AnnotatorLabels>& sets,
                                                                     const std::string& track,
                                                                     GroupKind group = GroupKind::All) {
    std::map<std::string, std::vector<AnnotatorLabels>> out;
    for (const auto& a : sets)
        if (a.track == track && in_group(a, group)) out[std::string(to_string(a.method))].push_back(a);
    return out;
}

// Histogram of one label set, remapped when a remap is given.
inline LabelHistogram annotator_histogram(const AnnotatorLabels& a, const ClassScheme& scheme,
                                          const std::optional<ClassRemap>& remap) {
    const auto m = to_label_map(a);
    return remap ? label_histogram(remap_labels(m, *remap), remap->target) : label_histogram(m, scheme);
}

inline LabelHistogram merged_histogram(const std::vector<AnnotatorLabels>& sets, const ClassScheme& scheme,
                                       const std::optional<ClassRemap>& remap, std::uint64_t seed) {
    std::vector<LabelMap> maps;
    for (const auto& a : sets) maps.push_back(remap ? remap_labels(to_label_map(a), *remap) : to_label_map(a));
    return label_histogram(merge_majority(maps, seed), remap ? remap->target : scheme);
}

inline HistogramReport histograms_from_labels(const Dataset& dataset, const std::string& track,
                                              const std::vector<AnnotatorLabels>& sets, GroupKind group = GroupKind::All,
                                              const std::optional<ClassRemap>& remap = std::nullopt) {
    const auto& scheme = dataset.scheme(track);
    std::vector<std::pair<std::string, std::vector<LabelHistogram>>> groups;
    const auto methods = by_method(sets, track, group);
    for (const char* name : {"RND", "FAFT", "2DV"}) {
        const auto it = methods.find(name);
        if (it == methods.end()) continue;
        std::vector<LabelHistogram> hs;
        for (const auto& a : it->second) hs.push_back(annotator_histogram(a, scheme, remap));
        groups.emplace_back(name, std::move(hs));
    }
    std::optional<LabelHistogram> reference;
    if (dataset.ground_truth.count(track)) reference = reference_histogram(dataset, track, remap);
    return histogram_report(std::move(reference), groups);
}

// Score with all labels of the given sets (merged when more than one).
inline double full_label_score(const std::vector<AnnotatorLabels>& sets, const Dataset& dataset, const std::string& track,
                               EvalProtocol protocol, const std::optional<ClassRemap>& remap) {
    std::size_t n = sets.front().ordered.size();
    for (const auto& a : sets) n = std::min(n, a.ordered.size());
    protocol.checkpoints = {n};
    return learning_curve(sets, dataset, track, protocol, remap).points.front().mean;
}

struct TrackLabels {
    std::string track;
    std::vector<AnnotatorLabels> sets;
    std::optional<ClassRemap> remap;
    double rare_threshold = 0.10;
};

// Raw risk inputs for one condition from real or simulated label sets.
//   1 annotator:  coverage and performance per annotator of the group.
//   2 annotators: coverage of every merged pair; no performance.
//   n >= 3:       coverage and performance of the merged group, which must have n members.
// Instability always uses every annotator of the group.
inline std::vector<TrackRiskInput> risk_inputs_from_labels(const RiskCondition& condition, const Dataset& dataset,
                                                           const std::vector<TrackLabels>& tracks, const EvalProtocol& protocol) {
    std::vector<TrackRiskInput> out;
    for (const auto& t : tracks) {
        const auto& scheme = dataset.scheme(t.track);
        TrackRiskInput in{t.track, reference_histogram(dataset, t.track, t.remap), t.rare_threshold, {}};
        EvalProtocol p = protocol;
        if (!p.test_indices && condition.uses(RiskMetric::Mod)) {
            p.test_indices = detail::make_eval_context(t.sets, dataset, t.track, protocol, t.remap).test;
            p.require_disjoint = true;
        }
        for (const auto& [method, sets] : by_method(t.sets, t.track, condition.group())) {
            if (sets.size() < 2) fail(ErrorKind::TooFewHistograms, method + " in '" + t.track + "' has fewer than 2 annotators");
            const std::size_t n = condition.n_annotators();
            if (n >= 3 && sets.size() != n)
                fail(ErrorKind::InvalidArgument, method + " in '" + t.track + "' has " + std::to_string(sets.size()) +
                                                     " annotators, condition expects " + std::to_string(n));
            MethodRiskInput mi;
            for (const auto& a : sets) mi.annotators.push_back(annotator_histogram(a, scheme, t.remap));
            if (n == 1) {
                mi.coverage = mi.annotators;
                if (condition.uses(RiskMetric::Mod))
                    for (const auto& a : sets) mi.performance.push_back(full_label_score({a}, dataset, t.track, p, t.remap));
            } else if (n == 2) {
                for (std::size_t i = 0; i < sets.size(); ++i)
                    for (std::size_t j = i + 1; j < sets.size(); ++j)
                        mi.coverage.push_back(merged_histogram({sets[i], sets[j]}, scheme, t.remap, protocol.seed));
            } else {
                mi.coverage.push_back(merged_histogram(sets, scheme, t.remap, protocol.seed));
                if (condition.uses(RiskMetric::Mod))
                    mi.performance.push_back(full_label_score(sets, dataset, t.track, p, t.remap));
            }
            in.methods.emplace(method, std::move(mi));
        }
        if (in.methods.empty()) fail(ErrorKind::EmptyInput, "no label sets for track '" + t.track + "'");
        out.push_back(std::move(in));
    }
    return out;
}

// Learning curve per method: merged over the method's label sets, or with
// `separate` the mean of the single-annotator curves.
inline std::vector<LearningCurve> curves_from_labels(const Dataset& dataset, const std::string& track,
                                                     const std::vector<AnnotatorLabels>& sets, const EvalProtocol& protocol,
                                                     bool separate, GroupKind group = GroupKind::All,
                                                     const std::optional<ClassRemap>& remap = std::nullopt) {
    // One held-out test set for every method: samples nobody annotated.
    EvalProtocol p = protocol;
    if (!p.test_indices) {
        std::vector<AnnotatorLabels> all;
        for (const auto& a : sets)
            if (a.track == track) all.push_back(a);
        p.test_indices = detail::make_eval_context(all, dataset, track, protocol, remap).test;
        p.require_disjoint = true;
    }
    std::vector<LearningCurve> out;
    const auto methods = by_method(sets, track, group);
    for (const char* name : {"RND", "FAFT", "2DV"}) {
        const auto it = methods.find(name);
        if (it == methods.end()) continue;
        LearningCurve c;
        if (separate) {
            std::vector<LearningCurve> each;
            for (const auto& a : it->second) each.push_back(learning_curve({a}, dataset, track, p, remap));
            c = mean_curve(each, name);
        } else {
            c = learning_curve(it->second, dataset, track, p, remap);
        }
        c.label = name;
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace annolab
