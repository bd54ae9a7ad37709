#pragma once

#include <annolab/dataset.hpp>
#include <annolab/error.hpp>
#include <annolab/random.hpp>
#include <annolab/session.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace annolab {

// Sample (global index) -> label.
using LabelMap = std::map<std::size_t, LabelValue>;

struct LabelHistogram {
    std::string track;
    std::vector<std::string> class_ids;
    std::vector<double> proportions;  // erroneous labels excluded
    std::size_t support = 0;

    double proportion(std::string_view class_id) const {
        for (std::size_t i = 0; i < class_ids.size(); ++i)
            if (class_ids[i] == class_id) return proportions[i];
        fail(ErrorKind::UnknownClass, "class '" + std::string(class_id) + "' not in histogram");
    }

    bool operator==(const LabelHistogram&) const = default;
};

struct ClassRemap {
    ClassScheme source;
    ClassScheme target;
    std::map<std::string, std::string> mapping;

    // Every source class maps into the target and every target class is hit.
    void validate() const {
        std::set<std::string> hit;
        for (const auto& c : source.classes) {
            const auto it = mapping.find(c.id);
            if (it == mapping.end()) fail(ErrorKind::UnmappedClass, "source class '" + c.id + "' has no mapping");
            if (!target.contains(it->second))
                fail(ErrorKind::UnmappedClass, "'" + c.id + "' maps to '" + it->second + "', which is not a target class");
            hit.insert(it->second);
        }
        for (const auto& c : target.classes)
            if (!hit.count(c.id)) fail(ErrorKind::UnmappedClass, "target class '" + c.id + "' receives no source class");
    }

    static ClassRemap identity(const ClassScheme& scheme) {
        ClassRemap r{scheme, scheme, {}};
        for (const auto& c : scheme.classes) r.mapping[c.id] = c.id;
        return r;
    }
};

inline LabelMap to_label_map(const AnnotatorLabels& a, std::optional<std::size_t> first_n = std::nullopt) {
    LabelMap m;
    const std::size_t n = std::min(first_n.value_or(a.ordered.size()), a.ordered.size());
    for (std::size_t i = 0; i < n; ++i) m[a.ordered[i].first] = a.ordered[i].second;
    return m;
}

inline LabelMap remap_labels(const LabelMap& labels, const ClassRemap& remap) {
    LabelMap out;
    for (const auto& [sample, value] : labels) {
        if (value.erroneous) {
            out.emplace(sample, value);
            continue;
        }
        const auto it = remap.mapping.find(value.class_id);
        if (it == remap.mapping.end())
            fail(ErrorKind::UnmappedClass, "class '" + value.class_id + "' has no mapping in remap to '" + remap.target.track_name + "'");
        out.emplace(sample, LabelValue::of(it->second));
    }
    return out;
}

inline LabelHistogram histogram_from_counts(const ClassScheme& scheme, const std::vector<std::size_t>& counts) {
    LabelHistogram h{scheme.track_name, scheme.class_ids(), std::vector<double>(counts.size(), 0.0), 0};
    for (auto c : counts) h.support += c;
    if (h.support == 0) fail(ErrorKind::EmptyLabelSet, "no valid labels for track '" + scheme.track_name + "'");
    for (std::size_t i = 0; i < counts.size(); ++i) h.proportions[i] = static_cast<double>(counts[i]) / static_cast<double>(h.support);
    return h;
}

// Erroneous entries are skipped; proportions[c] = count(c) / support.
inline LabelHistogram label_histogram(const LabelMap& labels, const ClassScheme& scheme) {
    std::vector<std::size_t> counts(scheme.classes.size(), 0);
    for (const auto& [sample, value] : labels) {
        if (value.erroneous) continue;
        const auto i = scheme.index_of(value.class_id);
        if (!i) fail(ErrorKind::UnknownClass, "class '" + value.class_id + "' not in track '" + scheme.track_name + "'");
        ++counts[*i];
    }
    return histogram_from_counts(scheme, counts);
}

// Histogram of a ground-truth map (sample_id -> class_id), e.g. a reference distribution.
inline LabelHistogram reference_histogram(const Dataset& dataset, const std::string& track,
                                          const std::optional<ClassRemap>& remap = std::nullopt) {
    const auto it = dataset.ground_truth.find(track);
    if (it == dataset.ground_truth.end()) fail(ErrorKind::MissingGroundTruth, "no ground truth for track '" + track + "'");
    LabelMap m;
    for (const auto& [id, cls] : it->second) m[*dataset.index_of(id)] = LabelValue::of(cls);
    if (remap) return label_histogram(remap_labels(m, *remap), remap->target);
    return label_histogram(m, dataset.scheme(track));
}

namespace detail {

inline void require_same_scheme(const LabelHistogram& a, const LabelHistogram& b) {
    if (a.class_ids != b.class_ids)
        fail(ErrorKind::SchemeMismatch, "histograms over different class lists ('" + a.track + "' vs '" + b.track + "')");
}

} // namespace detail

struct GroupStats {
    std::vector<std::string> class_ids;
    std::vector<double> mean;
    std::vector<double> sd;  // sample SD, n - 1 denominator
};

inline GroupStats histogram_group_stats(const std::vector<LabelHistogram>& hists) {
    if (hists.size() < 2) fail(ErrorKind::TooFewHistograms, "need at least 2 histograms, got " + std::to_string(hists.size()));
    for (const auto& h : hists) detail::require_same_scheme(hists.front(), h);
    const std::size_t c = hists.front().class_ids.size();
    const double n = static_cast<double>(hists.size());
    GroupStats s{hists.front().class_ids, std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
    for (std::size_t k = 0; k < c; ++k) {
        for (const auto& h : hists) s.mean[k] += h.proportions[k];
        s.mean[k] /= n;
        double ss = 0.0;
        for (const auto& h : hists) ss += (h.proportions[k] - s.mean[k]) * (h.proportions[k] - s.mean[k]);
        s.sd[k] = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

// H(p, q) = ||sqrt(p) - sqrt(q)||_2 / sqrt(2), in [0, 1].
inline double hellinger(const LabelHistogram& p, const LabelHistogram& q) {
    detail::require_same_scheme(p, q);
    double s = 0.0;
    for (std::size_t k = 0; k < p.proportions.size(); ++k) {
        const double d = std::sqrt(p.proportions[k]) - std::sqrt(q.proportions[k]);
        s += d * d;
    }
    return std::min(1.0, std::sqrt(s) / std::sqrt(2.0));
}

inline double mean_pairwise_hellinger(const std::vector<LabelHistogram>& hists) {
    if (hists.size() < 2) fail(ErrorKind::TooFewHistograms, "need at least 2 histograms, got " + std::to_string(hists.size()));
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < hists.size(); ++i)
        for (std::size_t j = i + 1; j < hists.size(); ++j) {
            total += hellinger(hists[i], hists[j]);
            ++pairs;
        }
    return total / static_cast<double>(pairs);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

// Majority vote per sample over the union of label sets. Erroneous votes are
// dropped; samples with no valid vote are excluded. A tie is resolved by a
// seeded uniform pick among the tied classes (sorted by id), drawn from a
// generator keyed on (seed, sample) so the outcome for one sample does not
// depend on the order of the sets or on which other samples are present.
inline LabelMap merge_majority(const std::vector<LabelMap>& label_sets, std::uint64_t seed) {
    std::map<std::size_t, std::map<std::string, std::size_t>> votes;
    for (const auto& set : label_sets)
        for (const auto& [sample, value] : set)
            if (!value.erroneous) ++votes[sample][value.class_id];

    LabelMap merged;
    for (const auto& [sample, counts] : votes) {
        std::size_t best = 0;
        for (const auto& [cls, n] : counts) best = std::max(best, n);
        std::vector<const std::string*> tied;
        for (const auto& [cls, n] : counts)
            if (n == best) tied.push_back(&cls);
        std::size_t pick = 0;
        if (tied.size() > 1) {
            Rng rng(detail::splitmix64(seed ^ detail::splitmix64(sample)));
            pick = static_cast<std::size_t>(rng.uniform_index(tied.size()));
        }
        merged.emplace(sample, LabelValue::of(*tied[pick]));
    }
    return merged;
}

} // namespace annolab
