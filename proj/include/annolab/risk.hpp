#pragma once

#include <annolab/error.hpp>
#include <annolab/label_analysis.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace annolab {

enum class RiskMetric { Cov, Mod, Dis };

inline std::string_view to_string(RiskMetric k) {
    switch (k) {
    case RiskMetric::Cov: return "cov";
    case RiskMetric::Mod: return "mod";
    case RiskMetric::Dis: return "dis";
    }
    return "cov";
}

inline std::optional<RiskMetric> parse_risk_metric(std::string_view s) {
    if (s == "cov") return RiskMetric::Cov;
    if (s == "mod") return RiskMetric::Mod;
    if (s == "dis") return RiskMetric::Dis;
    return std::nullopt;
}

enum class GroupKind { Expert, NonExpert, All };

inline std::string_view to_string(GroupKind g) {
    switch (g) {
    case GroupKind::Expert: return "expert";
    case GroupKind::NonExpert: return "non_expert";
    case GroupKind::All: return "all";
    }
    return "all";
}

inline std::string_view display_name(GroupKind g) {
    switch (g) {
    case GroupKind::Expert: return "Expert";
    case GroupKind::NonExpert: return "Non-expert";
    case GroupKind::All: return "All";
    }
    return "All";
}

inline std::optional<GroupKind> parse_group_kind(std::string_view s) {
    if (s == "expert") return GroupKind::Expert;
    if (s == "non_expert" || s == "non-expert") return GroupKind::NonExpert;
    if (s == "all") return GroupKind::All;
    return std::nullopt;
}

class RiskCondition {
public:
    // Without an explicit metric list: {cov, dis} for two annotators (no models
    // were trained on pairs), {cov, mod, dis} otherwise.
    RiskCondition(std::string task, GroupKind group, std::size_t n_annotators,
                  std::optional<std::vector<RiskMetric>> metrics = std::nullopt)
        : task_(std::move(task)), group_(group), n_annotators_(n_annotators) {
        if (n_annotators_ == 0) fail(ErrorKind::InvalidArgument, "condition needs at least one annotator");
        if (metrics) {
            if (metrics->empty()) fail(ErrorKind::InvalidArgument, "empty metric set");
            for (auto k : {RiskMetric::Cov, RiskMetric::Mod, RiskMetric::Dis})
                if (std::count(metrics->begin(), metrics->end(), k)) metrics_.push_back(k);
            if (metrics_.size() != metrics->size()) fail(ErrorKind::InvalidArgument, "duplicate metric in metric set");
        } else {
            metrics_ = n_annotators_ == 2 ? std::vector{RiskMetric::Cov, RiskMetric::Dis}
                                          : std::vector{RiskMetric::Cov, RiskMetric::Mod, RiskMetric::Dis};
        }
        if (n_annotators_ == 2 && uses(RiskMetric::Mod))
            fail(ErrorKind::InvalidArgument, "two-annotator conditions cannot use 'mod'");
    }

    const std::string& task() const { return task_; }
    GroupKind group() const { return group_; }
    std::size_t n_annotators() const { return n_annotators_; }
    const std::vector<RiskMetric>& metrics() const { return metrics_; }
    bool uses(RiskMetric k) const { return std::find(metrics_.begin(), metrics_.end(), k) != metrics_.end(); }

    std::string metrics_label() const {
        std::string s;
        for (auto k : metrics_) {
            if (!s.empty()) s += ", ";
            s += to_string(k);
        }
        return s;
    }

    bool operator==(const RiskCondition&) const = default;

private:
    std::string task_;
    GroupKind group_;
    std::size_t n_annotators_;
    std::vector<RiskMetric> metrics_;
};

// One failure per value strictly below 0.9 x the best value in the configuration.
inline std::map<std::string, std::size_t> detect_performance_failure(const std::map<std::string, std::vector<double>>& perf_by_method,
                                                                     double relative_threshold = 0.9) {
    double best = -1.0;
    for (const auto& [m, values] : perf_by_method)
        for (double v : values) {
            if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::InvalidArgument, "performance value out of [0, 1] for " + m);
            best = std::max(best, v);
        }
    if (best < 0.0) fail(ErrorKind::EmptyInput, "no performance values");
    const double threshold = relative_threshold * best;
    std::map<std::string, std::size_t> failures;
    for (const auto& [m, values] : perf_by_method)
        failures[m] = static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [&](double v) { return v < threshold; }));
    return failures;
}

struct RareClassResult {
    std::vector<std::string> rare_classes;
    std::string rarest;
    bool failure = false;
};

inline RareClassResult detect_rare_class_failure(const LabelHistogram& h, const LabelHistogram& reference,
                                                 double rare_threshold = 0.10) {
    detail::require_same_scheme(h, reference);
    const auto& p = reference.proportions;
    RareClassResult r;
    std::optional<std::size_t> rarest;
    if (p.size() == 2) {
        rarest = p[1] < p[0] ? 1 : 0;
        r.rare_classes.push_back(reference.class_ids[*rarest]);
    } else {
        for (std::size_t c = 0; c < p.size(); ++c) {
            if (p[c] >= rare_threshold) continue;
            r.rare_classes.push_back(reference.class_ids[c]);
            if (!rarest || p[c] < p[*rarest]) rarest = c;
        }
        if (!rarest) fail(ErrorKind::NoRareClass, "no class below " + std::to_string(rare_threshold) + " in the reference");
    }
    r.rarest = reference.class_ids[*rarest];
    r.failure = h.proportions[*rarest] < p[*rarest] / 2.0;
    return r;
}

inline std::map<std::string, double> instability(const std::map<std::string, std::vector<LabelHistogram>>& hists_by_method) {
    std::map<std::string, double> out;
    for (const auto& [m, hists] : hists_by_method) out[m] = mean_pairwise_hellinger(hists);
    return out;
}

// Best value gets rank 1, exact ties share a rank, the next distinct value gets +1.
inline std::map<std::string, int> dense_rank(const std::map<std::string, double>& values, bool lower_is_better = true) {
    std::vector<double> distinct;
    for (const auto& [m, v] : values) distinct.push_back(v);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (!lower_is_better) std::reverse(distinct.begin(), distinct.end());
    std::map<std::string, int> ranks;
    for (const auto& [m, v] : values)
        ranks[m] = static_cast<int>(std::find(distinct.begin(), distinct.end(), v) - distinct.begin()) + 1;
    return ranks;
}

// track -> metric -> method -> rank
using RankTable = std::map<std::string, std::map<RiskMetric, std::map<std::string, int>>>;

inline std::string format_score(int s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", static_cast<double>(s));
    return buf;
}

// Ascending by score; equal scores are listed by method name and joined with " = ".
inline std::string format_ordering(const std::map<std::string, int>& scores) {
    std::vector<std::pair<int, std::string>> sorted;
    for (const auto& [m, s] : scores) sorted.emplace_back(s, m);
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i > 0) out += sorted[i].first == sorted[i - 1].first ? " = " : " > ";
        out += sorted[i].second + " (" + format_score(sorted[i].first) + ")";
    }
    return out;
}

struct RiskScores {
    std::map<std::string, int> scores;
    std::string ordering;
};

inline RiskScores combined_risk_score(const RiskCondition& condition, const RankTable& ranks,
                                      const std::vector<std::string>& methods) {
    if (ranks.empty()) fail(ErrorKind::IncompleteRankTable, "rank table has no tracks");
    if (methods.empty()) fail(ErrorKind::IncompleteRankTable, "no methods");
    RiskScores out;
    for (const auto& m : methods) out.scores[m] = 0;
    for (const auto& [track, by_metric] : ranks)
        for (auto k : condition.metrics()) {
            const auto it = by_metric.find(k);
            if (it == by_metric.end())
                fail(ErrorKind::IncompleteRankTable, "track '" + track + "' has no ranks for " + std::string(to_string(k)));
            for (const auto& m : methods) {
                const auto r = it->second.find(m);
                if (r == it->second.end())
                    fail(ErrorKind::IncompleteRankTable,
                         "track '" + track + "', metric " + std::string(to_string(k)) + ": no rank for " + m);
                out.scores[m] += r->second;
            }
        }
    out.ordering = format_ordering(out.scores);
    return out;
}

// Raw inputs for one method within one track of a condition.
struct MethodRiskInput {
    std::vector<double> performance;             // mod: one value per evaluated unit
    std::vector<LabelHistogram> coverage;        // cov: one histogram per checked unit
    std::vector<LabelHistogram> annotators;      // dis: one histogram per annotator
};

struct TrackRiskInput {
    std::string track;
    LabelHistogram reference;
    double rare_threshold = 0.10;
    std::map<std::string, MethodRiskInput> methods;
};

struct RiskReport {
    RiskCondition condition;
    std::vector<std::string> methods;
    std::map<std::string, std::map<RiskMetric, std::map<std::string, double>>> raw;  // track -> metric -> method
    RankTable ranks;
    RiskScores scores;
};

inline RiskReport assess_risk(const RiskCondition& condition, const std::vector<TrackRiskInput>& tracks) {
    if (tracks.empty()) fail(ErrorKind::EmptyInput, "condition '" + condition.task() + "' has no tracks");
    RiskReport rep{condition, {}, {}, {}, {}};
    for (const auto& [m, in] : tracks.front().methods) rep.methods.push_back(m);
    if (rep.methods.empty()) fail(ErrorKind::EmptyInput, "no methods in track '" + tracks.front().track + "'");

    for (const auto& t : tracks) {
        std::vector<std::string> names;
        for (const auto& [m, in] : t.methods) names.push_back(m);
        if (names != rep.methods) fail(ErrorKind::InvalidArgument, "track '" + t.track + "' lists a different method set");
        auto& raw = rep.raw[t.track];

        if (condition.uses(RiskMetric::Cov)) {
            for (const auto& [m, in] : t.methods) {
                if (in.coverage.empty()) fail(ErrorKind::EmptyInput, "no coverage histograms for " + m + " in '" + t.track + "'");
                double failures = 0;
                for (const auto& h : in.coverage)
                    if (detect_rare_class_failure(h, t.reference, t.rare_threshold).failure) failures += 1;
                raw[RiskMetric::Cov][m] = failures;
            }
        }
        if (condition.uses(RiskMetric::Mod)) {
            std::map<std::string, std::vector<double>> perf;
            for (const auto& [m, in] : t.methods) {
                if (in.performance.empty()) fail(ErrorKind::EmptyInput, "no performance values for " + m + " in '" + t.track + "'");
                perf[m] = in.performance;
            }
            for (const auto& [m, n] : detect_performance_failure(perf)) raw[RiskMetric::Mod][m] = static_cast<double>(n);
        }
        if (condition.uses(RiskMetric::Dis)) {
            std::map<std::string, std::vector<LabelHistogram>> hists;
            for (const auto& [m, in] : t.methods) hists[m] = in.annotators;
            for (const auto& [m, v] : instability(hists)) raw[RiskMetric::Dis][m] = v;
        }
        for (const auto& [k, values] : raw) rep.ranks[t.track][k] = dense_rank(values, true);
    }
    rep.scores = combined_risk_score(condition, rep.ranks, rep.methods);
    return rep;
}

namespace detail {

inline std::string pad(const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); }

inline std::vector<std::vector<std::string>> table_rows(const std::vector<RiskReport>& reports) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Task", "Annotator group", "# Annotators", "Metrics used", "Ranked methods (combined risk score)"});
    for (const auto& r : reports)
        rows.push_back({r.condition.task(), std::string(display_name(r.condition.group())),
                        std::to_string(r.condition.n_annotators()), r.condition.metrics_label(), r.scores.ordering});
    return rows;
}

} // namespace detail

// Aligned text table with the columns of the published risk ranking table.
inline std::string render_risk_table(const std::vector<RiskReport>& reports) {
    const auto rows = detail::table_rows(reports);
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += " | ";
            line += i + 1 == row.size() ? row[i] : detail::pad(row[i], width[i]);
        }
        out += line + "\n";
    };
    emit(rows.front());
    std::string rule;
    for (std::size_t i = 0; i < width.size(); ++i) {
        if (i) rule += "-+-";
        rule += std::string(width[i], '-');
    }
    out += rule + "\n";
    for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
    return out;
}

// One row per (condition, track, metric, method) with raw value and rank, then one
// row per (condition, method) with the combined score.
inline std::string render_risk_tsv(const std::vector<RiskReport>& reports) {
    std::ostringstream os;
    os.precision(10);
    os << "task\tgroup\tn_annotators\ttrack\tmetric\tmethod\tvalue\trank\n";
    for (const auto& r : reports) {
        const std::string prefix = r.condition.task() + "\t" + std::string(to_string(r.condition.group())) + "\t" +
                                   std::to_string(r.condition.n_annotators()) + "\t";
        for (const auto& [track, by_metric] : r.raw)
            for (const auto& [k, values] : by_metric)
                for (const auto& [m, v] : values)
                    os << prefix << track << "\t" << to_string(k) << "\t" << m << "\t" << v << "\t"
                       << r.ranks.at(track).at(k).at(m) << "\n";
        for (const auto& [m, s] : r.scores.scores) os << prefix << "*\tS\t" << m << "\t" << s << "\t\n";
    }
    return os.str();
}

// Input document: {"conditions": [{"task", "annotator_group", "n_annotators",
// "metrics"?, "tracks": [{"name", "classes", "reference", "rare_threshold"?,
// "methods": {"<name>": {"performance": [..], "coverage": [[..]..],
// "annotators": [[..]..]}}}]}]}. Histograms are proportion arrays over "classes".
inline std::vector<std::pair<RiskCondition, std::vector<TrackRiskInput>>> parse_risk_input(const nlohmann::json& doc) {
    std::vector<std::pair<RiskCondition, std::vector<TrackRiskInput>>> out;
    try {
        for (const auto& c : doc.at("conditions")) {
            const auto group = parse_group_kind(c.at("annotator_group").get<std::string>());
            if (!group) fail(ErrorKind::InvalidArgument, "unknown annotator group '" + c.at("annotator_group").get<std::string>() + "'");
            std::optional<std::vector<RiskMetric>> metrics;
            if (c.contains("metrics")) {
                metrics.emplace();
                for (const auto& k : c.at("metrics")) {
                    const auto p = parse_risk_metric(k.get<std::string>());
                    if (!p) fail(ErrorKind::InvalidArgument, "unknown metric '" + k.get<std::string>() + "'");
                    metrics->push_back(*p);
                }
            }
            RiskCondition cond(c.at("task").get<std::string>(), *group, c.at("n_annotators").get<std::size_t>(), metrics);
            std::vector<TrackRiskInput> tracks;
            for (const auto& t : c.at("tracks")) {
                const auto name = t.at("name").get<std::string>();
                const auto classes = t.at("classes").get<std::vector<std::string>>();
                auto hist = [&](const nlohmann::json& j) {
                    auto p = j.get<std::vector<double>>();
                    if (p.size() != classes.size())
                        fail(ErrorKind::SchemeMismatch, "histogram in track '" + name + "' has " + std::to_string(p.size()) +
                                                            " entries for " + std::to_string(classes.size()) + " classes");
                    return LabelHistogram{name, classes, std::move(p), 0};
                };
                TrackRiskInput in{name, hist(t.at("reference")), t.value("rare_threshold", 0.10), {}};
                for (const auto& [m, v] : t.at("methods").items()) {
                    MethodRiskInput mi;
                    mi.performance = v.value("performance", std::vector<double>{});
                    if (v.contains("coverage"))
                        for (const auto& h : v.at("coverage")) mi.coverage.push_back(hist(h));
                    if (v.contains("annotators"))
                        for (const auto& h : v.at("annotators")) mi.annotators.push_back(hist(h));
                    in.methods.emplace(m, std::move(mi));
                }
                tracks.push_back(std::move(in));
            }
            out.emplace_back(std::move(cond), std::move(tracks));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidArgument, std::string("malformed risk input: ") + e.what());
    }
    return out;
}

inline nlohmann::json to_json(const RiskReport& r) {
    nlohmann::json j;
    j["task"] = r.condition.task();
    j["annotator_group"] = to_string(r.condition.group());
    j["n_annotators"] = r.condition.n_annotators();
    j["metrics"] = nlohmann::json::array();
    for (auto k : r.condition.metrics()) j["metrics"].push_back(to_string(k));
    j["methods"] = r.methods;
    for (const auto& [track, by_metric] : r.raw)
        for (const auto& [k, values] : by_metric)
            for (const auto& [m, v] : values) {
                j["tracks"][track][std::string(to_string(k))][m] = {{"value", v}, {"rank", r.ranks.at(track).at(k).at(m)}};
            }
    j["scores"] = r.scores.scores;
    j["ordering"] = r.scores.ordering;
    return j;
}

} // namespace annolab
