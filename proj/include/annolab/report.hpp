#pragma once

#include <annolab/downstream.hpp>
#include <annolab/label_analysis.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace annolab {

struct HistogramGroup {
    std::string name;
    std::vector<LabelHistogram> members;  // one per annotator
    std::vector<double> mean;
    std::vector<double> sd;  // empty for single-member groups
};

struct HistogramReport {
    std::string track;
    std::vector<std::string> class_ids;
    std::optional<LabelHistogram> reference;
    std::vector<HistogramGroup> groups;
};

inline HistogramReport histogram_report(std::optional<LabelHistogram> reference,
                                        const std::vector<std::pair<std::string, std::vector<LabelHistogram>>>& groups) {
    if (groups.empty()) fail(ErrorKind::EmptyInput, "no histogram groups");
    HistogramReport r;
    r.reference = std::move(reference);
    for (const auto& [name, members] : groups) {
        if (members.empty()) fail(ErrorKind::EmptyInput, "group '" + name + "' has no histograms");
        HistogramGroup g{name, members, {}, {}};
        if (members.size() >= 2) {
            const auto s = histogram_group_stats(members);
            g.mean = s.mean;
            g.sd = s.sd;
        } else {
            g.mean = members.front().proportions;
        }
        if (r.class_ids.empty()) {
            r.class_ids = members.front().class_ids;
            r.track = members.front().track;
        }
        detail::require_same_scheme(members.front(), LabelHistogram{r.track, r.class_ids, {}, 0});
        r.groups.push_back(std::move(g));
    }
    if (r.reference) detail::require_same_scheme(*r.reference, LabelHistogram{r.track, r.class_ids, {}, 0});
    return r;
}

namespace detail {

inline std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

inline std::string series_color(std::string_view name, std::size_t fallback) {
    if (name == "reference") return "#9e9e9e";
    if (name == "RND") return "#1f77b4";
    if (name == "FAFT") return "#ff7f0e";
    if (name == "2DV") return "#2ca02c";
    static const char* extra[] = {"#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    return extra[fallback % 5];
}

} // namespace detail

// Columns: group, class, mean, sd, then one proportion column per member.
inline std::string render_histogram_tsv(const HistogramReport& r) {
    std::size_t max_members = 0;
    for (const auto& g : r.groups) max_members = std::max(max_members, g.members.size());
    std::string out = "group\tclass\tmean\tsd";
    for (std::size_t i = 0; i < max_members; ++i) out += "\tp" + std::to_string(i + 1);
    out += "\n";
    for (std::size_t c = 0; c < r.class_ids.size(); ++c) {
        if (r.reference) out += "reference\t" + r.class_ids[c] + "\t" + detail::fmt(r.reference->proportions[c]) + "\t\n";
        for (const auto& g : r.groups) {
            out += g.name + "\t" + r.class_ids[c] + "\t" + detail::fmt(g.mean[c]) + "\t" + (g.sd.empty() ? "" : detail::fmt(g.sd[c]));
            for (const auto& m : g.members) out += "\t" + detail::fmt(m.proportions[c]);
            out += "\n";
        }
    }
    return out;
}

// Grouped bars per class: reference first, then each group, with +-SD whiskers.
inline std::string render_histogram_svg(const HistogramReport& r, const std::string& title) {
    const double W = 120.0 + 110.0 * static_cast<double>(r.class_ids.size()), H = 360.0;
    const double left = 60, right = 20, top = 40, bottom = 70;
    const double plot_w = W - left - right, plot_h = H - top - bottom;

    std::vector<std::pair<std::string, std::pair<const std::vector<double>*, const std::vector<double>*>>> series;
    if (r.reference) series.push_back({"reference", {&r.reference->proportions, nullptr}});
    for (const auto& g : r.groups) series.push_back({g.name, {&g.mean, g.sd.empty() ? nullptr : &g.sd}});

    double ymax = 0.0;
    for (const auto& [name, s] : series)
        for (std::size_t c = 0; c < r.class_ids.size(); ++c)
            ymax = std::max(ymax, (*s.first)[c] + (s.second ? (*s.second)[c] : 0.0));
    ymax = std::max(0.1, std::ceil(ymax * 10.0) / 10.0);
    auto ypos = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, ymax) / ymax); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << detail::xml_escape(title) << "</text>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = ymax * t / 5.0;
        os << "<line x1=\"" << left << "\" x2=\"" << W - right << "\" y1=\"" << ypos(v) << "\" y2=\"" << ypos(v)
           << "\" stroke=\"#e0e0e0\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << ypos(v) + 4 << "\" text-anchor=\"end\">" << detail::fmt(v, "%.2f") << "</text>\n";
    }
    const double slot = plot_w / static_cast<double>(r.class_ids.size());
    const double bar = slot * 0.8 / static_cast<double>(series.size());
    for (std::size_t c = 0; c < r.class_ids.size(); ++c) {
        const double x0 = left + slot * static_cast<double>(c) + slot * 0.1;
        for (std::size_t s = 0; s < series.size(); ++s) {
            const double v = (*series[s].second.first)[c];
            const double x = x0 + bar * static_cast<double>(s);
            os << "<rect x=\"" << x << "\" y=\"" << ypos(v) << "\" width=\"" << bar * 0.9 << "\" height=\"" << ypos(0) - ypos(v)
               << "\" fill=\"" << detail::series_color(series[s].first, s) << "\"/>\n";
            if (series[s].second.second) {
                const double sd = (*series[s].second.second)[c];
                const double cx = x + bar * 0.45;
                os << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << ypos(v - sd) << "\" y2=\"" << ypos(v + sd)
                   << "\" stroke=\"black\"/>\n";
            }
        }
        os << "<text x=\"" << x0 + slot * 0.4 << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\">"
           << detail::xml_escape(r.class_ids[c]) << "</text>\n";
    }
    os << "<line x1=\"" << left << "\" x2=\"" << W - right << "\" y1=\"" << ypos(0) << "\" y2=\"" << ypos(0) << "\" stroke=\"black\"/>\n";
    double lx = left;
    for (std::size_t s = 0; s < series.size(); ++s) {
        os << "<rect x=\"" << lx << "\" y=\"" << H - 30 << "\" width=\"12\" height=\"12\" fill=\""
           << detail::series_color(series[s].first, s) << "\"/>\n";
        os << "<text x=\"" << lx + 16 << "\" y=\"" << H - 20 << "\">" << detail::xml_escape(series[s].first) << "</text>\n";
        lx += 24 + 8.0 * static_cast<double>(series[s].first.size()) + 12;
    }
    os << "</svg>\n";
    return os.str();
}

// One line per (curve, checkpoint): label, n_labels, mean, then per-repeat scores.
inline std::string render_curve_tsv(const std::vector<LearningCurve>& curves) {
    std::string out = "curve\tn_labels\ttrain_size\tmean\tscores\n";
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            out += c.label + "\t" + std::to_string(p.n_labels) + "\t" + std::to_string(p.train_size) + "\t" + detail::fmt(p.mean) + "\t";
            for (std::size_t i = 0; i < p.scores.size(); ++i) out += (i ? "," : "") + detail::fmt(p.scores[i]);
            out += "\n";
        }
    return out;
}

// Mean score against label count, one polyline per curve, optional dashed reference line.
inline std::string render_curve_svg(const std::vector<LearningCurve>& curves, const std::string& title,
                                    std::optional<double> reference = std::nullopt) {
    const double W = 560, H = 360, left = 60, right = 20, top = 40, bottom = 60;
    const double plot_w = W - left - right, plot_h = H - top - bottom;
    double xmax = 1, ymin = 1, ymax = 0;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            xmax = std::max(xmax, static_cast<double>(p.n_labels));
            ymin = std::min(ymin, p.mean);
            ymax = std::max(ymax, p.mean);
        }
    if (reference) {
        ymin = std::min(ymin, *reference);
        ymax = std::max(ymax, *reference);
    }
    ymin = std::max(0.0, std::floor(ymin * 10.0 - 0.5) / 10.0);
    ymax = std::min(1.0, std::ceil(ymax * 10.0 + 0.5) / 10.0);
    if (ymax <= ymin) ymax = ymin + 0.1;
    auto xpos = [&](double v) { return left + plot_w * v / xmax; };
    auto ypos = [&](double v) { return top + plot_h * (1.0 - (v - ymin) / (ymax - ymin)); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << detail::xml_escape(title) << "</text>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = ymin + (ymax - ymin) * t / 5.0;
        os << "<line x1=\"" << left << "\" x2=\"" << W - right << "\" y1=\"" << ypos(v) << "\" y2=\"" << ypos(v) << "\" stroke=\"#e0e0e0\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << ypos(v) + 4 << "\" text-anchor=\"end\">" << detail::fmt(v, "%.2f") << "</text>\n";
    }
    if (!curves.empty())
        for (const auto& p : curves.front().points)
            os << "<text x=\"" << xpos(static_cast<double>(p.n_labels)) << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\">"
               << p.n_labels << "</text>\n";
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << H - bottom + 34 << "\" text-anchor=\"middle\">labels per annotator</text>\n";
    if (reference)
        os << "<line x1=\"" << left << "\" x2=\"" << W - right << "\" y1=\"" << ypos(*reference) << "\" y2=\"" << ypos(*reference)
           << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto color = detail::series_color(curves[i].label, i);
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : curves[i].points) os << xpos(static_cast<double>(p.n_labels)) << "," << ypos(p.mean) << " ";
        os << "\"/>\n";
        for (const auto& p : curves[i].points)
            os << "<circle cx=\"" << xpos(static_cast<double>(p.n_labels)) << "\" cy=\"" << ypos(p.mean) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        os << "<rect x=\"" << left + 90.0 * static_cast<double>(i) << "\" y=\"" << H - 18 << "\" width=\"12\" height=\"3\" fill=\"" << color << "\"/>\n";
        os << "<text x=\"" << left + 90.0 * static_cast<double>(i) + 16 << "\" y=\"" << H - 13 << "\">" << detail::xml_escape(curves[i].label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace annolab
