#pragma once

#include <annolab/csv.hpp>
#include <annolab/error.hpp>
#include <annolab/matrix.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace annolab {

struct ClassDef {
    std::string id;
    std::string display_name;
    std::string color;    // "#rrggbb"
    char shortcut = '\0';

    bool operator==(const ClassDef&) const = default;
};

// Label alphabet of one annotation track.
struct ClassScheme {
    std::string track_name;
    std::vector<ClassDef> classes;
    bool allows_erroneous = true;

    std::optional<std::size_t> index_of(std::string_view class_id) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i].id == class_id) return i;
        return std::nullopt;
    }
    bool contains(std::string_view class_id) const { return index_of(class_id).has_value(); }

    std::vector<std::string> class_ids() const {
        std::vector<std::string> ids;
        for (const auto& c : classes) ids.push_back(c.id);
        return ids;
    }

    void validate() const {
        if (classes.size() < 2)
            fail(ErrorKind::InvalidManifest, "track '" + track_name + "' needs at least 2 classes");
        std::set<std::string> ids;
        std::set<char> keys;
        for (const auto& c : classes) {
            if (!ids.insert(c.id).second)
                fail(ErrorKind::InvalidManifest, "duplicate class id '" + c.id + "' in track '" + track_name + "'");
            if (c.shortcut != '\0' && !keys.insert(c.shortcut).second)
                fail(ErrorKind::InvalidManifest,
                     "duplicate shortcut '" + std::string(1, c.shortcut) + "' in track '" + track_name + "'");
        }
    }

    bool operator==(const ClassScheme&) const = default;
};

enum class MediaKind { Video, Audio, Signal };

inline std::string_view to_string(MediaKind k) {
    switch (k) {
    case MediaKind::Video: return "video";
    case MediaKind::Audio: return "audio";
    case MediaKind::Signal: return "signal";
    }
    return "video";
}

inline std::optional<MediaKind> parse_media_kind(std::string_view s) {
    if (s == "video") return MediaKind::Video;
    if (s == "audio") return MediaKind::Audio;
    if (s == "signal") return MediaKind::Signal;
    return std::nullopt;
}

struct MediaRef {
    MediaKind kind = MediaKind::Video;
    std::string uri;                    // relative to the dataset root
    std::vector<std::string> channels;  // channel labels for signal panels

    bool operator==(const MediaRef&) const = default;
};

struct Sample {
    std::string sample_id;
    std::size_t global_index = 0;
    std::vector<MediaRef> media;
    double duration_s = 0.0;

    bool operator==(const Sample&) const = default;
};

// track -> (sample_id -> class_id)
using GroundTruth = std::map<std::string, std::map<std::string, std::string>>;

// Immutable after ingestion. Samples are stored by global index.
struct Dataset {
    std::string name;
    std::filesystem::path root;
    std::vector<Sample> samples;
    FeatureMatrix features;
    std::vector<ClassScheme> schemes;
    GroundTruth ground_truth;
    // Precomputed projections listed in the manifest: name -> file.
    std::vector<std::pair<std::string, std::filesystem::path>> projection_files;

    std::size_t size() const { return samples.size(); }

    const ClassScheme& scheme(std::string_view track) const {
        for (const auto& s : schemes)
            if (s.track_name == track) return s;
        fail(ErrorKind::NotFound, "no track named '" + std::string(track) + "'");
    }

    std::optional<std::size_t> index_of(std::string_view sample_id) const {
        const auto it = id_index_.find(std::string(sample_id));
        if (it == id_index_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<std::string> sample_ids() const {
        std::vector<std::string> ids;
        ids.reserve(samples.size());
        for (const auto& s : samples) ids.push_back(s.sample_id);
        return ids;
    }

    // Ground-truth class per global index (nullopt where unlabeled).
    std::vector<std::optional<std::string>> truth_by_index(std::string_view track) const {
        const auto it = ground_truth.find(std::string(track));
        if (it == ground_truth.end())
            fail(ErrorKind::MissingGroundTruth, "no ground truth for track '" + std::string(track) + "'");
        std::vector<std::optional<std::string>> out(samples.size());
        for (const auto& [id, cls] : it->second) out[*index_of(id)] = cls;
        return out;
    }

    void rebuild_index() {
        id_index_.clear();
        for (const auto& s : samples) id_index_.emplace(s.sample_id, s.global_index);
    }

    bool operator==(const Dataset& o) const {
        return name == o.name && samples == o.samples && features == o.features && schemes == o.schemes &&
               ground_truth == o.ground_truth && projection_files == o.projection_files;
    }

private:
    std::unordered_map<std::string, std::size_t> id_index_;
};

enum class DefectKind { NaN, Inf, ZeroRow };

inline std::string_view to_string(DefectKind d) {
    switch (d) {
    case DefectKind::NaN: return "NaN";
    case DefectKind::Inf: return "Inf";
    case DefectKind::ZeroRow: return "ZeroRow";
    }
    return "NaN";
}

struct FeatureDefect {
    std::size_t row = 0;
    std::optional<std::size_t> column;  // absent for whole-row findings
    DefectKind defect = DefectKind::NaN;

    // Zero rows are warnings: cosine distance treats them as maximally far.
    bool is_warning() const { return defect == DefectKind::ZeroRow; }
    bool operator==(const FeatureDefect&) const = default;
};

using ValidationReport = std::vector<FeatureDefect>;

inline ValidationReport validate_features(const FeatureMatrix& m) {
    ValidationReport report;
    for (std::size_t i = 0; i < m.n_samples; ++i) {
        bool all_zero = true;
        const auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (std::isnan(r[j])) report.push_back({i, j, DefectKind::NaN});
            else if (std::isinf(r[j])) report.push_back({i, j, DefectKind::Inf});
            if (r[j] != 0.0f) all_zero = false;
        }
        if (all_zero && m.n_dims > 0) report.push_back({i, std::nullopt, DefectKind::ZeroRow});
    }
    return report;
}

inline bool has_errors(const ValidationReport& report) {
    return std::any_of(report.begin(), report.end(), [](const FeatureDefect& d) { return !d.is_warning(); });
}

namespace detail {

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::InvalidManifest, "cannot parse " + what + " '" + s + "'");
    }
}

inline std::size_t parse_index(const std::string& s, const std::string& what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail(ErrorKind::InvalidManifest, "cannot parse " + what + " '" + s + "'");
    return v;
}

// "video=media/a.mp4;signal=media/a.bin#acc_x|acc_y"
inline std::vector<MediaRef> parse_media(const std::string& field) {
    std::vector<MediaRef> refs;
    std::size_t start = 0;
    while (start < field.size()) {
        std::size_t end = field.find(';', start);
        if (end == std::string::npos) end = field.size();
        const std::string entry = field.substr(start, end - start);
        start = end + 1;
        if (entry.empty()) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) fail(ErrorKind::InvalidManifest, "media entry '" + entry + "' lacks kind=");
        const auto kind = parse_media_kind(entry.substr(0, eq));
        if (!kind) fail(ErrorKind::InvalidManifest, "unknown media kind in '" + entry + "'");
        MediaRef ref{*kind, entry.substr(eq + 1), {}};
        if (const auto hash = ref.uri.find('#'); hash != std::string::npos) {
            const std::string chans = ref.uri.substr(hash + 1);
            ref.uri.resize(hash);
            std::size_t s = 0;
            while (s <= chans.size()) {
                std::size_t e = chans.find('|', s);
                if (e == std::string::npos) e = chans.size();
                if (e > s) ref.channels.push_back(chans.substr(s, e - s));
                s = e + 1;
            }
        }
        refs.push_back(std::move(ref));
    }
    return refs;
}

inline std::string format_media(const std::vector<MediaRef>& refs) {
    std::string out;
    for (const auto& r : refs) {
        if (!out.empty()) out.push_back(';');
        out += std::string(to_string(r.kind)) + "=" + r.uri;
        for (std::size_t i = 0; i < r.channels.size(); ++i) out += (i ? "|" : "#") + r.channels[i];
    }
    return out;
}

inline std::string read_text(const std::filesystem::path& path) {
    return matrix_format::read_file_bytes(path);
}

inline ClassScheme parse_scheme(const nlohmann::json& j) {
    ClassScheme s;
    s.track_name = j.at("name").get<std::string>();
    s.allows_erroneous = j.value("allows_erroneous", true);
    for (const auto& c : j.at("classes")) {
        ClassDef d;
        d.id = c.at("id").get<std::string>();
        d.display_name = c.value("name", d.id);
        d.color = c.value("color", std::string("#808080"));
        const std::string key = c.value("key", std::string());
        if (key.size() > 1) fail(ErrorKind::InvalidManifest, "shortcut for class '" + d.id + "' must be one character");
        d.shortcut = key.empty() ? '\0' : key[0];
        s.classes.push_back(std::move(d));
    }
    s.validate();
    return s;
}

} // namespace detail

// Manifest layout (manifest.json at the dataset root):
// {
//   "name": "...",
//   "features": "features.bin",
//   "samples": "samples.csv",            columns: sample_id,global_index,duration_s,media
//   "delimiter": ",",                     optional, applies to samples and ground truth
//   "ground_truth": "ground_truth.csv",   optional, columns: sample_id,track,class_id
//   "tracks": [{"name": "...", "allows_erroneous": true,
//               "classes": [{"id": "...", "name": "...", "color": "#rrggbb", "key": "1"}]}],
//   "projections": [{"name": "umap", "file": "umap.bin"}]   optional
// }
inline Dataset ingest_dataset(const std::filesystem::path& manifest_path) {
    namespace fs = std::filesystem;
    fs::path manifest_file = manifest_path;
    if (fs::is_directory(manifest_file)) manifest_file /= "manifest.json";
    if (!fs::exists(manifest_file)) fail(ErrorKind::MissingFile, "manifest not found: " + manifest_file.string());

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_text(manifest_file));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidManifest, std::string("manifest is not valid JSON: ") + e.what());
    }

    Dataset ds;
    ds.root = manifest_file.parent_path();
    try {
        ds.name = j.at("name").get<std::string>();
        const std::string delim = j.value("delimiter", std::string(","));
        if (delim.size() != 1) fail(ErrorKind::InvalidManifest, "delimiter must be a single character");
        const char delimiter = delim[0];

        for (const auto& t : j.at("tracks")) ds.schemes.push_back(detail::parse_scheme(t));

        // Sample table
        const fs::path samples_path = ds.root / j.at("samples").get<std::string>();
        if (!fs::exists(samples_path)) fail(ErrorKind::MissingFile, "sample table not found: " + samples_path.string());
        const auto rows = csv::parse(detail::read_text(samples_path), delimiter);
        if (rows.empty()) fail(ErrorKind::InvalidManifest, "sample table is empty");
        const csv::Header header(rows[0]);
        const auto c_id = header.require("sample_id");
        const auto c_idx = header.require("global_index");
        const auto c_dur = header.find("duration_s");
        const auto c_media = header.find("media");

        const std::size_t n = rows.size() - 1;
        std::vector<std::optional<Sample>> by_index(n);
        std::set<std::string> seen;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            auto cell = [&](std::ptrdiff_t c) -> std::string {
                return c >= 0 && static_cast<std::size_t>(c) < row.size() ? row[c] : std::string();
            };
            Sample s;
            s.sample_id = cell(static_cast<std::ptrdiff_t>(c_id));
            if (s.sample_id.empty()) fail(ErrorKind::InvalidManifest, "empty sample_id on line " + std::to_string(r + 1));
            if (!seen.insert(s.sample_id).second) fail(ErrorKind::DuplicateSampleId, "duplicate sample_id '" + s.sample_id + "'");
            s.global_index = detail::parse_index(cell(static_cast<std::ptrdiff_t>(c_idx)), "global_index");
            const std::string dur = cell(c_dur);
            s.duration_s = dur.empty() ? 0.0 : detail::parse_double(dur, "duration_s");
            if (!(s.duration_s >= 0.0)) fail(ErrorKind::InvalidManifest, "negative duration for '" + s.sample_id + "'");
            s.media = detail::parse_media(cell(c_media));
            if (s.global_index >= n || by_index[s.global_index])
                fail(ErrorKind::InvalidManifest, "global_index values must be a permutation of 0..N-1 (offending '" +
                                                     s.sample_id + "')");
            by_index[s.global_index] = std::move(s);
        }
        ds.samples.reserve(n);
        for (auto& s : by_index) ds.samples.push_back(std::move(*s));
        ds.rebuild_index();

        // Features
        const fs::path feat_path = ds.root / j.at("features").get<std::string>();
        if (!fs::exists(feat_path)) fail(ErrorKind::MissingFile, "feature file not found: " + feat_path.string());
        ds.features = matrix_format::read(feat_path);
        if (ds.features.n_samples != n)
            fail(ErrorKind::DimensionMismatch, "feature file has " + std::to_string(ds.features.n_samples) +
                                                   " rows but the sample table lists " + std::to_string(n));
        const auto report = validate_features(ds.features);
        for (const auto& d : report)
            if (!d.is_warning())
                fail(ErrorKind::InvalidManifest, std::string(to_string(d.defect)) + " feature at row " +
                                                     std::to_string(d.row) + ", column " + std::to_string(*d.column));

        // Ground truth
        if (j.contains("ground_truth")) {
            const fs::path gt_path = ds.root / j.at("ground_truth").get<std::string>();
            if (!fs::exists(gt_path)) fail(ErrorKind::MissingFile, "ground truth not found: " + gt_path.string());
            const auto gt_rows = csv::parse(detail::read_text(gt_path), delimiter);
            if (gt_rows.empty()) fail(ErrorKind::InvalidManifest, "ground truth file is empty");
            const csv::Header gh(gt_rows[0]);
            const auto g_id = gh.require("sample_id");
            const auto g_track = gh.require("track");
            const auto g_class = gh.require("class_id");
            for (std::size_t r = 1; r < gt_rows.size(); ++r) {
                const auto& row = gt_rows[r];
                if (row.size() <= std::max({g_id, g_track, g_class}))
                    fail(ErrorKind::InvalidManifest, "short ground-truth line " + std::to_string(r + 1));
                const auto& id = row[g_id];
                const auto& track = row[g_track];
                const auto& cls = row[g_class];
                if (!ds.index_of(id)) fail(ErrorKind::UnknownSample, "ground truth names unknown sample '" + id + "'");
                const auto* scheme = [&]() -> const ClassScheme* {
                    for (const auto& s : ds.schemes)
                        if (s.track_name == track) return &s;
                    return nullptr;
                }();
                if (!scheme) fail(ErrorKind::InvalidManifest, "ground truth names unknown track '" + track + "'");
                if (!scheme->contains(cls))
                    fail(ErrorKind::UnknownClassInGroundTruth,
                         "class '" + cls + "' for sample '" + id + "' is not in track '" + track + "'");
                ds.ground_truth[track][id] = cls;
            }
        }

        if (j.contains("projections"))
            for (const auto& p : j.at("projections"))
                ds.projection_files.emplace_back(p.at("name").get<std::string>(), ds.root / p.at("file").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidManifest, std::string("malformed manifest: ") + e.what());
    }
    return ds;
}

} // namespace annolab
