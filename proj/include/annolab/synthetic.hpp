#pragma once

#include <annolab/csv.hpp>
#include <annolab/dataset.hpp>
#include <annolab/matrix.hpp>
#include <annolab/random.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

namespace annolab {

// Gaussian clusters, one per class, around random directions at distance
// `center_norm` from the origin (so both cosine and Euclidean geometry separate them).
struct SyntheticSpec {
    std::string name = "synthetic";
    std::string track = "class";
    std::size_t n_samples = 3000;
    std::size_t n_dims = 8;
    std::size_t n_classes = 3;
    std::vector<double> class_weights;  // empty: balanced
    double center_norm = 4.0;
    double spread = 1.0;
    std::uint64_t seed = 0;
};

inline const std::vector<std::string>& palette() {
    static const std::vector<std::string> colors = {"#1f77b4", "#ff7f0e", "#9467bd", "#d62728", "#8c564b",
                                                    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors;
}

inline Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.n_classes < 2 || spec.n_classes > 9) fail(ErrorKind::InvalidArgument, "n_classes must be in [2, 9]");
    if (spec.n_dims < 2) fail(ErrorKind::InvalidArgument, "n_dims must be at least 2");
    if (spec.n_samples < spec.n_classes) fail(ErrorKind::InvalidArgument, "fewer samples than classes");
    std::vector<double> w = spec.class_weights.empty() ? std::vector<double>(spec.n_classes, 1.0) : spec.class_weights;
    if (w.size() != spec.n_classes) fail(ErrorKind::LengthMismatch, "class_weights must have n_classes entries");
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(wsum > 0.0)) fail(ErrorKind::InvalidArgument, "class weights must sum to a positive value");

    Rng rng(spec.seed);
    std::vector<std::vector<double>> centers(spec.n_classes, std::vector<double>(spec.n_dims));
    for (auto& c : centers) {
        double norm = 0.0;
        for (auto& x : c) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : c) x *= spec.center_norm / norm;
    }

    // Class counts by largest remainder, then a seeded shuffle of the class sequence.
    std::vector<std::size_t> counts(spec.n_classes);
    std::vector<std::pair<double, std::size_t>> rema;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        const double exact = static_cast<double>(spec.n_samples) * w[c] / wsum;
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[c];
        rema.emplace_back(-(exact - std::floor(exact)), c);
    }
    std::sort(rema.begin(), rema.end());
    for (std::size_t i = 0; assigned < spec.n_samples; ++i, ++assigned) ++counts[rema[i % rema.size()].second];
    std::vector<std::size_t> cls;
    for (std::size_t c = 0; c < spec.n_classes; ++c) cls.insert(cls.end(), counts[c], c);
    for (std::size_t i = cls.size(); i > 1; --i) std::swap(cls[i - 1], cls[rng.uniform_index(i)]);

    Dataset ds;
    ds.name = spec.name;
    ClassScheme scheme{spec.track, {}, true};
    for (std::size_t c = 0; c < spec.n_classes; ++c)
        scheme.classes.push_back({"c" + std::to_string(c), "class " + std::to_string(c), palette()[c],
                                  static_cast<char>('1' + c)});
    ds.schemes.push_back(scheme);
    ds.features = FeatureMatrix{spec.n_samples, spec.n_dims, std::vector<float>(spec.n_samples * spec.n_dims)};
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "s%06zu", i);
        ds.samples.push_back(Sample{id, i, {}, 1.0});
        for (std::size_t d = 0; d < spec.n_dims; ++d)
            ds.features.values[i * spec.n_dims + d] = static_cast<float>(centers[cls[i]][d] + spec.spread * rng.normal());
        ds.ground_truth[spec.track][id] = scheme.classes[cls[i]].id;
    }
    ds.rebuild_index();
    return ds;
}

// Writes manifest.json, features.bin, samples.csv and ground_truth.csv so that
// ingest_dataset(dir) reproduces the dataset.
inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto write_text = [&](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) fail(ErrorKind::MissingFile, "cannot write " + p.string());
        out << text;
    };

    matrix_format::write(dir / "features.bin", ds.features);

    std::string samples = "sample_id,global_index,duration_s,media\n";
    for (const auto& s : ds.samples) {
        char dur[64];
        std::snprintf(dur, sizeof dur, "%.17g", s.duration_s);
        samples += csv::join_row({s.sample_id, std::to_string(s.global_index), dur, detail::format_media(s.media)}) + "\n";
    }
    write_text(dir / "samples.csv", samples);

    nlohmann::json m;
    m["name"] = ds.name;
    m["features"] = "features.bin";
    m["samples"] = "samples.csv";
    m["tracks"] = nlohmann::json::array();
    for (const auto& sc : ds.schemes) {
        nlohmann::json t{{"name", sc.track_name}, {"allows_erroneous", sc.allows_erroneous}, {"classes", nlohmann::json::array()}};
        for (const auto& c : sc.classes) {
            nlohmann::json cj{{"id", c.id}, {"name", c.display_name}, {"color", c.color}};
            if (c.shortcut) cj["key"] = std::string(1, c.shortcut);
            t["classes"].push_back(cj);
        }
        m["tracks"].push_back(t);
    }
    if (!ds.ground_truth.empty()) {
        std::string gt = "sample_id,track,class_id\n";
        for (const auto& s : ds.samples)
            for (const auto& [track, by_id] : ds.ground_truth)
                if (const auto it = by_id.find(s.sample_id); it != by_id.end())
                    gt += csv::join_row({s.sample_id, track, it->second}) + "\n";
        write_text(dir / "ground_truth.csv", gt);
        m["ground_truth"] = "ground_truth.csv";
    }
    if (!ds.projection_files.empty()) {
        m["projections"] = nlohmann::json::array();
        for (const auto& [name, path] : ds.projection_files)
            m["projections"].push_back({{"name", name}, {"file", fs::relative(path, dir).generic_string()}});
    }
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

} // namespace annolab
