#pragma once

#include <annolab/dataset.hpp>
#include <annolab/downstream.hpp>
#include <annolab/pipeline.hpp>
#include <annolab/projection.hpp>
#include <annolab/report.hpp>
#include <annolab/risk.hpp>
#include <annolab/sampling.hpp>
#include <annolab/server.hpp>
#include <annolab/session.hpp>
#include <annolab/synthetic.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace annolab::cli {

enum ExitCode { Ok = 0, Usage = 1, DataError = 2, Internal = 3 };

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) fail(ErrorKind::MissingFile, "cannot write " + p.string());
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) fail(ErrorKind::MissingFile, "no such file: " + p.string());
    return matrix_format::read_file_bytes(p);
}

inline std::vector<AnnotatorLabels> read_labels(const std::vector<std::string>& files, const Dataset& ds) {
    std::vector<AnnotatorLabels> out;
    for (const auto& f : files) out.push_back(import_csv(read_file(f), ds));
    return out;
}

// {"target": {"name", "classes": [...]}, "mapping": {"source_id": "target_id", ...}}
inline ClassRemap read_remap(const std::filesystem::path& p, const ClassScheme& source) {
    try {
        const auto j = nlohmann::json::parse(read_file(p));
        ClassRemap r{source, annolab::detail::parse_scheme(j.at("target")), j.at("mapping").get<std::map<std::string, std::string>>()};
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidArgument, "malformed remap file " + p.string() + ": " + e.what());
    }
}

inline std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& part : annolab::detail::split(s, ',')) out.push_back(annolab::detail::parse_index(part, "list entry"));
    return out;
}

inline std::atomic<bool>& interrupted() {
    static std::atomic<bool> flag{false};
    return flag;
}

extern "C" inline void on_signal(int) { interrupted() = true; }

} // namespace detail

// Runs one command line. Exit codes: 0 ok, 1 usage, 2 data error, 3 internal.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"annolab: sample selection, annotation sessions and label analysis for time-series datasets", "annolab"};
    app.require_subcommand(1);

    // ingest-check
    std::string dataset;
    auto* ingest = app.add_subcommand("ingest-check", "Validate a dataset manifest and print a summary");
    ingest->add_option("dataset", dataset, "Dataset directory or manifest.json")->required();

    // project
    auto* project = app.add_subcommand("project", "Compute or import a 2D projection");
    project->require_subcommand(1);
    std::string proj_out, proj_name, proj_file;
    TsneConfig tcfg;
    auto* pca = project->add_subcommand("pca", "Principal component projection");
    auto* tsne = project->add_subcommand("tsne", "Exact t-SNE projection");
    auto* import = project->add_subcommand("import", "Validate an externally computed projection");
    for (auto* s : {pca, tsne, import}) s->add_option("--dataset", dataset, "Dataset directory")->required();
    for (auto* s : {pca, tsne}) s->add_option("--out", proj_out, "Output coordinate file (matrix format)")->required();
    tsne->add_option("--perplexity", tcfg.perplexity, "Target perplexity")->capture_default_str();
    tsne->add_option("--iterations", tcfg.n_iterations, "Gradient iterations")->capture_default_str();
    tsne->add_option("--learning-rate", tcfg.learning_rate, "Step size")->capture_default_str();
    tsne->add_option("--seed", tcfg.seed, "Initialization seed")->required();
    import->add_option("--file", proj_file, "Coordinate file (N x 2 matrix format)")->required();
    import->add_option("--name", proj_name, "Projection name")->required();

    // sample
    auto* sample = app.add_subcommand("sample", "Print a RND or FAFT sample order, one index per line");
    std::string method_name, metric_name = "cosine", features_file;
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    std::optional<std::size_t> first;
    bool print_ids = false;
    sample->add_option("--method", method_name, "rnd or faft")->required();
    sample->add_option("--budget", budget, "Number of samples")->required();
    sample->add_option("--seed", seed, "Seed")->required();
    sample->add_option("--metric", metric_name, "cosine or euclidean (FAFT)")->capture_default_str();
    sample->add_option("--first", first, "Fixed first index (FAFT)");
    auto* src = sample->add_option_group("source");
    src->add_option("--dataset", dataset, "Dataset directory");
    src->add_option("--features", features_file, "Feature matrix file");
    src->require_option(1);
    sample->add_flag("--ids", print_ids, "Print sample ids instead of indices (needs --dataset)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run a simulated annotator and export its labels");
    std::string track, annotator = "sim", group_name = "expert", csv_out, snapshot_out, events_out;
    double noise = 0.0;
    std::string bias_projection;
    std::vector<double> bias_center;
    double bias_radius = 0.0;
    simulate->add_option("--dataset", dataset, "Dataset directory")->required();
    simulate->add_option("--track", track, "Annotation track")->required();
    simulate->add_option("--method", method_name, "rnd, faft or 2dv")->required();
    simulate->add_option("--budget", budget, "Labels to assign")->required();
    simulate->add_option("--seed", seed, "Seed")->required();
    simulate->add_option("--metric", metric_name, "FAFT metric")->capture_default_str();
    simulate->add_option("--annotator", annotator, "Annotator id")->capture_default_str();
    simulate->add_option("--group", group_name, "expert or non_expert")->capture_default_str();
    simulate->add_option("--noise", noise, "Label noise rate in [0, 1]")->capture_default_str();
    simulate->add_option("--bias-projection", bias_projection, "Projection for 2DV region bias (pca or a manifest projection)");
    simulate->add_option("--center", bias_center, "Region center x y")->expected(2);
    simulate->add_option("--radius", bias_radius, "Region radius");
    simulate->add_option("--out", csv_out, "Label CSV output")->required();
    simulate->add_option("--snapshot", snapshot_out, "Session snapshot output");
    simulate->add_option("--events", events_out, "Event log output");

    // histograms
    auto* hist = app.add_subcommand("histograms", "Label histograms (mean, SD) per sampling method");
    std::vector<std::string> label_files;
    std::string remap_file, tsv_out, svg_out;
    hist->add_option("--dataset", dataset, "Dataset directory")->required();
    hist->add_option("--track", track, "Annotation track")->required();
    hist->add_option("--labels", label_files, "Exported label CSV files")->required();
    hist->add_option("--group", group_name, "expert, non_expert or all");
    hist->add_option("--remap", remap_file, "Class remap JSON");
    hist->add_option("--svg", svg_out, "Grouped bar chart output");

    // risk-report
    auto* risk = app.add_subcommand("risk-report", "Failure risk ranking table");
    std::string risk_input, task;
    std::size_t n_annotators = 1;
    std::vector<std::string> tracks;
    EvalProtocol protocol;
    risk->add_option("--input", risk_input, "Risk input JSON (raw metric inputs per condition)");
    risk->add_option("--dataset", dataset, "Dataset directory (with --labels)");
    risk->add_option("--labels", label_files, "Exported label CSV files");
    risk->add_option("--tracks", tracks, "Tracks summed into the score");
    risk->add_option("--task", task, "Task name");
    risk->add_option("--group", group_name, "expert, non_expert or all");
    risk->add_option("--annotators", n_annotators, "Annotators per condition (1, 2 or group size)");
    risk->add_option("--k", protocol.k, "k-NN neighbours")->capture_default_str();
    risk->add_option("--repeats", protocol.n_repeats, "Repeats")->capture_default_str();
    risk->add_option("--tsv", tsv_out, "Per-metric TSV output");

    // eval-curve
    auto* curve = app.add_subcommand("eval-curve", "k-NN learning curves over annotation checkpoints");
    std::string checkpoints;
    bool merge = false;
    std::optional<double> reference_line;
    curve->add_option("--dataset", dataset, "Dataset directory")->required();
    curve->add_option("--track", track, "Annotation track")->required();
    curve->add_option("--labels", label_files, "Exported label CSV files")->required();
    curve->add_flag("--merge", merge, "Merge annotators per method by majority vote");
    curve->add_option("--checkpoints", checkpoints, "Comma-separated label counts (default 50..300 and the budget)");
    curve->add_option("--group", group_name, "expert, non_expert or all");
    curve->add_option("--k", protocol.k, "k-NN neighbours")->capture_default_str();
    curve->add_option("--repeats", protocol.n_repeats, "Repeats")->capture_default_str();
    curve->add_option("--seed", protocol.seed, "Tie-break seed")->capture_default_str();
    curve->add_option("--metric", metric_name, "cosine or euclidean")->capture_default_str();
    curve->add_option("--remap", remap_file, "Class remap JSON");
    curve->add_option("--reference", reference_line, "Horizontal reference line in the chart");
    curve->add_option("--svg", svg_out, "Line chart output");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    ServerConfig scfg;
    serve->add_option("--dataset", dataset, "Dataset directory")->required();
    serve->add_option("--store", scfg.store_dir, "Session store directory")->required();
    serve->add_option("--host", scfg.host, "Bind address")->capture_default_str();
    serve->add_option("--port", scfg.port, "Port (0: any)")->capture_default_str();
    serve->add_option("--workers", scfg.job_workers, "Projection job workers")->capture_default_str();
    serve->add_flag("--log", scfg.log_requests, "Log requests to standard error");

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic clustered dataset");
    SyntheticSpec sspec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--n", sspec.n_samples, "Samples")->capture_default_str();
    synth->add_option("--dims", sspec.n_dims, "Feature dimensions")->capture_default_str();
    synth->add_option("--classes", sspec.n_classes, "Classes")->capture_default_str();
    synth->add_option("--weights", sspec.class_weights, "Class weights");
    synth->add_option("--spread", sspec.spread, "Cluster standard deviation")->capture_default_str();
    synth->add_option("--seed", sspec.seed, "Seed")->required();
    synth->add_option("--name", sspec.name, "Dataset name")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return Ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const CLI::App* failed = &app;
        for (auto* s : app.get_subcommands()) {
            failed = s;
            for (auto* s2 : s->get_subcommands()) failed = s2;
        }
        err << failed->help();
        return Usage;
    }

    auto metric_of = [&](const std::string& s) {
        const auto m = parse_metric(s);
        if (!m) fail(ErrorKind::InvalidArgument, "unknown metric '" + s + "'");
        return *m;
    };
    auto group_of = [&](const std::string& s) {
        const auto g = parse_group_kind(s);
        if (!g) fail(ErrorKind::InvalidArgument, "unknown group '" + s + "'");
        return *g;
    };

    try {
        if (ingest->parsed()) {
            const Dataset ds = ingest_dataset(dataset);
            out << "name: " << ds.name << "\n";
            out << "samples: " << ds.size() << "\n";
            out << "dims: " << ds.features.n_dims << "\n";
            for (const auto& s : ds.schemes) {
                const auto gt = ds.ground_truth.find(s.track_name);
                out << "track: " << s.track_name << " (" << s.classes.size() << " classes, "
                    << (gt == ds.ground_truth.end() ? 0 : gt->second.size()) << " ground-truth labels)\n";
            }
            for (const auto& d : validate_features(ds.features))
                err << "warning: " << to_string(d.defect) << " feature row " << d.row << "\n";
            for (const auto& [name, path] : ds.projection_files) {
                load_projection(name, path, ds.size());
                out << "projection: " << name << "\n";
            }
            return Ok;
        }

        if (project->parsed()) {
            const Dataset ds = ingest_dataset(dataset);
            if (pca->parsed()) {
                const auto r = compute_pca_full(ds.features);
                save_projection(proj_out, r.projection);
                out << "explained_variance: " << r.explained_variance[0] << " " << r.explained_variance[1] << " of "
                    << r.total_variance << "\n";
            } else if (tsne->parsed()) {
                std::vector<double> trace;
                tsne::Hooks hooks;
                hooks.kl_trace = &trace;
                const auto p = compute_tsne(ds.features, tcfg, hooks);
                save_projection(proj_out, p);
                out << "final_kl: " << (trace.empty() ? 0.0 : trace.back()) << "\n";
            } else {
                const auto p = load_projection(proj_name, proj_file, ds.size());
                out << proj_name << ": " << p.size() << " x 2\n";
            }
            return Ok;
        }

        if (sample->parsed()) {
            const auto method = parse_method(method_name);
            if (!method || *method == Method::TwoDV) fail(ErrorKind::InvalidArgument, "method must be rnd or faft");
            std::optional<Dataset> ds;
            FeatureMatrix features;
            if (!dataset.empty()) {
                ds = ingest_dataset(dataset);
                features = ds->features;
            } else {
                if (!std::filesystem::exists(features_file)) fail(ErrorKind::MissingFile, "no such file: " + features_file);
                features = matrix_format::read(features_file);
            }
            if (print_ids && !ds) fail(ErrorKind::InvalidArgument, "--ids needs --dataset");
            const auto order = *method == Method::RND ? sample_random(features.n_samples, budget, seed)
                                                      : sample_faft(features, budget, seed, metric_of(metric_name), first);
            for (auto i : order.order) out << (print_ids ? ds->samples[i].sample_id : std::to_string(i)) << "\n";
            return Ok;
        }

        if (simulate->parsed()) {
            const Dataset ds = ingest_dataset(dataset);
            const auto method = parse_method(method_name);
            if (!method) fail(ErrorKind::InvalidArgument, "unknown method '" + method_name + "'");
            const auto group = parse_group(group_name);
            if (!group) fail(ErrorKind::InvalidArgument, "unknown annotator group '" + group_name + "'");
            SimulationSpec spec;
            spec.session = SessionConfig{ds.name, track, *method, budget, seed, annotator, *group, metric_of(metric_name)};
            spec.noise_rate = noise;
            if (!bias_projection.empty()) {
                if (bias_center.size() != 2) fail(ErrorKind::InvalidArgument, "--center needs x and y");
                std::shared_ptr<const Projection2D> proj;
                if (bias_projection == "pca") {
                    proj = std::make_shared<const Projection2D>(compute_pca(ds.features));
                } else {
                    for (const auto& [name, path] : ds.projection_files)
                        if (name == bias_projection) proj = std::make_shared<const Projection2D>(load_projection(name, path, ds.size()));
                    if (!proj) fail(ErrorKind::NotFound, "no projection named '" + bias_projection + "'");
                }
                spec.region_bias = RegionBias{proj, bias_center[0], bias_center[1], bias_radius};
            }
            const auto s = simulate_annotation(ds, spec);
            detail::write_file(csv_out, export_csv(s));
            if (!snapshot_out.empty()) detail::write_file(snapshot_out, save_session(s));
            if (!events_out.empty()) detail::write_file(events_out, export_event_log(s));
            out << "labeled: " << s.labeled_count() << "\n";
            return Ok;
        }

        if (hist->parsed()) {
            const Dataset ds = ingest_dataset(dataset);
            const auto sets = detail::read_labels(label_files, ds);
            std::optional<ClassRemap> remap;
            if (!remap_file.empty()) remap = detail::read_remap(remap_file, ds.scheme(track));
            const auto rep = histograms_from_labels(ds, track, sets, group_of(group_name.empty() ? "all" : group_name), remap);
            out << render_histogram_tsv(rep);
            if (!svg_out.empty()) detail::write_file(svg_out, render_histogram_svg(rep, track));
            return Ok;
        }

        if (risk->parsed()) {
            std::vector<RiskReport> reports;
            if (!risk_input.empty()) {
                nlohmann::json doc;
                try {
                    doc = nlohmann::json::parse(detail::read_file(risk_input));
                } catch (const nlohmann::json::exception& e) {
                    fail(ErrorKind::InvalidArgument, std::string("risk input is not valid JSON: ") + e.what());
                }
                for (const auto& [cond, in] : parse_risk_input(doc)) reports.push_back(assess_risk(cond, in));
            } else {
                if (dataset.empty() || label_files.empty()) fail(ErrorKind::InvalidArgument, "need --input, or --dataset with --labels");
                const Dataset ds = ingest_dataset(dataset);
                const auto sets = detail::read_labels(label_files, ds);
                if (tracks.empty())
                    for (const auto& s : ds.schemes)
                        if (ds.ground_truth.count(s.track_name)) tracks.push_back(s.track_name);
                const RiskCondition cond(task.empty() ? ds.name : task, group_of(group_name.empty() ? "all" : group_name), n_annotators);
                std::vector<TrackLabels> tl;
                for (const auto& t : tracks) tl.push_back({t, sets, std::nullopt, 0.10});
                reports.push_back(assess_risk(cond, risk_inputs_from_labels(cond, ds, tl, protocol)));
            }
            out << render_risk_table(reports);
            if (!tsv_out.empty()) detail::write_file(tsv_out, render_risk_tsv(reports));
            return Ok;
        }

        if (curve->parsed()) {
            const Dataset ds = ingest_dataset(dataset);
            const auto sets = detail::read_labels(label_files, ds);
            const auto group = group_of(group_name.empty() ? "all" : group_name);
            protocol.metric = metric_of(metric_name);
            if (!checkpoints.empty()) {
                protocol.checkpoints = detail::parse_list(checkpoints);
            } else {
                std::size_t n = std::numeric_limits<std::size_t>::max();
                for (const auto& a : sets)
                    if (a.track == track && in_group(a, group)) n = std::min(n, a.ordered.size());
                if (n == std::numeric_limits<std::size_t>::max()) fail(ErrorKind::EmptyTrainingSet, "no label sets for '" + track + "'");
                protocol.checkpoints = default_checkpoints(n);
            }
            std::optional<ClassRemap> remap;
            if (!remap_file.empty()) remap = detail::read_remap(remap_file, ds.scheme(track));
            const auto curves = curves_from_labels(ds, track, sets, protocol, !merge, group, remap);
            out << render_curve_tsv(curves);
            if (!svg_out.empty()) detail::write_file(svg_out, render_curve_svg(curves, track, reference_line));
            return Ok;
        }

        if (serve->parsed()) {
            auto server = make_server(dataset, scfg);
            const int port = server->bind();
            err << "listening on " << scfg.host << ":" << port << "\n";
            detail::interrupted() = false;
            std::signal(SIGINT, detail::on_signal);
            std::signal(SIGTERM, detail::on_signal);
            std::jthread watcher([&](std::stop_token st) {
                while (!st.stop_requested() && !detail::interrupted()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
                server->stop();
            });
            server->run();
            watcher.request_stop();
            watcher.join();
            err << "stopped; sessions flushed\n";
            return Ok;
        }

        if (synth->parsed()) {
            const auto ds = make_synthetic_dataset(sspec);
            write_dataset(ds, synth_out);
            out << "wrote " << ds.size() << " samples to " << synth_out << "\n";
            return Ok;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return DataError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return Internal;
    }
    err << app.help();
    return Usage;
}

} // namespace annolab::cli
