#pragma once

#include <annolab/dataset.hpp>
#include <annolab/downstream.hpp>
#include <annolab/error.hpp>
#include <annolab/pipeline.hpp>
#include <annolab/projection.hpp>
#include <annolab/report.hpp>
#include <annolab/risk.hpp>
#include <annolab/session.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

namespace annolab {

using json = nlohmann::json;

// One HTTP status per error kind; anything not listed is a 500.
inline int http_status(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NotFound:
    case ErrorKind::MissingFile:
    case ErrorKind::UnknownSample: return 404;
    case ErrorKind::DuplicateName:
    case ErrorKind::SessionComplete:
    case ErrorKind::OutOfOrderLabel:
    case ErrorKind::InvalidAction:
    case ErrorKind::EmptyQueue:
    case ErrorKind::Cancelled: return 409;
    case ErrorKind::InvalidArgument: return 400;
    case ErrorKind::InvalidManifest:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::DuplicateSampleId:
    case ErrorKind::UnknownClassInGroundTruth:
    case ErrorKind::DegenerateInput:
    case ErrorKind::CalibrationFailure:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::NonFiniteCoordinate:
    case ErrorKind::LengthMismatch:
    case ErrorKind::BudgetExceedsPopulation:
    case ErrorKind::UnknownClass:
    case ErrorKind::CorruptSnapshot:
    case ErrorKind::UnmappedClass:
    case ErrorKind::EmptyLabelSet:
    case ErrorKind::SchemeMismatch:
    case ErrorKind::TooFewHistograms:
    case ErrorKind::EmptyInput:
    case ErrorKind::NoRareClass:
    case ErrorKind::IncompleteRankTable:
    case ErrorKind::EmptyTrainingSet:
    case ErrorKind::EmptyTestSet:
    case ErrorKind::CheckpointExceedsLabels:
    case ErrorKind::MissingGroundTruth: return 422;
    case ErrorKind::BindFailure:
    case ErrorKind::IngestFailure: return 500;
    }
    return 500;
}

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0: any free port
    std::filesystem::path store_dir;
    std::size_t job_workers = 2;
    std::size_t max_tsne_samples = 20000;  // exact t-SNE is quadratic in N
    bool compute_pca = true;
    bool log_requests = false;
};

namespace detail {

inline json scheme_json(const ClassScheme& s, bool has_truth) {
    json j{{"name", s.track_name}, {"allows_erroneous", s.allows_erroneous}, {"has_ground_truth", has_truth},
           {"classes", json::array()}};
    for (const auto& c : s.classes)
        j["classes"].push_back({{"id", c.id}, {"name", c.display_name}, {"color", c.color},
                                {"key", c.shortcut ? std::string(1, c.shortcut) : std::string()}});
    return j;
}

inline std::string mime_for(const std::filesystem::path& p) {
    static const std::map<std::string, std::string> types = {
        {".mp4", "video/mp4"},  {".webm", "video/webm"}, {".ogv", "video/ogg"},  {".wav", "audio/wav"},
        {".mp3", "audio/mpeg"}, {".ogg", "audio/ogg"},   {".flac", "audio/flac"}, {".csv", "text/csv"},
        {".json", "application/json"}};
    const auto it = types.find(p.extension().string());
    return it == types.end() ? "application/octet-stream" : it->second;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace detail

class Server {
public:
    Server(Dataset dataset, ServerConfig cfg) : dataset_(std::move(dataset)), cfg_(std::move(cfg)) {
        sample_ids_ = std::make_shared<const std::vector<std::string>>(dataset_.sample_ids());
        if (cfg_.compute_pca && dataset_.size() >= 2 && dataset_.features.n_dims >= 2) projections_.add(compute_pca(dataset_.features));
        for (const auto& [name, path] : dataset_.projection_files) projections_.import(name, path, dataset_.size());
        load_store();
        routes();
        for (std::size_t i = 0; i < std::max<std::size_t>(1, cfg_.job_workers); ++i)
            workers_.emplace_back([this](std::stop_token st) { job_loop(st); });
    }

    ~Server() { stop(); }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds the listening socket and returns the port.
    int bind() {
        if (cfg_.port == 0) {
            port_ = http_.bind_to_any_port(cfg_.host);
            if (port_ <= 0) fail(ErrorKind::BindFailure, "cannot bind " + cfg_.host);
        } else {
            if (!http_.bind_to_port(cfg_.host, cfg_.port))
                fail(ErrorKind::BindFailure, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
            port_ = cfg_.port;
        }
        return port_;
    }

    // Serves on the calling thread until stop().
    void run() { http_.listen_after_bind(); }

    // Binds and serves on a background thread; returns the port.
    int start() {
        const int p = bind();
        listener_ = std::thread([this] { run(); });
        http_.wait_until_ready();
        return p;
    }

    void stop() {
        if (stopped_.exchange(true)) return;
        http_.stop();
        if (listener_.joinable()) listener_.join();
        {
            std::lock_guard lock(jobs_mutex_);
            for (auto& [id, job] : jobs_) job->stop.request_stop();
        }
        for (auto& w : workers_) w.request_stop();
        jobs_cv_.notify_all();
        workers_.clear();
        flush();
    }

    // Writes every session changed since the last flush to the store.
    void flush() {
        if (cfg_.store_dir.empty()) return;
        std::filesystem::create_directories(cfg_.store_dir);
        std::shared_lock lock(sessions_mutex_);
        for (auto& [id, entry] : sessions_) {
            std::lock_guard g(entry->mutex);
            if (!entry->dirty) continue;
            const auto tmp = cfg_.store_dir / (id + ".snap.tmp");
            {
                std::ofstream out(tmp, std::ios::binary);
                out << save_session(entry->session);
            }
            std::filesystem::rename(tmp, cfg_.store_dir / (id + ".snap"));
            entry->dirty = false;
        }
    }

    int port() const { return port_; }
    const Dataset& dataset() const { return dataset_; }
    ProjectionRegistry& projections() { return projections_; }

private:
    struct SessionEntry {
        std::mutex mutex;
        AnnotationSession session;
        bool dirty = false;
    };

    struct Job {
        std::string id;
        std::string projection;
        TsneConfig config;
        std::stop_source stop;
        mutable std::mutex mutex;
        std::string status = "queued";
        double progress = 0.0;
        std::optional<ErrorKind> error_kind;
        std::string error_message;
    };

    // ---- persistence

    void load_store() {
        namespace fs = std::filesystem;
        if (cfg_.store_dir.empty() || !fs::exists(cfg_.store_dir)) return;
        for (const auto& e : fs::directory_iterator(cfg_.store_dir)) {
            if (e.path().extension() != ".snap") continue;
            const std::string id = e.path().stem().string();
            try {
                auto s = load_session(matrix_format::read_file_bytes(e.path()));
                if (!s.sample_ids || *s.sample_ids != *sample_ids_) {
                    std::cerr << "warning: session " << id << " belongs to a different dataset; skipped\n";
                    continue;
                }
                s.sample_ids = sample_ids_;
                auto entry = std::make_shared<SessionEntry>();
                entry->session = std::move(s);
                sessions_.emplace(id, std::move(entry));
                if (id.size() > 1 && id[0] == 's') {
                    try {
                        next_session_ = std::max<std::uint64_t>(next_session_, std::stoull(id.substr(1)) + 1);
                    } catch (...) {
                    }
                }
            } catch (const Error& err) {
                std::cerr << "warning: cannot load " << e.path() << ": " << err.what() << "\n";
            }
        }
    }

    // ---- helpers

    static void send_json(httplib::Response& res, const json& j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
        send_json(res, {{"error", {{"kind", kind}, {"message", message}}}}, status);
    }

    template <typename F>
    httplib::Server::Handler guarded(F f) {
        return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, http_status(e.kind()), to_string(e.kind()), e.message());
            } catch (const json::exception& e) {
                send_error(res, 400, to_string(ErrorKind::InvalidArgument), std::string("bad request body: ") + e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "Internal", e.what());
            }
        };
    }

    static json body(const httplib::Request& req) {
        if (req.body.empty()) return json::object();
        return json::parse(req.body);
    }

    std::shared_ptr<SessionEntry> session(const std::string& id) {
        std::shared_lock lock(sessions_mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) fail(ErrorKind::NotFound, "no session '" + id + "'");
        return it->second;
    }

    std::size_t sample_index(const json& j, const char* key = "sample_id") const {
        const auto id = j.at(key).get<std::string>();
        const auto idx = dataset_.index_of(id);
        if (!idx) fail(ErrorKind::UnknownSample, "unknown sample '" + id + "'");
        return *idx;
    }

    json sample_ref(std::optional<std::size_t> idx) const {
        if (!idx) return nullptr;
        return {{"index", *idx}, {"sample_id", dataset_.samples[*idx].sample_id}};
    }

    json session_summary(const std::string& id, const AnnotationSession& s) const {
        json queue = json::array();
        for (auto q : s.queue) queue.push_back(dataset_.samples[q].sample_id);
        return {{"session_id", id},
                {"status", s.status == SessionStatus::Complete ? "complete" : "active"},
                {"labeled_count", s.labeled_count()},
                {"budget", s.budget()},
                {"n_total", s.n_total()},
                {"current", sample_ref(s.current())},
                {"queue", queue}};
    }

    json session_full(const std::string& id, const AnnotationSession& s) const {
        json j = session_summary(id, s);
        const auto& c = s.config;
        j["config"] = {{"dataset_name", c.dataset_name}, {"track", c.track}, {"method", to_string(c.method)},
                       {"budget", c.budget}, {"seed", c.seed}, {"annotator_id", c.annotator_id},
                       {"annotator_group", to_string(c.annotator_group)}, {"metric", to_string(c.metric)}};
        json labels = json::object();
        for (const auto& [idx, rec] : s.labels) {
            json v = detail::value_to_json(rec.value);
            v["timestamp"] = format_utc(rec.timestamp_ms);
            v["order"] = rec.sequence + 1;
            labels[dataset_.samples[idx].sample_id] = v;
        }
        j["labels"] = labels;
        j["can_go_previous"] = s.cursor.has_value() && *s.cursor > 0;
        return j;
    }

    static LabelValue parse_value(const json& v) {
        if (v.is_string()) return LabelValue::of(v.get<std::string>());
        if (v.is_object()) return detail::value_from_json(v);
        fail(ErrorKind::InvalidArgument, "label value must be a class id or {\"erroneous\": true}");
    }

    SessionConfig parse_session_config(const json& j) const {
        SessionConfig c;
        c.dataset_name = dataset_.name;
        c.track = j.at("track").get<std::string>();
        dataset_.scheme(c.track);
        const auto method = parse_method(j.at("method").get<std::string>());
        if (!method) fail(ErrorKind::InvalidArgument, "unknown method '" + j.at("method").get<std::string>() + "'");
        c.method = *method;
        c.budget = j.at("budget").get<std::size_t>();
        c.seed = j.value("seed", std::uint64_t{0});
        c.annotator_id = j.at("annotator_id").get<std::string>();
        const auto group = parse_group(j.value("annotator_group", std::string("expert")));
        if (!group) fail(ErrorKind::InvalidArgument, "unknown annotator group");
        c.annotator_group = *group;
        const auto metric = parse_metric(j.value("metric", std::string("cosine")));
        if (!metric) fail(ErrorKind::InvalidArgument, "unknown metric");
        c.metric = *metric;
        return c;
    }

    std::vector<AnnotatorLabels> all_label_sets() {
        std::vector<AnnotatorLabels> out;
        std::shared_lock lock(sessions_mutex_);
        for (auto& [id, entry] : sessions_) {
            std::lock_guard g(entry->mutex);
            if (entry->session.labeled_count() > 0) out.push_back(annotator_labels(entry->session));
        }
        return out;
    }

    static GroupKind group_param(const httplib::Request& req) {
        if (!req.has_param("group")) return GroupKind::All;
        const auto g = parse_group_kind(req.get_param_value("group"));
        if (!g) fail(ErrorKind::InvalidArgument, "unknown group '" + req.get_param_value("group") + "'");
        return *g;
    }

    static std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback) {
        if (!req.has_param(name)) return fallback;
        const auto v = req.get_param_value(name);
        try {
            std::size_t pos = 0;
            const auto n = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return n;
        } catch (const std::exception&) {
            fail(ErrorKind::InvalidArgument, std::string("parameter '") + name + "' must be a nonnegative integer");
        }
    }

    EvalProtocol protocol_params(const httplib::Request& req) const {
        EvalProtocol p;
        p.k = size_param(req, "k", p.k);
        p.n_repeats = size_param(req, "repeats", p.n_repeats);
        p.seed = size_param(req, "seed", 0);
        if (req.has_param("metric")) {
            const auto m = parse_metric(req.get_param_value("metric"));
            if (!m) fail(ErrorKind::InvalidArgument, "unknown metric");
            p.metric = *m;
        }
        return p;
    }

    // ---- routes

    void routes() {
        if (cfg_.log_requests)
            http_.set_logger([](const httplib::Request& req, const httplib::Response& res) {
                std::cerr << req.method << " " << req.path << " -> " << res.status << "\n";
            });

        http_.Get("/api/dataset", guarded([this](const httplib::Request&, httplib::Response& res) {
            json j{{"name", dataset_.name}, {"n_samples", dataset_.size()}, {"n_dims", dataset_.features.n_dims},
                   {"tracks", json::array()}, {"samples", json::array()}};
            for (const auto& s : dataset_.schemes) j["tracks"].push_back(detail::scheme_json(s, dataset_.ground_truth.count(s.track_name) > 0));
            for (const auto& s : dataset_.samples) {
                json media = json::array();
                for (const auto& m : s.media) media.push_back({{"kind", to_string(m.kind)}, {"channels", m.channels}});
                j["samples"].push_back({{"sample_id", s.sample_id}, {"duration_s", s.duration_s}, {"media", media}});
            }
            send_json(res, j);
        }));

        http_.Get("/api/projections", guarded([this](const httplib::Request&, httplib::Response& res) {
            json j = json::array();
            for (const auto& name : projections_.names()) {
                const auto p = projections_.get(name);
                j.push_back({{"name", name}, {"provenance", provenance_label(p->provenance)}, {"n", p->size()}});
            }
            send_json(res, j);
        }));

        http_.Get(R"(/api/projections/([^/]+)/coords)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto p = projections_.get(req.matches[1]);
            res.set_content(matrix_format::encode(p->as_matrix()), "application/octet-stream");
        }));

        http_.Post("/api/projections/tsne", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json j = body(req);
            auto job = std::make_shared<Job>();
            job->projection = j.value("name", std::string("tsne"));
            TsneConfig& c = job->config;
            c.perplexity = j.value("perplexity", c.perplexity);
            c.n_iterations = j.value("n_iterations", c.n_iterations);
            c.early_exaggeration = j.value("early_exaggeration", c.early_exaggeration);
            c.exaggeration_iterations = j.value("exaggeration_iterations", c.exaggeration_iterations);
            c.learning_rate = j.value("learning_rate", c.learning_rate);
            c.seed = j.value("seed", c.seed);
            if (dataset_.size() > cfg_.max_tsne_samples)
                fail(ErrorKind::InvalidArgument, "exact t-SNE is limited to " + std::to_string(cfg_.max_tsne_samples) +
                                                     " samples; import a precomputed projection instead");
            if (dataset_.size() < 4) fail(ErrorKind::DegenerateInput, "t-SNE needs at least 4 points");
            c.validate(dataset_.size());
            if (projections_.contains(job->projection)) fail(ErrorKind::DuplicateName, "projection '" + job->projection + "' exists");
            {
                std::lock_guard lock(jobs_mutex_);
                job->id = "j" + std::to_string(++job_counter_);
                jobs_.emplace(job->id, job);
                queue_.push_back(job);
            }
            jobs_cv_.notify_one();
            send_json(res, {{"job_id", job->id}, {"status", "queued"}}, 202);
        }));

        http_.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, job_json(*find_job(req.matches[1])));
        }));

        http_.Delete(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto job = find_job(req.matches[1]);
            job->stop.request_stop();
            send_json(res, job_json(*job));
        }));

        http_.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto cfg = parse_session_config(body(req));
            auto entry = std::make_shared<SessionEntry>();
            entry->session = create_session(dataset_, cfg);
            entry->session.sample_ids = sample_ids_;
            entry->dirty = true;
            std::string id;
            {
                std::unique_lock lock(sessions_mutex_);
                char buf[32];
                std::snprintf(buf, sizeof buf, "s%04llu", static_cast<unsigned long long>(next_session_++));
                id = buf;
                sessions_.emplace(id, entry);
            }
            std::lock_guard g(entry->mutex);
            send_json(res, session_full(id, entry->session), 201);
        }));

        http_.Get("/api/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
            json j = json::array();
            std::shared_lock lock(sessions_mutex_);
            for (auto& [id, entry] : sessions_) {
                std::lock_guard g(entry->mutex);
                json s = session_summary(id, entry->session);
                s["annotator_id"] = entry->session.config.annotator_id;
                s["method"] = to_string(entry->session.config.method);
                s["track"] = entry->session.config.track;
                j.push_back(s);
            }
            send_json(res, j);
        }));

        http_.Get(R"(/api/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto e = session(req.matches[1]);
            std::lock_guard g(e->mutex);
            send_json(res, session_full(req.matches[1], e->session));
        }));

        http_.Post(R"(/api/sessions/([^/]+)/labels)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json j = body(req);
            const auto idx = sample_index(j);
            const auto value = parse_value(j.at("value"));
            auto e = session(req.matches[1]);
            std::lock_guard g(e->mutex);
            assign_label(e->session, idx, value);
            e->dirty = true;
            send_json(res, session_summary(req.matches[1], e->session));
        }));

        http_.Post(R"(/api/sessions/([^/]+)/queue)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto idx = sample_index(body(req));
            auto e = session(req.matches[1]);
            std::lock_guard g(e->mutex);
            navigate(e->session, Enqueue{idx});
            e->dirty = true;
            send_json(res, session_summary(req.matches[1], e->session));
        }));

        http_.Post(R"(/api/sessions/([^/]+)/navigate)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json j = body(req);
            const auto action = j.at("action").get<std::string>();
            NavAction a;
            if (action == "select") a = Select{sample_index(j)};
            else if (action == "enqueue") a = Enqueue{sample_index(j)};
            else if (action == "next") a = Next{};
            else if (action == "previous") a = Previous{};
            else fail(ErrorKind::InvalidArgument, "unknown action '" + action + "'");
            auto e = session(req.matches[1]);
            std::lock_guard g(e->mutex);
            navigate(e->session, a);
            e->dirty = true;
            send_json(res, session_summary(req.matches[1], e->session));
        }));

        http_.Get(R"(/api/sessions/([^/]+)/export\.csv)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto e = session(req.matches[1]);
            std::lock_guard g(e->mutex);
            res.set_content(export_csv(e->session), "text/csv");
        }));

        http_.Get(R"(/media/([^/]+)/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            serve_media(req.matches[1], req.matches[2], res);
        }));

        http_.Get("/api/analysis/histograms", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto track = req.get_param_value("track");
            dataset_.scheme(track);
            const auto rep = histograms_from_labels(dataset_, track, all_label_sets(), group_param(req));
            const auto format = req.has_param("format") ? req.get_param_value("format") : "json";
            if (format == "tsv") return res.set_content(render_histogram_tsv(rep), "text/tab-separated-values");
            if (format == "svg") return res.set_content(render_histogram_svg(rep, track), "image/svg+xml");
            json j{{"track", rep.track}, {"class_ids", rep.class_ids}, {"groups", json::array()}};
            j["reference"] = rep.reference ? json(rep.reference->proportions) : json(nullptr);
            for (const auto& g : rep.groups) {
                json members = json::array();
                for (const auto& m : g.members) members.push_back({{"proportions", m.proportions}, {"support", m.support}});
                j["groups"].push_back({{"name", g.name}, {"mean", g.mean}, {"sd", g.sd}, {"members", members}});
            }
            send_json(res, j);
        }));

        http_.Get("/api/analysis/risk", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto group = group_param(req);
            const std::size_t n = size_param(req, "n", 1);
            RiskCondition cond(req.has_param("task") ? req.get_param_value("task") : dataset_.name, group, n);
            std::vector<std::string> tracks =
                req.has_param("tracks") ? detail::split(req.get_param_value("tracks"), ',') : std::vector<std::string>{};
            if (tracks.empty())
                for (const auto& s : dataset_.schemes)
                    if (dataset_.ground_truth.count(s.track_name)) tracks.push_back(s.track_name);
            const auto sets = all_label_sets();
            std::vector<TrackLabels> tl;
            for (const auto& t : tracks) {
                dataset_.scheme(t);
                TrackLabels x{t, {}, std::nullopt, 0.10};
                for (const auto& a : sets)
                    if (a.track == t) x.sets.push_back(a);
                tl.push_back(std::move(x));
            }
            const auto report = assess_risk(cond, risk_inputs_from_labels(cond, dataset_, tl, protocol_params(req)));
            const auto format = req.has_param("format") ? req.get_param_value("format") : "json";
            if (format == "text") return res.set_content(render_risk_table({report}), "text/plain");
            if (format == "tsv") return res.set_content(render_risk_tsv({report}), "text/tab-separated-values");
            send_json(res, to_json(report));
        }));

        http_.Get("/api/analysis/curve", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto track = req.get_param_value("track");
            dataset_.scheme(track);
            const auto group = group_param(req);
            const auto sets = all_label_sets();
            EvalProtocol p = protocol_params(req);
            if (req.has_param("checkpoints")) {
                p.checkpoints.clear();
                for (const auto& c : detail::split(req.get_param_value("checkpoints"), ','))
                    p.checkpoints.push_back(detail::parse_index(c, "checkpoint"));
            } else {
                std::size_t n = std::numeric_limits<std::size_t>::max();
                for (const auto& a : sets)
                    if (a.track == track && in_group(a, group)) n = std::min(n, a.ordered.size());
                if (n == std::numeric_limits<std::size_t>::max()) fail(ErrorKind::EmptyTrainingSet, "no label sets for '" + track + "'");
                p.checkpoints = default_checkpoints(n);
            }
            const bool separate = req.has_param("separate") && req.get_param_value("separate") != "0" &&
                                  req.get_param_value("separate") != "false";
            const auto curves = curves_from_labels(dataset_, track, sets, p, separate, group);
            const auto format = req.has_param("format") ? req.get_param_value("format") : "json";
            if (format == "tsv") return res.set_content(render_curve_tsv(curves), "text/tab-separated-values");
            if (format == "svg") return res.set_content(render_curve_svg(curves, track), "image/svg+xml");
            json j = json::array();
            for (const auto& c : curves) {
                json pts = json::array();
                for (const auto& pt : c.points)
                    pts.push_back({{"n_labels", pt.n_labels}, {"mean", pt.mean}, {"scores", pt.scores}, {"train_size", pt.train_size}});
                j.push_back({{"method", c.label}, {"points", pts}});
            }
            send_json(res, j);
        }));
    }

    void serve_media(const std::string& sample_id, const std::string& kind_name, httplib::Response& res) {
        namespace fs = std::filesystem;
        const auto idx = dataset_.index_of(sample_id);
        if (!idx) fail(ErrorKind::NotFound, "unknown sample '" + sample_id + "'");
        const auto kind = parse_media_kind(kind_name);
        if (!kind) fail(ErrorKind::NotFound, "unknown media kind '" + kind_name + "'");
        const MediaRef* ref = nullptr;
        for (const auto& m : dataset_.samples[*idx].media)
            if (m.kind == *kind) ref = &m;
        if (!ref) fail(ErrorKind::NotFound, "sample '" + sample_id + "' has no " + kind_name + " media");

        const fs::path root = fs::weakly_canonical(dataset_.root);
        const fs::path path = fs::weakly_canonical(root / ref->uri);
        const auto rel = path.lexically_relative(root);
        if (rel.empty() || *rel.begin() == "..") fail(ErrorKind::NotFound, "media path escapes the dataset root");
        if (!fs::is_regular_file(path)) fail(ErrorKind::MissingFile, "media file missing for '" + sample_id + "'");

        const auto size = static_cast<std::size_t>(fs::file_size(path));
        auto file = std::make_shared<std::ifstream>(path, std::ios::binary);
        res.set_header("Accept-Ranges", "bytes");
        res.set_content_provider(size, detail::mime_for(path),
                                 [file](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
                                     std::vector<char> buf(std::min<std::size_t>(length, 1 << 16));
                                     file->clear();
                                     file->seekg(static_cast<std::streamoff>(offset));
                                     file->read(buf.data(), static_cast<std::streamsize>(buf.size()));
                                     const auto got = static_cast<std::size_t>(file->gcount());
                                     if (got == 0) return false;
                                     return sink.write(buf.data(), got);
                                 });
    }

    // ---- jobs

    std::shared_ptr<Job> find_job(const std::string& id) {
        std::lock_guard lock(jobs_mutex_);
        const auto it = jobs_.find(id);
        if (it == jobs_.end()) fail(ErrorKind::NotFound, "no job '" + id + "'");
        return it->second;
    }

    static json job_json(const Job& job) {
        std::lock_guard g(job.mutex);
        json j{{"job_id", job.id}, {"status", job.status}, {"progress", job.progress}, {"projection", job.projection}};
        if (job.error_kind) j["error"] = {{"kind", to_string(*job.error_kind)}, {"message", job.error_message}};
        return j;
    }

    void job_loop(std::stop_token st) {
        while (!st.stop_requested()) {
            std::shared_ptr<Job> job;
            {
                std::unique_lock lock(jobs_mutex_);
                jobs_cv_.wait(lock, st, [&] { return !queue_.empty(); });
                if (st.stop_requested()) return;
                job = queue_.front();
                queue_.pop_front();
            }
            {
                std::lock_guard g(job->mutex);
                if (job->stop.stop_requested()) {
                    job->status = "cancelled";
                    continue;
                }
                job->status = "running";
            }
            try {
                tsne::Hooks hooks;
                hooks.stop = job->stop.get_token();
                hooks.on_progress = [job](double f) {
                    std::lock_guard g(job->mutex);
                    job->progress = f;
                };
                projections_.add(compute_tsne(dataset_.features, job->config, hooks, job->projection));
                std::lock_guard g(job->mutex);
                job->status = "done";
                job->progress = 1.0;
            } catch (const Error& e) {
                std::lock_guard g(job->mutex);
                job->status = e.kind() == ErrorKind::Cancelled ? "cancelled" : "failed";
                job->error_kind = e.kind();
                job->error_message = e.message();
            } catch (const std::exception& e) {
                std::lock_guard g(job->mutex);
                job->status = "failed";
                job->error_message = e.what();
            }
        }
    }

    Dataset dataset_;
    ServerConfig cfg_;
    std::shared_ptr<const std::vector<std::string>> sample_ids_;
    ProjectionRegistry projections_;
    httplib::Server http_;
    std::thread listener_;
    int port_ = 0;
    std::atomic<bool> stopped_{false};

    std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
    std::uint64_t next_session_ = 1;

    std::mutex jobs_mutex_;
    std::condition_variable_any jobs_cv_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::deque<std::shared_ptr<Job>> queue_;
    std::uint64_t job_counter_ = 0;
    std::vector<std::jthread> workers_;
};

// Loads the dataset and constructs a server; ingest problems become IngestFailure.
inline std::unique_ptr<Server> make_server(const std::filesystem::path& dataset_root, ServerConfig cfg) {
    Dataset ds;
    try {
        ds = ingest_dataset(dataset_root);
    } catch (const Error& e) {
        fail(ErrorKind::IngestFailure, e.what());
    }
    return std::make_unique<Server>(std::move(ds), std::move(cfg));
}

} // namespace annolab
