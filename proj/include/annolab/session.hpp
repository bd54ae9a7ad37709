#pragma once

#include <annolab/csv.hpp>
#include <annolab/dataset.hpp>
#include <annolab/error.hpp>
#include <annolab/random.hpp>
#include <annolab/sampling.hpp>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace annolab {

enum class AnnotatorGroup { Expert, NonExpert };

inline std::string_view to_string(AnnotatorGroup g) { return g == AnnotatorGroup::Expert ? "expert" : "non_expert"; }

inline std::optional<AnnotatorGroup> parse_group(std::string_view s) {
    if (s == "expert") return AnnotatorGroup::Expert;
    if (s == "non_expert" || s == "non-expert") return AnnotatorGroup::NonExpert;
    return std::nullopt;
}

// A class assignment, or the "no class applies" marker.
struct LabelValue {
    bool erroneous = false;
    std::string class_id;

    static LabelValue of(std::string id) { return {false, std::move(id)}; }
    static LabelValue erroneous_sample() { return {true, {}}; }

    bool operator==(const LabelValue&) const = default;
};

struct SessionConfig {
    std::string dataset_name;
    std::string track;
    Method method = Method::RND;
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    std::string annotator_id;
    AnnotatorGroup annotator_group = AnnotatorGroup::Expert;
    Metric metric = Metric::Cosine;  // FAFT distance

    bool operator==(const SessionConfig&) const = default;
};

enum class SessionStatus { Active, Complete };

struct LabelRecord {
    LabelValue value;
    std::int64_t timestamp_ms = 0;   // last modification, UTC
    std::size_t sequence = 0;        // position in first-labeling order

    bool operator==(const LabelRecord&) const = default;
};

struct Select {
    std::size_t index;
    bool operator==(const Select&) const = default;
};
struct Enqueue {
    std::size_t index;
    bool operator==(const Enqueue&) const = default;
};
struct Next {
    bool operator==(const Next&) const = default;
};
struct Previous {
    bool operator==(const Previous&) const = default;
};
using NavAction = std::variant<Select, Enqueue, Next, Previous>;

struct LabelEvent {
    std::size_t index = 0;
    LabelValue value;
    std::int64_t timestamp_ms = 0;
    bool operator==(const LabelEvent&) const = default;
};
using SessionEvent = std::variant<LabelEvent, NavAction>;

struct AnnotationSession {
    SessionConfig config;
    ClassScheme scheme;
    std::shared_ptr<const std::vector<std::string>> sample_ids;  // by global index
    SampleOrder order;
    std::vector<std::size_t> visited;
    std::optional<std::size_t> cursor;  // into visited
    std::deque<std::size_t> queue;      // 2DV only
    std::map<std::size_t, LabelRecord> labels;
    std::vector<std::size_t> label_sequence;  // global indices in first-labeling order
    SessionStatus status = SessionStatus::Active;
    Rng rng;  // draws made on the session's behalf (simulated annotators)
    std::vector<SessionEvent> events;

    std::size_t n_total() const { return sample_ids ? sample_ids->size() : 0; }
    std::size_t labeled_count() const { return labels.size(); }
    std::size_t budget() const { return config.budget; }

    std::optional<std::size_t> current() const {
        if (!cursor) return std::nullopt;
        return visited[*cursor];
    }

    // Next order element awaiting its first label (RND/FAFT).
    std::optional<std::size_t> frontier() const {
        if (config.method == Method::TwoDV || labeled_count() >= order.order.size()) return std::nullopt;
        return order.order[labeled_count()];
    }

    bool operator==(const AnnotationSession& o) const;
};

inline bool AnnotationSession::operator==(const AnnotationSession& o) const {
    const bool ids_equal = (sample_ids == o.sample_ids) || (sample_ids && o.sample_ids && *sample_ids == *o.sample_ids);
    return ids_equal && config == o.config && scheme == o.scheme && order == o.order && visited == o.visited &&
           cursor == o.cursor && queue == o.queue && labels == o.labels && label_sequence == o.label_sequence &&
           status == o.status && rng == o.rng && events == o.events;
}

inline std::int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// "2024-01-31T08:15:00.250Z"
inline std::string format_utc(std::int64_t ms) {
    using namespace std::chrono;
    const sys_time<milliseconds> tp{milliseconds{ms}};
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const hh_mm_ss<milliseconds> tod{tp - day};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(tod.hours().count()),
                  static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count()),
                  static_cast<int>(tod.subseconds().count()));
    return buf;
}

inline AnnotationSession create_session(const Dataset& dataset, const SessionConfig& cfg) {
    const ClassScheme& scheme = dataset.scheme(cfg.track);
    const std::size_t n = dataset.size();
    if (cfg.budget == 0 || cfg.budget > n)
        fail(ErrorKind::BudgetExceedsPopulation, "budget " + std::to_string(cfg.budget) + " not in [1, " + std::to_string(n) + "]");
    if (cfg.annotator_id.empty()) fail(ErrorKind::InvalidArgument, "annotator_id must not be empty");

    AnnotationSession s;
    s.config = cfg;
    if (s.config.dataset_name.empty()) s.config.dataset_name = dataset.name;
    s.scheme = scheme;
    s.sample_ids = std::make_shared<const std::vector<std::string>>(dataset.sample_ids());
    switch (cfg.method) {
    case Method::RND: s.order = sample_random(n, cfg.budget, cfg.seed); break;
    case Method::FAFT: s.order = sample_faft(dataset.features, cfg.budget, cfg.seed, cfg.metric); break;
    case Method::TwoDV: s.order = SampleOrder{Method::TwoDV, {}, cfg.seed, std::nullopt, {}}; break;
    }
    if (cfg.method != Method::TwoDV) {
        s.visited.push_back(s.order.order.front());
        s.cursor = 0;
    }
    s.rng = Rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
    return s;
}

namespace detail {

inline void check_index(const AnnotationSession& s, std::size_t idx) {
    if (idx >= s.n_total())
        fail(ErrorKind::UnknownSample, "global index " + std::to_string(idx) + " outside [0, " + std::to_string(s.n_total()) + ")");
}

inline bool contains(const auto& range, std::size_t v) { return std::find(range.begin(), range.end(), v) != range.end(); }

} // namespace detail

// Records a label (first assignment or revision). First-time labels in RND/FAFT
// move the cursor to the next order element; reaching the budget completes the
// session. Revisions stay allowed after completion.
inline void assign_label(AnnotationSession& s, std::size_t idx, const LabelValue& value, std::int64_t timestamp_ms = now_ms()) {
    detail::check_index(s, idx);
    if (value.erroneous) {
        if (!s.scheme.allows_erroneous)
            fail(ErrorKind::UnknownClass, "track '" + s.scheme.track_name + "' does not accept erroneous labels");
    } else if (!s.scheme.contains(value.class_id)) {
        fail(ErrorKind::UnknownClass, "class '" + value.class_id + "' is not in track '" + s.scheme.track_name + "'");
    }

    const auto existing = s.labels.find(idx);
    const bool revision = existing != s.labels.end();
    if (!revision) {
        if (s.status == SessionStatus::Complete)
            fail(ErrorKind::SessionComplete, "all " + std::to_string(s.budget()) + " labels already assigned");
        if (s.config.method != Method::TwoDV && s.frontier() != idx)
            fail(ErrorKind::OutOfOrderLabel, "index " + std::to_string(idx) + " is not the current order element");
    }

    if (revision) {
        existing->second.value = value;
        existing->second.timestamp_ms = timestamp_ms;
    } else {
        s.labels.emplace(idx, LabelRecord{value, timestamp_ms, s.label_sequence.size()});
        s.label_sequence.push_back(idx);
        if (s.config.method == Method::TwoDV) {
            if (!detail::contains(s.visited, idx)) {
                s.visited.push_back(idx);
                s.cursor = s.visited.size() - 1;
            }
        } else if (const auto next = s.frontier()) {
            s.visited.push_back(*next);
            s.cursor = s.visited.size() - 1;
        }
        if (s.labeled_count() == s.budget()) s.status = SessionStatus::Complete;
    }
    s.events.emplace_back(LabelEvent{idx, value, timestamp_ms});
}

inline std::optional<std::size_t> navigate(AnnotationSession& s, const NavAction& action) {
    const bool free_form = s.config.method == Method::TwoDV;
    std::visit(
        [&](const auto& a) {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, Select>) {
                if (!free_form) fail(ErrorKind::InvalidAction, "select is only available in 2DV sessions");
                detail::check_index(s, a.index);
                std::erase(s.queue, a.index);
                if (s.current() != a.index) {
                    s.visited.push_back(a.index);
                    s.cursor = s.visited.size() - 1;
                }
            } else if constexpr (std::is_same_v<A, Enqueue>) {
                if (!free_form) fail(ErrorKind::InvalidAction, "enqueue is only available in 2DV sessions");
                detail::check_index(s, a.index);
                if (!detail::contains(s.queue, a.index)) s.queue.push_back(a.index);
            } else if constexpr (std::is_same_v<A, Next>) {
                if (free_form) {
                    if (s.queue.empty()) fail(ErrorKind::EmptyQueue, "no queued samples");
                    const std::size_t head = s.queue.front();
                    s.queue.pop_front();
                    if (s.current() != head) {
                        s.visited.push_back(head);
                        s.cursor = s.visited.size() - 1;
                    }
                } else if (s.cursor && *s.cursor + 1 < s.visited.size()) {
                    ++*s.cursor;
                }
            } else {
                if (s.cursor && *s.cursor > 0) --*s.cursor;
            }
        },
        action);
    s.events.emplace_back(action);
    return s.current();
}

// ---------------------------------------------------------------------------
// Event log (line-delimited JSON) and replay

namespace detail {

inline nlohmann::json value_to_json(const LabelValue& v) {
    return v.erroneous ? nlohmann::json{{"erroneous", true}} : nlohmann::json{{"class_id", v.class_id}};
}

inline LabelValue value_from_json(const nlohmann::json& j) {
    if (j.value("erroneous", false)) return LabelValue::erroneous_sample();
    return LabelValue::of(j.at("class_id").get<std::string>());
}

inline nlohmann::json event_to_json(const SessionEvent& e) {
    if (const auto* l = std::get_if<LabelEvent>(&e)) {
        nlohmann::json j{{"op", "label"}, {"index", l->index}, {"t", l->timestamp_ms}};
        j.update(value_to_json(l->value));
        return j;
    }
    return std::visit(
        [](const auto& a) -> nlohmann::json {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, Select>) return {{"op", "select"}, {"index", a.index}};
            else if constexpr (std::is_same_v<A, Enqueue>) return {{"op", "enqueue"}, {"index", a.index}};
            else if constexpr (std::is_same_v<A, Next>) return {{"op", "next"}};
            else return {{"op", "previous"}};
        },
        std::get<NavAction>(e));
}

inline SessionEvent event_from_json(const nlohmann::json& j) {
    const std::string op = j.at("op").get<std::string>();
    if (op == "label")
        return LabelEvent{j.at("index").get<std::size_t>(), value_from_json(j), j.at("t").get<std::int64_t>()};
    if (op == "select") return NavAction{Select{j.at("index").get<std::size_t>()}};
    if (op == "enqueue") return NavAction{Enqueue{j.at("index").get<std::size_t>()}};
    if (op == "next") return NavAction{Next{}};
    if (op == "previous") return NavAction{Previous{}};
    fail(ErrorKind::InvalidArgument, "unknown event op '" + op + "'");
}

} // namespace detail

inline std::string export_event_log(const AnnotationSession& s) {
    std::string out;
    for (const auto& e : s.events) out += detail::event_to_json(e).dump() + "\n";
    return out;
}

inline std::vector<SessionEvent> parse_event_log(std::string_view text) {
    std::vector<SessionEvent> events;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        try {
            events.push_back(detail::event_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::InvalidArgument, std::string("bad event line: ") + e.what());
        }
    }
    return events;
}

inline void replay(AnnotationSession& s, std::span<const SessionEvent> events) {
    for (const auto& e : events) {
        if (const auto* l = std::get_if<LabelEvent>(&e)) assign_label(s, l->index, l->value, l->timestamp_ms);
        else navigate(s, std::get<NavAction>(e));
    }
}

// ---------------------------------------------------------------------------
// Snapshots: "ANLSNAP\0" | u32 version | u32 crc32(payload) | u64 payload size | CBOR payload

namespace snapshot {

inline constexpr char magic[8] = {'A', 'N', 'L', 'S', 'N', 'A', 'P', '\0'};
inline constexpr std::uint32_t version = 1;
inline constexpr std::size_t header_size = 8 + 4 + 4 + 8;

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
    return v;
}

inline std::uint32_t crc(std::span<const std::uint8_t> data) {
    return static_cast<std::uint32_t>(::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

} // namespace snapshot

inline std::string save_session(const AnnotationSession& s) {
    using nlohmann::json;
    json labels = json::array();
    for (const auto& [idx, rec] : s.labels)
        labels.push_back({{"index", idx}, {"value", detail::value_to_json(rec.value)}, {"t", rec.timestamp_ms}, {"seq", rec.sequence}});
    json classes = json::array();
    for (const auto& c : s.scheme.classes)
        classes.push_back({{"id", c.id}, {"name", c.display_name}, {"color", c.color}, {"key", std::string(c.shortcut ? 1 : 0, c.shortcut)}});
    json events = json::array();
    for (const auto& e : s.events) events.push_back(detail::event_to_json(e));

    const json payload = {
        {"config",
         {{"dataset", s.config.dataset_name},
          {"track", s.config.track},
          {"method", to_string(s.config.method)},
          {"budget", s.config.budget},
          {"seed", s.config.seed},
          {"annotator_id", s.config.annotator_id},
          {"annotator_group", to_string(s.config.annotator_group)},
          {"metric", to_string(s.config.metric)}}},
        {"scheme", {{"name", s.scheme.track_name}, {"allows_erroneous", s.scheme.allows_erroneous}, {"classes", classes}}},
        {"sample_ids", s.sample_ids ? *s.sample_ids : std::vector<std::string>{}},
        {"order",
         {{"method", to_string(s.order.method)},
          {"indices", s.order.order},
          {"seed", s.order.seed},
          {"metric", s.order.metric ? json(to_string(*s.order.metric)) : json(nullptr)}}},
        {"visited", s.visited},
        {"cursor", s.cursor ? json(*s.cursor) : json(nullptr)},
        {"queue", std::vector<std::size_t>(s.queue.begin(), s.queue.end())},
        {"labels", labels},
        {"label_sequence", s.label_sequence},
        {"complete", s.status == SessionStatus::Complete},
        {"rng", s.rng.state()},
        {"events", events},
    };
    const std::vector<std::uint8_t> body = json::to_cbor(payload);

    std::string out(snapshot::magic, sizeof snapshot::magic);
    snapshot::put_le(out, snapshot::version, 4);
    snapshot::put_le(out, snapshot::crc(body), 4);
    snapshot::put_le(out, body.size(), 8);
    out.append(reinterpret_cast<const char*>(body.data()), body.size());
    return out;
}

inline AnnotationSession load_session(std::string_view bytes) {
    using nlohmann::json;
    const std::span<const std::uint8_t> in(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
    auto corrupt = [](const std::string& why) { fail(ErrorKind::CorruptSnapshot, why); };
    if (in.size() < snapshot::header_size) corrupt("snapshot shorter than its header");
    if (!std::equal(std::begin(snapshot::magic), std::end(snapshot::magic), bytes.begin())) corrupt("bad magic");
    if (snapshot::get_le(in, 8, 4) != snapshot::version) corrupt("unsupported snapshot version");
    const auto expected_crc = static_cast<std::uint32_t>(snapshot::get_le(in, 12, 4));
    const auto size = snapshot::get_le(in, 16, 8);
    if (size != in.size() - snapshot::header_size) corrupt("payload size does not match header");
    const auto body = in.subspan(snapshot::header_size);
    if (snapshot::crc(body) != expected_crc) corrupt("checksum mismatch");

    AnnotationSession s;
    try {
        const json p = json::from_cbor(body.begin(), body.end());
        const json& c = p.at("config");
        s.config.dataset_name = c.at("dataset").get<std::string>();
        s.config.track = c.at("track").get<std::string>();
        s.config.method = parse_method(c.at("method").get<std::string>()).value();
        s.config.budget = c.at("budget").get<std::size_t>();
        s.config.seed = c.at("seed").get<std::uint64_t>();
        s.config.annotator_id = c.at("annotator_id").get<std::string>();
        s.config.annotator_group = parse_group(c.at("annotator_group").get<std::string>()).value();
        s.config.metric = parse_metric(c.at("metric").get<std::string>()).value();

        s.scheme = detail::parse_scheme(p.at("scheme"));
        s.sample_ids = std::make_shared<const std::vector<std::string>>(p.at("sample_ids").get<std::vector<std::string>>());

        const json& o = p.at("order");
        s.order.method = parse_method(o.at("method").get<std::string>()).value();
        s.order.order = o.at("indices").get<std::vector<std::size_t>>();
        s.order.seed = o.at("seed").get<std::uint64_t>();
        if (!o.at("metric").is_null()) s.order.metric = parse_metric(o.at("metric").get<std::string>()).value();

        s.visited = p.at("visited").get<std::vector<std::size_t>>();
        if (!p.at("cursor").is_null()) s.cursor = p.at("cursor").get<std::size_t>();
        const auto q = p.at("queue").get<std::vector<std::size_t>>();
        s.queue.assign(q.begin(), q.end());
        for (const auto& l : p.at("labels"))
            s.labels.emplace(l.at("index").get<std::size_t>(),
                             LabelRecord{detail::value_from_json(l.at("value")), l.at("t").get<std::int64_t>(), l.at("seq").get<std::size_t>()});
        s.label_sequence = p.at("label_sequence").get<std::vector<std::size_t>>();
        s.status = p.at("complete").get<bool>() ? SessionStatus::Complete : SessionStatus::Active;
        if (!s.rng.set_state(p.at("rng").get<std::string>())) corrupt("bad generator state");
        for (const auto& e : p.at("events")) s.events.push_back(detail::event_from_json(e));
    } catch (const json::exception& e) {
        corrupt(std::string("malformed payload: ") + e.what());
    } catch (const std::bad_optional_access&) {
        corrupt("unknown enumeration value in payload");
    } catch (const Error& e) {
        corrupt(e.what());
    }
    if (s.cursor && *s.cursor >= s.visited.size()) corrupt("cursor outside visit history");
    return s;
}

// ---------------------------------------------------------------------------
// CSV export / import

inline constexpr std::string_view csv_header =
    "sample_id,track,method,annotator_id,annotator_group,label,is_erroneous,annotation_order,timestamp_utc";

inline std::string export_csv(const AnnotationSession& s) {
    std::string out(csv_header);
    out.push_back('\n');
    for (std::size_t k = 0; k < s.label_sequence.size(); ++k) {
        const std::size_t idx = s.label_sequence[k];
        const LabelRecord& rec = s.labels.at(idx);
        const csv::Row row{(*s.sample_ids)[idx],
                           s.config.track,
                           std::string(to_string(s.config.method)),
                           s.config.annotator_id,
                           std::string(to_string(s.config.annotator_group)),
                           rec.value.erroneous ? std::string() : rec.value.class_id,
                           rec.value.erroneous ? "true" : "false",
                           std::to_string(k + 1),
                           format_utc(rec.timestamp_ms)};
        out += csv::join_row(row);
        out.push_back('\n');
    }
    return out;
}

// One annotator's labels for one track, in first-labeling order.
struct AnnotatorLabels {
    std::string annotator_id;
    AnnotatorGroup group = AnnotatorGroup::Expert;
    Method method = Method::RND;
    std::string track;
    std::vector<std::pair<std::size_t, LabelValue>> ordered;  // (global index, label)
};

inline AnnotatorLabels annotator_labels(const AnnotationSession& s) {
    AnnotatorLabels a{s.config.annotator_id, s.config.annotator_group, s.config.method, s.config.track, {}};
    for (std::size_t idx : s.label_sequence) a.ordered.emplace_back(idx, s.labels.at(idx).value);
    return a;
}

// Reads an exported CSV back against the dataset it was produced from.
inline AnnotatorLabels import_csv(std::string_view text, const Dataset& dataset) {
    const auto rows = csv::parse(text);
    if (rows.empty()) fail(ErrorKind::InvalidArgument, "empty label file");
    const csv::Header h(rows[0]);
    const auto c_id = h.require("sample_id"), c_track = h.require("track"), c_method = h.require("method"),
               c_ann = h.require("annotator_id"), c_group = h.require("annotator_group"), c_label = h.require("label"),
               c_err = h.require("is_erroneous"), c_order = h.require("annotation_order");
    AnnotatorLabels out;
    std::vector<std::pair<std::size_t, std::pair<std::size_t, LabelValue>>> keyed;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() < 9) fail(ErrorKind::InvalidArgument, "short label line " + std::to_string(r + 1));
        const auto idx = dataset.index_of(row[c_id]);
        if (!idx) fail(ErrorKind::UnknownSample, "label file names unknown sample '" + row[c_id] + "'");
        if (r == 1) {
            out.track = row[c_track];
            out.annotator_id = row[c_ann];
            const auto m = parse_method(row[c_method]);
            const auto g = parse_group(row[c_group]);
            if (!m || !g) fail(ErrorKind::InvalidArgument, "bad method or annotator group on line 2");
            out.method = *m;
            out.group = *g;
        }
        const bool err = row[c_err] == "true";
        keyed.push_back({detail::parse_index(row[c_order], "annotation_order"),
                         {*idx, err ? LabelValue::erroneous_sample() : LabelValue::of(row[c_label])}});
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& k : keyed) out.ordered.push_back(std::move(k.second));
    return out;
}

} // namespace annolab
