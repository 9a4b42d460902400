#include "coml/telemetry.hpp"

#include "coml/errors.hpp"
#include "coml/ops.hpp"
#include "coml/storage.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace coml {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <class... F>
struct overloaded : F... {
    using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

Digest digest_from_json(const json& j, const char* field) {
    auto d = Digest::parse(j.at(field).get<std::string>());
    if (!d) throw Error(ErrorCode::MalformedOp, std::string("bad digest in field ") + field);
    return *d;
}

}  // namespace

std::string_view kind_name(const EventKind& kind) {
    return std::visit(overloaded{
                          [](const event::SampleAdded&) { return std::string_view("sample_added"); },
                          [](const event::SampleDeleted&) { return std::string_view("sample_deleted"); },
                          [](const event::ModelTrained&) { return std::string_view("model_trained"); },
                          [](const event::LiveClassificationStarted&) {
                              return std::string_view("live_classification_started");
                          },
                          [](const event::GameStarted&) { return std::string_view("game_started"); },
                          [](const event::GameEnded&) { return std::string_view("game_ended"); },
                      },
                      kind);
}

std::string to_ndjson_line(const ActivityEvent& e) {
    ordered_json j;
    j["event_id"] = e.event_id.str();
    j["project"] = e.project.str();
    j["device"] = e.device.str();
    j["ts"] = e.ts;
    j["kind"] = kind_name(e.kind);
    std::visit(overloaded{
                   [&](const event::SampleAdded& k) {
                       j["sample_id"] = k.sample_id.str();
                       j["label"] = k.label.str();
                       j["split"] = to_string(k.split);
                       j["digest"] = k.digest.hex();
                   },
                   [&](const event::SampleDeleted& k) { j["sample_id"] = k.sample_id.str(); },
                   [&](const event::ModelTrained& k) {
                       j["version"] = k.version;
                       ordered_json per = ordered_json::object();
                       for (const auto& [label, tally] : k.per_label_test_correct) {
                           per[label.str()] = {{"correct", tally.correct}, {"total", tally.total}};
                       }
                       j["per_label_test_correct"] = std::move(per);
                   },
                   [&](const event::LiveClassificationStarted&) {},
                   [&](const event::GameStarted& k) { j["seed"] = k.seed; },
                   [&](const event::GameEnded& k) { j["total_score"] = k.total_score; },
               },
               e.kind);
    return j.dump();
}

ActivityEvent event_from_json(const json& j) {
    ActivityEvent e;
    e.event_id = id_from_json<EventId>(j, "event_id");
    e.project = id_from_json<ProjectId>(j, "project");
    e.device = id_from_json<DeviceId>(j, "device");
    e.ts = j.at("ts").get<std::int64_t>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "sample_added") {
        e.kind = event::SampleAdded{id_from_json<SampleId>(j, "sample_id"), id_from_json<LabelId>(j, "label"),
                                    split_from_string(j.at("split").get<std::string>()), digest_from_json(j, "digest")};
    } else if (kind == "sample_deleted") {
        e.kind = event::SampleDeleted{id_from_json<SampleId>(j, "sample_id")};
    } else if (kind == "model_trained") {
        event::ModelTrained k;
        k.version = j.at("version").get<std::uint64_t>();
        for (const auto& [label, tally] : j.at("per_label_test_correct").items()) {
            auto id = LabelId::parse(label);
            if (!id) throw Error(ErrorCode::MalformedOp, "bad label id in per_label_test_correct");
            k.per_label_test_correct[*id] =
                event::LabelTally{tally.at("correct").get<std::size_t>(), tally.at("total").get<std::size_t>()};
        }
        e.kind = std::move(k);
    } else if (kind == "live_classification_started") {
        e.kind = event::LiveClassificationStarted{};
    } else if (kind == "game_started") {
        e.kind = event::GameStarted{j.at("seed").get<std::uint64_t>()};
    } else if (kind == "game_ended") {
        e.kind = event::GameEnded{j.at("total_score").get<double>()};
    } else {
        throw Error(ErrorCode::MalformedOp, "unknown event kind " + kind);
    }
    return e;
}

std::vector<ActivityEvent> parse_event_log(std::string_view text) {
    std::vector<ActivityEvent> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(event_from_json(json::parse(line)));
        } catch (const std::exception& ex) {
            throw Error(ErrorCode::MalformedOp, "event log line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

std::vector<ActivityEvent> read_event_log(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return parse_event_log(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string write_event_log(const std::vector<ActivityEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += to_ndjson_line(e);
        out += '\n';
    }
    return out;
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(*path_)) {
        events_ = read_event_log(*path_);
        for (const auto& e : events_) {
            auto& last = last_ts_[e.device];
            last = std::max(last, e.ts);
        }
    }
}

ActivityEvent EventLog::record(ActivityEvent event) {
    std::lock_guard lock(mu_);
    auto it = last_ts_.find(event.device);
    if (it != last_ts_.end() && event.ts < it->second) event.ts = it->second;
    if (path_) append_durably(*path_, to_ndjson_line(event) + "\n");
    last_ts_[event.device] = event.ts;
    events_.push_back(event);
    return event;
}

std::vector<ActivityEvent> EventLog::snapshot() const {
    std::lock_guard lock(mu_);
    return events_;
}

std::size_t EventLog::size() const {
    std::lock_guard lock(mu_);
    return events_.size();
}

RetrainStats retrain_stats(const std::vector<ActivityEvent>& log) {
    RetrainStats s;
    for (const auto& e : log) {
        if (!std::holds_alternative<event::ModelTrained>(e.kind)) continue;
        ++s.per_team_total[e.project];
        ++s.per_device_totals[e.device];
    }
    if (s.per_team_total.empty()) return s;
    const double n = static_cast<double>(s.per_team_total.size());
    double sum = 0.0;
    s.min = s.per_team_total.begin()->second;
    for (const auto& [team, count] : s.per_team_total) {
        sum += static_cast<double>(count);
        s.min = std::min(s.min, count);
        s.max = std::max(s.max, count);
    }
    s.mean = sum / n;
    if (s.per_team_total.size() > 1) {
        double ss = 0.0;
        for (const auto& [team, count] : s.per_team_total) {
            const double d = static_cast<double>(count) - s.mean;
            ss += d * d;
        }
        s.sd = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

ordered_json to_json(const RetrainStats& s) {
    ordered_json teams = ordered_json::object();
    for (const auto& [id, n] : s.per_team_total) teams[id.str()] = n;
    ordered_json devices = ordered_json::object();
    for (const auto& [id, n] : s.per_device_totals) devices[id.str()] = n;
    ordered_json out;
    out["per_team_total"] = std::move(teams);
    out["per_device_totals"] = std::move(devices);
    out["mean"] = s.mean;
    out["sd"] = s.sd;
    out["min"] = s.min;
    out["max"] = s.max;
    return out;
}

TimelineWindow full_window(const std::vector<ActivityEvent>& log) {
    if (log.empty()) throw Error(ErrorCode::EmptyWindow, "the log has no events");
    auto [lo, hi] = std::minmax_element(log.begin(), log.end(),
                                        [](const ActivityEvent& a, const ActivityEvent& b) { return a.ts < b.ts; });
    return TimelineWindow{lo->ts, hi->ts};
}

Timeline timeline_export(const std::vector<ActivityEvent>& log, TimelineWindow window) {
    std::set<SampleId> deleted;
    for (const auto& e : log) {
        if (const auto* d = std::get_if<event::SampleDeleted>(&e.kind)) deleted.insert(d->sample_id);
    }

    std::map<DeviceId, TimelineRow> rows;
    for (const auto& e : log) {
        if (e.ts < window.start_ms || e.ts > window.end_ms) continue;
        auto& row = rows[e.device];
        row.device = e.device;
        if (std::holds_alternative<event::ModelTrained>(e.kind)) {
            row.train_markers.push_back(e.ts);
            continue;
        }
        TimelineDot dot{e.ts, std::string(kind_name(e.kind)), std::nullopt};
        if (const auto* a = std::get_if<event::SampleAdded>(&e.kind); a && !deleted.contains(a->sample_id)) {
            dot.digest = a->digest;
        }
        row.dots.push_back(std::move(dot));
    }
    if (rows.empty()) throw Error(ErrorCode::EmptyWindow, "no events inside the window");

    Timeline t;
    t.window = window;
    for (auto& [device, row] : rows) t.rows.push_back(std::move(row));
    return t;
}

ordered_json to_json(const Timeline& t) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : t.rows) {
        ordered_json dots = ordered_json::array();
        for (const auto& d : row.dots) {
            ordered_json dot;
            dot["ts"] = d.ts;
            dot["kind"] = d.kind;
            dot["digest"] = d.digest ? ordered_json(d.digest->hex()) : ordered_json(nullptr);
            dots.push_back(std::move(dot));
        }
        ordered_json r;
        r["device"] = row.device.str();
        r["dots"] = std::move(dots);
        r["train_markers"] = row.train_markers;
        rows.push_back(std::move(r));
    }
    ordered_json out;
    out["format"] = "coml-timeline";
    out["window"] = {{"start_ms", t.window.start_ms}, {"end_ms", t.window.end_ms}};
    out["rows"] = std::move(rows);
    return out;
}

Timeline timeline_from_json(const json& j) {
    if (j.value("format", "") != "coml-timeline") throw Error(ErrorCode::MalformedOp, "not a timeline document");
    Timeline t;
    t.window.start_ms = j.at("window").at("start_ms").get<std::int64_t>();
    t.window.end_ms = j.at("window").at("end_ms").get<std::int64_t>();
    for (const auto& r : j.at("rows")) {
        TimelineRow row;
        row.device = id_from_json<DeviceId>(r, "device");
        for (const auto& d : r.at("dots")) {
            TimelineDot dot{d.at("ts").get<std::int64_t>(), d.at("kind").get<std::string>(), std::nullopt};
            if (!d.at("digest").is_null()) dot.digest = digest_from_json(d, "digest");
            row.dots.push_back(std::move(dot));
        }
        row.train_markers = r.at("train_markers").get<std::vector<std::int64_t>>();
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string timeline_svg(const Timeline& t) {
    constexpr double kLeft = 110.0;
    constexpr double kPlotWidth = 860.0;
    constexpr double kRowHeight = 36.0;
    constexpr double kTop = 20.0;
    const double span = static_cast<double>(std::max<std::int64_t>(1, t.window.end_ms - t.window.start_ms));
    const double height = kTop * 2 + kRowHeight * static_cast<double>(t.rows.size());
    auto x_of = [&](std::int64_t ts) {
        return kLeft + kPlotWidth * static_cast<double>(ts - t.window.start_ms) / span;
    };
    auto color_of = [](const std::string& kind) {
        if (kind == "sample_added") return "#2b7bb9";
        if (kind == "sample_deleted") return "#c0392b";
        if (kind == "live_classification_started") return "#27ae60";
        return "#8e44ad";
    };

    std::ostringstream svg;
    svg.setf(std::ios::fixed);
    svg.precision(1);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + kPlotWidth + 30 << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const double y = kTop + kRowHeight * (static_cast<double>(i) + 0.5);
        svg << "<g class=\"row\" data-device=\"" << row.device.str() << "\">\n";
        svg << "<text x=\"4\" y=\"" << y + 4 << "\">" << row.device.short_str() << "</text>\n";
        svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + kPlotWidth << "\" y2=\"" << y
            << "\" stroke=\"#ccc\"/>\n";
        for (auto ts : row.train_markers) {
            const double x = x_of(ts);
            svg << "<line class=\"train\" x1=\"" << x << "\" y1=\"" << y - kRowHeight / 2 + 2 << "\" x2=\"" << x
                << "\" y2=\"" << y + kRowHeight / 2 - 2 << "\" stroke=\"#e67e22\" stroke-width=\"2\"/>\n";
        }
        for (const auto& dot : row.dots) {
            svg << "<circle class=\"" << dot.kind << "\" cx=\"" << x_of(dot.ts) << "\" cy=\"" << y
                << "\" r=\"4\" fill=\"" << color_of(dot.kind) << "\"/>\n";
        }
        svg << "</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace coml
