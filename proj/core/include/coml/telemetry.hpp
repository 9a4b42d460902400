#pragma once

#include "coml/domain.hpp"
#include "coml/hash.hpp"
#include "coml/ids.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace coml {

namespace event {

struct SampleAdded {
    SampleId sample_id;
    LabelId label;
    Split split = Split::Training;
    Digest digest;
};

struct SampleDeleted {
    SampleId sample_id;
};

struct LabelTally {
    std::size_t correct = 0;
    std::size_t total = 0;
    friend bool operator==(const LabelTally&, const LabelTally&) = default;
};

struct ModelTrained {
    std::uint64_t version = 0;
    std::map<LabelId, LabelTally> per_label_test_correct;
};

struct LiveClassificationStarted {};

struct GameStarted {
    std::uint64_t seed = 0;
};

struct GameEnded {
    double total_score = 0.0;
};

}  // namespace event

using EventKind = std::variant<event::SampleAdded, event::SampleDeleted, event::ModelTrained,
                               event::LiveClassificationStarted, event::GameStarted, event::GameEnded>;

struct ActivityEvent {
    EventId event_id;
    ProjectId project;
    DeviceId device;
    std::int64_t ts = 0;
    EventKind kind;
};

std::string_view kind_name(const EventKind& kind);

/// One NDJSON line (no trailing newline) with fixed field order.
std::string to_ndjson_line(const ActivityEvent& event);
ActivityEvent event_from_json(const nlohmann::json& j);

/// Parses an NDJSON log. Blank lines are skipped; a malformed line throws
/// MalformedOp naming its line number.
std::vector<ActivityEvent> parse_event_log(std::string_view text);
std::vector<ActivityEvent> read_event_log(const std::filesystem::path& path);
std::string write_event_log(const std::vector<ActivityEvent>& events);

/// Append-only event log for one device context. Clock regressions are
/// clamped so timestamps never decrease per device. With a path, every
/// record is appended and fsynced before returning.
class EventLog {
public:
    EventLog() = default;
    explicit EventLog(std::filesystem::path path);

    /// Returns the event as stored (ts possibly clamped).
    ActivityEvent record(ActivityEvent event);

    std::vector<ActivityEvent> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::optional<std::filesystem::path> path_;
    std::vector<ActivityEvent> events_;
    std::map<DeviceId, std::int64_t> last_ts_;
};

struct RetrainStats {
    std::map<ProjectId, std::size_t> per_team_total;
    std::map<DeviceId, std::size_t> per_device_totals;
    double mean = 0.0;  // over teams
    double sd = 0.0;    // sample standard deviation over teams
    std::size_t min = 0;
    std::size_t max = 0;
};

/// Counts ModelTrained events per project and per device.
RetrainStats retrain_stats(const std::vector<ActivityEvent>& log);
nlohmann::ordered_json to_json(const RetrainStats& stats);

struct TimelineDot {
    std::int64_t ts = 0;
    std::string kind;
    std::optional<Digest> digest;
};

struct TimelineRow {
    DeviceId device;
    std::vector<TimelineDot> dots;
    std::vector<std::int64_t> train_markers;
};

struct TimelineWindow {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;  // inclusive
};

struct Timeline {
    TimelineWindow window;
    std::vector<TimelineRow> rows;  // by DeviceId
};

/// Per-device rows of events inside the window. ModelTrained events become
/// train markers; every other event is a dot. Digests of samples deleted
/// anywhere in the log are redacted. Throws EmptyWindow when no event falls
/// inside the window.
Timeline timeline_export(const std::vector<ActivityEvent>& log, TimelineWindow window);

/// Window spanning every event of the log. Throws EmptyWindow on an empty log.
TimelineWindow full_window(const std::vector<ActivityEvent>& log);

nlohmann::ordered_json to_json(const Timeline& timeline);
Timeline timeline_from_json(const nlohmann::json& j);

/// Renders a timeline as a standalone SVG document.
std::string timeline_svg(const Timeline& timeline);

}  // namespace coml
