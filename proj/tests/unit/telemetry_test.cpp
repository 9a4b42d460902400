#include "coml/errors.hpp"
#include "coml/storage.hpp"
#include "coml/telemetry.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

namespace coml {
namespace {

using nlohmann::json;
using testing::device_id;
using testing::fixture;
using testing::label_id;
using testing::sample_id;

ActivityEvent ev(std::uint8_t dev, std::int64_t ts, EventKind kind, std::uint8_t project = 1) {
    static std::uint32_t counter = 0;
    ActivityEvent e;
    ++counter;
    for (int i = 0; i < 4; ++i) e.event_id.bytes[i] = static_cast<std::uint8_t>(counter >> (8 * i));
    e.project.bytes[15] = project;
    e.device = device_id(dev);
    e.ts = ts;
    e.kind = std::move(kind);
    return e;
}

std::string fixture_text(const std::string& name) {
    auto bytes = read_file_bytes(fixture(name));
    return {bytes.begin(), bytes.end()};
}

TEST(EventFormat, FieldOrderIsFixed) {
    event::ModelTrained t{3, {{label_id(1), {4, 5}}}};
    auto line = to_ndjson_line(ev(1, 17, t));
    const std::vector<std::string> order{"\"event_id\"", "\"project\"", "\"device\"", "\"ts\"", "\"kind\"",
                                         "\"version\"", "\"per_label_test_correct\""};
    std::size_t pos = 0;
    for (const auto& key : order) {
        auto at = line.find(key, pos);
        ASSERT_NE(at, std::string::npos) << key;
        pos = at;
    }
    auto back = event_from_json(json::parse(line));
    EXPECT_EQ(to_ndjson_line(back), line);
}

TEST(EventFormat, EveryKindRoundTrips) {
    std::vector<ActivityEvent> log{
        ev(1, 1, event::SampleAdded{sample_id(1), label_id(2), Split::Testing, sha256(std::string_view("x"))}),
        ev(1, 2, event::SampleDeleted{sample_id(1)}),
        ev(2, 3, event::ModelTrained{1, {}}),
        ev(2, 4, event::LiveClassificationStarted{}),
        ev(3, 5, event::GameStarted{99}),
        ev(3, 6, event::GameEnded{16.5}),
    };
    auto text = write_event_log(log);
    auto back = parse_event_log(text);
    ASSERT_EQ(back.size(), log.size());
    EXPECT_EQ(write_event_log(back), text);
    for (std::size_t i = 0; i < log.size(); ++i) EXPECT_EQ(kind_name(back[i].kind), kind_name(log[i].kind));
}

TEST(EventFormat, MalformedLineNamesItsNumber) {
    try {
        parse_event_log(to_ndjson_line(ev(1, 1, event::LiveClassificationStarted{})) + "\n\n{\"kind\":1}\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedOp);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(EventLog, AppendsDurablyAndClampsClockRegressions) {
    testing::TempDir dir;
    const auto path = dir / "events.ndjson";
    {
        EventLog log(path);
        EXPECT_EQ(log.record(ev(1, 100, event::LiveClassificationStarted{})).ts, 100);
        EXPECT_EQ(log.record(ev(1, 40, event::LiveClassificationStarted{})).ts, 100);
        EXPECT_EQ(log.record(ev(2, 40, event::LiveClassificationStarted{})).ts, 40);
        EXPECT_EQ(log.size(), 3u);
    }
    EXPECT_EQ(read_event_log(path).size(), 3u);
    EventLog reopened(path);
    EXPECT_EQ(reopened.size(), 3u);
    EXPECT_EQ(reopened.record(ev(1, 50, event::LiveClassificationStarted{})).ts, 100);
}

TEST(EventLog, InterleavedDevicesStayOrdered) {
    std::mt19937_64 rng(6);
    EventLog log;
    for (int i = 0; i < 500; ++i) {
        log.record(ev(static_cast<std::uint8_t>(1 + rng() % 3), static_cast<std::int64_t>(rng() % 1000),
                      event::LiveClassificationStarted{}));
    }
    std::map<DeviceId, std::int64_t> last;
    for (const auto& e : log.snapshot()) {
        EXPECT_GE(e.ts, last[e.device]);
        last[e.device] = e.ts;
    }
}

TEST(RetrainStats, EmptyLogIsZero) {
    auto s = retrain_stats({});
    EXPECT_EQ(s.mean, 0.0);
    EXPECT_EQ(s.sd, 0.0);
    EXPECT_TRUE(s.per_device_totals.empty());
}

TEST(RetrainStats, SixTeams) {
    const std::vector<std::size_t> totals{17, 27, 35, 45, 61, 75};
    std::vector<ActivityEvent> log;
    for (std::size_t t = 0; t < totals.size(); ++t) {
        for (std::size_t i = 0; i < totals[t]; ++i) {
            log.push_back(ev(static_cast<std::uint8_t>(10 * t + i % 3), static_cast<std::int64_t>(i),
                             event::ModelTrained{i + 1, {}}, static_cast<std::uint8_t>(t + 1)));
        }
        log.push_back(ev(1, 0, event::LiveClassificationStarted{}, static_cast<std::uint8_t>(t + 1)));
    }
    auto s = retrain_stats(log);
    EXPECT_EQ(s.per_team_total.size(), 6u);
    EXPECT_EQ(std::round(s.mean * 10) / 10, 43.3);
    EXPECT_EQ(s.min, 17u);
    EXPECT_EQ(s.max, 75u);
    double m = 260.0 / 6.0;
    double ss = 0;
    for (auto t : totals) ss += (static_cast<double>(t) - m) * (static_cast<double>(t) - m);
    EXPECT_NEAR(s.sd, std::sqrt(ss / 5.0), 1e-12);
}

TEST(RetrainStats, BundledSessionFixture) {
    auto log = read_event_log(fixture("telemetry/session.ndjson"));
    std::ifstream in(fixture("telemetry/expected.json"));
    auto expected = json::parse(in);
    ASSERT_EQ(log.size(), expected["event_count"].get<std::size_t>());
    auto s = retrain_stats(log);
    ASSERT_EQ(s.per_device_totals.size(), 3u);
    for (const auto& [dev, n] : expected["retrains"].items()) {
        EXPECT_EQ(s.per_device_totals.at(*DeviceId::parse(dev)), n.get<std::size_t>());
    }
    EXPECT_EQ(s.per_team_total.begin()->second, 39u);
    EXPECT_EQ(write_event_log(log), fixture_text("telemetry/session.ndjson"));
}

TEST(Timeline, SingleDeviceShape) {
    std::vector<ActivityEvent> log;
    for (int i = 0; i < 3; ++i) {
        log.push_back(ev(1, i, event::SampleAdded{sample_id(i + 1), label_id(1), Split::Training, {}}));
    }
    log.push_back(ev(1, 5, event::ModelTrained{1, {}}));
    auto t = timeline_export(log, full_window(log));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0].dots.size(), 3u);
    EXPECT_EQ(t.rows[0].train_markers, (std::vector<std::int64_t>{5}));
    try {
        timeline_export(log, TimelineWindow{100, 200});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyWindow);
    }
}

TEST(Timeline, RowCountsMatchRawLogInWindows) {
    auto log = read_event_log(fixture("telemetry/session.ndjson"));
    std::ifstream in(fixture("telemetry/expected.json"));
    auto expected = json::parse(in);
    for (const auto& w : expected["windows"]) {
        TimelineWindow win{w["start_ms"].get<std::int64_t>(), w["end_ms"].get<std::int64_t>()};
        auto t = timeline_export(log, win);
        ASSERT_EQ(t.rows.size(), w["rows"].size());
        for (const auto& row : t.rows) {
            const auto& want = w["rows"][row.device.str()];
            EXPECT_EQ(row.dots.size(), want["dots"].get<std::size_t>());
            EXPECT_EQ(row.train_markers.size(), want["train_markers"].get<std::size_t>());
            std::size_t redacted = 0;
            for (const auto& d : row.dots) redacted += (d.kind == "sample_added" && !d.digest) ? 1 : 0;
            EXPECT_EQ(redacted, want["redacted"].get<std::size_t>());
        }
    }
}

TEST(Timeline, JsonRoundTripAndSvg) {
    auto log = read_event_log(fixture("telemetry/session.ndjson"));
    auto t = timeline_export(log, full_window(log));
    auto j = to_json(t);
    EXPECT_EQ(j["format"], "coml-timeline");
    auto back = timeline_from_json(json::parse(j.dump()));
    EXPECT_EQ(to_json(back).dump(), j.dump());
    auto svg = timeline_svg(t);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    std::size_t markers = 0;
    for (auto at = svg.find("class=\"train\""); at != std::string::npos; at = svg.find("class=\"train\"", at + 1)) {
        ++markers;
    }
    EXPECT_EQ(markers, 39u);
}

TEST(Timeline, DeletedDigestsAreRedacted) {
    const Digest d = sha256(std::string_view("img"));
    std::vector<ActivityEvent> log{
        ev(1, 1, event::SampleAdded{sample_id(1), label_id(1), Split::Training, d}),
        ev(1, 2, event::SampleAdded{sample_id(2), label_id(1), Split::Training, d}),
        ev(2, 3, event::SampleDeleted{sample_id(1)}),
    };
    auto t = timeline_export(log, full_window(log));
    EXPECT_FALSE(t.rows[0].dots[0].digest);
    ASSERT_TRUE(t.rows[0].dots[1].digest);
    EXPECT_EQ(t.rows[0].dots[1].digest->hex(), d.hex());
    EXPECT_EQ(to_json(t).dump().find(d.hex()), to_json(t).dump().rfind(d.hex()));
}

}  // namespace
}  // namespace coml
