#pragma once

#include "coml/agent.hpp"
#include "coml/net.hpp"
#include "coml/telemetry.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace coml {

struct ImportResult {
    std::vector<SampleId> samples;
    std::vector<std::pair<std::string, std::string>> errors;  // file name, message
};

/// Captures every *.ppm file in `dir`, in lexicographic filename order. A
/// malformed file throws MalformedImage unless `continue_on_error` is set,
/// in which case it is reported and skipped.
ImportResult import_dir(Agent& agent, const std::filesystem::path& dir, const LabelId& label, Split split,
                        bool continue_on_error = false, const std::set<std::string>& tags = {});

/// Images named by a directive: "file", "dir" or "synthetic". Relative
/// paths resolve against `base_dir`. Synthetic images take their color from
/// "color" or from the `label_name` fallback.
std::vector<ImageBlob> directive_images(const nlohmann::json& args, const std::filesystem::path& base_dir,
                                        const std::string& label_name, std::uint64_t seed);

struct Directive {
    std::size_t line = 0;
    std::int64_t at_ms = 0;
    std::string device;
    std::string name;
    nlohmann::json args;
};

/// NDJSON session script. An optional first line
/// {"script": "coml-session", "seed", "project", "epoch_ms"} sets defaults;
/// every other line is a directive {at_ms, device, directive, ...args}.
///
/// Directives: device, join, label, rename_label, delete_label, capture,
/// delete_sample, tag, relabel, retrain, test, live, game, disconnect,
/// reconnect. Any directive may carry "expect_error": "<ErrorCode>".
struct SessionScript {
    std::uint64_t seed = 0;
    std::string project = "session";
    std::int64_t epoch_ms = 0;
    std::vector<Directive> directives;
    std::filesystem::path base_dir;
};

/// Throws ScriptError naming the offending line.
SessionScript parse_script(std::string_view text, const std::filesystem::path& base_dir = {});
SessionScript load_script(const std::filesystem::path& path);

struct ScriptOptions {
    /// External server; unset starts an in-memory server seeded from the script.
    std::optional<net::Endpoint> server;
    /// Overrides the script's seed.
    std::optional<std::uint64_t> seed;
    /// Per-device state directories under this root; empty keeps agents in memory.
    std::filesystem::path state_root;
    std::chrono::milliseconds timeout{20000};
};

struct DeviceOutcome {
    std::string name;
    DeviceId id;
    Digest digest;
    std::uint64_t applied_seq = 0;
    std::optional<std::uint64_t> model_version;
    std::optional<double> weighted_accuracy;
    std::size_t retrains = 0;
    double high_score = 0.0;
    std::vector<GameResult> games;
    std::vector<std::string> test_predictions;  // display names, in order
};

struct ScriptResult {
    ProjectId project;
    std::vector<DeviceOutcome> devices;  // in declaration order
    std::vector<ActivityEvent> events;   // all devices, ordered by ts
    RetrainStats stats;
    nlohmann::ordered_json summary;
};

/// Runs directives in order on a virtual clock (epoch_ms + at_ms). After
/// each directive every connected device flushes and catches up, so a run
/// is a pure function of the script and seed.
ScriptResult run_script(const SessionScript& script, const ScriptOptions& options = {});

}  // namespace coml
