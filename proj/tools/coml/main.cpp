#include "http_bridge.hpp"

#include "coml/agent.hpp"
#include "coml/errors.hpp"
#include "coml/local_api.hpp"
#include "coml/model_io.hpp"
#include "coml/script.hpp"
#include "coml/server.hpp"
#include "coml/telemetry.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitScript = 2;
constexpr int kExitConnectivity = 3;
constexpr int kExitData = 4;

struct Globals {
    std::string server = "127.0.0.1:7420";
    std::string token;
    std::string project;
    std::optional<std::uint64_t> seed;
    bool json_out = false;
    std::string data_dir = ".coml";
};

int exit_code_for(coml::ErrorCode code) {
    switch (code) {
        case coml::ErrorCode::ScriptError: return kExitScript;
        case coml::ErrorCode::Connectivity: return kExitConnectivity;
        default: return kExitData;
    }
}

/// COML_DATA_DIR, when set, wins over --data-dir.
fs::path data_dir(const Globals& g) {
    if (const char* env = std::getenv("COML_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return g.data_dir;
}

void print(const Globals& g, const ordered_json& j, const std::string& text) {
    if (g.json_out) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << text;
    }
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << v;
    return s.str();
}

/// Blocks SIGINT and SIGTERM in every thread and waits for one of them.
void wait_for_shutdown_signal() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    int sig = 0;
    sigwait(&set, &sig);
}

void block_shutdown_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

std::unique_ptr<coml::Agent> open_agent(const Globals& g) {
    coml::AgentOptions o;
    o.state_dir = data_dir(g);
    return std::make_unique<coml::Agent>(std::move(o));
}

/// Connects when the device has joined. Failure leaves the agent offline
/// unless `required`.
void try_connect(coml::Agent& agent, bool required) {
    if (!agent.membership()) {
        if (required) throw coml::Error(coml::ErrorCode::ValidationError, "this device has not joined a project");
        return;
    }
    try {
        agent.connect();
    } catch (const coml::Error& e) {
        if (required || e.code() != coml::ErrorCode::Connectivity) throw;
        std::cerr << "warning: offline (" << e.detail() << "); changes stay queued\n";
    }
}

void settle(coml::Agent& agent) {
    if (agent.connection() != coml::ConnectionState::Live) return;
    agent.flush();
    if (!agent.wait_for_pending(std::chrono::seconds(30))) {
        std::cerr << "warning: some changes are still waiting for the server\n";
    }
}

coml::LabelId label_by_name(coml::Agent& agent, const std::string& name) {
    const auto v = agent.view();
    const coml::Label* l = v.find_live_label_by_name(coml::trim(name));
    if (l == nullptr) throw coml::Error(coml::ErrorCode::ValidationError, "no live label named '" + name + "'");
    return l->id;
}

std::vector<coml::ImageBlob> load_images(const std::string& path) {
    std::vector<coml::ImageBlob> out;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path)) {
            if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(coml::read_ppm_file(f));
    } else {
        out.push_back(coml::read_ppm_file(path));
    }
    return out;
}

std::string stats_text(const coml::AgentStats& s) {
    std::ostringstream out;
    out << "connection: " << coml::to_string(s.connection) << "  applied_seq: " << s.applied_seq
        << "  pending: " << s.pending << "\n";
    out << "digest: " << s.digest.hex() << "\n";
    for (const auto& [id, c] : s.counts) {
        out << "  " << s.names.at(id) << ": training " << c.training << ", testing " << c.testing << "\n";
    }
    if (s.weighted_accuracy) out << "weighted accuracy: " << fmt(*s.weighted_accuracy, 2) << "\n";
    if (s.model_version) out << "model version: " << *s.model_version << "\n";
    out << "high score: " << fmt(s.high_score, 1) << "\n";
    return out.str();
}

std::vector<coml::ActivityEvent> load_log(const std::string& path) { return coml::read_event_log(path); }

coml::TimelineWindow window_of(const std::vector<coml::ActivityEvent>& log, std::optional<std::int64_t> from,
                               std::optional<std::int64_t> to) {
    coml::TimelineWindow w = coml::full_window(log);
    if (from) w.start_ms = *from;
    if (to) w.end_ms = *to;
    return w;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coml: shared image datasets, on-device classifiers and activity analytics"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--server", g.server, "sync server host:port")->capture_default_str();
    app.add_option("--token", g.token, "project invite token");
    app.add_option("--project", g.project, "project id");
    auto* seed_opt = app.add_option("--seed", seed_value, "seed for reproducible runs");
    app.add_flag("--json", g.json_out, "machine-readable output");
    app.add_option("--data-dir", g.data_dir, "server data or device state directory (COML_DATA_DIR overrides)")
        ->capture_default_str();

    // serve
    auto* serve = app.add_subcommand("serve", "run the sync server");
    std::string listen = "127.0.0.1:7420";
    std::size_t max_blob = coml::kDefaultMaxBlobBytes;
    serve->add_option("--listen", listen, "host:port to listen on (port 0 picks one)")->capture_default_str();
    serve->add_option("--max-blob-bytes", max_blob, "largest accepted pixel payload")->capture_default_str();

    // new-project
    auto* new_project = app.add_subcommand("new-project", "create a project and print its id and token");
    std::string project_name;
    new_project->add_option("name", project_name, "project name")->required();

    // join
    auto* join = app.add_subcommand("join", "bind this device to a project");

    // label
    auto* label = app.add_subcommand("label", "manage labels");
    label->require_subcommand(1);
    std::string label_name;
    std::string label_new_name;
    auto* label_add = label->add_subcommand("add", "add a label");
    label_add->add_option("name", label_name)->required();
    auto* label_rename = label->add_subcommand("rename", "rename a label");
    label_rename->add_option("name", label_name)->required();
    label_rename->add_option("new_name", label_new_name)->required();
    auto* label_delete = label->add_subcommand("delete", "delete a label and its samples");
    label_delete->add_option("name", label_name)->required();
    auto* label_list = label->add_subcommand("list", "list labels with sample counts");

    // import
    auto* import = app.add_subcommand("import", "capture every .ppm file of a directory");
    std::string import_dir;
    std::string import_label;
    std::string import_split = "training";
    std::vector<std::string> import_tags;
    bool continue_on_error = false;
    import->add_option("dir", import_dir)->required()->check(CLI::ExistingDirectory);
    import->add_option("--label", import_label, "label name (created if absent)")->required();
    import->add_option("--split", import_split, "training or testing")
        ->check(CLI::IsMember({"training", "testing"}))
        ->capture_default_str();
    import->add_option("--tag", import_tags, "tag for every imported sample");
    import->add_flag("--continue-on-error", continue_on_error, "skip malformed files");

    // train
    auto* train = app.add_subcommand("train", "train a model on the current dataset");
    std::string export_path;
    train->add_option("--export", export_path, "also write the model file here");

    // eval
    auto* eval = app.add_subcommand("eval", "show test verdicts or classify images");
    std::string eval_image;
    std::size_t eval_page = 1;
    eval->add_option("--image", eval_image, "classify this .ppm file or directory");
    eval->add_option("--page", eval_page, "testing dashboard page")->capture_default_str();

    // game
    auto* game = app.add_subcommand("game", "play the evaluation game with an image feed");
    std::string game_images;
    game->add_option("images", game_images, ".ppm directory, one image per round")->required();

    // stats
    auto* stats = app.add_subcommand("stats", "dataset, accuracy and retrain statistics");
    std::string stats_log;
    stats->add_option("--log", stats_log, "compute retrain statistics from an NDJSON activity log")
        ->check(CLI::ExistingFile);

    // export-log
    auto* export_log = app.add_subcommand("export-log", "write the activity log or a timeline");
    std::string export_out;
    std::string timeline_out;
    std::string export_in;
    std::optional<std::int64_t> from_ms;
    std::optional<std::int64_t> to_ms;
    export_log->add_option("out", export_out, "NDJSON destination");
    export_log->add_option("--log", export_in, "read this NDJSON log instead of the device's")
        ->check(CLI::ExistingFile);
    export_log->add_option("--timeline", timeline_out, "also write a timeline JSON document here");
    export_log->add_option("--from", from_ms, "timeline window start (ms)");
    export_log->add_option("--to", to_ms, "timeline window end (ms)");

    // timeline-svg
    auto* timeline_svg = app.add_subcommand("timeline-svg", "render a timeline as SVG");
    std::string svg_in;
    std::string svg_out;
    timeline_svg->add_option("input", svg_in, "NDJSON activity log or timeline JSON")->required()->check(CLI::ExistingFile);
    timeline_svg->add_option("out", svg_out, "SVG destination")->required();
    timeline_svg->add_option("--from", from_ms, "window start (ms)");
    timeline_svg->add_option("--to", to_ms, "window end (ms)");

    // export-model
    auto* export_model = app.add_subcommand("export-model", "write the device's current model");
    std::string model_out;
    export_model->add_option("out", model_out)->required();

    // script
    auto* script = app.add_subcommand("script", "run an NDJSON session script");
    std::string script_path;
    std::string script_out;
    std::string state_root;
    bool external_server = false;
    script->add_option("file", script_path)->required()->check(CLI::ExistingFile);
    script->add_option("--out-dir", script_out, "write summary.json and events.ndjson here");
    script->add_option("--state-root", state_root, "persist each device's state under this directory");
    script->add_flag("--use-server", external_server, "use --server instead of an in-process server");

    // agent
    auto* agent_cmd = app.add_subcommand("agent", "serve this device's local API");
    std::string api_listen = "127.0.0.1:7421";
    int http_port = -1;
    agent_cmd->add_option("--listen", api_listen, "local API host:port")->capture_default_str();
    agent_cmd->add_option("--http", http_port, "also serve the HTTP bridge on this port (0 picks one)");

    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (serve->parsed()) {
            block_shutdown_signals();
            coml::ServerOptions so;
            so.listen = coml::net::parse_endpoint(listen);
            so.service.data_dir = data_dir(g);
            so.service.max_blob_bytes = max_blob;
            so.service.id_seed = g.seed;
            coml::Server server(so);
            std::cout << "listening on " << so.listen.host << ":" << server.port() << std::endl;
            wait_for_shutdown_signal();
            server.stop();
            return kExitOk;
        }
        if (new_project->parsed()) {
            auto created = coml::ServerLink::create_project(coml::net::parse_endpoint(g.server), project_name);
            print(g, {{"project_id", created.id.str()}, {"token", created.token}},
                  "project " + created.id.str() + "\ntoken " + created.token + "\n");
            return kExitOk;
        }
        if (timeline_svg->parsed()) {
            coml::Timeline t;
            std::ifstream probe(svg_in);
            std::string first_line;
            std::getline(probe, first_line);
            json head = json::parse(first_line, nullptr, false);
            if (!head.is_discarded() && head.value("format", "") == "coml-timeline") {
                std::ifstream in(svg_in);
                t = coml::timeline_from_json(json::parse(in));
            } else {
                auto log = load_log(svg_in);
                t = coml::timeline_export(log, window_of(log, from_ms, to_ms));
            }
            std::ofstream(svg_out) << coml::timeline_svg(t);
            print(g, {{"rows", t.rows.size()}, {"out", svg_out}}, "wrote " + svg_out + "\n");
            return kExitOk;
        }
        if (stats->parsed() && !stats_log.empty()) {
            auto s = coml::retrain_stats(load_log(stats_log));
            std::ostringstream text;
            text << "teams: " << s.per_team_total.size() << "  mean retrains: " << fmt(s.mean, 1)
                 << "  sd: " << fmt(s.sd, 1) << "  range: " << s.min << "-" << s.max << "\n";
            for (const auto& [d, n] : s.per_device_totals) text << "  device " << d.short_str() << ": " << n << "\n";
            print(g, coml::to_json(s), text.str());
            return kExitOk;
        }
        if (export_log->parsed() && !export_in.empty()) {
            auto log = load_log(export_in);
            if (!export_out.empty()) std::ofstream(export_out) << coml::write_event_log(log);
            if (!timeline_out.empty()) {
                std::ofstream(timeline_out) << coml::to_json(coml::timeline_export(log, window_of(log, from_ms, to_ms))).dump(2)
                                            << "\n";
            }
            print(g, {{"events", log.size()}}, std::to_string(log.size()) + " events\n");
            return kExitOk;
        }
        if (script->parsed()) {
            auto s = coml::load_script(script_path);
            coml::ScriptOptions so;
            if (external_server) so.server = coml::net::parse_endpoint(g.server);
            so.seed = g.seed;
            so.state_root = state_root;
            auto result = coml::run_script(s, so);
            if (!script_out.empty()) {
                fs::create_directories(script_out);
                std::ofstream(fs::path(script_out) / "summary.json") << result.summary.dump(2) << "\n";
                std::ofstream(fs::path(script_out) / "events.ndjson") << coml::write_event_log(result.events);
            }
            std::cout << result.summary.dump(2) << "\n";
            return kExitOk;
        }

        // everything below acts as this device
        auto agent = open_agent(g);
        if (join->parsed()) {
            auto pid = coml::ProjectId::parse(g.project);
            if (!pid) throw coml::Error(coml::ErrorCode::ValidationError, "--project must be a project id");
            agent->join(coml::Membership{coml::net::parse_endpoint(g.server), *pid, g.token});
            print(g, {{"device_id", agent->device().str()}, {"project_id", pid->str()}},
                  "device " + agent->device().str() + " joined " + pid->str() + "\n");
            return kExitOk;
        }
        if (label->parsed()) {
            try_connect(*agent, false);
            ordered_json out = ordered_json::object();
            if (label_add->parsed()) {
                out["label_id"] = agent->add_label(label_name).str();
            } else if (label_rename->parsed()) {
                agent->rename_label(label_by_name(*agent, label_name), label_new_name);
            } else if (label_delete->parsed()) {
                agent->delete_label(label_by_name(*agent, label_name));
            } else if (label_list->parsed()) {
                auto s = agent->stats();
                ordered_json labels = ordered_json::array();
                std::string text;
                for (const auto& [id, c] : s.counts) {
                    labels.push_back({{"label_id", id.str()}, {"name", s.names[id]}, {"training", c.training},
                                      {"testing", c.testing}});
                    text += s.names[id] + "\t" + std::to_string(c.training) + "\t" + std::to_string(c.testing) + "\n";
                }
                print(g, labels, text);
                return kExitOk;
            }
            settle(*agent);
            print(g, out, "ok\n");
            return kExitOk;
        }
        if (import->parsed()) {
            try_connect(*agent, false);
            auto label_id = agent->ensure_label(import_label);
            auto r = coml::import_dir(*agent, import_dir, label_id, coml::split_from_string(import_split),
                                      continue_on_error, {import_tags.begin(), import_tags.end()});
            settle(*agent);
            ordered_json errors = ordered_json::array();
            std::string text = "imported " + std::to_string(r.samples.size()) + " images\n";
            for (const auto& [file, why] : r.errors) {
                errors.push_back({{"file", file}, {"error", why}});
                text += "skipped " + file + ": " + why + "\n";
            }
            print(g, {{"imported", r.samples.size()}, {"errors", errors}}, text);
            return kExitOk;
        }
        if (train->parsed()) {
            try_connect(*agent, false);
            auto m = agent->retrain(g.seed.value_or(0));
            if (!export_path.empty()) agent->export_model(export_path);
            auto s = agent->stats();
            ordered_json j{{"model_version", m.version}, {"labels", m.label_order.size()},
                           {"train_sample_count", m.train_sample_count}};
            j["weighted_accuracy"] = s.weighted_accuracy ? ordered_json(*s.weighted_accuracy) : ordered_json();
            std::string text = "model v" + std::to_string(m.version) + " trained on " +
                               std::to_string(m.train_sample_count) + " images\n";
            if (s.weighted_accuracy) text += "weighted accuracy: " + fmt(*s.weighted_accuracy, 2) + "\n";
            print(g, j, text);
            return kExitOk;
        }
        if (eval->parsed()) {
            if (!eval_image.empty()) {
                const auto v = agent->view();
                ordered_json arr = ordered_json::array();
                std::string text;
                for (const auto& img : load_images(eval_image)) {
                    auto r = agent->test_photo(img);
                    auto j = coml::to_json(r);
                    j["predicted_name"] = v.display_name(r.predicted);
                    arr.push_back(j);
                    text += v.display_name(r.predicted) + " (" +
                            fmt(r.confidence[coml::argmax(r.confidence)], 2) + ")\n";
                }
                print(g, arr, text);
                return kExitOk;
            }
            auto page = agent->dashboard(coml::Split::Testing, eval_page);
            const auto v = agent->view();
            std::string text = "page " + std::to_string(page.page) + " of " + std::to_string(page.page_count) + "\n";
            for (const auto& item : page.items) {
                text += item.sample.id.short_str() + "  " + v.display_name(item.sample.label) + "  ";
                if (item.record) {
                    text += (item.record->correct ? "correct   -> " : "WRONG     -> ") + v.display_name(item.record->predicted);
                } else {
                    text += "not evaluated";
                }
                text += "\n";
            }
            print(g, coml::to_json(page, v), text);
            return kExitOk;
        }
        if (game->parsed()) {
            auto r = agent->play_game(load_images(game_images), g.seed.value_or(0));
            print(g, coml::to_json(r),
                  "rounds " + std::to_string(r.rounds.size()) + "  total " + fmt(r.total_score, 1) + "  high score " +
                      fmt(r.high_score, 1) + "\n");
            return kExitOk;
        }
        if (stats->parsed()) {
            try_connect(*agent, false);
            auto s = agent->stats();
            print(g, coml::to_json(s), stats_text(s));
            return kExitOk;
        }
        if (export_log->parsed()) {
            auto log = agent->events();
            const std::string text = coml::write_event_log(log);
            if (export_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream(export_out) << text;
            }
            if (!timeline_out.empty()) {
                std::ofstream(timeline_out) << coml::to_json(coml::timeline_export(log, window_of(log, from_ms, to_ms))).dump(2)
                                            << "\n";
            }
            return kExitOk;
        }
        if (export_model->parsed()) {
            agent->export_model(model_out);
            print(g, {{"out", model_out}}, "wrote " + model_out + "\n");
            return kExitOk;
        }
        if (agent_cmd->parsed()) {
            block_shutdown_signals();
            try_connect(*agent, false);
            coml::LocalApiServer api(*agent, coml::net::parse_endpoint(api_listen));
            std::unique_ptr<coml::HttpBridge> bridge;
            if (http_port >= 0) bridge = std::make_unique<coml::HttpBridge>(api.api(), "127.0.0.1", http_port);
            std::cout << "local api on 127.0.0.1:" << api.port();
            if (bridge) std::cout << "  http on 127.0.0.1:" << bridge->port();
            std::cout << std::endl;
            wait_for_shutdown_signal();
            if (bridge) bridge->stop();
            api.stop();
            return kExitOk;
        }
    } catch (const coml::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
