#include "coml/script.hpp"

#include "coml/errors.hpp"
#include "coml/server.hpp"
#include "coml/synthetic.hpp"

#include <algorithm>
#include <map>

namespace coml {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::vector<fs::path> ppm_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

const std::set<std::string> kDirectives{"device", "join",   "label", "rename_label", "delete_label",
                                        "capture", "delete_sample", "tag", "relabel", "retrain",
                                        "test",   "live",   "game",  "disconnect", "reconnect"};

}  // namespace

ImportResult import_dir(Agent& agent, const fs::path& dir, const LabelId& label, Split split, bool continue_on_error,
                        const std::set<std::string>& tags) {
    ImportResult out;
    for (const auto& file : ppm_files(dir)) {
        std::optional<ImageBlob> image;
        try {
            image = read_ppm_file(file);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MalformedImage || !continue_on_error) throw;
            out.errors.emplace_back(file.filename().string(), e.detail());
            continue;
        }
        out.samples.push_back(agent.capture(label, *image, split, tags));
    }
    return out;
}

std::vector<ImageBlob> directive_images(const json& args, const fs::path& base_dir, const std::string& label_name,
                                        std::uint64_t seed) {
    std::vector<ImageBlob> out;
    if (args.contains("file")) out.push_back(read_ppm_file(resolve(base_dir, args["file"].get<std::string>())));
    if (args.contains("dir")) {
        for (const auto& f : ppm_files(resolve(base_dir, args["dir"].get<std::string>()))) {
            out.push_back(read_ppm_file(f));
        }
    }
    if (args.contains("synthetic")) {
        const json& s = args["synthetic"];
        SyntheticSpec spec;
        spec.width = s.value("width", spec.width);
        spec.height = s.value("height", spec.height);
        spec.jitter = s.value("jitter", spec.jitter);
        spec.hand = s.value("hand", false);
        if (s.contains("color")) {
            spec.color = s["color"].get<std::array<std::uint8_t, 3>>();
        } else {
            spec.color = color_for_name(s.value("like", label_name));
        }
        const std::size_t count = s.value("count", std::size_t{1});
        const std::uint64_t base = s.contains("seed") ? s["seed"].get<std::uint64_t>() : seed;
        for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_image(spec, mix(base, i)));
    }
    return out;
}

SessionScript parse_script(std::string_view text, const fs::path& base_dir) {
    SessionScript script;
    script.base_dir = base_dir;
    std::set<std::string> declared;
    std::int64_t last_at = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool first = true;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }
        auto fail = [&](const std::string& why) -> void {
            throw Error(ErrorCode::ScriptError, "line " + std::to_string(line_no) + ": " + why);
        };
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) fail("not a JSON object");
        try {
            if (first && j.contains("script")) {
                first = false;
                if (j["script"] != "coml-session") fail("unknown script format");
                script.seed = j.value("seed", std::uint64_t{0});
                script.project = j.value("project", script.project);
                script.epoch_ms = j.value("epoch_ms", std::int64_t{0});
                continue;
            }
            first = false;
            Directive d;
            d.line = line_no;
            d.at_ms = j.value("at_ms", last_at);
            if (d.at_ms < last_at) fail("at_ms decreases");
            last_at = d.at_ms;
            if (!j.contains("directive") || !j["directive"].is_string()) fail("missing directive");
            d.name = j["directive"].get<std::string>();
            if (!kDirectives.contains(d.name)) fail("unknown directive " + d.name);
            if (!j.contains("device") || !j["device"].is_string()) fail("missing device");
            d.device = j["device"].get<std::string>();
            if (d.name == "device") {
                if (!declared.insert(d.device).second) fail("device " + d.device + " declared twice");
            } else if (!declared.contains(d.device)) {
                fail("device " + d.device + " used before it is declared");
            }
            d.args = std::move(j);
            script.directives.push_back(std::move(d));
        } catch (const json::exception& e) {
            fail(e.what());
        }
        if (end == text.size()) break;
    }
    return script;
}

SessionScript load_script(const fs::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::ScriptError, e.detail());
    }
    return parse_script(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        path.parent_path());
}

namespace {

struct Device {
    std::string name;
    std::unique_ptr<Agent> agent;
    std::vector<GameResult> games;
    std::vector<std::string> predictions;
};

class Runner {
public:
    Runner(const SessionScript& script, const ScriptOptions& options)
        : script_(script), options_(options), seed_(options.seed.value_or(script.seed)) {}

    ScriptResult run() {
        if (options_.server) {
            endpoint_ = *options_.server;
        } else {
            ServerOptions so;
            so.service.id_seed = seed_;
            server_ = std::make_unique<Server>(so);
            endpoint_ = net::Endpoint{"127.0.0.1", server_->port()};
        }
        clock_ = script_.epoch_ms;
        for (const auto& d : script_.directives) {
            clock_ = script_.epoch_ms + d.at_ms;
            run_directive(d);
            quiesce(d);
        }
        ScriptResult result = collect();
        devices_.clear();
        if (server_) server_->stop();
        return result;
    }

private:
    [[noreturn]] void fail(const Directive& d, const std::string& why) const {
        throw Error(ErrorCode::ScriptError, "line " + std::to_string(d.line) + ": " + d.name + ": " + why);
    }

    Device& device(const Directive& d) {
        auto it = index_.find(d.device);
        if (it == index_.end()) fail(d, "unknown device " + d.device);
        return devices_[it->second];
    }

    LabelId label_named(const Directive& d, Agent& agent, const std::string& name) {
        const DatasetState v = agent.view();
        const Label* l = v.find_live_label_by_name(trim(name));
        if (l == nullptr) fail(d, "no live label named '" + name + "'");
        return l->id;
    }

    SampleId sample_ref(const Directive& d) {
        auto ref = d.args.value("ref", std::string());
        auto it = refs_.find(ref);
        if (it == refs_.end()) fail(d, "unknown sample ref '" + ref + "'");
        return it->second;
    }

    void ensure_project() {
        if (project_) return;
        auto created = ServerLink::create_project(endpoint_, script_.project, options_.timeout);
        project_ = created.id;
        token_ = created.token;
    }

    std::vector<ImageBlob> images(const Directive& d, const std::string& label_name) {
        auto imgs = directive_images(d.args, script_.base_dir, label_name, mix(seed_, d.line));
        if (imgs.empty()) fail(d, "no image source (file, dir or synthetic)");
        return imgs;
    }

    void run_directive(const Directive& d) {
        const std::string expected = d.args.value("expect_error", std::string());
        try {
            execute(d);
        } catch (const Error& e) {
            if (!expected.empty() && to_string(e.code()) == expected) return;
            if (e.code() == ErrorCode::ScriptError) throw;
            if (e.code() == ErrorCode::Connectivity) {
                throw Error(ErrorCode::Connectivity, "line " + std::to_string(d.line) + ": " + e.detail());
            }
            fail(d, std::string(to_string(e.code())) + ": " + e.detail());
        } catch (const std::exception& e) {
            fail(d, e.what());
        }
        if (!expected.empty()) fail(d, "expected error " + expected + " did not occur");
    }

    void execute(const Directive& d) {
        const json& a = d.args;
        if (d.name == "device") {
            AgentOptions ao;
            ao.id_seed = mix(seed_, 0x1000 + devices_.size());
            ao.clock = [this] { return clock_.load(); };
            ao.sleep = [](std::chrono::milliseconds) {};
            ao.timeout = options_.timeout;
            if (!options_.state_root.empty()) ao.state_dir = options_.state_root / d.device;
            index_[d.device] = devices_.size();
            devices_.push_back(Device{d.device, std::make_unique<Agent>(std::move(ao)), {}, {}});
            return;
        }
        Device& dev = device(d);
        Agent& agent = *dev.agent;
        if (d.name == "join") {
            ensure_project();
            agent.join(Membership{endpoint_, *project_, token_});
        } else if (d.name == "disconnect") {
            agent.disconnect();
        } else if (d.name == "reconnect") {
            agent.connect();
        } else if (d.name == "label") {
            agent.add_label(a.at("name").get<std::string>());
        } else if (d.name == "rename_label") {
            agent.rename_label(label_named(d, agent, a.at("label").get<std::string>()), a.at("to").get<std::string>());
        } else if (d.name == "delete_label") {
            agent.delete_label(label_named(d, agent, a.at("label").get<std::string>()));
        } else if (d.name == "capture") {
            const std::string label_name = a.at("label").get<std::string>();
            const Split split = split_from_string(a.value("split", "training"));
            const auto tags = a.value("tags", std::set<std::string>{});
            const LabelId label = agent.ensure_label(label_name);
            auto imgs = images(d, label_name);
            const std::string as = a.value("as", std::string());
            for (std::size_t i = 0; i < imgs.size(); ++i) {
                SampleId id = agent.capture(label, imgs[i], split, tags);
                if (!as.empty()) refs_[imgs.size() == 1 ? as : as + "/" + std::to_string(i)] = id;
            }
        } else if (d.name == "delete_sample") {
            agent.delete_sample(sample_ref(d));
        } else if (d.name == "tag") {
            agent.tag_sample(sample_ref(d), a.value("tags", std::set<std::string>{}));
        } else if (d.name == "relabel") {
            agent.relabel(sample_ref(d), label_named(d, agent, a.at("label").get<std::string>()));
        } else if (d.name == "retrain") {
            agent.retrain(a.value("seed", mix(seed_, d.line)));
        } else if (d.name == "test") {
            const DatasetState v = agent.view();
            for (const auto& img : images(d, a.value("like", std::string()))) {
                dev.predictions.push_back(v.display_name(agent.test_photo(img).predicted));
            }
        } else if (d.name == "live") {
            agent.live_stream(images(d, a.value("like", std::string())));
        } else if (d.name == "game") {
            dev.games.push_back(agent.play_game(images(d, a.value("like", std::string())), a.value("seed", mix(seed_, d.line))));
        }
    }

    void quiesce(const Directive& d) {
        std::uint64_t target = 0;
        for (auto& dev : devices_) {
            if (dev.agent->connection() != ConnectionState::Live) continue;
            dev.agent->flush();
            if (!dev.agent->wait_for_pending(options_.timeout)) {
                throw Error(ErrorCode::Connectivity,
                            "line " + std::to_string(d.line) + ": device " + dev.name + " could not flush");
            }
            target = std::max(target, dev.agent->applied_seq());
        }
        for (auto& dev : devices_) {
            if (dev.agent->connection() != ConnectionState::Live) continue;
            if (!dev.agent->wait_for_seq(target, options_.timeout)) {
                throw Error(ErrorCode::Connectivity,
                            "line " + std::to_string(d.line) + ": device " + dev.name + " did not catch up");
            }
        }
    }

    ScriptResult collect() {
        ScriptResult r;
        if (project_) r.project = *project_;
        std::map<DeviceId, std::string> names;
        std::optional<std::pair<std::int64_t, std::size_t>> last_training;
        for (std::size_t i = 0; i < devices_.size(); ++i) {
            Device& dev = devices_[i];
            Agent& agent = *dev.agent;
            AgentStats st = agent.stats();
            DeviceOutcome o;
            o.name = dev.name;
            o.id = agent.device();
            o.digest = st.digest;
            o.applied_seq = st.applied_seq;
            o.model_version = st.model_version;
            o.weighted_accuracy = st.weighted_accuracy;
            o.high_score = st.high_score;
            o.games = dev.games;
            o.test_predictions = dev.predictions;
            for (const auto& e : agent.events()) {
                if (std::holds_alternative<event::ModelTrained>(e.kind)) {
                    ++o.retrains;
                    if (!last_training || e.ts >= last_training->first) last_training = {e.ts, i};
                }
                r.events.push_back(e);
            }
            names[o.id] = dev.name;
            r.devices.push_back(std::move(o));
        }
        std::stable_sort(r.events.begin(), r.events.end(),
                         [](const ActivityEvent& a, const ActivityEvent& b) { return a.ts < b.ts; });
        r.stats = retrain_stats(r.events);

        ordered_json labels = ordered_json::array();
        std::size_t train_total = 0;
        std::size_t test_total = 0;
        if (!devices_.empty()) {
            const DatasetState v = devices_.front().agent->view();
            std::vector<std::pair<std::string, SplitCounts>> rows;
            for (const auto& [id, c] : live_counts(v)) rows.emplace_back(v.display_name(id), c);
            std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
            for (const auto& [name, c] : rows) {
                labels.push_back({{"name", name}, {"training", c.training}, {"testing", c.testing}});
                train_total += c.training;
                test_total += c.testing;
            }
        }
        bool converged = true;
        for (const auto& o : r.devices) converged = converged && o.digest == r.devices.front().digest;

        ordered_json devices = ordered_json::array();
        ordered_json retrains = ordered_json::object();
        for (const auto& o : r.devices) {
            ordered_json games = ordered_json::array();
            for (const auto& g : o.games) games.push_back(to_json(g));
            ordered_json dj;
            dj["name"] = o.name;
            dj["device_id"] = o.id.str();
            dj["digest"] = o.digest.hex();
            dj["applied_seq"] = o.applied_seq;
            dj["model_version"] = o.model_version ? ordered_json(*o.model_version) : ordered_json();
            dj["weighted_accuracy"] = o.weighted_accuracy ? ordered_json(*o.weighted_accuracy) : ordered_json();
            dj["retrains"] = o.retrains;
            dj["high_score"] = o.high_score;
            dj["test_predictions"] = o.test_predictions;
            dj["games"] = std::move(games);
            devices.push_back(std::move(dj));
            retrains[o.name] = o.retrains;
        }

        ordered_json s;
        s["project"] = script_.project;
        s["project_id"] = r.project.str();
        s["seed"] = seed_;
        s["labels"] = std::move(labels);
        s["training_images"] = train_total;
        s["testing_images"] = test_total;
        std::optional<double> acc;
        if (last_training) acc = r.devices[last_training->second].weighted_accuracy;
        s["weighted_accuracy"] = acc ? ordered_json(*acc) : ordered_json();
        s["retrains"] = std::move(retrains);
        s["retrain_total"] = r.events.empty() ? 0 : std::count_if(r.events.begin(), r.events.end(), [](const auto& e) {
            return std::holds_alternative<event::ModelTrained>(e.kind);
        });
        s["converged"] = converged;
        s["final_digest"] = converged && !r.devices.empty() ? ordered_json(r.devices.front().digest.hex()) : ordered_json();
        s["devices"] = std::move(devices);
        r.summary = std::move(s);
        return r;
    }

    const SessionScript& script_;
    const ScriptOptions& options_;
    std::uint64_t seed_;
    std::unique_ptr<Server> server_;
    net::Endpoint endpoint_;
    std::optional<ProjectId> project_;
    std::string token_;
    std::atomic<std::int64_t> clock_{0};
    std::vector<Device> devices_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, SampleId> refs_;
};

}  // namespace

ScriptResult run_script(const SessionScript& script, const ScriptOptions& options) {
    return Runner(script, options).run();
}

}  // namespace coml
