#include "coml/local_api.hpp"

#include "coml/errors.hpp"
#include "coml/hash.hpp"
#include "coml/model_io.hpp"

namespace coml {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ImageBlob image_of(const json& req) {
    auto bytes = base64_decode(req.at("ppm").get<std::string>());
    return decode_ppm(bytes);
}

template <class T>
T id_of(const json& req, const char* field) {
    return id_from_json<T>(req, field);
}

std::set<std::string> tags_of(const json& req) {
    if (!req.contains("tags")) return {};
    return req["tags"].get<std::set<std::string>>();
}

ordered_json labels_json(const std::vector<LabelId>& labels) {
    ordered_json out = ordered_json::array();
    for (const auto& l : labels) out.push_back(l.str());
    return out;
}

}  // namespace

ordered_json LocalApi::handle(const json& request, const Push& push) {
    std::string type;
    try {
        if (!request.is_object() || !request.contains("type") || !request["type"].is_string()) {
            throw Error(ErrorCode::Protocol, "request must be an object with a string type");
        }
        type = request["type"].get<std::string>();
        ordered_json reply = dispatch(type, request, push);
        reply["type"] = type + "_OK";
        return reply;
    } catch (const Error& e) {
        return ordered_json{{"type", "ERROR"}, {"code", std::string(to_string(e.code()))}, {"detail", e.detail()}};
    } catch (const json::exception& e) {
        return ordered_json{{"type", "ERROR"}, {"code", "Protocol"}, {"detail", e.what()}};
    } catch (const std::exception& e) {
        return ordered_json{{"type", "ERROR"}, {"code", "Io"}, {"detail", e.what()}};
    }
}

ordered_json LocalApi::dispatch(const std::string& type, const json& req, const Push& push) {
    if (type == "JOIN") {
        agent_.join(Membership{net::parse_endpoint(req.at("server").get<std::string>()), id_of<ProjectId>(req, "project_id"),
                               req.at("token").get<std::string>()});
        return {{"device_id", agent_.device().str()}};
    }
    if (type == "CONNECT") {
        agent_.connect();
        return {{"connection", to_string(agent_.connection())}};
    }
    if (type == "DISCONNECT") {
        agent_.disconnect();
        return {{"connection", to_string(agent_.connection())}};
    }
    if (type == "SYNC") {
        auto submitted = agent_.flush();
        return {{"submitted", submitted}, {"pending", agent_.pending_count()}, {"applied_seq", agent_.applied_seq()}};
    }
    if (type == "ADD_LABEL") return {{"label_id", agent_.add_label(req.at("name").get<std::string>()).str()}};
    if (type == "RENAME_LABEL") {
        agent_.rename_label(id_of<LabelId>(req, "label_id"), req.at("name").get<std::string>());
        return ordered_json::object();
    }
    if (type == "DELETE_LABEL") {
        agent_.delete_label(id_of<LabelId>(req, "label_id"));
        return ordered_json::object();
    }
    if (type == "CAPTURE") {
        LabelId label = req.contains("label_id") ? id_of<LabelId>(req, "label_id")
                                                 : agent_.ensure_label(req.at("label").get<std::string>());
        Split split = split_from_string(req.value("split", "training"));
        SampleId id = agent_.capture(label, image_of(req), split, tags_of(req));
        return {{"sample_id", id.str()}, {"label_id", label.str()}};
    }
    if (type == "DELETE_SAMPLE") {
        agent_.delete_sample(id_of<SampleId>(req, "sample_id"));
        return ordered_json::object();
    }
    if (type == "TAG_SAMPLE") {
        agent_.tag_sample(id_of<SampleId>(req, "sample_id"), tags_of(req));
        return ordered_json::object();
    }
    if (type == "RELABEL") {
        agent_.relabel(id_of<SampleId>(req, "sample_id"), id_of<LabelId>(req, "label_id"));
        return ordered_json::object();
    }
    if (type == "RETRAIN") {
        TrainedModel m = agent_.retrain(req.value("seed", std::uint64_t{0}));
        return {{"model_version", m.version},
                {"label_order", labels_json(m.label_order)},
                {"train_sample_count", m.train_sample_count}};
    }
    if (type == "TEST_PHOTO") return to_json(agent_.test_photo(image_of(req)));
    if (type == "LIVE_START") {
        agent_.start_live();
        std::lock_guard lock(live_mu_);
        live_ = true;
        return ordered_json::object();
    }
    if (type == "LIVE_STOP") {
        std::lock_guard lock(live_mu_);
        live_ = false;
        return ordered_json::object();
    }
    if (type == "LIVE_FRAME") {
        {
            std::lock_guard lock(live_mu_);
            if (!live_) throw Error(ErrorCode::ValidationError, "live classification is not running");
        }
        auto conf = agent_.live_frame(image_of(req));
        if (conf && push) {
            auto m = agent_.model();
            push({{"type", "LIVE_RESULT"},
                  {"label_order", labels_json(m ? m->label_order : std::vector<LabelId>{})},
                  {"confidence", *conf}});
        }
        return {{"accepted", conf.has_value()}};
    }
    if (type == "GAME_START") return {{"target", agent_.start_game(req.value("seed", std::uint64_t{0})).str()}};
    if (type == "GAME_ROUND") {
        auto r = agent_.game_round(image_of(req));
        ordered_json out{{"target", r.round.target.str()},
                 {"final_confidence", r.round.final_confidence},
                 {"score", r.round.score},
                 {"finished", r.finished}};
        out["next_target"] = r.next_target ? ordered_json(r.next_target->str()) : ordered_json();
        return out;
    }
    if (type == "GAME_END") return to_json(agent_.end_game());
    if (type == "DASHBOARD_QUERY") {
        Split split = split_from_string(req.value("split", "training"));
        return to_json(agent_.dashboard(split, req.value("page", std::size_t{1})), agent_.view());
    }
    if (type == "STATS_QUERY") return to_json(agent_.stats());
    if (type == "EXPORT_MODEL") {
        auto m = agent_.model();
        if (!m) throw Error(ErrorCode::InsufficientData, "no model has been trained on this device");
        if (req.contains("path")) agent_.export_model(req["path"].get<std::string>());
        return {{"model", serialize_model(*m)}};
    }
    if (type == "EXPORT_LOG") return {{"ndjson", write_event_log(agent_.events())}};
    if (type == "BLOB_GET") {
        auto d = Digest::parse(req.at("digest").get<std::string>());
        if (!d) throw Error(ErrorCode::UnknownDigest, "malformed digest");
        return {{"digest", d->hex()}, {"ppm", base64_encode(agent_.blob(*d))}};
    }
    throw Error(ErrorCode::Protocol, "unknown request type " + type);
}

struct LocalApiServer::Connection {
    net::TcpStream stream;
    std::mutex write_mu;
    std::thread thread;
    std::atomic<bool> done{false};
};

LocalApiServer::LocalApiServer(Agent& agent, const net::Endpoint& listen)
    : api_(agent), listener_(net::TcpListener::bind(listen)) {
    accept_thread_ = std::thread([this] { accept_loop(); });
}

LocalApiServer::~LocalApiServer() { stop(); }

void LocalApiServer::accept_loop() {
    while (!stopping_) {
        net::TcpStream s = listener_.accept();
        if (!s.valid() || stopping_) break;
        auto conn = std::make_shared<Connection>();
        conn->stream = std::move(s);
        conn->thread = std::thread([this, conn] {
            auto send = [&](const ordered_json& msg) {
                const std::string text = msg.dump();
                std::lock_guard lock(conn->write_mu);
                net::write_frame(conn->stream, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
            };
            try {
                while (auto frame = net::read_frame(conn->stream, net::kMaxJsonFrame)) {
                    json req = json::parse(frame->begin(), frame->end(), nullptr, false);
                    send(api_.handle(req, send));
                }
            } catch (const std::exception&) {
                // client went away
            }
            conn->done = true;
        });
        std::lock_guard lock(conns_mu_);
        for (auto it = conns_.begin(); it != conns_.end();) {
            if ((*it)->done) {
                (*it)->thread.join();
                it = conns_.erase(it);
            } else {
                ++it;
            }
        }
        conns_.push_back(std::move(conn));
    }
}

void LocalApiServer::stop() {
    if (stopping_.exchange(true)) return;
    listener_.shutdown();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard lock(conns_mu_);
    for (auto& c : conns_) c->stream.shutdown();
    for (auto& c : conns_) {
        if (c->thread.joinable()) c->thread.join();
    }
    conns_.clear();
}

}  // namespace coml
