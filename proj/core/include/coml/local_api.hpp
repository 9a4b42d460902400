#pragma once

#include "coml/agent.hpp"
#include "coml/net.hpp"

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

namespace coml {

/// Request/response surface of one agent, shared by the CLI, the TCP
/// endpoint and the HTTP bridge. Requests and replies are JSON objects with
/// a "type" member; a reply's type is the request type suffixed "_OK", or
/// ERROR{code, detail}. Images travel as base64 PPM in a "ppm" member.
///
///   JOIN{server, project_id, token}       CONNECT  DISCONNECT  SYNC
///   ADD_LABEL{name}                       RENAME_LABEL{label_id, name}
///   DELETE_LABEL{label_id}                CAPTURE{label_id|label, split, tags[], ppm}
///   DELETE_SAMPLE{sample_id}              TAG_SAMPLE{sample_id, tags[]}
///   RELABEL{sample_id, label_id}          RETRAIN{seed}
///   TEST_PHOTO{ppm}                       LIVE_START  LIVE_FRAME{ppm}  LIVE_STOP
///   GAME_START{seed}  GAME_ROUND{ppm}  GAME_END
///   DASHBOARD_QUERY{split, page}          STATS_QUERY
///   EXPORT_MODEL{path?}                   EXPORT_LOG
///   BLOB_GET{digest}
///
/// While live mode is on, each accepted LIVE_FRAME also pushes
/// LIVE_RESULT{label_order, confidence} on the stream channel.
class LocalApi {
public:
    using Push = std::function<void(const nlohmann::ordered_json&)>;

    explicit LocalApi(Agent& agent) : agent_(agent) {}

    /// Never throws; failures become ERROR replies.
    nlohmann::ordered_json handle(const nlohmann::json& request, const Push& push = {});

private:
    nlohmann::ordered_json dispatch(const std::string& type, const nlohmann::json& request, const Push& push);

    Agent& agent_;
    std::mutex live_mu_;
    bool live_ = false;
};

/// Serves a LocalApi over TCP with the server's framing. Pushed stream
/// messages share the connection with replies.
class LocalApiServer {
public:
    LocalApiServer(Agent& agent, const net::Endpoint& listen);
    ~LocalApiServer();
    LocalApiServer(const LocalApiServer&) = delete;
    LocalApiServer& operator=(const LocalApiServer&) = delete;

    std::uint16_t port() const { return listener_.port(); }
    LocalApi& api() { return api_; }
    void stop();

private:
    struct Connection;
    void accept_loop();

    LocalApi api_;
    net::TcpListener listener_;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex conns_mu_;
    std::list<std::shared_ptr<Connection>> conns_;
};

}  // namespace coml
