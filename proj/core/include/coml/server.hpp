#pragma once

#include "coml/net.hpp"
#include "coml/sync_service.hpp"

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

namespace coml {

struct ServerOptions {
    net::Endpoint listen{"127.0.0.1", 0};
    ServiceOptions service;
};

/// TCP front end for SyncService.
///
/// Wire messages (JSON frames, see net.hpp for framing); every request
/// except CREATE_PROJECT carries project_id and token:
///   HELLO{project_id, token, device_id, last_seq}  -> DELTA{ops[]}, then OP_COMMIT stream
///   OP_SUBMIT{op}                                  -> OP_ACK{op_id, seq} | ERROR{code, detail[, seq]}
///   BLOB_PUT{digest, len} + binary frame           -> BLOB_OK{digest} | ERROR
///   BLOB_GET{digest}                               -> BLOB{digest, len} + binary frame | ERROR
///   CREATE_PROJECT{name}                           -> PROJECT_CREATED{project_id, token}
class Server {
public:
    explicit Server(ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    std::uint16_t port() const { return listener_.port(); }
    SyncService& service() { return service_; }

    /// Stops accepting, closes every session and joins all threads.
    void stop();

private:
    class Session;
    void accept_loop();
    void reap_finished();

    ServerOptions options_;
    SyncService service_;
    net::TcpListener listener_;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex sessions_mu_;
    std::list<std::shared_ptr<Session>> sessions_;
};

}  // namespace coml
