#pragma once

#include "coml/net.hpp"
#include "coml/ops.hpp"
#include "coml/sync_service.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

namespace coml {

/// Client side of the sync protocol for one project.
///
/// The handshake (HELLO then DELTA) runs synchronously in open(). Afterwards
/// a reader thread hands OP_COMMIT ops to `on_commit` and routes responses
/// to the single outstanding request. Callbacks run on the reader thread and
/// must not block on anything that waits for this link.
class ServerLink {
public:
    struct Callbacks {
        std::function<void(const DatasetOp&)> on_commit;
        std::function<void()> on_disconnect;
    };

    /// Connects and sends HELLO. Returns the catch-up delta along with the
    /// link. Throws Connectivity, or the server's error (AuthFailure, ...).
    static std::pair<std::unique_ptr<ServerLink>, std::vector<DatasetOp>> open(
        const net::Endpoint& server, const ProjectId& project, const std::string& token, const DeviceId& device,
        std::uint64_t last_seq, Callbacks callbacks, std::chrono::milliseconds timeout = std::chrono::seconds(10));

    ~ServerLink();
    ServerLink(const ServerLink&) = delete;
    ServerLink& operator=(const ServerLink&) = delete;

    /// DuplicateOp replies are reported as a duplicate result with the
    /// original seq. Other server errors are rethrown as Error.
    SequenceResult submit(const DatasetOp& op);
    Digest put_blob(std::span<const std::uint8_t> ppm_bytes);
    std::vector<std::uint8_t> get_blob(const Digest& digest);

    bool alive() const { return alive_.load(); }
    void close();

    /// One-shot CREATE_PROJECT on a fresh connection.
    static CreatedProject create_project(const net::Endpoint& server, const std::string& name,
                                         std::chrono::milliseconds timeout = std::chrono::seconds(10));

private:
    struct Response {
        nlohmann::json msg;
        std::vector<std::uint8_t> payload;
    };

    ServerLink(net::TcpStream stream, ProjectId project, std::string token, Callbacks callbacks,
               std::chrono::milliseconds timeout);
    void read_loop();
    Response request(const nlohmann::json& msg, std::span<const std::uint8_t> payload = {});
    nlohmann::json with_auth(nlohmann::json msg) const;

    net::TcpStream stream_;
    ProjectId project_;
    std::string token_;
    Callbacks callbacks_;
    std::chrono::milliseconds timeout_;

    std::mutex request_mu_;  // one request in flight
    std::mutex slot_mu_;
    std::condition_variable slot_cv_;
    std::optional<Response> slot_;
    bool waiting_ = false;

    std::atomic<bool> alive_{true};
    std::thread reader_;
};

}  // namespace coml
