#include "coml/server_link.hpp"

#include "coml/errors.hpp"

namespace coml {

using nlohmann::json;

namespace {

[[noreturn]] void throw_server_error(const json& msg) {
    throw Error(error_code_from_string(msg.value("code", "Protocol")), msg.value("detail", std::string("server error")));
}

std::size_t blob_frame_limit() { return kDefaultMaxBlobBytes + 1024; }

}  // namespace

ServerLink::ServerLink(net::TcpStream stream, ProjectId project, std::string token, Callbacks callbacks,
                       std::chrono::milliseconds timeout)
    : stream_(std::move(stream)),
      project_(project),
      token_(std::move(token)),
      callbacks_(std::move(callbacks)),
      timeout_(timeout) {}

std::pair<std::unique_ptr<ServerLink>, std::vector<DatasetOp>> ServerLink::open(
    const net::Endpoint& server, const ProjectId& project, const std::string& token, const DeviceId& device,
    std::uint64_t last_seq, Callbacks callbacks, std::chrono::milliseconds timeout) {
    net::TcpStream stream = net::TcpStream::connect(server, timeout);
    net::write_json(stream, {{"type", "HELLO"},
                             {"project_id", project.str()},
                             {"token", token},
                             {"device_id", device.str()},
                             {"last_seq", last_seq}});
    auto reply = net::read_json(stream, net::kMaxJsonFrame);
    if (!reply) throw Error(ErrorCode::Connectivity, "server closed the connection during HELLO");
    if ((*reply)["type"] == "ERROR") throw_server_error(*reply);
    if ((*reply)["type"] != "DELTA") throw Error(ErrorCode::Protocol, "expected DELTA after HELLO");
    std::vector<DatasetOp> delta;
    for (const auto& op : reply->at("ops")) delta.push_back(op_from_json(op));

    std::unique_ptr<ServerLink> link(new ServerLink(std::move(stream), project, token, std::move(callbacks), timeout));
    link->reader_ = std::thread([l = link.get()] { l->read_loop(); });
    return {std::move(link), std::move(delta)};
}

ServerLink::~ServerLink() {
    close();
    if (reader_.joinable()) reader_.join();
}

void ServerLink::close() {
    stream_.shutdown();
    alive_ = false;
    slot_cv_.notify_all();
}

void ServerLink::read_loop() {
    try {
        while (auto msg = net::read_json(stream_, net::kMaxJsonFrame)) {
            const std::string type = (*msg)["type"].get<std::string>();
            if (type == "OP_COMMIT") {
                if (callbacks_.on_commit) callbacks_.on_commit(op_from_json(msg->at("op")));
                continue;
            }
            Response r{std::move(*msg), {}};
            if (type == "BLOB") {
                auto payload = net::read_frame(stream_, blob_frame_limit());
                if (!payload) break;
                r.payload = std::move(*payload);
            }
            {
                std::lock_guard lock(slot_mu_);
                if (waiting_) slot_ = std::move(r);
            }
            slot_cv_.notify_all();
        }
    } catch (const std::exception&) {
        // connection lost or garbled; treated as disconnect
    }
    alive_ = false;
    slot_cv_.notify_all();
    if (callbacks_.on_disconnect) callbacks_.on_disconnect();
}

json ServerLink::with_auth(json msg) const {
    msg["project_id"] = project_.str();
    msg["token"] = token_;
    return msg;
}

ServerLink::Response ServerLink::request(const json& msg, std::span<const std::uint8_t> payload) {
    std::lock_guard request_lock(request_mu_);
    if (!alive_) throw Error(ErrorCode::Connectivity, "not connected");
    {
        std::lock_guard lock(slot_mu_);
        slot_.reset();
        waiting_ = true;
    }
    try {
        net::write_json(stream_, msg);
        if (!payload.empty() || msg.contains("len")) net::write_frame(stream_, payload);
    } catch (...) {
        std::lock_guard lock(slot_mu_);
        waiting_ = false;
        close();
        throw;
    }
    std::unique_lock lock(slot_mu_);
    bool got = slot_cv_.wait_for(lock, timeout_, [&] { return slot_.has_value() || !alive_; });
    waiting_ = false;
    if (!slot_) {
        lock.unlock();
        if (!got) close();
        throw Error(ErrorCode::Connectivity, got ? "connection lost" : "request timed out");
    }
    Response r = std::move(*slot_);
    slot_.reset();
    return r;
}

SequenceResult ServerLink::submit(const DatasetOp& op) {
    auto r = request(with_auth({{"type", "OP_SUBMIT"}, {"op", to_json(op)}}));
    const auto& type = r.msg["type"];
    if (type == "OP_ACK") return SequenceResult{r.msg.at("seq").get<std::uint64_t>(), false};
    if (type == "ERROR" && r.msg.value("code", "") == "DuplicateOp") {
        return SequenceResult{r.msg.at("seq").get<std::uint64_t>(), true};
    }
    if (type == "ERROR") throw_server_error(r.msg);
    throw Error(ErrorCode::Protocol, "unexpected reply to OP_SUBMIT");
}

Digest ServerLink::put_blob(std::span<const std::uint8_t> bytes) {
    json msg = with_auth({{"type", "BLOB_PUT"}, {"len", bytes.size()}});
    auto r = request(msg, bytes);
    if (r.msg["type"] == "ERROR") throw_server_error(r.msg);
    if (r.msg["type"] != "BLOB_OK") throw Error(ErrorCode::Protocol, "unexpected reply to BLOB_PUT");
    auto d = Digest::parse(r.msg.value("digest", ""));
    if (!d) throw Error(ErrorCode::Protocol, "BLOB_OK without a digest");
    return *d;
}

std::vector<std::uint8_t> ServerLink::get_blob(const Digest& digest) {
    auto r = request(with_auth({{"type", "BLOB_GET"}, {"digest", digest.hex()}}));
    if (r.msg["type"] == "ERROR") throw_server_error(r.msg);
    if (r.msg["type"] != "BLOB") throw Error(ErrorCode::Protocol, "unexpected reply to BLOB_GET");
    if (sha256(std::span<const std::uint8_t>(r.payload)) != digest) {
        throw Error(ErrorCode::Protocol, "blob content does not match its digest");
    }
    return std::move(r.payload);
}

CreatedProject ServerLink::create_project(const net::Endpoint& server, const std::string& name,
                                          std::chrono::milliseconds timeout) {
    net::TcpStream stream = net::TcpStream::connect(server, timeout);
    net::write_json(stream, {{"type", "CREATE_PROJECT"}, {"name", name}});
    auto reply = net::read_json(stream, net::kMaxJsonFrame);
    if (!reply) throw Error(ErrorCode::Connectivity, "server closed the connection");
    if ((*reply)["type"] == "ERROR") throw_server_error(*reply);
    auto id = ProjectId::parse(reply->value("project_id", ""));
    if (!id) throw Error(ErrorCode::Protocol, "PROJECT_CREATED without a project id");
    return CreatedProject{*id, reply->value("token", "")};
}

}  // namespace coml
