#include "coml/server.hpp"

#include "coml/errors.hpp"

#include <condition_variable>
#include <deque>
#include <iostream>

namespace coml {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxRequestJson = 1u << 20;

json error_message(ErrorCode code, const std::string& detail) {
    return json{{"type", "ERROR"}, {"code", std::string(to_string(code))}, {"detail", detail}};
}

}  // namespace

class Server::Session final : public Subscriber, public std::enable_shared_from_this<Server::Session> {
public:
    Session(Server& server, net::TcpStream stream) : server_(server), stream_(std::move(stream)) {}

    void start() {
        auto self = shared_from_this();
        writer_ = std::thread([self] { self->write_loop(); });
        reader_ = std::thread([self] { self->read_loop(); });
    }

    void deliver(const DatasetOp& op) override { enqueue({net::encode_message({{"type", "OP_COMMIT"}, {"op", to_json(op)}})}); }

    void on_hello(const std::vector<DatasetOp>& delta) override {
        json ops = json::array();
        for (const auto& op : delta) ops.push_back(to_json(op));
        enqueue({net::encode_message({{"type", "DELTA"}, {"ops", std::move(ops)}})});
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
        stream_.shutdown();
    }

    void join() {
        if (reader_.joinable()) reader_.join();
        if (writer_.joinable()) writer_.join();
    }

    bool finished() const { return finished_.load(); }

private:
    void enqueue(std::vector<std::vector<std::uint8_t>> frames) {
        {
            std::lock_guard lock(mu_);
            if (closed_) return;
            for (auto& f : frames) outbox_.push_back(std::move(f));
        }
        cv_.notify_one();
    }

    void send(const json& msg) { enqueue({net::encode_message(msg)}); }

    void write_loop() {
        try {
            for (;;) {
                std::vector<std::uint8_t> frame;
                {
                    std::unique_lock lock(mu_);
                    cv_.wait(lock, [&] { return closed_ || !outbox_.empty(); });
                    if (outbox_.empty()) return;
                    frame = std::move(outbox_.front());
                    outbox_.pop_front();
                }
                net::write_frame(stream_, frame);
            }
        } catch (const Error&) {
            stream_.shutdown();
        }
    }

    void read_loop() {
        try {
            while (auto frame = net::read_frame(stream_, kMaxRequestJson)) {
                json msg;
                try {
                    msg = net::parse_message(*frame);
                } catch (const Error& e) {
                    send(error_message(e.code(), e.detail()));
                    break;
                }
                if (!handle(msg)) break;
            }
        } catch (const Error&) {
            // peer vanished or sent an oversized frame
        }
        if (project_) server_.service_.unsubscribe(*project_, this);
        close();
        finished_ = true;
    }

    static ProjectId project_of(const json& msg) {
        auto id = ProjectId::parse(msg.value("project_id", ""));
        if (!id) throw Error(ErrorCode::UnknownProject, "missing or malformed project_id");
        return *id;
    }

    static std::string token_of(const json& msg) { return msg.value("token", ""); }

    /// Returns false when the connection must be dropped.
    bool handle(const json& msg) {
        const std::string type = msg["type"].get<std::string>();
        SyncService& svc = server_.service_;
        try {
            if (type == "HELLO") {
                ProjectId pid = project_of(msg);
                if (project_) throw Error(ErrorCode::Protocol, "HELLO sent twice");
                auto last = msg.value("last_seq", std::uint64_t{0});
                project_ = pid;
                try {
                    svc.hello(pid, token_of(msg), last, shared_from_this());
                } catch (...) {
                    project_.reset();
                    throw;
                }
            } else if (type == "OP_SUBMIT") {
                ProjectId pid = project_of(msg);
                if (!msg.contains("op")) throw Error(ErrorCode::MalformedOp, "OP_SUBMIT without op");
                DatasetOp op = op_from_json(msg["op"]);
                auto res = svc.sequence(pid, token_of(msg), op);
                if (res.duplicate) {
                    json err = error_message(ErrorCode::DuplicateOp, "op " + op.op_id.str() + " already sequenced");
                    err["seq"] = res.seq;
                    err["op_id"] = op.op_id.str();
                    send(err);
                } else {
                    send({{"type", "OP_ACK"}, {"op_id", op.op_id.str()}, {"seq", res.seq}});
                }
            } else if (type == "BLOB_PUT") {
                auto len = msg.value("len", std::uint64_t{0});
                auto body = net::read_frame(stream_, svc.options().max_blob_bytes + 1024);
                if (!body) return false;
                if (body->size() != len) throw Error(ErrorCode::Protocol, "BLOB_PUT length mismatch");
                ProjectId pid = project_of(msg);
                Digest d = svc.put_blob(pid, token_of(msg), *body);
                if (msg.contains("digest") && msg["digest"].get<std::string>() != d.hex()) {
                    throw Error(ErrorCode::MalformedImage, "digest does not match content");
                }
                send({{"type", "BLOB_OK"}, {"digest", d.hex()}});
            } else if (type == "BLOB_GET") {
                ProjectId pid = project_of(msg);
                auto d = Digest::parse(msg.value("digest", ""));
                if (!d) throw Error(ErrorCode::UnknownDigest, "malformed digest");
                auto bytes = svc.get_blob(pid, token_of(msg), *d);
                json head{{"type", "BLOB"}, {"digest", d->hex()}, {"len", bytes.size()}};
                enqueue({net::encode_message(head), std::move(bytes)});
            } else if (type == "CREATE_PROJECT") {
                auto created = svc.create_project(msg.value("name", ""));
                send({{"type", "PROJECT_CREATED"}, {"project_id", created.id.str()}, {"token", created.token}});
            } else {
                send(error_message(ErrorCode::Protocol, "unknown message type " + type));
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Connectivity) return false;
            send(error_message(e.code(), e.detail()));
        } catch (const std::exception& e) {
            send(error_message(ErrorCode::Protocol, e.what()));
        }
        return true;
    }

    Server& server_;
    net::TcpStream stream_;
    std::optional<ProjectId> project_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::vector<std::uint8_t>> outbox_;
    bool closed_ = false;
    std::atomic<bool> finished_{false};
    std::thread reader_;
    std::thread writer_;
};

Server::Server(ServerOptions options)
    : options_(std::move(options)), service_(options_.service), listener_(net::TcpListener::bind(options_.listen)) {
    accept_thread_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::accept_loop() {
    while (!stopping_) {
        net::TcpStream s = listener_.accept();
        if (!s.valid()) break;
        if (stopping_) break;
        auto session = std::make_shared<Session>(*this, std::move(s));
        {
            std::lock_guard lock(sessions_mu_);
            sessions_.push_back(session);
        }
        session->start();
        reap_finished();
    }
}

void Server::reap_finished() {
    std::list<std::shared_ptr<Session>> done;
    {
        std::lock_guard lock(sessions_mu_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if ((*it)->finished()) {
                done.push_back(*it);
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& s : done) s->join();
}

void Server::stop() {
    if (stopping_.exchange(true)) return;
    listener_.shutdown();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::list<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(sessions_mu_);
        all.swap(sessions_);
    }
    for (auto& s : all) s->close();
    for (auto& s : all) s->join();
}

}  // namespace coml
