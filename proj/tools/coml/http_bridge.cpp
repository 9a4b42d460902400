#include "http_bridge.hpp"

#include "coml/errors.hpp"

#include <httplib.h>

#include <condition_variable>
#include <deque>
#include <mutex>

namespace coml {

using nlohmann::json;
using nlohmann::ordered_json;

struct HttpBridge::LiveBuffer {
    static constexpr std::size_t kKeep = 256;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<std::uint64_t, std::string>> items;
    std::uint64_t next = 1;

    void push(const ordered_json& msg) {
        {
            std::lock_guard lock(mu);
            items.emplace_back(next++, msg.dump());
            if (items.size() > kKeep) items.pop_front();
        }
        cv.notify_all();
    }

    std::string since(std::uint64_t after, std::chrono::milliseconds wait) {
        std::unique_lock lock(mu);
        cv.wait_for(lock, wait, [&] { return next - 1 > after; });
        std::string out = "{\"results\":[";
        bool first = true;
        std::uint64_t last = after;
        for (const auto& [seq, text] : items) {
            if (seq <= after) continue;
            out += first ? "" : ",";
            out += "{\"seq\":" + std::to_string(seq) + ",\"message\":" + text + "}";
            first = false;
            last = seq;
        }
        out += "],\"last\":" + std::to_string(last) + "}";
        return out;
    }
};

HttpBridge::HttpBridge(LocalApi& api, const std::string& host, int port)
    : api_(api), live_(std::make_unique<LiveBuffer>()), server_(std::make_unique<httplib::Server>()) {
    server_->Post("/api", [this](const httplib::Request& req, httplib::Response& res) {
        json request = json::parse(req.body, nullptr, false);
        auto reply = api_.handle(request, [this](const ordered_json& msg) { live_->push(msg); });
        res.status = reply["type"] == "ERROR" ? 400 : 200;
        res.set_content(reply.dump(), "application/json");
    });
    server_->Get("/api/live", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t after = 0;
        if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
        res.set_content(live_->since(after, std::chrono::seconds(2)), "application/json");
    });
    server_->Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("coml agent: POST /api with a JSON request\n", "text/plain");
    });
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::Connectivity, "cannot bind HTTP bridge to " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
}

HttpBridge::~HttpBridge() { stop(); }

void HttpBridge::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace coml
