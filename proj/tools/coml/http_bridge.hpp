#pragma once

#include "coml/local_api.hpp"

#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace coml {

/// Exposes a LocalApi to browsers: POST /api with a request object returns
/// the reply; GET /api/live?after=N long-polls LIVE_RESULT messages.
class HttpBridge {
public:
    HttpBridge(LocalApi& api, const std::string& host, int port);
    ~HttpBridge();
    HttpBridge(const HttpBridge&) = delete;
    HttpBridge& operator=(const HttpBridge&) = delete;

    int port() const { return port_; }
    void stop();

private:
    struct LiveBuffer;
    LocalApi& api_;
    std::unique_ptr<LiveBuffer> live_;
    std::unique_ptr<httplib::Server> server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace coml
