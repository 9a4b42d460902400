#include "coml/net.hpp"

#include "coml/errors.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

namespace coml::net {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw Error(ErrorCode::Connectivity, what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const Endpoint& ep) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    std::string host = ep.host.empty() ? "127.0.0.1" : ep.host;
    if (host == "localhost") host = "127.0.0.1";
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
        throw Error(ErrorCode::Connectivity, "cannot resolve host " + host);
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
    auto colon = text.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::Connectivity, "endpoint must be host:port, got " + text);
    Endpoint ep;
    ep.host = text.substr(0, colon);
    if (ep.host.empty()) ep.host = "127.0.0.1";
    try {
        int port = std::stoi(text.substr(colon + 1));
        if (port < 0 || port > 65535) throw std::out_of_range("port");
        ep.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
        throw Error(ErrorCode::Connectivity, "bad port in " + text);
    }
    return ep;
}

TcpStream::~TcpStream() { close(); }

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

TcpStream TcpStream::connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
    sockaddr_in addr = resolve(ep);
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
    if (fd < 0) fail("socket");
    TcpStream s(fd);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (rc != 0 && errno != EINPROGRESS) fail("connect to " + ep.str());
    if (rc != 0) {
        pollfd pfd{fd, POLLOUT, 0};
        int n = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        if (n <= 0) throw Error(ErrorCode::Connectivity, "connect to " + ep.str() + " timed out");
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            errno = err;
            fail("connect to " + ep.str());
        }
    }
    int flags = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &flags, sizeof flags);
    // back to blocking mode for the simple read/write loops below
    int fl = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, fl & ~O_NONBLOCK);
    return s;
}

void TcpStream::write_all(std::span<const std::uint8_t> data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("send");
        }
        off += static_cast<std::size_t>(n);
    }
}

bool TcpStream::read_exact(std::span<std::uint8_t> out) {
    std::size_t off = 0;
    while (off < out.size()) {
        ssize_t n = ::recv(fd_, out.data() + off, out.size() - off, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("recv");
        }
        if (n == 0) {
            if (off == 0) return false;
            throw Error(ErrorCode::Connectivity, "connection closed mid-frame");
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

void TcpStream::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpStream::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

TcpListener::TcpListener(TcpListener&& other) noexcept : fd_(other.fd_), port_(other.port_) { other.fd_ = -1; }

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        port_ = other.port_;
        other.fd_ = -1;
    }
    return *this;
}

TcpListener TcpListener::bind(const Endpoint& ep) {
    sockaddr_in addr = resolve(ep);
    TcpListener l;
    l.fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (l.fd_ < 0) fail("socket");
    int one = 1;
    ::setsockopt(l.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(l.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) fail("bind " + ep.str());
    if (::listen(l.fd_, 64) != 0) fail("listen");
    socklen_t len = sizeof addr;
    ::getsockname(l.fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    l.port_ = ntohs(addr.sin_port);
    return l;
}

TcpStream TcpListener::accept() {
    for (;;) {
        int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd >= 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return TcpStream(fd);
        }
        if (errno == EINTR || errno == ECONNABORTED) continue;
        return TcpStream();
    }
}

void TcpListener::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void write_frame(TcpStream& s, std::span<const std::uint8_t> payload) {
    std::vector<std::uint8_t> buf;
    buf.reserve(4 + payload.size());
    auto len = static_cast<std::uint32_t>(payload.size());
    for (int i = 3; i >= 0; --i) buf.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    buf.insert(buf.end(), payload.begin(), payload.end());
    s.write_all(buf);
}

std::optional<std::vector<std::uint8_t>> read_frame(TcpStream& s, std::size_t max_len) {
    std::array<std::uint8_t, 4> hdr{};
    if (!s.read_exact(hdr)) return std::nullopt;
    std::uint32_t len = (std::uint32_t{hdr[0]} << 24) | (std::uint32_t{hdr[1]} << 16) | (std::uint32_t{hdr[2]} << 8) |
                        std::uint32_t{hdr[3]};
    if (len > max_len) {
        throw Error(ErrorCode::Protocol, "frame of " + std::to_string(len) + " bytes exceeds limit");
    }
    std::vector<std::uint8_t> payload(len);
    if (len > 0 && !s.read_exact(payload)) throw Error(ErrorCode::Connectivity, "connection closed mid-frame");
    return payload;
}

std::vector<std::uint8_t> encode_message(const nlohmann::json& msg) {
    std::string text = msg.dump();
    return {text.begin(), text.end()};
}

nlohmann::json parse_message(std::span<const std::uint8_t> frame) {
    auto j = nlohmann::json::parse(frame.begin(), frame.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw Error(ErrorCode::Protocol, "frame is not a typed JSON message");
    }
    return j;
}

void write_json(TcpStream& s, const nlohmann::json& msg) { write_frame(s, encode_message(msg)); }

std::optional<nlohmann::json> read_json(TcpStream& s, std::size_t max_len) {
    auto frame = read_frame(s, max_len);
    if (!frame) return std::nullopt;
    return parse_message(*frame);
}

}  // namespace coml::net
