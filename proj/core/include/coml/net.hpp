#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coml::net {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
};

/// Parses "host:port" (host may be empty, meaning 127.0.0.1).
Endpoint parse_endpoint(const std::string& text);

/// Connected TCP socket. Move-only; closes on destruction.
class TcpStream {
public:
    TcpStream() = default;
    explicit TcpStream(int fd) : fd_(fd) {}
    ~TcpStream();
    TcpStream(TcpStream&& other) noexcept;
    TcpStream& operator=(TcpStream&& other) noexcept;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    /// Throws Connectivity on failure.
    static TcpStream connect(const Endpoint& ep, std::chrono::milliseconds timeout = std::chrono::seconds(5));

    bool valid() const { return fd_ >= 0; }
    void write_all(std::span<const std::uint8_t> data);
    /// Returns false on clean EOF before any byte was read.
    bool read_exact(std::span<std::uint8_t> out);
    /// Unblocks readers and writers in other threads.
    void shutdown();
    void close();

private:
    int fd_ = -1;
};

class TcpListener {
public:
    TcpListener() = default;
    ~TcpListener();
    TcpListener(TcpListener&& other) noexcept;
    TcpListener& operator=(TcpListener&& other) noexcept;
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    static TcpListener bind(const Endpoint& ep);

    std::uint16_t port() const { return port_; }
    /// Blocks; returns an invalid stream once the listener is shut down.
    TcpStream accept();
    void shutdown();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Framing: 4-byte big-endian length, then the payload. JSON messages carry
/// a "type" member; binary payloads follow their announcing JSON frame.
void write_frame(TcpStream& s, std::span<const std::uint8_t> payload);
std::optional<std::vector<std::uint8_t>> read_frame(TcpStream& s, std::size_t max_len);

void write_json(TcpStream& s, const nlohmann::json& msg);
/// Throws Protocol if the frame is not a JSON object with a string "type".
std::optional<nlohmann::json> read_json(TcpStream& s, std::size_t max_len);

nlohmann::json parse_message(std::span<const std::uint8_t> frame);
std::vector<std::uint8_t> encode_message(const nlohmann::json& msg);

inline constexpr std::size_t kMaxJsonFrame = 64u << 20;

}  // namespace coml::net
