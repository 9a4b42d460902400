#include "coml/errors.hpp"
#include "coml/net.hpp"
#include "coml/project.hpp"
#include "coml/server.hpp"
#include "coml/server_link.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <sys/socket.h>

#include <condition_variable>

namespace coml {
namespace {

using nlohmann::json;
using testing::blob_ref;
using testing::device_id;
using testing::numbered_image;

class NetworkTest : public ::testing::Test {
protected:
    NetworkTest() : server_(ServerOptions{}) { endpoint_ = net::Endpoint{"127.0.0.1", server_.port()}; }

    Server server_;
    net::Endpoint endpoint_;
};

struct Collected {
    std::mutex mu;
    std::condition_variable cv;
    std::vector<DatasetOp> ops;

    bool wait_for(std::size_t n) {
        std::unique_lock lock(mu);
        return cv.wait_for(lock, std::chrono::seconds(5), [&] { return ops.size() >= n; });
    }
};

ServerLink::Callbacks collect_into(Collected& c) {
    return {[&c](const DatasetOp& op) {
                std::lock_guard lock(c.mu);
                c.ops.push_back(op);
                c.cv.notify_all();
            },
            {}};
}

TEST(Framing, LengthPrefixIsBigEndian) {
    int fds[2];
    ASSERT_EQ(socketpair(AF_UNIX, SOCK_STREAM, 0, fds), 0);
    net::TcpStream a(fds[0]);
    net::TcpStream b(fds[1]);
    net::write_json(a, json{{"type", "HELLO"}});
    std::array<std::uint8_t, 4> prefix{};
    ASSERT_TRUE(b.read_exact(prefix));
    const std::uint32_t len = (prefix[0] << 24) | (prefix[1] << 16) | (prefix[2] << 8) | prefix[3];
    EXPECT_EQ(len, net::encode_message(json{{"type", "HELLO"}}).size());
    std::vector<std::uint8_t> body(len);
    ASSERT_TRUE(b.read_exact(body));
    EXPECT_EQ(net::parse_message(body)["type"], "HELLO");
    std::string not_object = "[1]";
    EXPECT_THROW(net::parse_message({reinterpret_cast<const std::uint8_t*>(not_object.data()), not_object.size()}),
                 Error);
}

TEST(Framing, EndpointParsing) {
    auto e = net::parse_endpoint("10.0.0.2:7420");
    EXPECT_EQ(e.host, "10.0.0.2");
    EXPECT_EQ(e.port, 7420);
    EXPECT_EQ(net::parse_endpoint(":81").host, "127.0.0.1");
    EXPECT_THROW(net::parse_endpoint("nope"), Error);
}

TEST_F(NetworkTest, JoinSubmitAndBroadcast) {
    auto p = ServerLink::create_project(endpoint_, "demo");
    Collected a_seen;
    Collected b_seen;
    auto [a, a_delta] = ServerLink::open(endpoint_, p.id, p.token, device_id(1), 0, collect_into(a_seen));
    auto [b, b_delta] = ServerLink::open(endpoint_, p.id, p.token, device_id(2), 0, collect_into(b_seen));
    EXPECT_TRUE(a_delta.empty());

    ReplicatedProject replica(p.id);
    IdSource ids(1);
    auto label = replica.local_submit(intent::AddLabel{"avocado"}, device_id(1), ids, 0);
    auto ack = a->submit(label);
    EXPECT_EQ(ack.seq, 1u);
    EXPECT_FALSE(ack.duplicate);
    auto dup = a->submit(label);
    EXPECT_TRUE(dup.duplicate);
    EXPECT_EQ(dup.seq, 1u);

    auto img = numbered_image(44);
    const auto bytes = encode_ppm(img);
    EXPECT_EQ(b->put_blob(bytes), img.digest());
    EXPECT_EQ(a->get_blob(img.digest()), bytes);
    auto add = replica.local_submit(intent::AddSample{std::get<op::AddLabel>(label.kind).label_id, Split::Training,
                                                      blob_ref(img), {"context:hand"}},
                                    device_id(1), ids, 0);
    EXPECT_EQ(a->submit(add).seq, 2u);

    ASSERT_TRUE(b_seen.wait_for(2));
    ASSERT_TRUE(a_seen.wait_for(2));
    EXPECT_EQ(b_seen.ops[0].op_id, label.op_id);
    EXPECT_EQ(b_seen.ops[1].seq, 2u);

    auto [late, delta] = ServerLink::open(endpoint_, p.id, p.token, device_id(3), 1, {});
    ASSERT_EQ(delta.size(), 1u);
    EXPECT_EQ(delta[0].op_id, add.op_id);
}

TEST_F(NetworkTest, ServerErrorsCarryCodes) {
    auto p = ServerLink::create_project(endpoint_, "demo");
    auto q = ServerLink::create_project(endpoint_, "other");
    try {
        ServerLink::open(endpoint_, p.id, q.token, device_id(1), 0, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AuthFailure);
    }
    auto [link, delta] = ServerLink::open(endpoint_, p.id, p.token, device_id(1), 0, {});
    try {
        link->get_blob(numbered_image(1).digest());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownDigest);
    }
    ReplicatedProject r(p.id);
    IdSource ids(3);
    auto label = r.local_submit(intent::AddLabel{"x"}, device_id(1), ids, 0);
    auto add = r.local_submit(
        intent::AddSample{std::get<op::AddLabel>(label.kind).label_id, Split::Training, blob_ref(numbered_image(2)), {}},
        device_id(1), ids, 0);
    link->submit(label);
    try {
        link->submit(add);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingBlob);
    }
    EXPECT_TRUE(link->alive());
}

TEST_F(NetworkTest, RawProtocolRejectsUnknownMessages) {
    auto s = net::TcpStream::connect(endpoint_);
    net::write_json(s, json{{"type", "BOGUS"}});
    auto reply = net::read_json(s, net::kMaxJsonFrame);
    ASSERT_TRUE(reply);
    EXPECT_EQ((*reply)["type"], "ERROR");
    EXPECT_EQ((*reply)["code"], "Protocol");
}

TEST_F(NetworkTest, RawDuplicateSubmitReportsOriginalSeq) {
    auto p = ServerLink::create_project(endpoint_, "demo");
    ReplicatedProject r(p.id);
    IdSource ids(3);
    auto label = r.local_submit(intent::AddLabel{"x"}, device_id(1), ids, 0);
    auto s = net::TcpStream::connect(endpoint_);
    json submit{{"type", "OP_SUBMIT"}, {"project_id", p.id.str()}, {"token", p.token}, {"op", to_json(label)}};
    net::write_json(s, submit);
    auto ack = net::read_json(s, net::kMaxJsonFrame);
    ASSERT_TRUE(ack);
    EXPECT_EQ((*ack)["type"], "OP_ACK");
    EXPECT_EQ((*ack)["seq"], 1);
    net::write_json(s, submit);
    auto dup = net::read_json(s, net::kMaxJsonFrame);
    ASSERT_TRUE(dup);
    EXPECT_EQ((*dup)["type"], "ERROR");
    EXPECT_EQ((*dup)["code"], "DuplicateOp");
    EXPECT_EQ((*dup)["seq"], 1);
}

TEST_F(NetworkTest, LinkReportsDisconnect) {
    auto p = ServerLink::create_project(endpoint_, "demo");
    std::mutex mu;
    std::condition_variable cv;
    bool dropped = false;
    ServerLink::Callbacks cb{{}, [&] {
                                 std::lock_guard lock(mu);
                                 dropped = true;
                                 cv.notify_all();
                             }};
    auto [link, delta] = ServerLink::open(endpoint_, p.id, p.token, device_id(1), 0, cb);
    server_.stop();
    std::unique_lock lock(mu);
    EXPECT_TRUE(cv.wait_for(lock, std::chrono::seconds(5), [&] { return dropped; }));
    EXPECT_FALSE(link->alive());
}

TEST(Network, UnreachableServerIsConnectivityError) {
    net::Endpoint nowhere{"127.0.0.1", 1};
    try {
        ServerLink::create_project(nowhere, "x", std::chrono::milliseconds(500));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Connectivity);
    }
}

}  // namespace
}  // namespace coml
