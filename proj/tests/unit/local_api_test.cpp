#include "coml/hash.hpp"
#include "coml/local_api.hpp"
#include "coml/server.hpp"
#include "coml/synthetic.hpp"

#include <gtest/gtest.h>

namespace coml {
namespace {

using nlohmann::json;

std::string ppm_of(std::array<std::uint8_t, 3> color, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.color = color;
    return base64_encode(encode_ppm(synthetic_image(spec, seed)));
}

class LocalApiTest : public ::testing::Test {
protected:
    LocalApiTest() : server_(ServerOptions{}), agent_(options()), api_(agent_) {
        endpoint_ = net::Endpoint{"127.0.0.1", server_.port()};
        project_ = ServerLink::create_project(endpoint_, "api");
    }

    static AgentOptions options() {
        AgentOptions o;
        o.id_seed = 4;
        o.sleep = [](std::chrono::milliseconds) {};
        return o;
    }

    json call(const json& req) { return json::parse(api_.handle(req).dump()); }

    void join() {
        auto r = call({{"type", "JOIN"}, {"server", endpoint_.str()}, {"project_id", project_.id.str()},
                       {"token", project_.token}});
        ASSERT_EQ(r["type"], "JOIN_OK") << r.dump();
        EXPECT_EQ(r["device_id"], agent_.device().str());
    }

    void seed_two_labels() {
        for (int i = 0; i < 6; ++i) {
            ASSERT_EQ(call({{"type", "CAPTURE"}, {"label", "red"}, {"ppm", ppm_of({220, 20, 20}, i)}})["type"],
                      "CAPTURE_OK");
            ASSERT_EQ(call({{"type", "CAPTURE"}, {"label", "blue"}, {"ppm", ppm_of({20, 20, 220}, 10 + i)}})["type"],
                      "CAPTURE_OK");
        }
    }

    Server server_;
    Agent agent_;
    LocalApi api_;
    net::Endpoint endpoint_;
    CreatedProject project_;
};

TEST_F(LocalApiTest, UnknownTypeAndMissingFieldsBecomeErrors) {
    EXPECT_EQ(call({{"type", "ADD_LABEL"}, {"name", "early"}})["code"], "ValidationError");
    join();
    auto r = call({{"type", "NOPE"}});
    EXPECT_EQ(r["type"], "ERROR");
    EXPECT_EQ(r["code"], "Protocol");
    r = call({{"type", "ADD_LABEL"}});
    EXPECT_EQ(r["type"], "ERROR");
    r = call({{"type", "RETRAIN"}});
    EXPECT_EQ(r["code"], "InsufficientData");
    r = call({{"type", "CAPTURE"}, {"label", "x"}, {"ppm", base64_encode(std::vector<std::uint8_t>{'P', '3'})}});
    EXPECT_EQ(r["code"], "MalformedImage");
}

TEST_F(LocalApiTest, FullSessionThroughRequests) {
    join();
    seed_two_labels();
    auto dash = call({{"type", "DASHBOARD_QUERY"}, {"split", "training"}, {"page", 1}});
    EXPECT_EQ(dash["type"], "DASHBOARD_QUERY_OK");
    EXPECT_EQ(dash["total"], 12);
    EXPECT_EQ(dash["page_size"], 25);
    auto trained = call({{"type", "RETRAIN"}, {"seed", 3}});
    ASSERT_EQ(trained["type"], "RETRAIN_OK") << trained.dump();
    EXPECT_EQ(trained["model_version"], 1);
    EXPECT_EQ(trained["label_order"].size(), 2u);
    auto photo = call({{"type", "TEST_PHOTO"}, {"ppm", ppm_of({220, 20, 20}, 99)}});
    ASSERT_EQ(photo["type"], "TEST_PHOTO_OK");
    auto sync = call({{"type", "SYNC"}});
    EXPECT_EQ(sync["type"], "SYNC_OK");
    ASSERT_TRUE(agent_.wait_for_pending(std::chrono::seconds(5)));
    auto stats = call({{"type", "STATS_QUERY"}});
    EXPECT_EQ(stats["labels"].size(), 2u);
    EXPECT_EQ(stats["connection"], "live");
    EXPECT_EQ(stats["digest"], server_.service().project_digest(project_.id).hex());
    auto log = call({{"type", "EXPORT_LOG"}});
    EXPECT_NE(log["ndjson"].get<std::string>().find("model_trained"), std::string::npos);
    auto model = call({{"type", "EXPORT_MODEL"}});
    EXPECT_EQ(model["model"].get<std::string>().find("{\"format\":\"coml-model\""), 0u);
    const std::string digest = dash["items"][0]["digest"];
    auto blob = call({{"type", "BLOB_GET"}, {"digest", digest}});
    EXPECT_EQ(sha256(base64_decode(blob["ppm"].get<std::string>())).hex(), digest);
}

TEST_F(LocalApiTest, LiveFramesPushResults) {
    join();
    seed_two_labels();
    call({{"type", "RETRAIN"}, {"seed", 1}});
    std::vector<json> pushed;
    auto push = [&](const nlohmann::ordered_json& m) { pushed.push_back(json::parse(m.dump())); };
    EXPECT_EQ(api_.handle({{"type", "LIVE_FRAME"}, {"ppm", ppm_of({1, 2, 3}, 1)}}, push)["code"], "ValidationError");
    EXPECT_EQ(api_.handle({{"type", "LIVE_START"}}, push)["type"], "LIVE_START_OK");
    auto r = api_.handle({{"type", "LIVE_FRAME"}, {"ppm", ppm_of({220, 20, 20}, 5)}}, push);
    EXPECT_EQ(r["accepted"], true);
    ASSERT_EQ(pushed.size(), 1u);
    EXPECT_EQ(pushed[0]["type"], "LIVE_RESULT");
    EXPECT_EQ(pushed[0]["confidence"].size(), 2u);
    api_.handle({{"type", "LIVE_STOP"}}, push);
    EXPECT_EQ(api_.handle({{"type", "LIVE_FRAME"}, {"ppm", ppm_of({1, 2, 3}, 1)}}, push)["type"], "ERROR");
}

TEST_F(LocalApiTest, GameOverRequests) {
    join();
    seed_two_labels();
    call({{"type", "RETRAIN"}, {"seed", 1}});
    auto start = call({{"type", "GAME_START"}, {"seed", 9}});
    ASSERT_EQ(start["type"], "GAME_START_OK");
    auto round = call({{"type", "GAME_ROUND"}, {"ppm", ppm_of({220, 20, 20}, 50)}});
    EXPECT_EQ(round["target"], start["target"]);
    EXPECT_EQ(round["finished"], false);
    auto end = call({{"type", "GAME_END"}});
    EXPECT_EQ(end["rounds"].size(), 1u);
    EXPECT_DOUBLE_EQ(end["total_score"].get<double>(), round["score"].get<double>());
}

TEST_F(LocalApiTest, ServedOverTcp) {
    join();
    LocalApiServer srv(agent_, net::Endpoint{"127.0.0.1", 0});
    auto s = net::TcpStream::connect(net::Endpoint{"127.0.0.1", srv.port()});
    net::write_json(s, {{"type", "ADD_LABEL"}, {"name", "tea"}});
    auto reply = net::read_json(s, net::kMaxJsonFrame);
    ASSERT_TRUE(reply);
    EXPECT_EQ((*reply)["type"], "ADD_LABEL_OK");
    net::write_json(s, {{"type", "STATS_QUERY"}});
    reply = net::read_json(s, net::kMaxJsonFrame);
    ASSERT_TRUE(reply);
    ASSERT_EQ((*reply)["labels"].size(), 1u);
    EXPECT_EQ((*reply)["labels"][0]["training"], 0);
    net::write_json(s, {{"type", "BOGUS"}});
    reply = net::read_json(s, net::kMaxJsonFrame);
    EXPECT_EQ((*reply)["type"], "ERROR");
    srv.stop();
}

}  // namespace
}  // namespace coml
