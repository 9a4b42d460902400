#include "coml/server.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

namespace coml {
namespace {

using testing::fixture;
using testing::TempDir;

struct Run {
    int status = -1;
    std::string out;
};

Run coml(const TempDir& dir, const std::string& args) {
    const std::string cmd = "COML_DATA_DIR= '" COML_CLI_PATH "' --data-dir '" + (dir / "state").string() + "' " +
                            args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (p == nullptr) return r;
    std::array<char, 4096> buf{};
    while (auto n = fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
    const int st = pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

TEST(Cli, SharedProjectWorkflow) {
    TempDir dir;
    Server server(ServerOptions{});
    const std::string at = "--server 127.0.0.1:" + std::to_string(server.port()) + " ";
    auto r = coml(dir, at + "--json new-project garden");
    ASSERT_EQ(r.status, 0) << r.out;
    const auto created = nlohmann::json::parse(r.out);
    const std::string member =
        at + "--project " + created["project_id"].get<std::string>() + " --token " + created["token"].get<std::string>() + " ";
    EXPECT_EQ(coml(dir, "label add early").status, 4);
    ASSERT_EQ(coml(dir, member + "join").status, 0);
    r = coml(dir, at + "--json label add fern");
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_TRUE(nlohmann::json::parse(r.out).contains("label_id"));
    r = coml(dir, at + "--json label list");
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("fern"), std::string::npos);
    const auto pid = ProjectId::parse(created["project_id"].get<std::string>());
    ASSERT_TRUE(pid);
    EXPECT_EQ(server.service().head(*pid), 1u);
}

TEST(Cli, ScriptRunsAndWritesSummary) {
    TempDir dir;
    auto r = coml(dir, "script '" + fixture("scripts/fruit_salad.ndjson").string() + "' --out-dir '" +
                           (dir / "out").string() + "'");
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_TRUE(std::filesystem::exists(dir / "out"));
}

TEST(Cli, BadScriptExitsTwo) {
    TempDir dir;
    std::ofstream(dir / "bad.ndjson") << "{\"at_ms\":0,\"device\":\"a\",\"directive\":\"fly\"}\n";
    EXPECT_EQ(coml(dir, "script '" + (dir / "bad.ndjson").string() + "'").status, 2);
}

TEST(Cli, UnreachableServerExitsThree) {
    TempDir dir;
    EXPECT_EQ(coml(dir, "--server 127.0.0.1:1 new-project nowhere").status, 3);
}

TEST(Cli, DataErrorsExitFour) {
    TempDir dir;
    EXPECT_EQ(coml(dir, "train").status, 4);
    std::ofstream(dir / "broken.ndjson") << "{\"kind\":1}\n";
    EXPECT_EQ(coml(dir, "stats --log '" + (dir / "broken.ndjson").string() + "'").status, 4);
}

TEST(Cli, LogToolsReadTheBundledSession) {
    TempDir dir;
    const std::string log = fixture("telemetry/session.ndjson").string();
    auto r = coml(dir, "--json stats --log '" + log + "'");
    ASSERT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("39"), std::string::npos);
    r = coml(dir, "timeline-svg '" + log + "' '" + (dir / "t.svg").string() + "'");
    ASSERT_EQ(r.status, 0);
    std::ifstream in(dir / "t.svg");
    std::string head(4, '\0');
    in.read(head.data(), 4);
    EXPECT_EQ(head, "<svg");
}

}  // namespace
}  // namespace coml
