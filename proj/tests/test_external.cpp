#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dex/errors.hpp"
#include "dex/metrics.hpp"
#include "dex/target.hpp"

#ifndef DEX_MOCK_TRANSLATOR
#error "DEX_MOCK_TRANSLATOR must point at the mock translator executable"
#endif

namespace {

/// Local HTTP server with scripted handlers, bound to an ephemeral port.
class MockServer {
public:
    MockServer() {
        server_.Post("/translate", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            if (fail_first > 0) {
                --fail_first;
                res.status = 503;
                return;
            }
            const auto body = nlohmann::json::parse(req.body);
            nlohmann::json out;
            if (body.contains("reference")) {
                out["token_losses"] = {1.5, 2.5};
            } else {
                out["translation"] = "T(" + body["source"].get<std::string>() + ")";
            }
            res.set_content(out.dump(), "application/json");
        });
        server_.Post("/bad-json", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{oops", "application/json");
        });
        server_.Post("/missing-field", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"text":"x"})", "application/json");
        });
        server_.Post("/forbidden", [](const httplib::Request&, httplib::Response& res) { res.status = 403; });
        server_.Post("/down", [this](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 500;
        });
        server_.Post("/chat-no", [this](const httplib::Request& req, httplib::Response& res) {
            last_auth = req.get_header_value("Authorization");
            last_body = req.body;
            res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"No."}}]})", "application/json");
        });
        server_.Post("/chat-yes", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"choices":[{"message":{"content":"yes, matched"}}]})", "application/json");
        });
        server_.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            res.set_content(nlohmann::json{{"score", double(body["hypotheses"].size()) * 10.0}}.dump(),
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

    std::atomic<int> hits{0};
    std::atomic<int> fail_first{0};
    std::string last_auth, last_body;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

dex::HttpTranslator http(const std::string& url, int attempts = 3) {
    dex::ExternalConfig cfg;
    cfg.endpoint = url;
    cfg.attempts = attempts;
    cfg.timeout = std::chrono::milliseconds(2000);
    return dex::HttpTranslator(cfg);
}

} // namespace

TEST(HttpTranslator, TranslateAndLosses) {
    MockServer s;
    const auto t = http(s.url("/translate"));
    EXPECT_EQ(t.translate("hello world"), "T(hello world)");
    EXPECT_EQ(t.token_losses("a", "b"), (std::vector<double>{1.5, 2.5}));
}

TEST(HttpTranslator, RetriesServerErrors) {
    MockServer s;
    s.fail_first = 2;
    EXPECT_EQ(http(s.url("/translate")).translate("x"), "T(x)");
    EXPECT_EQ(s.hits, 3);
}

TEST(HttpTranslator, TransportErrorAfterAttempts) {
    MockServer s;
    try {
        http(s.url("/down"), 2).translate("x");
        FAIL() << "expected TransportError";
    } catch (const dex::TransportError& e) {
        EXPECT_EQ(e.attempts(), 2);
    }
    EXPECT_EQ(s.hits, 2);
}

TEST(HttpTranslator, ProtocolErrors) {
    MockServer s;
    EXPECT_THROW(http(s.url("/bad-json")).translate("x"), dex::ProtocolError);
    EXPECT_THROW(http(s.url("/missing-field")).translate("x"), dex::ProtocolError);
    EXPECT_THROW(http(s.url("/forbidden")).translate("x"), dex::ProtocolError);
    EXPECT_FALSE(http(s.url("/missing-field")).token_losses("x", "y"));
}

TEST(HttpTranslator, UnreachableIsTransport) {
    int port;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    EXPECT_THROW(http("http://127.0.0.1:" + std::to_string(port) + "/t", 1).translate("x"), dex::TransportError);
}

TEST(HttpTranslator, EnvironmentOverridesEndpoint) {
    MockServer s;
    setenv(dex::kTranslatorUrlEnv, s.url("/translate").c_str(), 1);
    const auto t = dex::make_external_translator("http://127.0.0.1:1/nowhere");
    unsetenv(dex::kTranslatorUrlEnv);
    EXPECT_EQ(t->translate("a"), "T(a)");
}

TEST(ChatJudge, FixedNoGivesZeroPairingAccuracy) {
    MockServer s;
    setenv("DEX_TEST_JUDGE_TOKEN", "secret", 1);
    dex::ChatJudgeConfig cfg;
    cfg.url = s.url("/chat-no");
    cfg.token_env = "DEX_TEST_JUDGE_TOKEN";
    const dex::ChatJudge judge(cfg);
    const std::vector<std::pair<std::string, std::string>> pairs{{"a b", "A B"}, {"c", "C"}};
    const auto r = dex::pairing_accuracy(judge, pairs);
    EXPECT_EQ(r.pa, 0.0);
    EXPECT_EQ(r.judged, 2u);
    EXPECT_EQ(s.last_auth, "Bearer secret");
    const auto body = nlohmann::json::parse(s.last_body);
    EXPECT_EQ(body["messages"][0]["content"], std::string(dex::ChatJudge::kSystemPrompt));
    EXPECT_EQ(body["messages"][1]["content"], dex::ChatJudge::render_user("c", "C"));
    unsetenv("DEX_TEST_JUDGE_TOKEN");
}

TEST(ChatJudge, YesAndUnreachable) {
    MockServer s;
    dex::ChatJudgeConfig cfg;
    cfg.url = s.url("/chat-yes");
    EXPECT_EQ(dex::ChatJudge(cfg).judge("a", "b"), dex::Verdict::Match);
    cfg.url = s.url("/bad-json");
    cfg.attempts = 1;
    EXPECT_FALSE(dex::ChatJudge(cfg).judge("a", "b"));
}

TEST(HttpScorer, ReturnsServiceScore) {
    MockServer s;
    const std::vector<std::string> h{"a", "b", "c"}, r{"a", "b", "c"};
    EXPECT_DOUBLE_EQ(dex::HttpScorer(s.url("/score")).score(h, r), 30.0);
    EXPECT_THROW(dex::HttpScorer(s.url("/missing-field")).score(h, r), dex::ProtocolError);
}

TEST(ProcessTranslator, TranslateAndLosses) {
    dex::ProcessTranslator t(DEX_MOCK_TRANSLATOR);
    EXPECT_EQ(t.translate("a bc"), "t_a t_bc");
    EXPECT_EQ(t.translate("x"), "t_x");
    EXPECT_EQ(t.token_losses("a", "xx yyy"), (std::vector<double>{2.0, 3.0}));
}

TEST(ProcessTranslator, MalformedReplyIsProtocolError) {
    dex::ProcessTranslator t(DEX_MOCK_TRANSLATOR);
    EXPECT_THROW(t.translate("garbage"), dex::ProtocolError);
    EXPECT_EQ(t.translate("ok"), "t_ok");
}

TEST(ProcessTranslator, CrashExhaustsAttempts) {
    dex::ProcessTranslator t(DEX_MOCK_TRANSLATOR, 2);
    EXPECT_THROW(t.translate("crash"), dex::TransportError);
    EXPECT_EQ(t.translate("after"), "t_after");
}

TEST(ProcessTranslator, RestartsCrashedChild) {
    const auto marker = std::filesystem::temp_directory_path() / "dex_mock_crash_marker";
    std::filesystem::remove(marker);
    dex::ProcessTranslator t(std::string(DEX_MOCK_TRANSLATOR) + " --crash-first " + marker.string(), 3);
    EXPECT_EQ(t.translate("x y"), "t_x t_y");
    std::filesystem::remove(marker);
}

TEST(ProcessTranslator, SpecPrefix) {
    const auto t = dex::make_external_translator(std::string("process:") + DEX_MOCK_TRANSLATOR);
    EXPECT_EQ(t->translate("q"), "t_q");
}
