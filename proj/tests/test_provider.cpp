#include "evmob/provider.hpp"

#include "evmob/http_provider.hpp"
#include "helpers.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <thread>

using namespace evmob;
using namespace evmob::llm;

namespace {

ChatRequest request_with(const std::string& tag, const std::string& user = "hello") {
    ChatRequest r;
    r.system_prompt = "system";
    r.user_prompt = user;
    r.tag = tag;
    return r;
}

} // namespace

TEST_CASE("estimate_tokens is ceil(len/4), monotone under concatenation") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("12345678") == 2);
    CHECK(estimate_tokens("123456789") == 3);
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> len(0, 64);
    for (int i = 0; i < 200; ++i) {
        std::string a(static_cast<std::size_t>(len(rng)), 'x');
        std::string b(static_cast<std::size_t>(len(rng)), 'y');
        CHECK(estimate_tokens(a + b) >= estimate_tokens(a));
        CHECK(estimate_tokens(a + b) >= estimate_tokens(b));
    }
}

TEST_CASE("chat request defaults follow the pinned sampling settings") {
    ChatRequest r;
    CHECK(r.temperature == 0.1);
    CHECK(r.top_p == 1.0);
}

TEST_CASE("scripted provider replays its queue and tracks the ledger") {
    ScriptedProvider provider(std::vector<std::string>{"A"});
    auto response = provider.complete(request_with("generate"));
    CHECK(response.text == "A");
    CHECK(provider.ledger().calls("generate") == 1);
    CHECK(provider.ledger().total_calls() == 1);
    CHECK(response.output_tokens == estimate_tokens("A"));

    CHECK_THROWS_AS(provider.complete(request_with("generate")), ScriptError);
}

TEST_CASE("scripted provider honors per-tag queues") {
    std::map<std::string, std::deque<std::string>> queues;
    queues["audit"] = {"first audit", "second audit"};
    queues["generate"] = {"plan"};
    ScriptedProvider provider(std::move(queues));
    CHECK(provider.complete(request_with("generate")).text == "plan");
    CHECK(provider.complete(request_with("audit")).text == "first audit");
    CHECK(provider.complete(request_with("audit")).text == "second audit");
    CHECK_THROWS_AS(provider.complete(request_with("pattern_gist")), ScriptError);
    CHECK(provider.captured().size() == 4);
    CHECK(provider.captured()[0].user_prompt == "hello");
}

TEST_CASE("provider rejects contract violations") {
    ScriptedProvider provider(std::vector<std::string>{"A"});
    ChatRequest empty;
    empty.tag = "x";
    CHECK_THROWS_AS(provider.complete(empty), ContractError);
    auto bad_temp = request_with("x");
    bad_temp.temperature = 3.0;
    CHECK_THROWS_AS(provider.complete(bad_temp), ContractError);
}

TEST_CASE("ledger totals equal the sum over tags under concurrency") {
    std::vector<std::string> responses(300, "ok");
    ScriptedProvider provider(std::move(responses));
    std::vector<std::thread> threads;
    std::atomic<int> failures{0};
    for (int t = 0; t < 3; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 100; ++i) {
                try {
                    provider.complete(request_with("tag" + std::to_string(t)));
                } catch (...) {
                    ++failures;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(failures == 0);
    CHECK(provider.ledger().calls("tag0") == 100);
    CHECK(provider.ledger().calls("tag1") == 100);
    CHECK(provider.ledger().calls("tag2") == 100);
    auto totals = provider.ledger().totals();
    CHECK(totals.calls == 300);
    auto snapshot = provider.ledger().snapshot();
    TagTotals sum;
    for (const auto& [tag, t] : snapshot) {
        sum.calls += t.calls;
        sum.input_tokens += t.input_tokens;
        sum.output_tokens += t.output_tokens;
    }
    CHECK(sum.calls == totals.calls);
    CHECK(sum.input_tokens == totals.input_tokens);
    CHECK(sum.output_tokens == totals.output_tokens);
}

TEST_CASE("script file forms: array and tag->queue map") {
    test::TempDir dir("script_forms");
    test::write_file(dir.file("plain.json"), R"(["one","two"])");
    auto plain = ScriptedProvider::from_file(dir.file("plain.json"));
    CHECK(plain->complete(request_with("anything")).text == "one");

    test::write_file(dir.file("tagged.json"),
                     R"({"queues":{"audit":["verdict"]},"default":["fallback"]})");
    auto tagged = ScriptedProvider::from_file(dir.file("tagged.json"));
    CHECK(tagged->complete(request_with("audit")).text == "verdict");
    CHECK(tagged->complete(request_with("other")).text == "fallback");

    // Bare tag -> queue map form, no "queues" wrapper.
    test::write_file(dir.file("bare.json"), R"({"generate":["plan"],"audit":["ok"]})");
    auto bare = ScriptedProvider::from_file(dir.file("bare.json"));
    CHECK(bare->complete(request_with("generate")).text == "plan");
    CHECK(bare->complete(request_with("audit")).text == "ok");

    CHECK_THROWS_AS(ScriptedProvider::from_file(dir.file("missing.json")), IoError);
    test::write_file(dir.file("bad.json"), "not json");
    CHECK_THROWS_AS(ScriptedProvider::from_file(dir.file("bad.json")), IoError);
}

TEST_CASE("http provider retries 429 twice then succeeds, one logical call") {
    std::atomic<int> hits{0};
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                            httplib::Response& res) {
        int n = ++hits;
        auto body = nlohmann::json::parse(req.body);
        CHECK(body["model"] == "test-model");
        CHECK(body["messages"].size() == 2);
        if (n <= 2) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        nlohmann::json reply{
            {"choices",
             nlohmann::json::array({{{"message", {{"role", "assistant"},
                                                  {"content", "stub says hi"}}}}})},
            {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 5}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpProviderConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.model = "test-model";
    config.backoff_base_ms = 1;
    config.max_attempts = 3;
    HttpProvider provider(config);
    auto response = provider.complete(request_with("generate"));
    CHECK(response.text == "stub says hi");
    CHECK(response.input_tokens == 12);
    CHECK(response.output_tokens == 5);
    CHECK(hits == 3);
    CHECK(provider.ledger().calls("generate") == 1); // retries are not logical calls

    server.stop();
    server_thread.join();
}

TEST_CASE("http provider surfaces the last status after exhausted retries") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.status = 429;
        res.set_content("busy", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpProviderConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.model = "test-model";
    config.backoff_base_ms = 1;
    config.max_attempts = 3;
    HttpProvider provider(config);
    try {
        provider.complete(request_with("generate"));
        FAIL("expected ProviderError");
    } catch (const ProviderError& ex) {
        CHECK(ex.last_status() == 429);
    }
    server.stop();
    server_thread.join();
}

TEST_CASE("http provider fails fast on non-retryable client errors") {
    std::atomic<int> hits{0};
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
        res.set_content("bad credential", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpProviderConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port);
    config.model = "test-model";
    config.backoff_base_ms = 1;
    HttpProvider provider(config);
    CHECK_THROWS_AS(provider.complete(request_with("generate")), ProviderError);
    CHECK(hits == 1);
    server.stop();
    server_thread.join();
}
