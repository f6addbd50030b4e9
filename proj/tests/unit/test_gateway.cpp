#include <doctest.h>

#include <chrono>
#include <thread>

#include "checklist_forge/gateway.hpp"
#include "checklist_forge/http_backend.hpp"
#include "checklist_forge/parallel.hpp"
#include "checklist_forge/serialize.hpp"
#include "fakes.hpp"

using namespace checklist_forge;
using namespace test_support;

namespace {

TeacherRequest sample_request(int n = 1) {
    TeacherRequest r;
    r.model = "teacher";
    r.messages = {{"system", "be terse"}, {"user", "score this"}};
    r.temperature = 1.3;
    r.top_p = 0.9;
    r.n = n;
    r.max_tokens = 16;
    r.seed = 11;
    return r;
}

}  // namespace

TEST_CASE("fingerprint is sensitive to every request field") {
    const auto base = sample_request();
    const auto fp = fingerprint(base);
    CHECK(fp.size() == 64);
    CHECK(fingerprint(base) == fp);

    std::vector<TeacherRequest> variants(8, base);
    variants[0].model = "other";
    std::swap(variants[1].messages[0], variants[1].messages[1]);
    variants[2].messages[1].content += " ";
    variants[3].temperature = 1.2;
    variants[4].top_p = 1.0;
    variants[5].n = 2;
    variants[6].max_tokens = 17;
    variants[7].seed.reset();
    for (const auto& v : variants) CHECK(fingerprint(v) != fp);
}

TEST_CASE("record then replay returns identical completions without the backend") {
    TempDir dir;
    const auto store_path = (dir / "store.jsonl").string();
    auto backend = std::make_shared<ScriptedBackend>([](const TeacherRequest& r) {
        std::vector<std::string> out;
        for (int i = 0; i < r.n; ++i) out.push_back("answer " + std::to_string(i) + " ünïcode");
        return out;
    });
    std::vector<std::string> recorded;
    {
        Gateway g(backend, std::make_shared<ReplayStore>(store_path), GatewayMode::record, fast_options());
        recorded = g.complete(sample_request(3));
        CHECK(g.complete(sample_request(3)) == recorded);  // served from the store
        CHECK(backend->calls == 1);
        CHECK(g.metrics().replay_hits == 1);
    }
    Gateway replay(nullptr, std::make_shared<ReplayStore>(store_path), GatewayMode::replay, fast_options());
    CHECK(replay.complete(sample_request(3)) == recorded);
    CHECK(replay.metrics().upstream_calls == 0);

    auto other = sample_request(3);
    other.temperature = 0.5;
    CHECK_THROWS_AS(replay.complete(other), ReplayMiss);
    try {
        replay.complete(other);
    } catch (const ReplayMiss& e) {
        CHECK(std::string(e.what()).find(fingerprint(other)) != std::string::npos);
    }
}

TEST_CASE("transient errors are retried with backoff, then become EndpointFailure") {
    std::vector<std::chrono::milliseconds> sleeps;
    GatewayOptions opts;
    opts.sleeper = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };

    SUBCASE("recovers on the third attempt") {
        int calls = 0;
        auto backend = std::make_shared<ScriptedBackend>([&](const TeacherRequest&) -> std::vector<std::string> {
            if (++calls < 3) throw TransientEndpointError("503");
            return {"ok"};
        });
        Gateway g(backend, nullptr, GatewayMode::live, opts);
        CHECK(g.complete(sample_request()) == std::vector<std::string>{"ok"});
        CHECK(g.metrics().upstream_calls == 3);
        CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(250),
                                                               std::chrono::milliseconds(500)});
    }
    SUBCASE("gives up after three attempts") {
        auto backend = std::make_shared<ScriptedBackend>([](const TeacherRequest&) -> std::vector<std::string> {
            throw TransientEndpointError("timeout");
        });
        Gateway g(backend, nullptr, GatewayMode::live, opts);
        CHECK_THROWS_AS(g.complete(sample_request()), EndpointFailure);
        CHECK(backend->calls == 3);
        CHECK(g.metrics().failures == 1);
    }
    SUBCASE("permanent errors are not retried") {
        auto backend = std::make_shared<ScriptedBackend>([](const TeacherRequest&) -> std::vector<std::string> {
            throw EndpointFailure("400 bad request");
        });
        Gateway g(backend, nullptr, GatewayMode::live, opts);
        CHECK_THROWS_AS(g.complete(sample_request()), EndpointFailure);
        CHECK(backend->calls == 1);
    }
}

TEST_CASE("n is emulated with distinct seeds when the endpoint cannot batch") {
    auto backend = std::make_shared<ScriptedBackend>(
        [](const TeacherRequest& r) { return std::vector<std::string>{"seed " + std::to_string(*r.seed)}; },
        /*supports_n=*/false);
    auto g = live_gateway(backend);
    auto out = g->complete(sample_request(4));
    CHECK(out == std::vector<std::string>{"seed 11", "seed 12", "seed 13", "seed 14"});
    CHECK(backend->calls == 4);
    for (const auto& r : backend->seen) {
        CHECK(r.n == 1);
        CHECK(r.temperature == 1.3);
    }
    CHECK(g->metrics().completions_requested == 4);
    CHECK(g->metrics().requests == 1);
}

TEST_CASE("in-flight requests never exceed the concurrency limit") {
    std::atomic<int> current{0}, peak{0};
    auto backend = std::make_shared<ScriptedBackend>([&](const TeacherRequest&) {
        int now = ++current;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --current;
        return std::vector<std::string>{"x"};
    });
    auto g = live_gateway(backend, 3);
    parallel_for(40, 16, [&](std::size_t) { g->complete(sample_request()); });
    CHECK(peak.load() <= 3);
    CHECK(g->metrics().max_in_flight <= 3);
    CHECK(g->metrics().max_in_flight >= 2);
}

TEST_CASE("invalid requests are rejected before any call") {
    auto backend = constant_backend("x");
    auto g = live_gateway(backend);
    auto r = sample_request();
    r.n = 0;
    CHECK_THROWS_AS(g->complete(r), std::invalid_argument);
    r.n = 1;
    r.temperature = -0.1;
    CHECK_THROWS_AS(g->complete(r), std::invalid_argument);
    CHECK(backend->calls == 0);
    CHECK_THROWS_AS(Gateway(nullptr, nullptr, GatewayMode::replay, {}), std::invalid_argument);
}

TEST_CASE("chat-completions wire format") {
    const auto body = nlohmann::json::parse(HttpChatBackend::encode_body(sample_request(2)));
    CHECK(body["n"] == 2);
    CHECK(body["messages"][1]["content"] == "score this");
    const auto decoded = HttpChatBackend::decode_body(
        R"({"choices":[{"message":{"role":"assistant","content":"80"}},{"message":{"content":"-1"}}]})");
    CHECK(decoded == std::vector<std::string>{"80", "-1"});
    CHECK_THROWS_AS(HttpChatBackend::decode_body("<html>"), TransientEndpointError);
}
