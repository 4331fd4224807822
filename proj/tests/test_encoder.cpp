#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "raterlens/encoder.hpp"
#include "raterlens/errors.hpp"
#include "raterlens/util.hpp"
#include "test_helpers.hpp"

using namespace raterlens;
namespace fs = std::filesystem;

namespace {

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Provider that fails on a chosen text, for batch error paths.
class FlakyProvider : public Provider {
public:
    FlakyProvider(std::size_t dim, std::string poison) : dim_(dim), poison_(std::move(poison)) {}
    std::vector<double> embed_uncached(const std::string& text) override {
        if (text == poison_) throw TransportError("poisoned text");
        return std::vector<double>(dim_, 0.5);
    }

private:
    std::size_t dim_;
    std::string poison_;
};

class WrongDimProvider : public Provider {
public:
    std::vector<double> embed_uncached(const std::string&) override {
        return std::vector<double>(3, 1.0);
    }
};

}  // namespace

TEST_CASE("mock provider dimension defaults") {
    CHECK(ProviderSpec::mock("mock-large", 1).dimension == 3072);
    CHECK(ProviderSpec::mock("mock-small", 1).dimension == 1536);
    CHECK(ProviderSpec::mock("mock", 1, 64).dimension == 64);
    CHECK_THROWS_AS(ProviderSpec::mock("mock", 1), ConfigError);
}

TEST_CASE("mock embeddings are deterministic unit vectors") {
    auto dir = testing::temp_dir("enc-mock");
    Encoder encoder(ProviderSpec::mock("mock", 1, 8), dir / "cache");

    auto a1 = encoder.embed("a");
    auto a2 = encoder.embed("a");
    CHECK(a1 == a2);
    CHECK(encoder.provider_calls() == 1);  // second hit served from cache

    auto b = encoder.embed("b");
    CHECK(a1.values != b.values);

    CHECK(std::abs(norm(a1.values) - 1.0) <= 1e-9);
    CHECK(std::abs(norm(b.values) - 1.0) <= 1e-9);
}

TEST_CASE("mock embeddings are pure functions of (seed, model, text)") {
    auto dir = testing::temp_dir("enc-seeds");
    Encoder e1(ProviderSpec::mock("mock", 1, 16), dir / "c1");
    Encoder e2(ProviderSpec::mock("mock", 2, 16), dir / "c2");
    Encoder e3(ProviderSpec::mock("other", 1, 16), dir / "c3");
    auto v1 = e1.embed("same text");
    CHECK(v1.values != e2.embed("same text").values);
    CHECK(v1.values != e3.embed("same text").values);

    // a fresh encoder with an identical spec and no cache reproduces the vector
    Encoder e4(ProviderSpec::mock("mock", 1, 16), "");
    CHECK(e4.embed("same text").values == v1.values);
}

TEST_CASE("cache is idempotent across encoder instances") {
    auto dir = testing::temp_dir("enc-cache");
    auto cache = dir / "cache";
    {
        Encoder encoder(ProviderSpec::mock("mock", 3, 8), cache);
        encoder.embed("hello");
        CHECK(encoder.provider_calls() == 1);
    }
    {
        Encoder encoder(ProviderSpec::mock("mock", 3, 8), cache);
        encoder.embed("hello");
        CHECK(encoder.provider_calls() == 0);  // served entirely from disk
    }
}

TEST_CASE("corrupted cache entries are evicted and refetched") {
    auto dir = testing::temp_dir("enc-corrupt");
    auto cache = dir / "cache";
    Encoder encoder(ProviderSpec::mock("mock", 3, 8), cache);
    auto good = encoder.embed("hello");
    auto path = encoder.cache_path("hello");
    REQUIRE(fs::exists(path));

    write_file(path.string(), "{\"scrambled\": true}");
    auto refetched = encoder.embed("hello");
    CHECK(refetched == good);
    CHECK(encoder.provider_calls() == 2);

    // tampered values (hash kept) also fail integrity and refetch
    auto j = nlohmann::json::parse(read_file(path.string()));
    j["values"][0] = "oops";
    write_file(path.string(), j.dump());
    CHECK(encoder.embed("hello") == good);
    CHECK(encoder.provider_calls() == 3);
}

TEST_CASE("embed rejects empty input") {
    Encoder encoder(ProviderSpec::mock("mock", 1, 8), "");
    CHECK_THROWS_AS(encoder.embed(""), ConfigError);
}

TEST_CASE("embed_batch matches element-wise embedding and deduplicates") {
    auto dir = testing::temp_dir("enc-batch");
    Encoder encoder(ProviderSpec::mock("mock", 5, 8), dir / "cache");
    auto batch = encoder.embed_batch({"x", "y", "z"});
    REQUIRE(batch.size() == 3);
    Encoder fresh(ProviderSpec::mock("mock", 5, 8), "");
    CHECK(batch[0] == fresh.embed("x"));
    CHECK(batch[1] == fresh.embed("y"));
    CHECK(batch[2] == fresh.embed("z"));

    long calls_before = encoder.provider_calls();
    auto repeated = encoder.embed_batch({"new", "new", "new"});
    CHECK(encoder.provider_calls() == calls_before + 1);
    CHECK(repeated[0] == repeated[1]);
    CHECK(repeated[1] == repeated[2]);

    CHECK_THROWS_AS(encoder.embed_batch({}), ConfigError);
}

TEST_CASE("embed_batch reports failing indices and keeps cached successes") {
    auto dir = testing::temp_dir("enc-flaky");
    auto cache = dir / "cache";
    ProviderSpec spec = ProviderSpec::mock("mock", 1, 4);
    Encoder encoder(spec, cache, std::make_unique<FlakyProvider>(4, "bad"));

    try {
        encoder.embed_batch({"ok1", "bad", "ok2", "bad"});
        FAIL("expected BatchError");
    } catch (const BatchError& e) {
        CHECK(e.failed_indices == std::vector<std::size_t>{1, 3});
    }

    // successes were persisted: no further provider I/O for them
    long calls = encoder.provider_calls();
    encoder.embed("ok1");
    encoder.embed("ok2");
    CHECK(encoder.provider_calls() == calls);
}

TEST_CASE("provider dimension mismatch is an integrity error") {
    ProviderSpec spec = ProviderSpec::mock("mock", 1, 8);
    Encoder encoder(spec, "", std::make_unique<WrongDimProvider>());
    CHECK_THROWS_AS(encoder.embed("anything"), IntegrityError);
}

TEST_CASE("recorder observes every requested input") {
    Encoder encoder(ProviderSpec::mock("mock", 1, 4), "");
    std::vector<std::string> seen;
    encoder.set_recorder([&](const std::string& text) { seen.push_back(text); });
    encoder.embed("one");
    encoder.embed_batch({"two", "two", "three"});
    CHECK(seen == std::vector<std::string>{"one", "two", "two", "three"});
}

TEST_CASE("http provider round-trips against a local endpoint") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        auto body = nlohmann::json::parse(req.body);
        CHECK(body.at("model") == "remote-model");
        // first attempt fails so the retry path is exercised
        if (n == 1) {
            res.status = 500;
            return;
        }
        nlohmann::json reply;
        reply["data"] = nlohmann::json::array({{{"embedding", {0.25, 0.5, 0.25}}}});
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&]() { server.listen_after_bind(); });
    server.wait_until_ready();

    auto dir = testing::temp_dir("enc-http");
    ProviderSpec spec =
        ProviderSpec::http("http://127.0.0.1:" + std::to_string(port), "remote-model", 3);
    EncoderOptions options;
    options.backoff_seconds = 0.01;
    Encoder encoder(spec, dir / "cache", options);
    auto vec = encoder.embed("remote text");
    CHECK(vec.values == std::vector<double>{0.25, 0.5, 0.25});
    CHECK(hits == 2);

    // cache hit: no extra request
    encoder.embed("remote text");
    CHECK(hits == 2);

    server.stop();
    thread.join();
}
