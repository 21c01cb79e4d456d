#include <doctest.h>

#include <atomic>
#include <thread>

#include "sqlsynth/llm/gateway.hpp"
#include "sqlsynth/llm/provider.hpp"
#include "sqlsynth/util.hpp"
#include "support/test_db.hpp"

using namespace sqlsynth;
using namespace sqlsynth::llm;

namespace {

ChatRequest simple_request(const std::string& text, double temperature = 0.0, int n = 1) {
    ChatRequest r;
    r.model_id = "test-model";
    r.messages = {{"system", "You write SQL."}, {"user", text}};
    r.temperature = temperature;
    r.n_samples = n;
    return r;
}

// Delegates to a mock while recording call concurrency and totals.
class InstrumentedProvider : public Provider {
  public:
    explicit InstrumentedProvider(MockProvider::Script script = {})
        : inner_(std::move(script)) {}

    ChatResponse complete(const ChatRequest& request) override {
        int now = ++concurrent_;
        int seen = peak_.load();
        while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        ++calls_;
        --concurrent_;
        return inner_.complete(request);
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model_id) override {
        return inner_.embed(texts, model_id);
    }

    std::string name() const override { return "instrumented"; }

    std::atomic<int> concurrent_{0};
    std::atomic<int> peak_{0};
    std::atomic<int> calls_{0};

  private:
    MockProvider inner_;
};

// Fails with a transient error the first `failures` times, then succeeds.
class FlakyProvider : public Provider {
  public:
    explicit FlakyProvider(int failures, bool transient = true)
        : failures_(failures), transient_(transient) {}

    ChatResponse complete(const ChatRequest& request) override {
        ++calls_;
        if (calls_ <= failures_) {
            if (transient_) throw TransportError("flaky");
            throw ProviderError("broken body");
        }
        ChatResponse r;
        for (int i = 0; i < request.n_samples; ++i) r.texts.push_back("ok");
        return r;
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>&,
                                       const std::string&) override {
        throw TransportError("no embeddings here");
    }

    std::string name() const override { return "flaky"; }

    std::atomic<int> calls_{0};

  private:
    int failures_;
    bool transient_;
};

ProviderConfig fast_config() {
    ProviderConfig c;
    c.max_in_flight = 3;
    c.retry_limit = 3;
    c.backoff_base_ms = 1;
    return c;
}

}  // namespace

TEST_CASE("scripted responses come back verbatim and in order") {
    auto req = simple_request("draw two", 0.8, 2);
    MockProvider::Script script;
    script.chat[request_fingerprint(req)] = {"A", "B"};
    MockProvider mock(script);
    auto resp = mock.complete(req);
    CHECK(resp.texts == std::vector<std::string>{"A", "B"});

    auto req8 = simple_request("draw eight", 0.8, 8);
    MockProvider::Script script8;
    script8.chat[request_fingerprint(req8)] = {"s0", "s1", "s2", "s3", "s4", "s5", "s6", "s7"};
    MockProvider mock8(script8);
    auto resp8 = mock8.complete(req8);
    REQUIRE(resp8.texts.size() == 8);
    CHECK(resp8.texts[0] == "s0");
    CHECK(resp8.texts[7] == "s7");
}

TEST_CASE("requests with no messages are rejected") {
    ChatRequest r;
    r.model_id = "m";
    r.n_samples = 1;
    MockProvider mock;
    CHECK_THROWS_AS(mock.complete(r), PreconditionError);
}

TEST_CASE("bad sampling parameters are rejected") {
    auto r = simple_request("x");
    r.temperature = 2.5;
    CHECK_THROWS_AS(validate(r), PreconditionError);
    r.temperature = 0.5;
    r.n_samples = 0;
    CHECK_THROWS_AS(validate(r), PreconditionError);
}

TEST_CASE("unscripted requests fall back to a marker and are counted") {
    MockProvider mock;
    auto resp = mock.complete(simple_request("never scripted"));
    REQUIRE(resp.texts.size() == 1);
    CHECK(resp.texts[0].find("[unscripted") == 0);
    CHECK(mock.unscripted_count() == 1);
    CHECK(resp.provider_meta.count("unscripted") == 1);
}

TEST_CASE("a custom fallback responder takes over unscripted requests") {
    MockProvider mock({}, [](const ChatRequest& r) {
        return std::vector<std::string>(size_t(r.n_samples), "synthetic");
    });
    auto resp = mock.complete(simple_request("anything", 0.8, 3));
    CHECK(resp.texts == std::vector<std::string>{"synthetic", "synthetic", "synthetic"});
    CHECK(mock.unscripted_count() == 1);
}

TEST_CASE("request fingerprints key on content, model, temperature, and samples") {
    auto base = simple_request("q", 0.8, 2);
    CHECK(request_fingerprint(base) == request_fingerprint(base));
    auto other = base;
    other.messages[1].text = "q2";
    CHECK(request_fingerprint(base) != request_fingerprint(other));
    other = base;
    other.temperature = 0.0;
    CHECK(request_fingerprint(base) != request_fingerprint(other));
    other = base;
    other.n_samples = 8;
    CHECK(request_fingerprint(base) != request_fingerprint(other));
    other = base;
    other.model_id = "another";
    CHECK(request_fingerprint(base) != request_fingerprint(other));
}

TEST_CASE("scripted embeddings return exactly, fallbacks are deterministic") {
    MockProvider::Script script;
    script.embeddings["q"] = {1.0, 0.0, 0.0};
    MockProvider mock(script);
    auto vs = mock.embed({"q"}, "embed-model");
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].values == std::vector<double>{1.0, 0.0, 0.0});

    MockProvider plain;
    auto a = plain.embed({"same text", "same text", "other"}, "m");
    CHECK(a[0].values == a[1].values);
    CHECK(a[0].values != a[2].values);
    CHECK(a[0].values.size() == plain.embedding_dim());

    CHECK_THROWS_AS(plain.embed({}, "m"), PreconditionError);
    CHECK_THROWS_AS(plain.embed({""}, "m"), PreconditionError);
}

TEST_CASE("cosine similarity behaves") {
    EmbeddingVector a{{1, 0}, "m"}, b{{0, 1}, "m"}, c{{2, 0}, "m"};
    CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));
    CHECK(cosine_similarity(a, c) == doctest::Approx(1.0));
    EmbeddingVector ragged{{1, 0, 0}, "m"};
    CHECK_THROWS_AS(cosine_similarity(a, ragged), DimensionMismatch);
}

TEST_CASE("gateway caches temperature-0 responses only") {
    auto provider = std::make_shared<InstrumentedProvider>();
    Gateway gw(provider, fast_config());

    auto cold = gw.complete(simple_request("repeat me", 0.0));
    auto warm = gw.complete(simple_request("repeat me", 0.0));
    CHECK(cold.texts == warm.texts);
    CHECK(provider->calls_.load() == 1);
    CHECK(gw.stats().n_cache_hits == 1);

    gw.complete(simple_request("sampled", 0.8));
    gw.complete(simple_request("sampled", 0.8));
    CHECK(provider->calls_.load() == 3);  // sampled requests never cached
}

TEST_CASE("gateway bounds concurrent provider calls") {
    auto provider = std::make_shared<InstrumentedProvider>();
    auto config = fast_config();
    config.max_in_flight = 3;
    Gateway gw(provider, config);

    util::parallel_for(24, 12, [&](size_t i) {
        gw.complete(simple_request("req " + std::to_string(i), 0.8));
    });
    CHECK(provider->peak_.load() <= 3);
    CHECK(gw.max_observed_in_flight() <= 3);
    CHECK(gw.stats().n_requests == 24);
}

TEST_CASE("transient failures retry up to the limit") {
    auto flaky = std::make_shared<FlakyProvider>(2);
    Gateway gw(flaky, fast_config());
    auto resp = gw.complete(simple_request("x", 0.8));
    CHECK(resp.texts == std::vector<std::string>{"ok"});
    CHECK(flaky->calls_.load() == 3);
    CHECK(gw.stats().n_retries == 2);

    auto hopeless = std::make_shared<FlakyProvider>(100);
    Gateway gw2(hopeless, fast_config());
    CHECK_THROWS_AS(gw2.complete(simple_request("x", 0.8)), TransportError);
    CHECK(hopeless->calls_.load() == 4);  // initial try + 3 retries
}

TEST_CASE("non-transient failures are never retried") {
    auto broken = std::make_shared<FlakyProvider>(100, /*transient=*/false);
    Gateway gw(broken, fast_config());
    CHECK_THROWS_AS(gw.complete(simple_request("x", 0.8)), ProviderError);
    CHECK(broken->calls_.load() == 1);
}

TEST_CASE("installing a new mock replaces the old one") {
    auto req = simple_request("swap");
    MockProvider::Script first, second;
    first.chat[request_fingerprint(req)] = {"old"};
    second.chat[request_fingerprint(req)] = {"new"};

    Gateway gw(std::make_shared<MockProvider>(first), fast_config());
    CHECK(gw.complete(req).texts[0] == "old");
    gw.install_mock(std::make_shared<MockProvider>(second));
    CHECK(gw.complete(req).texts[0] == "new");
}

TEST_CASE("fixed script and request stream give identical outputs across runs") {
    auto run_once = [] {
        MockProvider::Script script;
        auto r1 = simple_request("alpha", 0.8, 2);
        auto r2 = simple_request("beta", 0.0, 1);
        script.chat[request_fingerprint(r1)] = {"a1", "a2"};
        script.chat[request_fingerprint(r2)] = {"b"};
        Gateway gw(std::make_shared<MockProvider>(script), fast_config());
        std::string all;
        for (const auto& t : gw.complete(r1).texts) all += t + "|";
        for (const auto& t : gw.complete(r2).texts) all += t + "|";
        for (const auto& t : gw.complete(simple_request("gamma")).texts) all += t + "|";
        return all;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("gateway writes one accounting line per request") {
    auto dir = testing::test_dir("gateway");
    auto log = dir / "requests.jsonl";
    std::filesystem::remove(log);
    Gateway gw(std::make_shared<MockProvider>(), fast_config(), log);
    gw.complete(simple_request("one"));
    gw.complete(simple_request("one"));  // cache hit still logged
    gw.complete(simple_request("two", 0.8));
    auto lines = util::read_lines(log);
    CHECK(lines.size() == 3);
    CHECK(lines[1].find("\"cached\":true") != std::string::npos);
}
