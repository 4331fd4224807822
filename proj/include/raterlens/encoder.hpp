#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace raterlens {

struct ProviderSpec {
    std::string provider_id;  // "mock" or "http"
    std::string model_id;
    std::size_t dimension = 0;
    std::string endpoint;     // http only
    std::uint64_t seed = 0;   // mock only

    void validate() const;

    // mock-large is 3072-dimensional; mock-small defaults to 1536 (a toolkit
    // convention, the small remote model is configurable either way).
    static ProviderSpec mock(const std::string& model_id = "mock-large", std::uint64_t seed = 0,
                             std::size_t dimension = 0);
    static ProviderSpec http(const std::string& endpoint, const std::string& model_id,
                             std::size_t dimension);
};

inline constexpr std::size_t kMockLargeDim = 3072;
inline constexpr std::size_t kMockSmallDim = 1536;

struct EmbeddingVector {
    std::vector<double> values;
    std::string content_hash;  // hash of (provider_id, model_id, input)

    std::size_t dimension() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

std::string embedding_content_hash(const ProviderSpec& spec, const std::string& text);

// Raw embedding source. Implementations must be safe to call from multiple
// threads; the bundled mock is stateless and the HTTP provider opens one
// connection per call.
class Provider {
public:
    virtual ~Provider() = default;
    virtual std::vector<double> embed_uncached(const std::string& text) = 0;
};

std::unique_ptr<Provider> make_provider(const ProviderSpec& spec);

struct EncoderOptions {
    std::size_t max_in_flight = 4;
    int max_retries = 3;
    double backoff_seconds = 0.5;  // doubles per retry
};

// Content-addressed caching front end over a Provider. One file per content
// hash keeps the cache crash-safe and shardable; a corrupted entry is evicted
// and refetched, never served.
class Encoder {
public:
    Encoder(ProviderSpec spec, std::filesystem::path cache_dir, EncoderOptions options = {});
    Encoder(ProviderSpec spec, std::filesystem::path cache_dir, std::unique_ptr<Provider> provider,
            EncoderOptions options = {});

    EmbeddingVector embed(const std::string& text);
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

    const ProviderSpec& spec() const { return spec_; }
    long provider_calls() const { return provider_calls_.load(); }

    // Observes every requested input (before the cache is consulted).
    void set_recorder(std::function<void(const std::string&)> recorder);

    std::filesystem::path cache_path(const std::string& text) const;

private:
    EmbeddingVector embed_one(const std::string& text);
    EmbeddingVector fetch_and_store(const std::string& text, const std::string& hash);
    bool try_load_cached(const std::string& text, const std::string& hash, EmbeddingVector& out);

    ProviderSpec spec_;
    std::filesystem::path cache_dir_;
    EncoderOptions options_;
    std::unique_ptr<Provider> provider_;
    std::atomic<long> provider_calls_{0};
    std::mutex cache_mutex_;
    std::function<void(const std::string&)> recorder_;
    std::mutex recorder_mutex_;
};

}  // namespace raterlens
