#include "raterlens/encoder.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "raterlens/errors.hpp"
#include "raterlens/util.hpp"

namespace raterlens {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void ProviderSpec::validate() const {
    if (dimension == 0) throw ConfigError("provider dimension must be positive");
    if (provider_id == "http" && endpoint.empty()) {
        throw ConfigError("http provider requires an endpoint");
    }
}

ProviderSpec ProviderSpec::mock(const std::string& model_id, std::uint64_t seed,
                                std::size_t dimension) {
    ProviderSpec spec;
    spec.provider_id = "mock";
    spec.model_id = model_id;
    spec.seed = seed;
    if (dimension != 0) {
        spec.dimension = dimension;
    } else if (model_id == "mock-large") {
        spec.dimension = kMockLargeDim;
    } else if (model_id == "mock-small") {
        spec.dimension = kMockSmallDim;
    } else {
        throw ConfigError("mock provider '" + model_id + "' needs an explicit dimension");
    }
    return spec;
}

ProviderSpec ProviderSpec::http(const std::string& endpoint, const std::string& model_id,
                                std::size_t dimension) {
    ProviderSpec spec;
    spec.provider_id = "http";
    spec.model_id = model_id;
    spec.endpoint = endpoint;
    spec.dimension = dimension;
    return spec;
}

std::string embedding_content_hash(const ProviderSpec& spec, const std::string& text) {
    std::string key = spec.provider_id;
    key += '\x1f';
    key += spec.model_id;
    key += '\x1f';
    key += text;
    return to_hex(fnv1a64(key));
}

namespace {

class MockProvider : public Provider {
public:
    explicit MockProvider(ProviderSpec spec) : spec_(std::move(spec)) {}

    std::vector<double> embed_uncached(const std::string& text) override {
        // Pure function of (seed, model_id, text): hash into a generator
        // state, draw symmetric values, normalize to unit length.
        Rng rng(mix_seeds(mix_seeds(spec_.seed, fnv1a64(spec_.model_id)), fnv1a64(text)));
        std::vector<double> values(spec_.dimension);
        double norm_sq = 0.0;
        for (double& v : values) {
            v = rng.normal();
            norm_sq += v * v;
        }
        double norm = std::sqrt(norm_sq);
        if (norm == 0.0) norm = 1.0;
        for (double& v : values) v /= norm;
        return values;
    }

private:
    ProviderSpec spec_;
};

struct ParsedEndpoint {
    std::string base;  // scheme://host:port
    std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint, const std::string& default_path) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint missing scheme: " + endpoint);
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {endpoint, default_path};
    }
    std::string path = endpoint.substr(path_start);
    if (path == "/") path = default_path;
    return {endpoint.substr(0, path_start), path};
}

class HttpEmbeddingProvider : public Provider {
public:
    HttpEmbeddingProvider(ProviderSpec spec, int max_retries, double backoff_seconds)
        : spec_(std::move(spec)), max_retries_(max_retries), backoff_seconds_(backoff_seconds) {}

    std::vector<double> embed_uncached(const std::string& text) override {
        auto [base, path] = parse_endpoint(spec_.endpoint, "/v1/embeddings");
        ordered_json body;
        body["model"] = spec_.model_id;
        body["input"] = json::array({text});

        std::string last_error = "no attempts made";
        double backoff = backoff_seconds_;
        for (int attempt = 0; attempt < std::max(1, max_retries_); ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                backoff *= 2.0;
            }
            httplib::Client client(base);
            client.set_connection_timeout(5, 0);
            client.set_read_timeout(30, 0);
            httplib::Headers headers;
            if (const char* key = std::getenv("RATERLENS_EMBED_KEY")) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
            auto res = client.Post(path, headers, body.dump(), "application/json");
            if (!res) {
                last_error = "connection failed: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "status " + std::to_string(res->status);
                continue;
            }
            try {
                auto parsed = json::parse(res->body);
                const auto& data = parsed.at("data");
                if (data.empty()) throw IntegrityError("embedding response carries no data");
                auto values = data.at(0).at("embedding").get<std::vector<double>>();
                return values;
            } catch (const json::exception& e) {
                last_error = std::string("bad response body: ") + e.what();
            }
        }
        throw TransportError("embedding endpoint " + spec_.endpoint + " failed after " +
                             std::to_string(std::max(1, max_retries_)) + " attempts: " + last_error);
    }

private:
    ProviderSpec spec_;
    int max_retries_;
    double backoff_seconds_;
};

}  // namespace

std::unique_ptr<Provider> make_provider(const ProviderSpec& spec) {
    spec.validate();
    if (spec.provider_id == "mock") return std::make_unique<MockProvider>(spec);
    if (spec.provider_id == "http") return std::make_unique<HttpEmbeddingProvider>(spec, 3, 0.5);
    throw ConfigError("unknown embedding provider '" + spec.provider_id + "'");
}

Encoder::Encoder(ProviderSpec spec, std::filesystem::path cache_dir, EncoderOptions options)
    : Encoder(spec, std::move(cache_dir), nullptr, options) {
    if (spec_.provider_id == "http") {
        provider_ = std::make_unique<HttpEmbeddingProvider>(spec_, options_.max_retries,
                                                            options_.backoff_seconds);
    } else {
        provider_ = make_provider(spec_);
    }
}

Encoder::Encoder(ProviderSpec spec, std::filesystem::path cache_dir,
                 std::unique_ptr<Provider> provider, EncoderOptions options)
    : spec_(std::move(spec)), cache_dir_(std::move(cache_dir)), options_(options),
      provider_(std::move(provider)) {
    spec_.validate();
    if (!cache_dir_.empty()) {
        std::filesystem::create_directories(cache_dir_);
    }
}

void Encoder::set_recorder(std::function<void(const std::string&)> recorder) {
    std::lock_guard lock(recorder_mutex_);
    recorder_ = std::move(recorder);
}

std::filesystem::path Encoder::cache_path(const std::string& text) const {
    return cache_dir_ / (embedding_content_hash(spec_, text) + ".json");
}

bool Encoder::try_load_cached(const std::string& text, const std::string& hash,
                              EmbeddingVector& out) {
    if (cache_dir_.empty()) return false;
    auto path = cache_dir_ / (hash + ".json");
    std::string raw;
    {
        std::lock_guard lock(cache_mutex_);
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) return false;
        try {
            raw = read_file(path.string());
        } catch (const IoError&) {
            return false;
        }
    }
    try {
        auto j = json::parse(raw);
        if (j.at("content_hash").get<std::string>() != hash) throw IntegrityError("hash mismatch");
        if (j.at("provider_id").get<std::string>() != spec_.provider_id ||
            j.at("model_id").get<std::string>() != spec_.model_id) {
            throw IntegrityError("provenance mismatch");
        }
        auto values = j.at("values").get<std::vector<double>>();
        if (values.size() != spec_.dimension) throw IntegrityError("dimension mismatch");
        for (double v : values) {
            if (!std::isfinite(v)) throw IntegrityError("non-finite entry");
        }
        out.values = std::move(values);
        out.content_hash = hash;
        return true;
    } catch (const std::exception&) {
        // Corrupted entry: evict, force a refetch.
        std::lock_guard lock(cache_mutex_);
        std::error_code ec;
        std::filesystem::remove(path, ec);
        return false;
    }
}

EmbeddingVector Encoder::fetch_and_store(const std::string& text, const std::string& hash) {
    provider_calls_.fetch_add(1);
    auto values = provider_->embed_uncached(text);
    if (values.size() != spec_.dimension) {
        throw IntegrityError("provider returned dimension " + std::to_string(values.size()) +
                             ", expected " + std::to_string(spec_.dimension));
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw IntegrityError("provider returned a non-finite entry");
    }
    EmbeddingVector out;
    out.values = std::move(values);
    out.content_hash = hash;

    if (!cache_dir_.empty()) {
        ordered_json j;
        j["provider_id"] = spec_.provider_id;
        j["model_id"] = spec_.model_id;
        j["content_hash"] = hash;
        j["dimension"] = spec_.dimension;
        j["values"] = out.values;
        auto path = cache_dir_ / (hash + ".json");
        std::lock_guard lock(cache_mutex_);
        write_file_atomic(path.string(), j.dump());
    }
    return out;
}

EmbeddingVector Encoder::embed_one(const std::string& text) {
    if (text.empty()) throw ConfigError("cannot embed an empty string");
    std::string hash = embedding_content_hash(spec_, text);
    EmbeddingVector cached;
    if (try_load_cached(text, hash, cached)) return cached;
    return fetch_and_store(text, hash);
}

EmbeddingVector Encoder::embed(const std::string& text) {
    {
        std::lock_guard lock(recorder_mutex_);
        if (recorder_) recorder_(text);
    }
    return embed_one(text);
}

std::vector<EmbeddingVector> Encoder::embed_batch(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ConfigError("embed_batch requires a non-empty list");
    {
        std::lock_guard lock(recorder_mutex_);
        if (recorder_) {
            for (const auto& text : texts) recorder_(text);
        }
    }

    // Deduplicate so a repeated text costs one provider call.
    std::vector<std::string> unique_texts;
    std::map<std::string, std::size_t> unique_index;
    std::vector<std::size_t> mapping(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto [it, inserted] = unique_index.try_emplace(texts[i], unique_texts.size());
        if (inserted) unique_texts.push_back(texts[i]);
        mapping[i] = it->second;
    }

    std::vector<EmbeddingVector> unique_results(unique_texts.size());
    std::vector<std::string> unique_errors(unique_texts.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= unique_texts.size()) break;
            try {
                unique_results[i] = embed_one(unique_texts[i]);
            } catch (const std::exception& e) {
                unique_errors[i] = e.what();
            }
        }
    };

    std::size_t n_workers = std::min<std::size_t>(std::max<std::size_t>(1, options_.max_in_flight),
                                                  unique_texts.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::vector<std::size_t> failed;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (!unique_errors[mapping[i]].empty()) failed.push_back(i);
    }
    if (!failed.empty()) {
        std::string msg = "embed_batch failed for indices";
        for (std::size_t i : failed) msg += " " + std::to_string(i);
        msg += "; first error: " + unique_errors[mapping[failed.front()]];
        throw BatchError(msg, std::move(failed));
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) out.push_back(unique_results[mapping[i]]);
    return out;
}

}  // namespace raterlens
