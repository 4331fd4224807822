#include "raterlens/icl.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "raterlens/errors.hpp"
#include "raterlens/util.hpp"

namespace raterlens {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void ChatSpec::validate() const {
    if (temperature < 0.0) throw ConfigError("chat temperature must be nonnegative");
    if (provider_id == "http" && endpoint.empty()) throw ConfigError("http chat needs an endpoint");
    if (provider_id == "scripted" && replies_path.empty()) {
        throw ConfigError("scripted chat needs a replies file");
    }
}

ChatSpec ChatSpec::scripted(const std::string& replies_path) {
    ChatSpec spec;
    spec.provider_id = "scripted";
    spec.model_id = "scripted";
    spec.replies_path = replies_path;
    return spec;
}

ChatSpec ChatSpec::http(const std::string& endpoint, const std::string& model_id) {
    ChatSpec spec;
    spec.provider_id = "http";
    spec.model_id = model_id;
    spec.endpoint = endpoint;
    return spec;
}

PromptPair build_prompt(const RatingRecord& record, const AnnotatorProfile& profile,
                        const AblationSpec& spec, const Demographics* predicted) {
    auto context = render_context(record, profile, spec, predicted);
    // Rewrite the target segment in place, preserving the joined structure.
    context.segments.back().second = "Annotate this text: \"" + record.text + "\"";
    std::vector<std::string> parts;
    parts.reserve(context.segments.size());
    for (const auto& [_, text] : context.segments) parts.push_back(text);
    PromptPair pair;
    pair.system = kIclSystemPrompt;
    pair.user = join(parts, std::string(" ") + kSeparator + " ");
    return pair;
}

int parse_rating(const std::string& reply) {
    for (std::size_t i = 0; i < reply.size(); ++i) {
        char c = reply[i];
        if (c < '0' || c > '4') continue;
        bool prev_digit = i > 0 && std::isdigit(static_cast<unsigned char>(reply[i - 1]));
        bool next_digit =
            i + 1 < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i + 1]));
        if (!prev_digit && !next_digit) return c - '0';
    }
    throw ParseError("no standalone rating 0-4 in reply: '" + reply + "'");
}

namespace {

struct ParsedChatEndpoint {
    std::string base;
    std::string path;
};

ParsedChatEndpoint parse_chat_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint missing scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/v1/chat/completions"};
    std::string path = endpoint.substr(path_start);
    if (path == "/") path = "/v1/chat/completions";
    return {endpoint.substr(0, path_start), path};
}

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ChatSpec spec) : spec_(std::move(spec)) {}

    std::string complete(const PromptPair& prompt) override {
        auto [base, path] = parse_chat_endpoint(spec_.endpoint);
        ordered_json body;
        body["model"] = spec_.model_id;
        body["messages"] = ordered_json::array({
            ordered_json{{"role", "system"}, {"content", prompt.system}},
            ordered_json{{"role", "user"}, {"content", prompt.user}},
        });
        body["temperature"] = spec_.temperature;

        std::string last_error = "no attempts made";
        double backoff = 0.5;
        for (int attempt = 0; attempt < std::max(1, spec_.max_retries); ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                backoff *= 2.0;
            }
            httplib::Client client(base);
            client.set_connection_timeout(5, 0);
            client.set_read_timeout(60, 0);
            httplib::Headers headers;
            if (const char* key = std::getenv("RATERLENS_CHAT_KEY")) {
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
                return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const json::exception& e) {
                last_error = std::string("bad response body: ") + e.what();
            }
        }
        throw TransportError("chat endpoint " + spec_.endpoint + " failed after " +
                             std::to_string(std::max(1, spec_.max_retries)) +
                             " attempts: " + last_error);
    }

private:
    ChatSpec spec_;
};

}  // namespace

ScriptedChatClient::ScriptedChatClient(std::vector<std::string> replies)
    : replies_(std::move(replies)) {
    if (replies_.empty()) throw ConfigError("scripted chat client needs at least one reply");
}

std::unique_ptr<ScriptedChatClient> ScriptedChatClient::from_file(const std::string& replies_path) {
    return std::make_unique<ScriptedChatClient>(load_replies_jsonl(replies_path));
}

std::string ScriptedChatClient::complete(const PromptPair&) {
    std::string reply = replies_[next_ % replies_.size()];
    ++next_;
    return reply;
}

std::unique_ptr<ChatClient> ChatClient::make(const ChatSpec& spec) {
    spec.validate();
    if (spec.provider_id == "scripted") return ScriptedChatClient::from_file(spec.replies_path);
    if (spec.provider_id == "http") return std::make_unique<HttpChatClient>(spec);
    throw ConfigError("unknown chat provider '" + spec.provider_id + "'");
}

IclResult icl_predict(ChatClient& client, const PromptPair& prompt, FallbackPolicy policy) {
    IclResult result;
    result.raw_reply = client.complete(prompt);
    try {
        result.rating = parse_rating(result.raw_reply);
    } catch (const ParseError&) {
        if (policy == FallbackPolicy::error) throw;
        result.rating = 2;  // midpoint fallback, flagged in run metadata
        result.flagged = true;
    }
    return result;
}

std::vector<std::string> load_replies_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open replies file: " + path);
    std::vector<std::string> replies;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            if (j.is_string()) {
                replies.push_back(j.get<std::string>());
            } else {
                replies.push_back(j.at("content").get<std::string>());
            }
        } catch (const json::exception& e) {
            throw ParseError("replies line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (replies.empty()) throw ConfigError("replies file is empty: " + path);
    return replies;
}

struct StubChatServer::Impl {
    std::vector<std::string> replies;
    std::atomic<std::size_t> next{0};
    httplib::Server server;
    std::thread thread;
    int port = 0;
};

StubChatServer::StubChatServer(std::vector<std::string> replies) : impl_(std::make_unique<Impl>()) {
    if (replies.empty()) throw ConfigError("stub chat server needs at least one reply");
    impl_->replies = std::move(replies);
}

StubChatServer::~StubChatServer() { stop(); }

int StubChatServer::start(int port) {
    impl_->server.Post("/v1/chat/completions", [this](const httplib::Request&,
                                                      httplib::Response& res) {
        std::size_t i = impl_->next.fetch_add(1) % impl_->replies.size();
        ordered_json reply;
        reply["choices"] = ordered_json::array(
            {ordered_json{{"message", ordered_json{{"role", "assistant"},
                                                   {"content", impl_->replies[i]}}}}});
        res.set_content(reply.dump(), "application/json");
    });
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", port)) {
            throw TransportError("stub chat server cannot bind port " + std::to_string(port));
        }
        impl_->port = port;
    }
    impl_->thread = std::thread([this]() { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void StubChatServer::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

std::string StubChatServer::endpoint() const {
    return "http://127.0.0.1:" + std::to_string(impl_->port) + "/v1/chat/completions";
}

void save_chat_spec(const ChatSpec& spec, const std::string& path) {
    spec.validate();
    ordered_json j;
    j["provider_id"] = spec.provider_id;
    j["model_id"] = spec.model_id;
    if (!spec.endpoint.empty()) j["endpoint"] = spec.endpoint;
    j["temperature"] = spec.temperature;
    j["max_retries"] = spec.max_retries;
    if (!spec.replies_path.empty()) j["replies_path"] = spec.replies_path;
    write_file(path, j.dump());
}

ChatSpec load_chat_spec(const std::string& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad chat spec: ") + e.what());
    }
    ChatSpec spec;
    spec.provider_id = j.at("provider_id").get<std::string>();
    spec.model_id = j.value("model_id", std::string());
    spec.endpoint = j.value("endpoint", std::string());
    spec.temperature = j.value("temperature", 0.0);
    spec.max_retries = j.value("max_retries", 3);
    spec.replies_path = j.value("replies_path", std::string());
    spec.validate();
    return spec;
}

}  // namespace raterlens
