#pragma once

#include <memory>
#include <string>
#include <vector>

#include "raterlens/contexting.hpp"
#include "raterlens/corpus.hpp"

namespace raterlens {

inline constexpr const char* kIclSystemPrompt =
    "You are a model that predicts the toxicity rating of text from 0 to 4, where 0 is the "
    "least toxic and 4 is the most toxic.";

struct ChatSpec {
    std::string provider_id;  // "http" or "scripted"
    std::string model_id;
    std::string endpoint;      // http only
    double temperature = 0.0;  // single deterministic sample per record
    int max_retries = 3;
    std::string replies_path;  // scripted only: JSONL of {"content": ...}

    void validate() const;
    static ChatSpec scripted(const std::string& replies_path);
    static ChatSpec http(const std::string& endpoint, const std::string& model_id);
};

struct PromptPair {
    std::string system;
    std::string user;

    bool operator==(const PromptPair&) const = default;
};

// User prompt is the rendered context with the target segment rewritten as
// `Annotate this text: "<text>"`; the system prompt is fixed.
PromptPair build_prompt(const RatingRecord& record, const AnnotatorProfile& profile,
                        const AblationSpec& spec, const Demographics* predicted = nullptr);

// First standalone integer in 0..4 (digits flanked by non-digits); throws
// ParseError when there is none.
int parse_rating(const std::string& reply);

enum class FallbackPolicy { error, fallback_mid };

struct IclResult {
    int rating = 0;
    bool flagged = false;  // fallback was applied
    std::string raw_reply;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const PromptPair& prompt) = 0;

    static std::unique_ptr<ChatClient> make(const ChatSpec& spec);
};

// Cycles through a fixed reply list; file-loading convenience for the
// scripted provider.
class ScriptedChatClient : public ChatClient {
public:
    explicit ScriptedChatClient(std::vector<std::string> replies);
    static std::unique_ptr<ScriptedChatClient> from_file(const std::string& replies_path);

    std::string complete(const PromptPair& prompt) override;

private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
};

IclResult icl_predict(ChatClient& client, const PromptPair& prompt,
                      FallbackPolicy policy = FallbackPolicy::error);

// Offline chat-completions endpoint for tests and demos: serves the scripted
// replies over the same JSON protocol the HTTP client speaks.
class StubChatServer {
public:
    explicit StubChatServer(std::vector<std::string> replies);
    ~StubChatServer();

    int start(int port = 0);  // returns the bound port
    void stop();
    std::string endpoint() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<std::string> load_replies_jsonl(const std::string& path);

void save_chat_spec(const ChatSpec& spec, const std::string& path);
ChatSpec load_chat_spec(const std::string& path);

}  // namespace raterlens
