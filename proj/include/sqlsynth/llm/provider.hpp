#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "sqlsynth/llm/types.hpp"

namespace sqlsynth::llm {

// One chat/embedding backend. Implementations must be safe to call from
// multiple threads; the gateway enforces the in-flight cap above them.
class Provider {
  public:
    virtual ~Provider() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                               const std::string& model_id) = 0;
    virtual std::string name() const = 0;
};

// Deterministic offline provider. Chat requests resolve by fingerprint from
// the script; unscripted requests fall through to the responder (default: a
// marker string) and are counted. Embeddings resolve by exact text, falling
// back to a hash-derived vector, so identical strings always embed equally.
class MockProvider : public Provider {
  public:
    using Responder = std::function<std::vector<std::string>(const ChatRequest&)>;

    struct Script {
        std::map<std::string, std::vector<std::string>> chat;   // fingerprint -> texts
        std::map<std::string, std::vector<double>> embeddings;  // text -> vector
    };

    explicit MockProvider(Script script = {}, Responder fallback = nullptr);

    ChatResponse complete(const ChatRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model_id) override;
    std::string name() const override { return "mock"; }

    int unscripted_count() const;
    size_t embedding_dim() const { return kFallbackDim; }

    static constexpr size_t kFallbackDim = 32;

  private:
    Script script_;
    Responder fallback_;
    mutable std::mutex mu_;
    int unscripted_ = 0;
};

// Remote backend speaking the common chat-completion HTTP schema:
// POST {endpoint}/chat/completions and {endpoint}/embeddings.
class HttpProvider : public Provider {
  public:
    explicit HttpProvider(ProviderConfig config);

    ChatResponse complete(const ChatRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model_id) override;
    std::string name() const override { return "http:" + config_.endpoint_url; }

  private:
    std::string post_json(const std::string& path, const std::string& body);

    ProviderConfig config_;
    std::string api_key_;
};

}  // namespace sqlsynth::llm
