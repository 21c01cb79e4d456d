#include <algorithm>
#include <optional>

#include "sqlsynth/llm/provider.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::llm {

namespace {

int64_t text_tokens(const std::string& s) {
    return static_cast<int64_t>(util::whitespace_token_count(s));
}

// Hash-derived pseudo-embedding: deterministic, unit-scale components.
std::vector<double> fallback_embedding(const std::string& text) {
    std::vector<double> values(MockProvider::kFallbackDim);
    for (size_t i = 0; i < values.size(); ++i) {
        uint64_t h = util::fnv1a64(text, 0x100000001b3ULL * (i + 1));
        // map to [-1, 1)
        values[i] = static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53) * 2.0 - 1.0;
    }
    return values;
}

}  // namespace

MockProvider::MockProvider(Script script, Responder fallback)
    : script_(std::move(script)), fallback_(std::move(fallback)) {}

ChatResponse MockProvider::complete(const ChatRequest& request) {
    validate(request);
    ChatResponse response;
    for (const auto& m : request.messages) response.usage.prompt_tokens += text_tokens(m.text);

    std::string fp = request_fingerprint(request);
    auto it = script_.chat.find(fp);
    if (it != script_.chat.end()) {
        response.texts = it->second;
        if (response.texts.size() > static_cast<size_t>(request.n_samples)) {
            response.texts.resize(static_cast<size_t>(request.n_samples));
        }
    } else {
        {
            std::lock_guard lock(mu_);
            ++unscripted_;
        }
        if (fallback_) {
            response.texts = fallback_(request);
            if (response.texts.size() > static_cast<size_t>(request.n_samples)) {
                response.texts.resize(static_cast<size_t>(request.n_samples));
            }
        } else {
            for (int i = 0; i < request.n_samples; ++i) {
                response.texts.push_back("[unscripted " + fp + " sample " + std::to_string(i) +
                                         "]");
            }
        }
        response.provider_meta["unscripted"] = "1";
    }
    for (const auto& t : response.texts) response.usage.completion_tokens += text_tokens(t);
    return response;
}

std::vector<EmbeddingVector> MockProvider::embed(const std::vector<std::string>& texts,
                                                 const std::string& model_id) {
    if (texts.empty()) throw PreconditionError("embed called with no texts");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    std::optional<size_t> dim;
    for (const auto& text : texts) {
        if (text.empty()) throw PreconditionError("embed called with an empty text");
        EmbeddingVector v;
        v.model_id = model_id;
        auto it = script_.embeddings.find(text);
        v.values = it != script_.embeddings.end() ? it->second : fallback_embedding(text);
        if (dim && v.values.size() != *dim) {
            throw DimensionMismatch("scripted embeddings have mixed dimensions");
        }
        dim = v.values.size();
        out.push_back(std::move(v));
    }
    return out;
}

int MockProvider::unscripted_count() const {
    std::lock_guard lock(mu_);
    return unscripted_;
}

}  // namespace sqlsynth::llm
