#include "sqlsynth/llm/types.hpp"

#include <cmath>
#include <cstdio>

#include "sqlsynth/errors.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::llm {

void validate(const ChatRequest& request) {
    if (request.messages.empty()) throw PreconditionError("chat request has no messages");
    if (request.temperature < 0.0 || request.temperature > 2.0) {
        throw PreconditionError("temperature out of [0,2]");
    }
    if (request.n_samples < 1) throw PreconditionError("n_samples must be positive");
    if (request.max_output_tokens < 1) throw PreconditionError("max_output_tokens must be positive");
    for (const auto& m : request.messages) {
        if (m.role != "system" && m.role != "user" && m.role != "assistant") {
            throw PreconditionError("unknown message role: " + m.role);
        }
    }
}

std::string request_fingerprint(const ChatRequest& request) {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.4f", request.temperature);
    uint64_t h = util::fnv1a64(request.model_id);
    h = util::fnv1a64("\x1f", h);
    for (const auto& m : request.messages) {
        h = util::fnv1a64(m.role, h);
        h = util::fnv1a64("\x1e", h);
        h = util::fnv1a64(m.text, h);
        h = util::fnv1a64("\x1f", h);
    }
    h = util::fnv1a64(temp, h);
    h = util::fnv1a64("\x1f", h);
    h = util::fnv1a64(std::to_string(request.n_samples), h);
    return util::to_hex(h);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.values.size() != b.values.size()) {
        throw DimensionMismatch("cosine of vectors with different dimensions");
    }
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void to_json(nlohmann::json& j, const Message& m) {
    j = nlohmann::json{{"role", m.role}, {"content", m.text}};
}

void from_json(const nlohmann::json& j, Message& m) {
    j.at("role").get_to(m.role);
    j.at("content").get_to(m.text);
}

void to_json(nlohmann::json& j, const ProviderConfig& c) {
    j = nlohmann::json{{"endpoint_url", c.endpoint_url},
                       {"api_key_env", c.api_key_env},
                       {"max_in_flight", c.max_in_flight},
                       {"retry_limit", c.retry_limit},
                       {"backoff_base_ms", c.backoff_base_ms}};
}

void from_json(const nlohmann::json& j, ProviderConfig& c) {
    c.endpoint_url = j.value("endpoint_url", "");
    c.api_key_env = j.value("api_key_env", "");
    c.max_in_flight = j.value("max_in_flight", 4);
    c.retry_limit = j.value("retry_limit", 3);
    c.backoff_base_ms = j.value("backoff_base_ms", 250);
    if (c.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (c.retry_limit < 0) throw ConfigError("retry_limit must be >= 0");
    if (c.backoff_base_ms < 1) throw ConfigError("backoff_base_ms must be >= 1");
}

}  // namespace sqlsynth::llm
