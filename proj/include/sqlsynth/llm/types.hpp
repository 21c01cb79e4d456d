#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace sqlsynth::llm {

struct Message {
    std::string role;  // system | user | assistant
    std::string text;
};

struct ChatRequest {
    std::string model_id;
    std::vector<Message> messages;
    double temperature = 0.0;
    int n_samples = 1;
    int max_output_tokens = 4096;
};

struct TokenUsage {
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
};

struct ChatResponse {
    std::vector<std::string> texts;  // one per surviving sample
    int n_failed_samples = 0;
    TokenUsage usage;
    std::map<std::string, std::string> provider_meta;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string model_id;
};

struct ProviderConfig {
    std::string endpoint_url;  // base url, e.g. http://host:8000/v1
    std::string api_key_env;   // name of the environment variable holding the key
    int max_in_flight = 4;
    int retry_limit = 3;
    int backoff_base_ms = 250;
};

// Throws PreconditionError on empty messages, bad temperature, or n_samples < 1.
void validate(const ChatRequest& request);

// Stable content hash of (model_id, messages, temperature, n_samples), as hex.
// Keys the mock script, the temperature-0 cache, and the request log.
std::string request_fingerprint(const ChatRequest& request);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);
void to_json(nlohmann::json& j, const ProviderConfig& c);
void from_json(const nlohmann::json& j, ProviderConfig& c);

}  // namespace sqlsynth::llm
