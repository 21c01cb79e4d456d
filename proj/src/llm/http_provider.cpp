#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "sqlsynth/llm/provider.hpp"
#include "sqlsynth/util.hpp"

namespace sqlsynth::llm {

using nlohmann::json;

namespace {

// Splits "http://host:8000/v1" into host part and path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    std::string rest = url;
    if (rest.rfind("https://", 0) == 0) {
        throw ConfigError("https endpoints are not supported; use a local http proxy");
    }
    if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
    auto slash = rest.find('/');
    std::string host = "http://" + (slash == std::string::npos ? rest : rest.substr(0, slash));
    std::string prefix = slash == std::string::npos ? "" : rest.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {host, prefix};
}

}  // namespace

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key) api_key_ = key;
    }
}

std::string HttpProvider::post_json(const std::string& path, const std::string& body) {
    auto [host, prefix] = split_endpoint(config_.endpoint_url);
    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(600);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto result = client.Post(prefix + path, headers, body, "application/json");
    if (!result) {
        throw TransportError("no response from " + config_.endpoint_url + ": " +
                             httplib::to_string(result.error()));
    }
    if (result->status == 401 || result->status == 403) {
        throw AuthError("authentication rejected (" + std::to_string(result->status) +
                        "); check $" + config_.api_key_env);
    }
    if (result->status == 429 || result->status >= 500) {
        throw TransportError("transient status " + std::to_string(result->status));
    }
    if (result->status != 200) {
        throw ProviderError("unexpected status " + std::to_string(result->status) + ": " +
                            result->body.substr(0, 200));
    }
    return result->body;
}

ChatResponse HttpProvider::complete(const ChatRequest& request) {
    validate(request);
    json body = {
        {"model", request.model_id},
        {"messages", request.messages},
        {"temperature", request.temperature},
        {"n", request.n_samples},
        {"max_tokens", request.max_output_tokens},
    };
    std::string raw = post_json("/chat/completions", body.dump());

    ChatResponse response;
    try {
        json parsed = json::parse(raw);
        for (const auto& choice : parsed.at("choices")) {
            const auto& message = choice.at("message");
            if (message.contains("content") && !message.at("content").is_null()) {
                response.texts.push_back(message.at("content").get<std::string>());
            } else {
                ++response.n_failed_samples;
            }
        }
        if (parsed.contains("usage")) {
            response.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
            response.usage.completion_tokens = parsed["usage"].value("completion_tokens", 0);
        }
        if (parsed.contains("model")) {
            response.provider_meta["model"] = parsed["model"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed completion body: ") + e.what());
    }
    return response;
}

std::vector<EmbeddingVector> HttpProvider::embed(const std::vector<std::string>& texts,
                                                 const std::string& model_id) {
    if (texts.empty()) throw PreconditionError("embed called with no texts");
    for (const auto& t : texts) {
        if (t.empty()) throw PreconditionError("embed called with an empty text");
    }
    json body = {{"model", model_id}, {"input", texts}};
    std::string raw = post_json("/embeddings", body.dump());

    std::vector<EmbeddingVector> out;
    try {
        json parsed = json::parse(raw);
        for (const auto& item : parsed.at("data")) {
            EmbeddingVector v;
            v.model_id = model_id;
            item.at("embedding").get_to(v.values);
            out.push_back(std::move(v));
        }
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed embedding body: ") + e.what());
    }
    if (out.size() != texts.size()) {
        throw ProviderError("embedding count mismatch: sent " + std::to_string(texts.size()) +
                            ", got " + std::to_string(out.size()));
    }
    for (const auto& v : out) {
        if (v.values.size() != out.front().values.size()) {
            throw DimensionMismatch("provider returned ragged embedding vectors");
        }
    }
    return out;
}

}  // namespace sqlsynth::llm
