#pragma once

#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sqlsynth/llm/provider.hpp"
#include "sqlsynth/llm/types.hpp"

namespace sqlsynth::llm {

struct GatewayStats {
    int64_t n_requests = 0;
    int64_t n_cache_hits = 0;
    int64_t n_retries = 0;
    int64_t n_failures = 0;
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
};

// Front door for every model call: bounds in-flight requests, retries
// transient transport failures with exponential backoff, caches
// temperature-0 responses by fingerprint, and appends a JSONL accounting
// line per request.
class Gateway {
  public:
    Gateway(std::shared_ptr<Provider> provider, ProviderConfig config,
            std::filesystem::path log_path = {});

    ChatResponse complete(const ChatRequest& request);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model_id);

    // Replaces the backend; the last install wins.
    void install_mock(std::shared_ptr<Provider> provider);

    GatewayStats stats() const;
    const ProviderConfig& config() const { return config_; }

  private:
    class InFlightSlot;
    void log_line(const std::string& fingerprint, const ChatRequest& request,
                  const ChatResponse& response, bool cached);
    ChatResponse call_with_retry(const ChatRequest& request);

    std::shared_ptr<Provider> provider_;
    ProviderConfig config_;
    std::filesystem::path log_path_;

    mutable std::mutex mu_;
    std::condition_variable slot_free_;
    int in_flight_ = 0;
    int max_observed_in_flight_ = 0;
    std::unordered_map<std::string, ChatResponse> cache_;
    GatewayStats stats_;
    int64_t seq_ = 0;

  public:
    // test hook: high-water mark of concurrently outstanding provider calls
    int max_observed_in_flight() const;
};

}  // namespace sqlsynth::llm
