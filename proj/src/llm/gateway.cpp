#include "sqlsynth/llm/gateway.hpp"

#include <chrono>
#include <thread>

#include <json.hpp>

#include "sqlsynth/util.hpp"

namespace sqlsynth::llm {

using nlohmann::json;

// RAII slot under the in-flight cap; blocks until one frees up.
class Gateway::InFlightSlot {
  public:
    explicit InFlightSlot(Gateway& g) : g_(g) {
        std::unique_lock lock(g_.mu_);
        g_.slot_free_.wait(lock, [&] { return g_.in_flight_ < g_.config_.max_in_flight; });
        ++g_.in_flight_;
        g_.max_observed_in_flight_ = std::max(g_.max_observed_in_flight_, g_.in_flight_);
    }
    ~InFlightSlot() {
        {
            std::lock_guard lock(g_.mu_);
            --g_.in_flight_;
        }
        g_.slot_free_.notify_one();
    }

  private:
    Gateway& g_;
};

Gateway::Gateway(std::shared_ptr<Provider> provider, ProviderConfig config,
                 std::filesystem::path log_path)
    : provider_(std::move(provider)), config_(std::move(config)), log_path_(std::move(log_path)) {
    if (!provider_) throw PreconditionError("gateway needs a provider");
}

void Gateway::install_mock(std::shared_ptr<Provider> provider) {
    if (!provider) throw PreconditionError("cannot install a null provider");
    std::lock_guard lock(mu_);
    provider_ = std::move(provider);
    cache_.clear();
}

ChatResponse Gateway::call_with_retry(const ChatRequest& request) {
    std::shared_ptr<Provider> provider;
    {
        std::lock_guard lock(mu_);
        provider = provider_;
    }
    for (int attempt = 0;; ++attempt) {
        try {
            return provider->complete(request);
        } catch (const TransportError&) {
            if (attempt >= config_.retry_limit) {
                std::lock_guard lock(mu_);
                ++stats_.n_failures;
                throw;
            }
            {
                std::lock_guard lock(mu_);
                ++stats_.n_retries;
            }
            auto delay = std::chrono::milliseconds(config_.backoff_base_ms) * (1LL << attempt);
            std::this_thread::sleep_for(delay);
        }
        // AuthError / ProviderError / PreconditionError propagate untouched
    }
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    validate(request);
    std::string fp = request_fingerprint(request);
    bool cacheable = request.temperature == 0.0;

    if (cacheable) {
        std::lock_guard lock(mu_);
        auto it = cache_.find(fp);
        if (it != cache_.end()) {
            ++stats_.n_requests;
            ++stats_.n_cache_hits;
            log_line(fp, request, it->second, true);
            return it->second;
        }
    }

    ChatResponse response;
    {
        InFlightSlot slot(*this);
        response = call_with_retry(request);
    }

    {
        std::lock_guard lock(mu_);
        ++stats_.n_requests;
        stats_.prompt_tokens += response.usage.prompt_tokens;
        stats_.completion_tokens += response.usage.completion_tokens;
        if (cacheable) cache_[fp] = response;
        log_line(fp, request, response, false);
    }
    return response;
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts,
                                            const std::string& model_id) {
    std::shared_ptr<Provider> provider;
    {
        std::lock_guard lock(mu_);
        provider = provider_;
    }
    for (int attempt = 0;; ++attempt) {
        try {
            InFlightSlot slot(*this);
            auto out = provider->embed(texts, model_id);
            std::lock_guard lock(mu_);
            ++stats_.n_requests;
            return out;
        } catch (const TransportError&) {
            if (attempt >= config_.retry_limit) {
                std::lock_guard lock(mu_);
                ++stats_.n_failures;
                throw;
            }
            std::lock_guard lock(mu_);
            ++stats_.n_retries;
        }
    }
}

// callers hold mu_
void Gateway::log_line(const std::string& fingerprint, const ChatRequest& request,
                       const ChatResponse& response, bool cached) {
    if (log_path_.empty()) return;
    json line = {
        {"seq", seq_++},
        {"fingerprint", fingerprint},
        {"model", request.model_id},
        {"temperature", request.temperature},
        {"n_samples", request.n_samples},
        {"n_texts", response.texts.size()},
        {"cached", cached},
        {"prompt_tokens", response.usage.prompt_tokens},
        {"completion_tokens", response.usage.completion_tokens},
    };
    if (response.provider_meta.count("unscripted")) line["unscripted"] = true;
    util::append_line(log_path_, line.dump());
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

int Gateway::max_observed_in_flight() const {
    std::lock_guard lock(mu_);
    return max_observed_in_flight_;
}

}  // namespace sqlsynth::llm
