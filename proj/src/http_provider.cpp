#include "evmob/http_provider.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <condition_variable>
#include <cstdlib>
#include <thread>

namespace evmob::llm {

namespace {

// Runtime-bounded in-flight limiter.
class Gate {
public:
    explicit Gate(int limit) : limit_(limit < 1 ? 1 : limit) {}
    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_flight_ < limit_; });
        ++in_flight_;
    }
    void release() {
        std::lock_guard lock(mutex_);
        --in_flight_;
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int limit_;
    int in_flight_ = 0;
};

bool retryable_status(int status) {
    return status == 429 || status == 408 || (status >= 500 && status < 600);
}

} // namespace

struct HttpProvider::Impl {
    HttpProviderConfig config;
    std::string credential;
    Gate gate;
    std::mutex rng_mutex;
    std::mt19937_64 rng;

    explicit Impl(HttpProviderConfig cfg)
        : config(std::move(cfg)), gate(config.max_in_flight), rng(config.jitter_seed) {
        if (config.base_url.empty())
            throw ConfigError("http provider requires a base_url");
        if (!config.credential_env.empty()) {
            if (const char* value = std::getenv(config.credential_env.c_str()))
                credential = value;
        }
    }

    std::chrono::milliseconds backoff_delay(int attempt) {
        std::lock_guard lock(rng_mutex);
        std::uniform_int_distribution<int> jitter(0, config.backoff_base_ms);
        int base = config.backoff_base_ms * (1 << attempt);
        return std::chrono::milliseconds(base + jitter(rng));
    }
};

HttpProvider::HttpProvider(HttpProviderConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpProvider::~HttpProvider() = default;

ChatResponse HttpProvider::do_complete(const ChatRequest& request) {
    const HttpProviderConfig& cfg = impl_->config;

    nlohmann::json body{
        {"model", cfg.model},
        {"messages",
         nlohmann::json::array({{{"role", "system"}, {"content", request.system_prompt}},
                                {{"role", "user"}, {"content", request.user_prompt}}})},
        {"temperature", request.temperature},
        {"top_p", request.top_p},
        {"max_tokens", request.max_output_tokens},
    };
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!impl_->credential.empty())
        headers.emplace("Authorization", "Bearer " + impl_->credential);

    impl_->gate.acquire();
    struct Release {
        Gate& gate;
        ~Release() { gate.release(); }
    } release{impl_->gate};

    int last_status = 0;
    std::string last_error;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(impl_->backoff_delay(attempt - 1));

        httplib::Client client(cfg.base_url);
        client.set_connection_timeout(cfg.timeout_seconds);
        client.set_read_timeout(cfg.timeout_seconds);
        auto result = client.Post(cfg.path, headers, payload, "application/json");
        if (!result) {
            last_status = 0;
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        last_status = result->status;
        if (retryable_status(result->status)) {
            last_error = "http status " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200)
            throw ProviderError("backend rejected request with status " +
                                    std::to_string(result->status) + ": " + result->body,
                                result->status);

        nlohmann::json doc =
            nlohmann::json::parse(result->body, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty())
            throw ProviderError("backend returned an unparsable completion body",
                                result->status);
        ChatResponse response;
        const auto& choice = doc["choices"][0];
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string())
            response.text = choice["message"]["content"].get<std::string>();
        else
            throw ProviderError("completion body lacks choices[0].message.content",
                                result->status);
        if (doc.contains("usage") && doc["usage"].is_object()) {
            const auto& usage = doc["usage"];
            if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number())
                response.input_tokens = usage["prompt_tokens"].get<std::int64_t>();
            if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number())
                response.output_tokens = usage["completion_tokens"].get<std::int64_t>();
        }
        return response;
    }
    throw ProviderError("provider call failed after " + std::to_string(cfg.max_attempts) +
                            " attempts (" + last_error + ")",
                        last_status);
}

} // namespace evmob::llm
