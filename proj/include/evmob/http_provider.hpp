#pragma once

#include "evmob/provider.hpp"

#include <memory>
#include <random>

namespace evmob::llm {

struct HttpProviderConfig {
    std::string base_url;                          // e.g. "https://api.example.com"
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string credential_env = "ELLMOB_API_KEY"; // env var holding the bearer token
    int max_in_flight = 4;
    int max_attempts = 3;
    int backoff_base_ms = 250;
    int timeout_seconds = 120;
    std::uint64_t jitter_seed = 0;
};

/// Chat-completion backend speaking the commodity JSON POST shape
/// {model, messages, temperature, top_p, max_tokens} with bearer-token auth.
/// Transient failures (connect errors, 429, 5xx) are retried with jittered
/// exponential backoff, at most max_attempts tries per logical call.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig config);
    ~HttpProvider() override;

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace evmob::llm
