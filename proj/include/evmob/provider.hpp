#pragma once

#include "evmob/errors.hpp"

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace evmob::llm {

struct ChatRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.1;
    double top_p = 1.0;
    int max_output_tokens = 1024;
    std::string tag; // pipeline stage label for accounting
};

struct ChatResponse {
    std::string text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::chrono::microseconds latency{0};
};

/// Deterministic token-count heuristic for backends that report none:
/// ceil(characters / 4). Monotone in text length.
std::int64_t estimate_tokens(std::string_view text);

struct TagTotals {
    std::uint64_t calls = 0;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

/// Per-tag call accounting, safe under concurrent completions.
class CallLedger {
public:
    void record(const std::string& tag, std::int64_t input_tokens,
                std::int64_t output_tokens, std::chrono::microseconds latency);

    std::uint64_t calls(const std::string& tag) const;
    TagTotals totals_for(const std::string& tag) const;
    /// Sum over all tags.
    TagTotals totals() const;
    std::uint64_t total_calls() const { return totals().calls; }
    std::chrono::microseconds total_wall_time() const;
    std::map<std::string, TagTotals> snapshot() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, TagTotals> by_tag_;
    std::chrono::microseconds wall_{0};
};

/// Uniform chat-completion boundary. Implementations perform the transport;
/// the base class validates the request and keeps the ledger.
class Provider {
public:
    virtual ~Provider() = default;

    ChatResponse complete(const ChatRequest& request);

    const CallLedger& ledger() const { return ledger_; }

protected:
    virtual ChatResponse do_complete(const ChatRequest& request) = 0;

private:
    CallLedger ledger_;
};

/// Replays a fixed response script, making the whole pipeline deterministic
/// and offline-testable. Responses are consumed either from one shared queue
/// or from per-tag queues. Exhausting a queue throws ScriptError — that is a
/// broken test script, not a pipeline condition.
class ScriptedProvider : public Provider {
public:
    explicit ScriptedProvider(std::vector<std::string> responses);
    explicit ScriptedProvider(std::map<std::string, std::deque<std::string>> queues);
    /// Script file: either a JSON array of strings, or an object
    /// {"queues": {tag: [..]}, "default": [..], "capture_path": "..."}.
    static std::unique_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

    /// Every request seen, in order. For prompt-capture assertions.
    std::vector<ChatRequest> captured() const;
    void set_capture_path(const std::filesystem::path& path);

protected:
    ChatResponse do_complete(const ChatRequest& request) override;

private:
    ScriptedProvider() = default;

    mutable std::mutex mutex_;
    std::deque<std::string> default_queue_;
    std::map<std::string, std::deque<std::string>> queues_;
    std::vector<ChatRequest> captured_;
    std::optional<std::ofstream> capture_file_;
};

} // namespace evmob::llm
