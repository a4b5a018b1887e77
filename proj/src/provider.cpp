#include "evmob/provider.hpp"

#include <nlohmann/json.hpp>

namespace evmob::llm {

std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

void CallLedger::record(const std::string& tag, std::int64_t input_tokens,
                        std::int64_t output_tokens, std::chrono::microseconds latency) {
    std::lock_guard lock(mutex_);
    TagTotals& t = by_tag_[tag];
    t.calls += 1;
    t.input_tokens += input_tokens;
    t.output_tokens += output_tokens;
    wall_ += latency;
}

std::uint64_t CallLedger::calls(const std::string& tag) const {
    std::lock_guard lock(mutex_);
    auto it = by_tag_.find(tag);
    return it == by_tag_.end() ? 0 : it->second.calls;
}

TagTotals CallLedger::totals_for(const std::string& tag) const {
    std::lock_guard lock(mutex_);
    auto it = by_tag_.find(tag);
    return it == by_tag_.end() ? TagTotals{} : it->second;
}

TagTotals CallLedger::totals() const {
    std::lock_guard lock(mutex_);
    TagTotals sum;
    for (const auto& [tag, t] : by_tag_) {
        sum.calls += t.calls;
        sum.input_tokens += t.input_tokens;
        sum.output_tokens += t.output_tokens;
    }
    return sum;
}

std::chrono::microseconds CallLedger::total_wall_time() const {
    std::lock_guard lock(mutex_);
    return wall_;
}

std::map<std::string, TagTotals> CallLedger::snapshot() const {
    std::lock_guard lock(mutex_);
    return by_tag_;
}

ChatResponse Provider::complete(const ChatRequest& request) {
    if (request.system_prompt.empty() || request.user_prompt.empty())
        throw ContractError("chat request prompts must be non-empty (tag: " + request.tag + ")");
    if (request.temperature < 0.0 || request.temperature > 2.0)
        throw ContractError("temperature out of [0,2]");
    if (request.top_p <= 0.0 || request.top_p > 1.0)
        throw ContractError("top_p out of (0,1]");

    auto start = std::chrono::steady_clock::now();
    ChatResponse response = do_complete(request);
    response.latency = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start);
    if (response.input_tokens <= 0)
        response.input_tokens = estimate_tokens(request.system_prompt) +
                                estimate_tokens(request.user_prompt);
    if (response.output_tokens <= 0) response.output_tokens = estimate_tokens(response.text);
    ledger_.record(request.tag, response.input_tokens, response.output_tokens,
                   response.latency);
    return response;
}

ScriptedProvider::ScriptedProvider(std::vector<std::string> responses) {
    default_queue_.assign(std::make_move_iterator(responses.begin()),
                          std::make_move_iterator(responses.end()));
}

ScriptedProvider::ScriptedProvider(std::map<std::string, std::deque<std::string>> queues)
    : queues_(std::move(queues)) {}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read script file: " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded())
        throw IoError("script file is not valid JSON: " + path.string());

    std::unique_ptr<ScriptedProvider> p{new ScriptedProvider()};
    if (doc.is_array()) {
        for (const auto& item : doc) {
            if (!item.is_string())
                throw IoError("script array entries must be strings: " + path.string());
            p->default_queue_.push_back(item.get<std::string>());
        }
        return p;
    }
    if (!doc.is_object())
        throw IoError("script file must be a JSON array or object: " + path.string());

    auto load_queue = [&](const std::string& tag, const nlohmann::json& arr) {
        if (!arr.is_array())
            throw IoError("script queue for tag '" + tag + "' must be an array");
        std::deque<std::string>& q = p->queues_[tag];
        for (const auto& item : arr) {
            if (!item.is_string())
                throw IoError("script queue entries must be strings (tag: " + tag + ")");
            q.push_back(item.get<std::string>());
        }
    };
    if (doc.contains("queues")) {
        for (const auto& [tag, arr] : doc["queues"].items()) load_queue(tag, arr);
    } else {
        // Bare tag -> queue map form.
        for (const auto& [tag, arr] : doc.items()) {
            if (tag == "default" || tag == "capture_path") continue;
            load_queue(tag, arr);
        }
    }
    if (doc.contains("default")) {
        for (const auto& item : doc["default"])
            p->default_queue_.push_back(item.get<std::string>());
    }
    if (doc.contains("capture_path"))
        p->set_capture_path(doc["capture_path"].get<std::string>());
    return p;
}

void ScriptedProvider::set_capture_path(const std::filesystem::path& path) {
    std::lock_guard lock(mutex_);
    capture_file_.emplace(path, std::ios::trunc);
    if (!*capture_file_) throw IoError("cannot open capture file: " + path.string());
}

std::vector<ChatRequest> ScriptedProvider::captured() const {
    std::lock_guard lock(mutex_);
    return captured_;
}

ChatResponse ScriptedProvider::do_complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    captured_.push_back(request);
    if (capture_file_) {
        nlohmann::json line{{"tag", request.tag},
                            {"system", request.system_prompt},
                            {"user", request.user_prompt}};
        *capture_file_ << line.dump() << "\n";
        capture_file_->flush();
    }

    std::deque<std::string>* queue = nullptr;
    if (auto it = queues_.find(request.tag); it != queues_.end())
        queue = &it->second;
    else if (!default_queue_.empty() || queues_.empty())
        queue = &default_queue_;
    if (queue == nullptr || queue->empty())
        throw ScriptError("scripted backend exhausted for tag '" + request.tag + "'");

    ChatResponse response;
    response.text = std::move(queue->front());
    queue->pop_front();
    return response;
}

} // namespace evmob::llm
