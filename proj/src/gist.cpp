#include "evmob/gist.hpp"

#include "evmob/errors.hpp"
#include "evmob/json_extract.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace evmob::gist {

using nlohmann::json;

std::optional<Level> parse_level(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lowered == "low") return Level::low;
    if (lowered == "medium") return Level::medium;
    if (lowered == "high") return Level::high;
    return std::nullopt;
}

std::string_view to_string(Level level) {
    switch (level) {
        case Level::low: return "low";
        case Level::medium: return "medium";
        case Level::high: return "high";
    }
    return "medium";
}

namespace {

std::optional<std::string> require_string(const json& doc, const char* key,
                                          std::vector<std::string>& issues,
                                          bool non_empty = false) {
    auto it = doc.find(key);
    if (it == doc.end()) {
        issues.push_back(std::string("missing field: ") + key);
        return std::nullopt;
    }
    if (!it->is_string()) {
        issues.push_back(std::string("field is not a string: ") + key);
        return std::nullopt;
    }
    auto value = it->get<std::string>();
    if (non_empty && value.empty()) {
        issues.push_back(std::string("field must be non-empty: ") + key);
        return std::nullopt;
    }
    return value;
}

std::vector<std::string> require_string_list(const json& doc, const char* key,
                                             std::vector<std::string>& issues) {
    std::vector<std::string> values;
    auto it = doc.find(key);
    if (it == doc.end()) {
        issues.push_back(std::string("missing field: ") + key);
        return values;
    }
    if (it->is_string()) { // a lone string reads as a one-element list
        values.push_back(it->get<std::string>());
        return values;
    }
    if (!it->is_array()) {
        issues.push_back(std::string("field is not a list: ") + key);
        return values;
    }
    for (const auto& item : *it) {
        if (!item.is_string()) {
            issues.push_back(std::string("list entries must be strings: ") + key);
            return values;
        }
        values.push_back(item.get<std::string>());
    }
    return values;
}

std::optional<LeveledJudgment> require_judgment(const json& doc, const char* key,
                                                std::vector<std::string>& issues) {
    auto it = doc.find(key);
    if (it == doc.end()) {
        issues.push_back(std::string("missing field: ") + key);
        return std::nullopt;
    }
    if (!it->is_object()) {
        issues.push_back(std::string("field is not an object: ") + key);
        return std::nullopt;
    }
    LeveledJudgment judgment;
    auto level_text = require_string(*it, "level", issues, true);
    if (!level_text) return std::nullopt;
    auto level = parse_level(*level_text);
    if (!level) {
        issues.push_back(std::string(key) + ".level must be one of low|medium|high, got '" +
                         *level_text + "'");
        return std::nullopt;
    }
    judgment.level = *level;
    auto rationale = require_string(*it, "rationale", issues);
    if (!rationale) return std::nullopt;
    judgment.rationale = std::move(*rationale);
    return judgment;
}

GistParse parse_pattern(const json& doc) {
    GistParse result;
    PatternGist gist;
    auto core = require_string(doc, "core_behavior", result.issues, true);
    gist.points_of_inertia = require_string_list(doc, "points_of_inertia", result.issues);
    gist.points_of_fracture = require_string_list(doc, "points_of_fracture", result.issues);
    if (!result.issues.empty()) return result;
    gist.core_behavior = std::move(*core);
    result.gist = std::move(gist);
    return result;
}

GistParse parse_event(const json& doc) {
    GistParse result;
    EventGist gist;
    auto intent = require_string(doc, "primary_intent", result.issues, true);
    gist.behavioral_implications =
        require_string_list(doc, "behavioral_implications", result.issues);
    auto calculus = require_string(doc, "risk_reward_calculus", result.issues);
    if (!result.issues.empty()) return result;
    gist.primary_intent = std::move(*intent);
    gist.risk_reward_calculus = std::move(*calculus);
    result.gist = std::move(gist);
    return result;
}

GistParse parse_action(const json& doc) {
    GistParse result;
    ActionGist gist;
    auto intent = require_string(doc, "primary_intent", result.issues, true);
    auto habit = require_judgment(doc, "habit_adherence", result.issues);
    auto compliance = require_judgment(doc, "event_compliance", result.issues);
    if (!result.issues.empty()) return result;
    gist.primary_intent = std::move(*intent);
    gist.habit_adherence = std::move(*habit);
    gist.event_compliance = std::move(*compliance);
    result.gist = std::move(gist);
    return result;
}

std::string join_issues(const std::vector<std::string>& issues) {
    std::ostringstream out;
    for (std::size_t i = 0; i < issues.size(); ++i) {
        if (i) out << "; ";
        out << issues[i];
    }
    return out.str();
}

} // namespace

json to_json(const PatternGist& gist) {
    return json{{"core_behavior", gist.core_behavior},
                {"points_of_inertia", gist.points_of_inertia},
                {"points_of_fracture", gist.points_of_fracture}};
}

json to_json(const EventGist& gist) {
    return json{{"primary_intent", gist.primary_intent},
                {"behavioral_implications", gist.behavioral_implications},
                {"risk_reward_calculus", gist.risk_reward_calculus}};
}

json to_json(const ActionGist& gist) {
    auto judgment = [](const LeveledJudgment& j) {
        return json{{"level", std::string(to_string(j.level))}, {"rationale", j.rationale}};
    };
    return json{{"primary_intent", gist.primary_intent},
                {"habit_adherence", judgment(gist.habit_adherence)},
                {"event_compliance", judgment(gist.event_compliance)}};
}

GistParse parse_structured_gist(std::string_view text, GistSchema schema) {
    auto doc = extract_first_json_object(text);
    if (!doc) {
        GistParse result;
        result.issues.push_back("no JSON object found in response");
        return result;
    }
    switch (schema) {
        case GistSchema::pattern: return parse_pattern(*doc);
        case GistSchema::event: return parse_event(*doc);
        case GistSchema::action: return parse_action(*doc);
    }
    GistParse result;
    result.issues.push_back("unknown gist schema");
    return result;
}

GistEngine::GistEngine(llm::Provider& provider, const prompts::TemplateSet& templates)
    : provider_(provider), templates_(templates) {}

std::string GistEngine::ask_with_repair(const std::string& tag,
                                        const std::string& system_prompt,
                                        const std::string& user_prompt, GistSchema schema,
                                        AnyGist& out) {
    llm::ChatRequest request;
    request.system_prompt = system_prompt;
    request.user_prompt = user_prompt;
    request.tag = tag;

    auto first = provider_.complete(request);
    GistParse parsed = parse_structured_gist(first.text, schema);
    if (parsed.ok()) {
        out = std::move(*parsed.gist);
        return first.text;
    }

    llm::ChatRequest repair = request;
    repair.user_prompt += "\n\nYour previous reply was rejected: " +
                          join_issues(parsed.issues) +
                          ". Reply with exactly one JSON object matching the requested "
                          "schema and nothing else.";
    auto second = provider_.complete(repair);
    GistParse reparsed = parse_structured_gist(second.text, schema);
    if (reparsed.ok()) {
        out = std::move(*reparsed.gist);
        return second.text;
    }
    throw StructuredOutputError("gist extraction failed (" + tag + "): " +
                                    join_issues(reparsed.issues),
                                first.text, second.text);
}

PatternGist GistEngine::pattern_gist(const UserHistory& history) {
    if (history.empty())
        throw ContractError("pattern gist needs at least one history trajectory");
    {
        std::lock_guard lock(mutex_);
        if (auto it = pattern_cache_.find(history.user_id); it != pattern_cache_.end())
            return it->second;
    }
    const std::string prompt = prompts::render(
        templates_.pattern_gist, {{"long_term", render_trajectories(history.long_term)},
                                  {"short_term", render_trajectories(history.short_term)}});
    AnyGist out;
    ask_with_repair("pattern_gist",
                    "You distill a user's habitual mobility into a structured gist.", prompt,
                    GistSchema::pattern, out);
    auto gist = std::get<PatternGist>(std::move(out));
    std::lock_guard lock(mutex_);
    return pattern_cache_.emplace(history.user_id, std::move(gist)).first->second;
}

EventGist GistEngine::event_gist(const event::EventInput& input) {
    // Concurrent first callers serialize here so the extraction happens once.
    std::lock_guard extract_lock(event_extract_mutex_);
    {
        std::lock_guard lock(mutex_);
        if (event_cache_) return *event_cache_;
    }
    const std::string prompt =
        prompts::render(templates_.event_gist, {{"event_context", input.render()}});
    AnyGist out;
    ask_with_repair("event_gist",
                    "You distill an event's mobility implications into a structured gist.",
                    prompt, GistSchema::event, out);
    std::lock_guard lock(mutex_);
    event_cache_ = std::get<EventGist>(std::move(out));
    return *event_cache_;
}

ActionGist GistEngine::action_gist(const Trajectory& traj,
                                   const Justification& justification) {
    const std::string prompt = prompts::render(
        templates_.action_gist, {{"trajectory", render_trajectory(traj)},
                                 {"justification", justification.text}});
    AnyGist out;
    ask_with_repair("action_gist",
                    "You distill a candidate trajectory's decision basis into a structured "
                    "gist.",
                    prompt, GistSchema::action, out);
    return std::get<ActionGist>(std::move(out));
}

} // namespace evmob::gist
