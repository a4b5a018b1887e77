#pragma once

#include "evmob/event_schema.hpp"
#include "evmob/model.hpp"
#include "evmob/provider.hpp"
#include "evmob/templates.hpp"

#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace evmob::gist {

/// Closed three-value scale for the action-gist judgments.
enum class Level { low, medium, high };

std::optional<Level> parse_level(std::string_view text); // case-insensitive
std::string_view to_string(Level level);

/// Bottom-line summary of a user's habitual mobility: the dominant routine,
/// its non-negotiable anchors, and its fragile dependencies.
struct PatternGist {
    std::string core_behavior;
    std::vector<std::string> points_of_inertia;
    std::vector<std::string> points_of_fracture;
};

/// Bottom-line summary of what the event asks of mobility decisions.
struct EventGist {
    std::string primary_intent;
    std::vector<std::string> behavioral_implications;
    std::string risk_reward_calculus;
};

struct LeveledJudgment {
    Level level = Level::medium;
    std::string rationale;
};

/// Bottom-line summary of a candidate trajectory's intent and how far it
/// preserves habits versus complies with the event.
struct ActionGist {
    std::string primary_intent;
    LeveledJudgment habit_adherence;
    LeveledJudgment event_compliance;
};

/// Free-form rationale emitted alongside a generated trajectory.
struct Justification {
    std::string text;
};

nlohmann::json to_json(const PatternGist& gist);
nlohmann::json to_json(const EventGist& gist);
nlohmann::json to_json(const ActionGist& gist);

enum class GistSchema { pattern, event, action };

using AnyGist = std::variant<PatternGist, EventGist, ActionGist>;

/// parse_structured_gist is total: every input maps to a gist or a list of
/// issues, never a crash.
struct GistParse {
    std::optional<AnyGist> gist;
    std::vector<std::string> issues;
    bool ok() const { return gist.has_value(); }
};

/// Extract the first JSON object from model output (prose and fences
/// tolerated) and validate it against the named schema.
GistParse parse_structured_gist(std::string_view text, GistSchema schema);

/// Provider-backed extraction of the three gists with bounded repair: one
/// call per extraction, plus at most one corrective re-ask on a malformed
/// response. Pattern gists are cached per user for the run; the event gist
/// is extracted once and shared.
class GistEngine {
public:
    GistEngine(llm::Provider& provider, const prompts::TemplateSet& templates);

    /// Tag "pattern_gist". Requires a non-empty history.
    PatternGist pattern_gist(const UserHistory& history);
    /// Tag "event_gist".
    EventGist event_gist(const event::EventInput& input);
    /// Tag "action_gist". Zero-step trajectories are legal input.
    ActionGist action_gist(const Trajectory& traj, const Justification& justification);

private:
    std::string ask_with_repair(const std::string& tag, const std::string& system_prompt,
                                const std::string& user_prompt, GistSchema schema,
                                AnyGist& out);

    llm::Provider& provider_;
    const prompts::TemplateSet& templates_;
    std::mutex mutex_;
    std::mutex event_extract_mutex_; // serializes the one event-gist extraction
    std::unordered_map<std::string, PatternGist> pattern_cache_;
    std::optional<EventGist> event_cache_; // write-once
};

} // namespace evmob::gist
