#pragma once

#include "evmob/event_schema.hpp"
#include "evmob/gist.hpp"
#include "evmob/model.hpp"
#include "evmob/provider.hpp"
#include "evmob/templates.hpp"

#include <string>
#include <vector>

namespace evmob::align {

/// The auditor's two binary judgments plus their rationales. A rationale is
/// required whenever its flag is false.
struct AuditVerdict {
    bool internal_ok = false;
    bool external_ok = false;
    std::string internal_rationale;
    std::string external_rationale;
    bool pass() const { return internal_ok && external_ok; }
};

struct LoopConfig {
    int max_iterations = 3; // K
    bool ablate_internal = false;
    bool ablate_external = false;
    bool ablate_event_schema = false;
};

struct GenerationOutcome {
    Trajectory trajectory;
    gist::Justification justification;
    bool accepted = false;
    int iterations_used = 0;
    std::vector<std::string> unmet_constraints;
    std::vector<AuditVerdict> audit_trail;
};

/// Orchestrates one user-day: generate a candidate, extract its action gist,
/// audit it against the pattern and event gists, refine on failure, accept
/// on full alignment or fall back to the last candidate after K iterations.
class AlignmentLoop {
public:
    AlignmentLoop(llm::Provider& provider, const prompts::TemplateSet& templates,
                  gist::GistEngine& gists, LoopConfig config);

    GenerationOutcome run(const UserHistory& history, const event::EventInput& event,
                          LocalDays target_date);

    /// One provider call (tag "generate"); the response is parsed as a JSON
    /// plan, times snapped to the grid, and the trajectory validated, with
    /// one corrective re-ask on failure.
    std::pair<Trajectory, gist::Justification> generate_initial(
        const UserHistory& history, const event::EventInput& event, LocalDays target_date);

    /// One provider call (tag "regenerate") whose prompt embeds the previous
    /// candidate and the failing rationales. Requires a failed verdict.
    std::pair<Trajectory, gist::Justification> regenerate(
        const UserHistory& history, const event::EventInput& event, LocalDays target_date,
        const Trajectory& previous, const AuditVerdict& feedback);

    /// One provider call (tag "audit"). An ablated axis is forced true and
    /// its gist is omitted from the prompt; pass nullptr for an ablated
    /// axis's gist.
    AuditVerdict audit(const gist::ActionGist& action, const gist::PatternGist* pattern,
                       const gist::EventGist* event_gist);

    const LoopConfig& config() const { return config_; }

private:
    std::pair<Trajectory, gist::Justification> ask_for_plan(const std::string& tag,
                                                            const std::string& prompt,
                                                            const std::string& user_id,
                                                            LocalDays target_date);

    llm::Provider& provider_;
    const prompts::TemplateSet& templates_;
    gist::GistEngine& gists_;
    LoopConfig config_;
};

/// Parse a model trajectory plan: {"justification": str, "steps": [{"time":
/// "HH:MM", "lat", "lon", "category", "subcategory"}]}. Times are snapped to
/// the 10-minute grid and the assembled trajectory validated. Total: returns
/// either the plan or the list of problems.
struct PlanParse {
    std::optional<std::pair<Trajectory, gist::Justification>> plan;
    std::vector<std::string> issues;
    bool ok() const { return plan.has_value(); }
};
PlanParse parse_trajectory_plan(std::string_view text, const std::string& user_id,
                                LocalDays target_date);

} // namespace evmob::align
