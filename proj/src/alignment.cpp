#include "evmob/alignment.hpp"

#include "evmob/errors.hpp"
#include "evmob/json_extract.hpp"

#include <cctype>
#include <sstream>

namespace evmob::align {

using nlohmann::json;

PlanParse parse_trajectory_plan(std::string_view text, const std::string& user_id,
                                LocalDays target_date) {
    PlanParse result;
    auto doc = extract_first_json_object(text);
    if (!doc) {
        result.issues.push_back("no JSON object found in response");
        return result;
    }
    if (!doc->contains("justification") || !(*doc)["justification"].is_string()) {
        result.issues.push_back("missing string field: justification");
        return result;
    }
    if (!doc->contains("steps") || !(*doc)["steps"].is_array()) {
        result.issues.push_back("missing list field: steps");
        return result;
    }

    Trajectory traj{user_id, target_date, {}};
    std::size_t index = 0;
    for (const auto& entry : (*doc)["steps"]) {
        if (!entry.is_object()) {
            result.issues.push_back("step " + std::to_string(index) + " is not an object");
            return result;
        }
        Step step;
        if (!entry.contains("time") || !entry["time"].is_string()) {
            result.issues.push_back("step " + std::to_string(index) + " lacks a time string");
            return result;
        }
        auto hm = parse_hhmm(entry["time"].get<std::string>());
        if (!hm) {
            result.issues.push_back("step " + std::to_string(index) +
                                    " time must be HH:MM, got '" +
                                    entry["time"].get<std::string>() + "'");
            return result;
        }
        if (!entry.contains("lat") || !entry["lat"].is_number() || !entry.contains("lon") ||
            !entry["lon"].is_number()) {
            result.issues.push_back("step " + std::to_string(index) +
                                    " lacks numeric lat/lon");
            return result;
        }
        step.point = {entry["lat"].get<double>(), entry["lon"].get<double>()};
        if (!geo_point_valid(step.point)) {
            result.issues.push_back("step " + std::to_string(index) +
                                    " coordinates out of range");
            return result;
        }
        for (const char* key : {"category", "subcategory"}) {
            if (!entry.contains(key) || !entry[key].is_string() ||
                entry[key].get<std::string>().empty()) {
                result.issues.push_back("step " + std::to_string(index) +
                                        " lacks a non-empty " + key);
                return result;
            }
        }
        step.category = entry["category"].get<std::string>();
        step.subcategory = entry["subcategory"].get<std::string>();
        step.time = snap_to_time_grid(start_of_day(target_date) + *hm);
        traj.steps.push_back(std::move(step));
        ++index;
    }

    auto validation = validate_trajectory(traj);
    if (!validation.ok()) {
        for (const auto& violation : validation.violations)
            result.issues.push_back(violation.message);
        return result;
    }
    result.plan = {std::move(traj),
                   gist::Justification{(*doc)["justification"].get<std::string>()}};
    return result;
}

AlignmentLoop::AlignmentLoop(llm::Provider& provider, const prompts::TemplateSet& templates,
                             gist::GistEngine& gists, LoopConfig config)
    : provider_(provider), templates_(templates), gists_(gists), config_(config) {
    if (config_.max_iterations < 1)
        throw ContractError("loop max_iterations must be >= 1");
}

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
    std::ostringstream out;
    for (std::size_t i = 0; i < issues.size(); ++i) {
        if (i) out << "; ";
        out << issues[i];
    }
    return out.str();
}

std::string failing_feedback(const AuditVerdict& verdict) {
    std::ostringstream out;
    if (!verdict.internal_ok)
        out << "- internal alignment failed: " << verdict.internal_rationale << "\n";
    if (!verdict.external_ok)
        out << "- external alignment failed: " << verdict.external_rationale << "\n";
    return out.str();
}

} // namespace

std::pair<Trajectory, gist::Justification> AlignmentLoop::ask_for_plan(
    const std::string& tag, const std::string& prompt, const std::string& user_id,
    LocalDays target_date) {
    llm::ChatRequest request;
    request.system_prompt =
        "You plan one user's daily mobility as strict JSON: {\"justification\": string, "
        "\"steps\": [{\"time\": \"HH:MM\", \"lat\": number, \"lon\": number, "
        "\"category\": string, \"subcategory\": string}]}.";
    request.user_prompt = prompt;
    request.tag = tag;

    auto first = provider_.complete(request);
    PlanParse parsed = parse_trajectory_plan(first.text, user_id, target_date);
    if (parsed.ok()) return std::move(*parsed.plan);

    llm::ChatRequest repair = request;
    repair.user_prompt += "\n\nYour previous reply was rejected: " +
                          join_issues(parsed.issues) +
                          ". Reply with exactly one JSON object matching the required plan "
                          "schema, steps in chronological order.";
    auto second = provider_.complete(repair);
    PlanParse reparsed = parse_trajectory_plan(second.text, user_id, target_date);
    if (reparsed.ok()) return std::move(*reparsed.plan);
    throw StructuredOutputError("trajectory generation failed (" + tag + "): " +
                                    join_issues(reparsed.issues),
                                first.text, second.text);
}

std::pair<Trajectory, gist::Justification> AlignmentLoop::generate_initial(
    const UserHistory& history, const event::EventInput& event, LocalDays target_date) {
    if (history.empty()) throw ContractError("generation requires a non-empty history");
    const std::string prompt = prompts::render(
        templates_.initial_generation,
        {{"long_term", render_trajectories(history.long_term)},
         {"short_term", render_trajectories(history.short_term)},
         {"event_context", event.render()},
         {"date", format_date(target_date)}});
    return ask_for_plan("generate", prompt, history.user_id, target_date);
}

std::pair<Trajectory, gist::Justification> AlignmentLoop::regenerate(
    const UserHistory& history, const event::EventInput& event, LocalDays target_date,
    const Trajectory& previous, const AuditVerdict& feedback) {
    if (feedback.pass())
        throw ContractError("regeneration requires a failed audit verdict");
    const std::string prompt = prompts::render(
        templates_.regeneration,
        {{"long_term", render_trajectories(history.long_term)},
         {"short_term", render_trajectories(history.short_term)},
         {"event_context", event.render()},
         {"date", format_date(target_date)},
         {"trajectory", render_trajectory(previous)},
         {"feedback", failing_feedback(feedback)}});
    return ask_for_plan("regenerate", prompt, history.user_id, target_date);
}

namespace {

struct VerdictParse {
    std::optional<AuditVerdict> verdict;
    std::vector<std::string> issues;
};

VerdictParse parse_verdict(std::string_view text, bool need_internal, bool need_external) {
    VerdictParse result;
    auto doc = extract_first_json_object(text);
    if (!doc) {
        result.issues.push_back("no JSON object found in response");
        return result;
    }
    AuditVerdict verdict;
    verdict.internal_ok = true;
    verdict.external_ok = true;

    // Accept "true"/"false" strings too; backends frequently quote booleans.
    auto as_bool = [](const nlohmann::json& value) -> std::optional<bool> {
        if (value.is_boolean()) return value.get<bool>();
        if (value.is_string()) {
            std::string s = value.get<std::string>();
            for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            if (s == "true" || s == "yes") return true;
            if (s == "false" || s == "no") return false;
        }
        return std::nullopt;
    };
    auto read_axis = [&](const char* ok_key, const char* rationale_key, bool& ok,
                         std::string& rationale) {
        auto flag = doc->contains(ok_key) ? as_bool((*doc)[ok_key]) : std::nullopt;
        if (!flag) {
            result.issues.push_back(std::string("missing boolean field: ") + ok_key);
            return;
        }
        ok = *flag;
        if (doc->contains(rationale_key) && (*doc)[rationale_key].is_string())
            rationale = (*doc)[rationale_key].get<std::string>();
        if (!ok && rationale.empty())
            result.issues.push_back(std::string(rationale_key) +
                                    " is required when the judgment is false");
    };
    if (need_internal)
        read_axis("internal_ok", "internal_rationale", verdict.internal_ok,
                  verdict.internal_rationale);
    if (need_external)
        read_axis("external_ok", "external_rationale", verdict.external_ok,
                  verdict.external_rationale);
    if (!result.issues.empty()) return result;
    result.verdict = std::move(verdict);
    return result;
}

} // namespace

AuditVerdict AlignmentLoop::audit(const gist::ActionGist& action,
                                  const gist::PatternGist* pattern,
                                  const gist::EventGist* event_gist) {
    const bool need_internal = !config_.ablate_internal;
    const bool need_external = !config_.ablate_external;
    if (need_internal && pattern == nullptr)
        throw ContractError("audit needs a pattern gist unless internal alignment is ablated");
    if (need_external && event_gist == nullptr)
        throw ContractError("audit needs an event gist unless external alignment is ablated");

    const std::string prompt = prompts::render(
        templates_.conflict_audit,
        {{"action_gist", gist::to_json(action).dump(2)},
         {"pattern_gist", need_internal ? gist::to_json(*pattern).dump(2)
                                        : std::string("(omitted from this audit)")},
         {"event_gist", need_external ? gist::to_json(*event_gist).dump(2)
                                      : std::string("(omitted from this audit)")}});
    llm::ChatRequest request;
    request.system_prompt =
        "You are a critical trajectory auditor. Answer with one JSON object containing "
        "your binary judgments and rationales.";
    request.user_prompt = prompt;
    request.tag = "audit";

    auto first = provider_.complete(request);
    VerdictParse parsed = parse_verdict(first.text, need_internal, need_external);
    if (!parsed.verdict) {
        llm::ChatRequest repair = request;
        repair.user_prompt += "\n\nYour previous reply was rejected: " +
                              join_issues(parsed.issues) +
                              ". Reply with exactly one JSON object carrying the requested "
                              "boolean judgments and rationales.";
        auto second = provider_.complete(repair);
        VerdictParse reparsed = parse_verdict(second.text, need_internal, need_external);
        if (!reparsed.verdict)
            throw StructuredOutputError("audit failed: " + join_issues(reparsed.issues),
                                        first.text, second.text);
        parsed = std::move(reparsed);
    }
    if (!need_internal) {
        parsed.verdict->internal_ok = true;
        parsed.verdict->internal_rationale.clear();
    }
    if (!need_external) {
        parsed.verdict->external_ok = true;
        parsed.verdict->external_rationale.clear();
    }
    return std::move(*parsed.verdict);
}

GenerationOutcome AlignmentLoop::run(const UserHistory& history,
                                     const event::EventInput& event, LocalDays target_date) {
    GenerationOutcome outcome;

    // With both audit axes removed the reflection stage disappears and the
    // loop degenerates to single-pass generation.
    if (config_.ablate_internal && config_.ablate_external) {
        auto [traj, justification] = generate_initial(history, event, target_date);
        outcome.trajectory = std::move(traj);
        outcome.justification = std::move(justification);
        outcome.accepted = true;
        outcome.iterations_used = 1;
        return outcome;
    }

    std::optional<gist::PatternGist> pattern;
    if (!config_.ablate_internal) pattern = gists_.pattern_gist(history);
    std::optional<gist::EventGist> event_gist;
    if (!config_.ablate_external) event_gist = gists_.event_gist(event);

    std::optional<AuditVerdict> feedback;
    Trajectory previous;
    for (int iteration = 1; iteration <= config_.max_iterations; ++iteration) {
        auto [traj, justification] =
            feedback ? regenerate(history, event, target_date, previous, *feedback)
                     : generate_initial(history, event, target_date);
        gist::ActionGist action = gists_.action_gist(traj, justification);
        AuditVerdict verdict = audit(action, pattern ? &*pattern : nullptr,
                                     event_gist ? &*event_gist : nullptr);
        outcome.audit_trail.push_back(verdict);
        outcome.trajectory = std::move(traj);
        outcome.justification = std::move(justification);
        outcome.iterations_used = iteration;
        if (verdict.pass()) {
            outcome.accepted = true;
            return outcome;
        }
        feedback = std::move(verdict);
        previous = outcome.trajectory;
    }

    // Fallback: keep the last candidate and surface what stayed unmet.
    outcome.accepted = false;
    const AuditVerdict& last = outcome.audit_trail.back();
    if (!last.internal_ok)
        outcome.unmet_constraints.push_back("internal: " + last.internal_rationale);
    if (!last.external_ok)
        outcome.unmet_constraints.push_back("external: " + last.external_rationale);
    return outcome;
}

} // namespace evmob::align
