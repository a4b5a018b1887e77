#pragma once

#include "evmob/provider.hpp"
#include "evmob/templates.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace evmob::event {

struct Directive {
    std::string directive;
    std::string applicable_population;
    std::string geographic_scope;
    bool operator==(const Directive&) const = default;
};

/// Structured four-aspect representation of an event narrative. Constructed
/// once per event, cached to disk, and shared read-only by every user run.
struct EventContext {
    std::map<std::string, std::string> event_profile; // needs type/name/time/regions
    std::map<std::string, std::string> intensity_and_scale;
    std::map<std::string, std::string> infrastructure_and_service_impact;
    std::vector<Directive> official_directives; // may be empty
    bool operator==(const EventContext&) const = default;
};

struct ContextValidation {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ContextValidation validate_event_context(const EventContext& ctx);

nlohmann::json to_json(const EventContext& ctx);

/// Strict parse of the cached/LLM JSON shape. Scalar aspect values are
/// coerced to strings; a missing aspect or a wrong-typed directive entry is
/// reported as a violation instead of a parsed context.
struct ParsedContext {
    std::optional<EventContext> context;
    std::vector<std::string> violations;
};
ParsedContext context_from_json(const nlohmann::json& doc);

/// One provider call (tag "schema") through the schema-construction prompt;
/// a JSON-parse failure triggers one corrective re-ask carrying the parser
/// error. Two consecutive parse failures raise StructuredOutputError with
/// both raw responses; a context that parses but fails validation raises
/// StructuredOutputError naming the missing aspects/keys.
EventContext construct_event_context(const std::string& raw_event_text,
                                     llm::Provider& provider,
                                     const prompts::TemplateSet& templates);

/// What the generation stages condition on: either a validated structured
/// context, or the raw narrative passed through untouched (the no-schema
/// ablation). render() yields the text substituted into prompts.
class EventInput {
public:
    static EventInput structured(EventContext ctx);
    static EventInput raw(std::string raw_text);

    bool is_structured() const { return context_.has_value(); }
    const EventContext& context() const;
    std::string render() const;

    static EventInput load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::optional<EventContext> context_;
    std::string raw_text_;
};

} // namespace evmob::event
