#include "evmob/event_schema.hpp"

#include "evmob/errors.hpp"
#include "evmob/json_extract.hpp"

#include <fstream>
#include <sstream>

namespace evmob::event {

using nlohmann::json;

namespace {

constexpr const char* kAspects[] = {"event_profile", "intensity_and_scale",
                                    "infrastructure_and_service_impact",
                                    "official_directives"};
constexpr const char* kProfileKeys[] = {"type", "name", "time", "regions"};

std::string scalar_to_string(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump(); // numbers, booleans, nested values kept verbatim
}

bool parse_aspect_map(const json& doc, const char* key,
                      std::map<std::string, std::string>& out,
                      std::vector<std::string>& violations) {
    auto it = doc.find(key);
    if (it == doc.end()) {
        violations.push_back(std::string("missing aspect: ") + key);
        return false;
    }
    if (!it->is_object()) {
        violations.push_back(std::string("aspect is not an object: ") + key);
        return false;
    }
    for (const auto& [k, v] : it->items()) out[k] = scalar_to_string(v);
    return true;
}

} // namespace

ContextValidation validate_event_context(const EventContext& ctx) {
    ContextValidation result;
    for (const char* key : kProfileKeys)
        if (!ctx.event_profile.contains(key))
            result.violations.push_back(std::string("event_profile missing key: ") + key);
    return result;
}

json to_json(const EventContext& ctx) {
    json doc;
    doc["event_profile"] = ctx.event_profile;
    doc["intensity_and_scale"] = ctx.intensity_and_scale;
    doc["infrastructure_and_service_impact"] = ctx.infrastructure_and_service_impact;
    json directives = json::array();
    for (const Directive& d : ctx.official_directives)
        directives.push_back({{"directive", d.directive},
                              {"applicable_population", d.applicable_population},
                              {"geographic_scope", d.geographic_scope}});
    doc["official_directives"] = directives;
    return doc;
}

ParsedContext context_from_json(const json& doc) {
    ParsedContext result;
    if (!doc.is_object()) {
        result.violations.push_back("context is not a JSON object");
        return result;
    }
    EventContext ctx;
    parse_aspect_map(doc, kAspects[0], ctx.event_profile, result.violations);
    parse_aspect_map(doc, kAspects[1], ctx.intensity_and_scale, result.violations);
    parse_aspect_map(doc, kAspects[2], ctx.infrastructure_and_service_impact,
                     result.violations);

    auto it = doc.find(kAspects[3]);
    if (it == doc.end()) {
        result.violations.push_back("missing aspect: official_directives");
    } else if (!it->is_array()) {
        result.violations.push_back("official_directives is not an array");
    } else {
        for (const auto& entry : *it) {
            if (!entry.is_object()) {
                result.violations.push_back("directive entry is not an object");
                continue;
            }
            Directive d;
            if (entry.contains("directive")) d.directive = scalar_to_string(entry["directive"]);
            if (entry.contains("applicable_population"))
                d.applicable_population = scalar_to_string(entry["applicable_population"]);
            if (entry.contains("geographic_scope"))
                d.geographic_scope = scalar_to_string(entry["geographic_scope"]);
            if (d.directive.empty()) {
                result.violations.push_back("directive entry lacks a 'directive' field");
                continue;
            }
            ctx.official_directives.push_back(std::move(d));
        }
    }
    if (!result.violations.empty()) return result;

    auto validation = validate_event_context(ctx);
    if (!validation.ok()) {
        result.violations = std::move(validation.violations);
        return result;
    }
    result.context = std::move(ctx);
    return result;
}

EventContext construct_event_context(const std::string& raw_event_text,
                                     llm::Provider& provider,
                                     const prompts::TemplateSet& templates) {
    if (raw_event_text.empty())
        throw ContractError("raw event text must be non-empty");

    const std::string prompt =
        prompts::render(templates.event_schema, {{"raw_event", raw_event_text}});
    llm::ChatRequest request;
    request.system_prompt =
        "You are an event analyst converting narratives into structured JSON.";
    request.user_prompt = prompt;
    request.tag = "schema";

    auto first = provider.complete(request);
    auto doc = extract_first_json_object(first.text);
    std::string second_text;
    if (!doc) {
        llm::ChatRequest repair = request;
        repair.user_prompt +=
            "\n\nYour previous reply contained no parseable JSON object. "
            "Reply with exactly one JSON object and nothing else.";
        auto second = provider.complete(repair);
        second_text = second.text;
        doc = extract_first_json_object(second.text);
        if (!doc)
            throw StructuredOutputError("event schema construction failed: no JSON object "
                                        "in either response",
                                        first.text, second_text);
    }

    ParsedContext parsed = context_from_json(*doc);
    if (!parsed.context) {
        std::ostringstream msg;
        msg << "event context validation failed:";
        for (const std::string& v : parsed.violations) msg << " [" << v << "]";
        throw StructuredOutputError(msg.str(), first.text, second_text);
    }
    return std::move(*parsed.context);
}

EventInput EventInput::structured(EventContext ctx) {
    EventInput input;
    input.context_ = std::move(ctx);
    return input;
}

EventInput EventInput::raw(std::string raw_text) {
    EventInput input;
    input.raw_text_ = std::move(raw_text);
    return input;
}

const EventContext& EventInput::context() const {
    if (!context_) throw ContractError("event input carries no structured context");
    return *context_;
}

std::string EventInput::render() const {
    if (context_) return to_json(*context_).dump(2);
    return raw_text_;
}

EventInput EventInput::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read event context file: " + path.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded())
        throw IoError("event context file is not valid JSON: " + path.string());
    if (doc.is_object() && doc.contains("raw_text") && doc["raw_text"].is_string())
        return raw(doc["raw_text"].get<std::string>());
    ParsedContext parsed = context_from_json(doc);
    if (!parsed.context) {
        std::ostringstream msg;
        msg << "invalid event context file " << path.string() << ":";
        for (const std::string& v : parsed.violations) msg << " [" << v << "]";
        throw IoError(msg.str());
    }
    return structured(std::move(*parsed.context));
}

void EventInput::save(const std::filesystem::path& path) const {
    json doc = context_ ? to_json(*context_) : json{{"raw_text", raw_text_}};
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write event context file: " + tmp.string());
        out << doc.dump(2) << "\n";
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace evmob::event
