#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace evmob::prompts {

/// Replace {{name}} placeholders with the supplied values. Placeholders
/// without a value are left untouched.
std::string render(std::string_view tpl, const std::map<std::string, std::string>& slots);

/// The seven prompt templates the pipeline uses, loaded from plain-text
/// files in one directory. Filenames are fixed.
struct TemplateSet {
    std::string event_schema;       // event_schema.txt       {{raw_event}}
    std::string initial_generation; // initial_generation.txt {{long_term}} {{short_term}} {{event_context}} {{date}}
    std::string regeneration;       // regeneration.txt       + {{trajectory}} {{feedback}}
    std::string pattern_gist;       // pattern_gist.txt       {{long_term}} {{short_term}}
    std::string event_gist;         // event_gist.txt         {{event_context}}
    std::string action_gist;        // action_gist.txt        {{trajectory}} {{justification}}
    std::string conflict_audit;     // conflict_audit.txt     {{action_gist}} {{pattern_gist}} {{event_gist}}

    static TemplateSet load(const std::filesystem::path& dir);
};

} // namespace evmob::prompts
